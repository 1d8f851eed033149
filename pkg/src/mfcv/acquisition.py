"""Cost-aware two-step lookahead acquisition on the log CV-error field.

An inner GP models ``l(x, s) = log E[e_cv](x, s)``. For a candidate batch
``(X, S)`` the acquisition draws fantasy observations of ``l`` at the batch
from the inner posterior, conditions the inner GP on them, and averages the
maximum of the conditioned posterior mean of ``l(., 1)``:

    alpha(X, S) = E_l [ max_x' mu_l(x', 1 | D + {(X, S), l}) ].

Conditioning on a fantasy is a rank-``q`` update of the existing factor,
so for fantasy draws ``l = m_q + L_q z`` the conditioned mean on a candidate
set ``C`` is affine in ``z``:

    mu'(C) = mu(C) + (L_q^{-1} Sigma_{q,C})^T z.

The inner maximum is taken over a fixed candidate set (a Sobol grid at
``s = 1`` refined by local search, plus the training inputs) augmented with
the batch inputs themselves at ``s = 1``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular
from scipy.optimize import minimize
from scipy.stats import norm

from .cost import CostParams, normalized_cost
from .gp import Dataset, HyperBounds, PosteriorGP, train_posterior
from .kernels import matern52
from .sampling import snap_to_levels, sobol_unit, stream_seed

logger = logging.getLogger(__name__)


class AcquisitionError(RuntimeError):
    """No finite acquisition score could be found."""


@dataclass(frozen=True)
class AcquisitionConfig:
    """Settings of the lookahead acquisition and its optimizer.

    ``fidelity_space`` is ``None`` for continuous fidelity on ``[0, 1]`` or a
    tuple of allowed levels (which must contain 1.0). ``utility`` selects
    what is divided by the batch cost: ``"gain"`` uses the lookahead
    increase of the expected maximum over the current one, ``"total"`` the
    expected maximum itself.
    """

    fantasy_samples: int = 64
    inner_opt_restarts: int = 10
    candidate_grid_size: int = 256
    batch_size: int = 1
    fidelity_space: tuple | None = None
    utility: str = "gain"

    def __post_init__(self):
        if self.fantasy_samples < 1:
            raise ValueError("fantasy_samples must be >= 1")
        if self.inner_opt_restarts < 1:
            raise ValueError("inner_opt_restarts must be >= 1")
        if self.candidate_grid_size < 1:
            raise ValueError("candidate_grid_size must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.utility not in ("gain", "total"):
            raise ValueError(f"utility must be 'gain' or 'total', got {self.utility!r}")
        if self.fidelity_space is not None:
            levels = tuple(sorted(float(v) for v in self.fidelity_space))
            if not levels or levels[0] < 0.0 or levels[-1] > 1.0 or 1.0 not in levels:
                raise ValueError(
                    f"fidelity levels must lie in [0, 1] and contain 1.0, got {levels}"
                )
            object.__setattr__(self, "fidelity_space", levels)


@dataclass(frozen=True)
class Candidate:
    """One selected input-fidelity pair.

    ``acquisition_value`` is the expected post-fantasy maximum and
    ``utility`` the quantity that was divided by cost (see
    ``AcquisitionConfig.utility``). For batches both refer to the whole
    batch and ``score = utility / total batch cost``, while ``cost`` is this
    member's own normalized cost.
    """

    x: np.ndarray
    s: float
    acquisition_value: float
    cost: float
    score: float
    utility: float = np.nan


def fit_inner_gp(
    X, S, log_ecv, lower, upper,
    bounds: HyperBounds | None = None,
    restarts: int = 10,
    seed: int = 0,
) -> PosteriorGP:
    """Train a GP with the outer kernel family on ``{(x_i, s_i), log E[e_cv,i]}``."""
    data = Dataset(X, S, log_ecv, lower, upper)
    if data.n < 2:
        raise ValueError("the inner GP needs at least two observations")
    return train_posterior(data, bounds, restarts, seed)


def _prior(gp: PosteriorGP, Z1, S1, Z2, S2):
    """Prior covariance with broadcasting over leading batch dimensions.

    ``Z1`` is ``(..., a, d)`` in normalized coordinates, ``S1`` ``(..., a)``;
    likewise ``Z2``/``S2`` with ``b`` points. Returns ``(..., a, b)``.
    """
    px, ps = gp.hyper.input_kernel, gp.hyper.fidelity_kernel
    diff = (Z1[..., :, None, :] - Z2[..., None, :, :]) / px.lengthscales
    rx = np.sqrt(np.sum(diff**2, axis=-1))
    rs = np.abs(S1[..., :, None] - S2[..., None, :]) / ps.lengthscale
    return px.signal_variance * matern52(rx) * matern52(rs)


def fantasy_normals(q: int, count: int, seed: int) -> np.ndarray:
    """``count`` quasi-random standard-normal vectors of length ``q``."""
    u = sobol_unit(q, count, seed)
    return norm.ppf(np.clip(u, 1e-12, 1.0 - 1e-12))


class MFCVAcquisition:
    """Lookahead acquisition bound to a fitted inner GP.

    Parameters
    ----------
    inner : PosteriorGP
        GP on the log expected CV error.
    config : AcquisitionConfig
        Fantasy count ``K``, grid size ``G`` and refinement restarts ``R``.
    seed : int
        Seeds the candidate grid and the fantasy draws.
    """

    def __init__(self, inner: PosteriorGP, config: AcquisitionConfig = AcquisitionConfig(), seed: int = 0):
        self.inner = inner
        self.config = config
        self.seed = seed
        self.dim = inner.dataset.dim
        self._normals = {}
        self._build_candidates()

    # -- inner-max candidate set -------------------------------------------

    def posterior_mean_target(self, X):
        """Inner posterior mean of ``l(x, 1)`` (working units) at raw inputs."""
        X = np.asarray(X, dtype=float).reshape(-1, self.dim)
        return self.inner.cross_covariance(X, np.ones(len(X))) @ self.inner.alpha

    def _build_candidates(self):
        gp, cfg = self.inner, self.config
        data = gp.dataset
        u = sobol_unit(self.dim, cfg.candidate_grid_size, stream_seed(self.seed, 0))
        grid = data.lower + u * (data.upper - data.lower)
        mu = self.posterior_mean_target(grid)
        order = np.argsort(-mu, kind="stable")[: cfg.inner_opt_restarts]
        box = list(zip(data.lower, data.upper))
        refined = []
        for i in order:
            res = minimize(
                lambda x: -self.posterior_mean_target(x)[0],
                grid[i], method="L-BFGS-B", bounds=box, options={"maxiter": 50},
            )
            refined.append(np.clip(res.x, data.lower, data.upper))
        Xc = np.vstack([grid, np.asarray(refined).reshape(-1, self.dim), data.X])
        self.candidates = Xc
        self._Zc = data.normalize(Xc)
        Kc = gp.cross_covariance(Xc, np.ones(len(Xc)))
        self._mu_c = Kc @ gp.alpha
        self._Vc = solve_triangular(gp.chol, Kc.T, lower=True, check_finite=False)

    def current_max(self) -> float:
        """Max of the current posterior mean of ``l(., 1)`` over the candidate set."""
        return float(self.inner.y_shift + self.inner.y_scale * np.max(self._mu_c))

    def normals(self, q: int) -> np.ndarray:
        if q not in self._normals:
            self._normals[q] = fantasy_normals(
                q, self.config.fantasy_samples, stream_seed(self.seed, 1, q)
            )
        return self._normals[q]

    # -- evaluation --------------------------------------------------------

    def fantasy_maxima(self, X, S, normals=None):
        """Per-fantasy maxima of the conditioned mean, in working units.

        ``X`` has shape ``(M, q, d)`` and ``S`` ``(M, q)``. Returns
        ``(maxima, baseline)`` with ``maxima`` of shape ``(M, K)`` and
        ``baseline`` ``(M,)`` the unconditioned maximum over the same set.
        """
        gp = self.inner
        X = np.asarray(X, dtype=float)
        S = np.asarray(S, dtype=float)
        M, q, d = X.shape
        z = self.normals(q) if normals is None else np.asarray(normals, dtype=float).reshape(-1, q)
        Zq = gp.dataset.normalize(X)
        ones = np.ones((M, q))

        Kq = gp.cross_covariance(X.reshape(-1, d), S.reshape(-1))  # (Mq, n)
        Vq = solve_triangular(gp.chol, Kq.T, lower=True, check_finite=False)
        Vq = Vq.reshape(-1, M, q)  # (n, M, q)
        # Same inputs at the target fidelity join the inner-max set.
        Ko = gp.cross_covariance(X.reshape(-1, d), ones.reshape(-1))
        mu_o = (Ko @ gp.alpha).reshape(M, q)
        Vo = solve_triangular(gp.chol, Ko.T, lower=True, check_finite=False).reshape(-1, M, q)

        noise = gp.hyper.noise_variance + gp.jitter
        Sqq = _prior(gp, Zq, S, Zq, S) - np.einsum("nmi,nmj->mij", Vq, Vq)
        Sqq = 0.5 * (Sqq + np.swapaxes(Sqq, 1, 2)) + noise * np.eye(q)
        Lq = _batched_cholesky(Sqq, gp.hyper.signal_variance)

        Sqc = _prior(gp, Zq, S, self._Zc[None], np.ones((1, len(self._Zc)))) - np.einsum(
            "nmi,nc->mic", Vq, self._Vc
        )
        Sqo = _prior(gp, Zq, S, Zq, ones) - np.einsum("nmi,nmj->mij", Vq, Vo)
        cov = np.concatenate([Sqc, Sqo], axis=2)  # (M, q, m + q)
        B = np.linalg.solve(Lq, cov) if q > 1 else cov / Lq
        mu_all = np.concatenate([np.broadcast_to(self._mu_c, (M, len(self._mu_c))), mu_o], axis=1)
        values = mu_all[:, None, :] + np.einsum("kq,mqc->mkc", z, B)
        maxima = np.max(values, axis=2)
        return maxima, np.max(mu_all, axis=1)

    def evaluate(self, X, S):
        """Expected post-fantasy maximum and lookahead gain, in original units.

        ``X`` is ``(M, q, d)`` and ``S`` ``(M, q)``; both outputs have shape
        ``(M,)``. Non-finite fantasies are dropped; if none remain the
        result is NaN.
        """
        maxima, base = self.fantasy_maxima(X, S)
        finite = np.isfinite(maxima)
        with np.errstate(invalid="ignore"):
            total = np.where(finite, maxima, 0.0).sum(axis=1) / finite.sum(axis=1)
        gain = total - base
        scale, shift = self.inner.y_scale, self.inner.y_shift
        return shift + scale * total, scale * gain

    def __call__(self, X, S) -> float:
        """``alpha(X, S)`` for one batch given as ``(q, d)`` inputs and ``(q,)`` fidelities."""
        X = np.asarray(X, dtype=float).reshape(1, -1, self.dim)
        S = np.asarray(S, dtype=float).reshape(1, -1)
        return float(self.evaluate(X, S)[0][0])

    def utility(self, X, S):
        total, gain = self.evaluate(X, S)
        return gain if self.config.utility == "gain" else total


def _batched_cholesky(A, scale):
    try:
        return np.linalg.cholesky(A)
    except np.linalg.LinAlgError:
        pass
    q = A.shape[-1]
    rel = 1e-8
    while rel <= 1e-4 * (1 + 1e-9):
        try:
            return np.linalg.cholesky(A + rel * scale * np.eye(q))
        except np.linalg.LinAlgError:
            rel *= 10.0
    raise AcquisitionError("fantasy covariance is not positive definite")


def mfcv_acquisition(inner: PosteriorGP, x, s, config: AcquisitionConfig = AcquisitionConfig(), seed: int = 0) -> float:
    """Monte-Carlo lookahead value of a single input-fidelity pair."""
    return qmfcv_acquisition(inner, np.reshape(x, (1, -1)), [s], config, seed)


def qmfcv_acquisition(inner: PosteriorGP, X, S, config: AcquisitionConfig = AcquisitionConfig(), seed: int = 0) -> float:
    """Lookahead value of a joint batch of ``q`` input-fidelity pairs."""
    return MFCVAcquisition(inner, config, seed)(X, S)


def select_best(X, S, utilities, costs):
    """Index of the best batch by ``utility / total normalized cost``.

    ``costs`` is ``(M, q)``. Ties go to the lowest index. Returns
    ``(index, scores)``.
    """
    scores = np.asarray(utilities, dtype=float) / np.sum(np.atleast_2d(costs), axis=1)
    scores = np.where(np.isfinite(scores), scores, -np.inf)
    if not np.any(np.isfinite(scores)):
        raise AcquisitionError("every candidate batch has a non-finite score")
    return int(np.argmax(scores)), scores


def cost_aware_argmax(
    acq: MFCVAcquisition,
    cost_params: CostParams = CostParams(),
    seed: int = 0,
    candidates=None,
) -> list[Candidate]:
    """Maximize ``utility / sum of normalized costs`` over batches.

    Raw scoring of ``G`` Sobol batches is followed by L-BFGS-B refinement of
    the best ``R``. Continuous fidelity is optimized jointly with the
    inputs; discrete levels are held fixed during refinement, and for
    ``q = 1`` every level is searched separately. If ``candidates = (X, S)``
    is given (shapes ``(M, q, d)`` and ``(M, q)``) only that finite set is
    scored.
    """
    cfg = acq.config
    q, d = cfg.batch_size, acq.dim
    data = acq.inner.dataset
    lo, hi = data.lower, data.upper
    levels = cfg.fidelity_space

    def batch_cost(S):
        return normalized_cost(np.asarray(S), cost_params).reshape(-1, q)

    def score_many(X, S):
        scores = acq.utility(X, S) / np.sum(batch_cost(S), axis=1)
        return np.where(np.isfinite(scores), scores, -np.inf)

    if candidates is not None:
        X, S = (np.asarray(a, dtype=float) for a in candidates)
        X = X.reshape(-1, q, d)
        S = S.reshape(-1, q)
        best, _ = select_best(X, S, acq.utility(X, S), batch_cost(S))
        return _package(acq, X[best], S[best], cost_params)

    starts = []  # (X, S, score, s_free)
    raw_seed = stream_seed(seed, 2)
    if levels is not None and q == 1:
        for j, lev in enumerate(levels):
            U = sobol_unit(d, cfg.candidate_grid_size, stream_seed(raw_seed, j))
            X = (lo + U * (hi - lo)).reshape(-1, 1, d)
            S = np.full((len(X), 1), lev)
            starts.append((X, S, score_many(X, S), False))
    else:
        U = sobol_unit(q * (d + 1), cfg.candidate_grid_size, raw_seed).reshape(-1, q, d + 1)
        X = lo + U[..., :d] * (hi - lo)
        S = U[..., d] if levels is None else snap_to_levels(U[..., d], levels)
        starts.append((X, S, score_many(X, S), levels is None))

    best_X, best_S, best_score = None, None, -np.inf
    for X, S, scores, s_free in starts:
        order = np.argsort(-scores, kind="stable")[: cfg.inner_opt_restarts]
        for i in order:
            if not np.isfinite(scores[i]):
                continue
            Xr, Sr, sc = _refine(acq, X[i], S[i], scores[i], s_free, batch_cost, lo, hi)
            if sc > best_score:
                best_X, best_S, best_score = Xr, Sr, sc
    if best_X is None:
        raise AcquisitionError("all acquisition restarts produced non-finite scores")
    return _package(acq, best_X, best_S, cost_params)


def _refine(acq, X0, S0, score0, s_free, batch_cost, lo, hi):
    """Local L-BFGS-B ascent of one batch in unit coordinates."""
    q, d = X0.shape
    width = hi - lo

    def unpack(u):
        if s_free:
            u = u.reshape(q, d + 1)
            return lo + u[:, :d] * width, u[:, d]
        return lo + u.reshape(q, d) * width, S0

    def neg_score(u):
        X, S = unpack(np.clip(u, 0.0, 1.0))
        val = acq.utility(X[None], S[None])[0] / np.sum(batch_cost(S))
        return -val if np.isfinite(val) else 1e10

    u0 = (X0 - lo) / width
    if s_free:
        u0 = np.column_stack([u0, S0])
    u0 = u0.ravel()
    res = minimize(
        neg_score, u0, method="L-BFGS-B", bounds=[(0.0, 1.0)] * u0.size,
        options={"maxiter": 50},
    )
    if np.isfinite(res.fun) and -res.fun > score0:
        X, S = unpack(np.clip(res.x, 0.0, 1.0))
        return X, np.asarray(S, dtype=float), -res.fun
    return X0, np.asarray(S0, dtype=float), score0


def _package(acq, X, S, cost_params):
    X = np.asarray(X, dtype=float)
    S = np.asarray(S, dtype=float)
    total, gain = acq.evaluate(X[None], S[None])
    util = float(gain[0] if acq.config.utility == "gain" else total[0])
    costs = np.atleast_1d(normalized_cost(S, cost_params))
    score = util / float(np.sum(costs))
    if not np.isfinite(score):
        raise AcquisitionError("selected batch has a non-finite score")
    return [
        Candidate(X[i].copy(), float(S[i]), float(total[0]), float(costs[i]), score, util)
        for i in range(len(S))
    ]
