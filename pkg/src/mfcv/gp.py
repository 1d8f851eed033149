"""Multifidelity Gaussian process regression over input-fidelity pairs.

The posterior is computed from a dense Cholesky factor of
``K_n + noise * I`` (plus a small diagonal jitter). Inputs are mapped to the
unit hypercube of the dataset's domain box before kernel evaluation, and
responses can optionally be standardized.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_solve, cholesky, solve_triangular
from scipy.optimize import minimize

from .sampling import sobol_unit
from .kernels import (
    FidelityKernelParams,
    InputKernelParams,
    joint_kernel_matrix,
    kernel_gradients,
    kernel_matrix,
)

logger = logging.getLogger(__name__)

JITTER_START = 1e-8
JITTER_MAX = 1e-4
LOG_2PI = np.log(2.0 * np.pi)


class SingularModelError(RuntimeError):
    """The covariance matrix could not be factorized even with maximal jitter."""


class TrainingError(RuntimeError):
    """Every hyperparameter restart failed."""


@dataclass(frozen=True)
class Dataset:
    """Observations ``{(x_i, s_i), y_i}`` on a box-shaped input domain.

    ``lower`` and ``upper`` default to the unit box.
    """

    X: np.ndarray
    S: np.ndarray
    y: np.ndarray
    lower: np.ndarray = None
    upper: np.ndarray = None

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        S = np.atleast_1d(np.asarray(self.S, dtype=float))
        y = np.atleast_1d(np.asarray(self.y, dtype=float))
        n, d = X.shape
        if n < 1:
            raise ValueError("dataset needs at least one observation")
        if S.shape != (n,) or y.shape != (n,):
            raise ValueError(
                f"length mismatch: X has {n} rows, S {S.shape}, y {y.shape}"
            )
        for name, arr in (("X", X), ("S", S), ("y", y)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite entries")
        lower = np.zeros(d) if self.lower is None else np.asarray(self.lower, float)
        upper = np.ones(d) if self.upper is None else np.asarray(self.upper, float)
        if lower.shape != (d,) or upper.shape != (d,):
            raise ValueError("domain box does not match input dimension")
        if np.any(upper <= lower):
            raise ValueError("domain box has zero or negative width")
        tol = 1e-9 * (upper - lower)
        if np.any(X < lower - tol) or np.any(X > upper + tol):
            raise ValueError("inputs fall outside the domain box")
        if np.any(S < 0.0) or np.any(S > 1.0):
            raise ValueError("fidelities must lie in [0, 1]")
        for name, arr in (("X", X), ("S", S), ("y", y), ("lower", lower), ("upper", upper)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def normalize(self, X):
        """Map raw inputs onto the unit hypercube of this dataset's box."""
        X = np.asarray(X, dtype=float)
        return (X - self.lower) / (self.upper - self.lower)

    def append(self, X, S, y) -> "Dataset":
        X = np.asarray(X, dtype=float).reshape(-1, self.dim)
        return Dataset(
            np.vstack([self.X, X]),
            np.concatenate([self.S, np.atleast_1d(S)]),
            np.concatenate([self.y, np.atleast_1d(y)]),
            self.lower,
            self.upper,
        )

    def subset(self, idx) -> "Dataset":
        return Dataset(self.X[idx], self.S[idx], self.y[idx], self.lower, self.upper)

    def with_responses(self, y) -> "Dataset":
        return Dataset(self.X, self.S, y, self.lower, self.upper)


@dataclass(frozen=True)
class Hyperparameters:
    input_kernel: InputKernelParams
    fidelity_kernel: FidelityKernelParams
    noise_variance: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.noise_variance) or self.noise_variance < 0:
            raise ValueError(f"noise_variance must be >= 0, got {self.noise_variance}")

    @property
    def signal_variance(self) -> float:
        return self.input_kernel.signal_variance

    def to_vector(self) -> np.ndarray:
        """Log-space vector ``[log l_x.., log l_s, log signal, log noise]``."""
        return np.concatenate(
            [
                np.log(self.input_kernel.lengthscales),
                [
                    np.log(self.fidelity_kernel.lengthscale),
                    np.log(self.signal_variance),
                    np.log(self.noise_variance) if self.noise_variance > 0 else -np.inf,
                ],
            ]
        )

    @classmethod
    def from_vector(cls, theta) -> "Hyperparameters":
        theta = np.asarray(theta, dtype=float)
        d = theta.size - 3
        return cls(
            InputKernelParams(np.exp(theta[:d]), float(np.exp(theta[d + 1]))),
            FidelityKernelParams(float(np.exp(theta[d]))),
            float(np.exp(theta[d + 2])),
        )

    def to_dict(self) -> dict:
        return {
            "lengthscales": [float(v) for v in self.input_kernel.lengthscales],
            "fidelity_lengthscale": self.fidelity_kernel.lengthscale,
            "signal_variance": self.signal_variance,
            "noise_variance": self.noise_variance,
        }


@dataclass(frozen=True)
class HyperBounds:
    """Training bounds. Variance bounds are multiples of the response variance."""

    lengthscale: tuple = (1e-2, 1e2)
    signal_variance: tuple = (1e-3, 1e3)
    noise_variance: tuple = (1e-8, 1.0)

    def log_box(self, dim: int, y_var: float) -> np.ndarray:
        lo = [self.lengthscale[0]] * (dim + 1) + [
            self.signal_variance[0] * y_var,
            self.noise_variance[0] * y_var,
        ]
        hi = [self.lengthscale[1]] * (dim + 1) + [
            self.signal_variance[1] * y_var,
            self.noise_variance[1] * y_var,
        ]
        return np.log(np.column_stack([lo, hi]))


@dataclass(frozen=True)
class PosteriorGP:
    """Fitted GP state; immutable after ``fit``.

    ``chol`` is the lower Cholesky factor of ``K_n + (noise + jitter) I`` in
    working (possibly standardized) response units, and ``alpha`` the solve
    of that matrix against the working responses.
    """

    dataset: Dataset
    hyper: Hyperparameters
    chol: np.ndarray
    alpha: np.ndarray
    jitter: float
    y_shift: float = 0.0
    y_scale: float = 1.0
    Z: np.ndarray = field(default=None, repr=False)

    @property
    def y_work(self) -> np.ndarray:
        return (self.dataset.y - self.y_shift) / self.y_scale

    @property
    def n(self) -> int:
        return self.dataset.n

    def cross_covariance(self, X, S):
        """Prior covariance between queries ``(X, S)`` and the training sites."""
        Xq = self.dataset.normalize(np.asarray(X, dtype=float).reshape(-1, self.dataset.dim))
        return joint_kernel_matrix(
            Xq, S, self.Z, self.dataset.S,
            self.hyper.input_kernel, self.hyper.fidelity_kernel,
        )

    def predict_working(self, X, S, full_cov=False):
        """Posterior mean and (co)variance of the latent function in working units."""
        X = np.asarray(X, dtype=float).reshape(-1, self.dataset.dim)
        S = np.broadcast_to(np.asarray(S, dtype=float), (X.shape[0],))
        Kq = self.cross_covariance(X, S)
        mean = Kq @ self.alpha
        V = solve_triangular(self.chol, Kq.T, lower=True, check_finite=False)
        sv = self.hyper.signal_variance
        if full_cov:
            Xn = self.dataset.normalize(X)
            prior = joint_kernel_matrix(
                Xn, S, Xn, S, self.hyper.input_kernel, self.hyper.fidelity_kernel
            )
            cov = prior - V.T @ V
            return mean, 0.5 * (cov + cov.T)
        var = sv - np.sum(V**2, axis=0)
        return mean, np.clip(var, 0.0, sv)

    def predict(self, X, S):
        """Posterior mean and variance in the original response units."""
        mean, var = self.predict_working(X, S)
        return self.y_shift + self.y_scale * mean, self.y_scale**2 * var


def standardization(y) -> tuple[float, float]:
    """Shift and scale that map ``y`` to zero mean and unit variance."""
    y = np.asarray(y, dtype=float)
    shift = float(np.mean(y))
    scale = float(np.std(y))
    if not np.isfinite(scale) or scale <= 1e-12 * max(1.0, abs(shift)):
        scale = 1.0
    return shift, scale


def factorize(K, signal_variance):
    """Cholesky of ``K + jitter I`` with escalating jitter.

    Jitter starts at ``1e-8 * signal_variance`` and grows tenfold up to
    ``1e-4 * signal_variance``.

    Returns
    -------
    L : ndarray
        Lower-triangular factor.
    jitter : float
        The diagonal increment that was used.
    """
    rel = JITTER_START
    n = K.shape[0]
    while rel <= JITTER_MAX * (1 + 1e-9):
        jitter = rel * signal_variance
        try:
            L = cholesky(K + jitter * np.eye(n), lower=True, check_finite=True)
            return L, jitter
        except (LinAlgError, ValueError):
            rel *= 10.0
    raise SingularModelError(
        f"Cholesky failed with jitter up to {JITTER_MAX:g} x signal variance"
    )


def solve_spd(chol, b):
    """Solve ``(L L^T) v = b`` given the lower factor ``L``."""
    return cho_solve((chol, True), np.asarray(b, dtype=float), check_finite=False)


def _covariance(dataset: Dataset, hyper: Hyperparameters):
    Z = dataset.normalize(dataset.X)
    K = kernel_matrix(Z, dataset.S, hyper.input_kernel, hyper.fidelity_kernel)
    K[np.diag_indices_from(K)] += hyper.noise_variance
    return Z, K


def fit(dataset: Dataset, hyper: Hyperparameters, standardize: bool = False) -> PosteriorGP:
    """Condition the GP on ``dataset`` with fixed hyperparameters.

    With ``standardize=True`` the responses are shifted and scaled to zero
    mean and unit variance, and ``hyper`` is interpreted in those units.
    """
    if hyper.input_kernel.dim != dataset.dim:
        raise ValueError(
            f"kernel has {hyper.input_kernel.dim} lengthscales, data has {dataset.dim} inputs"
        )
    shift, scale = standardization(dataset.y) if standardize else (0.0, 1.0)
    Z, K = _covariance(dataset, hyper)
    L, jitter = factorize(K, hyper.signal_variance)
    alpha = solve_spd(L, (dataset.y - shift) / scale)
    for arr in (L, alpha, Z):
        arr.setflags(write=False)
    return PosteriorGP(dataset, hyper, L, alpha, jitter, shift, scale, Z)


def predict(gp: PosteriorGP, x, s) -> tuple[float, float]:
    """Posterior mean and variance at a single input-fidelity pair."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (gp.dataset.dim,):
        raise ValueError(f"expected an input of length {gp.dataset.dim}, got {x.shape}")
    if not 0.0 <= float(s) <= 1.0:
        raise ValueError("fidelity must lie in [0, 1]")
    mean, var = gp.predict(x[None], [float(s)])
    return float(mean[0]), float(var[0])


def log_marginal_likelihood(
    dataset: Dataset, hyper: Hyperparameters, standardize: bool = False
) -> float:
    """``log p(y | X, S, hyper)``; ``-inf`` if the covariance cannot be factorized."""
    try:
        gp = fit(dataset, hyper, standardize=standardize)
    except SingularModelError:
        return -np.inf
    y = gp.y_work
    return float(
        -0.5 * y @ gp.alpha
        - np.sum(np.log(np.diag(gp.chol)))
        - 0.5 * dataset.n * LOG_2PI
    )


def lml_and_gradient(theta, dataset: Dataset, y):
    """Log marginal likelihood and its gradient w.r.t. log-hyperparameters.

    ``y`` are the working responses; ``theta`` is laid out as in
    :meth:`Hyperparameters.to_vector`. The jitter is held fixed when
    differentiating.
    """
    hyper = Hyperparameters.from_vector(theta)
    Z, K = _covariance(dataset, hyper)
    L, _ = factorize(K, hyper.signal_variance)
    alpha = solve_spd(L, y)
    n = dataset.n
    lml = -0.5 * y @ alpha - np.sum(np.log(np.diag(L))) - 0.5 * n * LOG_2PI
    W = np.outer(alpha, alpha) - solve_spd(L, np.eye(n))
    grads = kernel_gradients(Z, dataset.S, hyper.input_kernel, hyper.fidelity_kernel)
    g = [0.5 * np.sum(W * dK) for dK in grads]
    g.append(0.5 * hyper.noise_variance * np.trace(W))
    return float(lml), np.asarray(g)


def train(
    dataset: Dataset,
    bounds: HyperBounds | None = None,
    restarts: int = 10,
    seed: int = 0,
    standardize: bool = True,
    init: Hyperparameters | None = None,
) -> Hyperparameters:
    """Maximize the marginal likelihood by multi-start L-BFGS-B in log space.

    Starting points are a scrambled Sobol design over the log-bound box; if
    ``init`` is given it replaces the first start. The best restart wins,
    ties going to the lowest index.
    """
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    bounds = bounds or HyperBounds()
    shift, scale = standardization(dataset.y) if standardize else (0.0, 1.0)
    y = (dataset.y - shift) / scale
    y_var = float(np.var(y))
    if y_var <= 0:
        y_var = 1.0
    box = bounds.log_box(dataset.dim, y_var)
    starts = sobol_unit(box.shape[0], restarts, seed)
    starts = box[:, 0] + starts * (box[:, 1] - box[:, 0])
    if init is not None:
        starts[0] = np.clip(init.to_vector(), box[:, 0], box[:, 1])

    def objective(theta):
        try:
            f, g = lml_and_gradient(theta, dataset, y)
        except SingularModelError:
            return 1e25, np.zeros_like(theta)
        if not np.isfinite(f):
            return 1e25, np.zeros_like(theta)
        return -f, -g

    best_theta, best_val = None, np.inf
    for i, x0 in enumerate(starts):
        f0, _ = objective(x0)
        theta, val = x0, f0
        try:
            res = minimize(
                objective, x0, jac=True, method="L-BFGS-B", bounds=box,
                options={"maxiter": 200},
            )
            if np.isfinite(res.fun) and res.fun <= f0:
                theta, val = np.clip(res.x, box[:, 0], box[:, 1]), res.fun
        except (ValueError, FloatingPointError) as exc:
            logger.debug("restart %d failed: %s", i, exc)
        if val < 1e25 and val < best_val:
            best_theta, best_val = theta, val
    if best_theta is None:
        raise TrainingError(f"all {restarts} hyperparameter restarts failed")
    return Hyperparameters.from_vector(best_theta)


def train_posterior(
    dataset: Dataset,
    bounds: HyperBounds | None = None,
    restarts: int = 10,
    seed: int = 0,
    init: Hyperparameters | None = None,
) -> PosteriorGP:
    """Train on standardized responses and return the fitted posterior."""
    hyper = train(dataset, bounds, restarts, seed, standardize=True, init=init)
    return fit(dataset, hyper, standardize=True)

