"""Matern-5/2 covariance functions over inputs and fidelity.

The joint covariance over input-fidelity pairs is the product

    k((x, s), (x', s')) = k_x(x, x') * k_s(s, s')

where ``k_x`` is an anisotropic Matern-5/2 kernel carrying the signal
variance and ``k_s`` is a unit-variance Matern-5/2 kernel on the scalar
fidelity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SQRT5 = np.sqrt(5.0)


@dataclass(frozen=True)
class InputKernelParams:
    """Anisotropic Matern-5/2 parameters for the input kernel."""

    lengthscales: np.ndarray
    signal_variance: float = 1.0

    def __post_init__(self):
        ls = np.atleast_1d(np.asarray(self.lengthscales, dtype=float))
        if ls.ndim != 1 or ls.size == 0:
            raise ValueError("lengthscales must be a non-empty 1-D array")
        if not np.all(np.isfinite(ls)) or np.any(ls <= 0):
            raise ValueError(f"lengthscales must be positive and finite, got {ls}")
        if not np.isfinite(self.signal_variance) or self.signal_variance <= 0:
            raise ValueError(
                f"signal_variance must be positive, got {self.signal_variance}"
            )
        object.__setattr__(self, "lengthscales", ls)
        object.__setattr__(self, "signal_variance", float(self.signal_variance))

    @property
    def dim(self) -> int:
        return self.lengthscales.size


@dataclass(frozen=True)
class FidelityKernelParams:
    """Lengthscale of the unit-variance fidelity kernel."""

    lengthscale: float = 1.0

    def __post_init__(self):
        if not np.isfinite(self.lengthscale) or self.lengthscale <= 0:
            raise ValueError(f"lengthscale must be positive, got {self.lengthscale}")
        object.__setattr__(self, "lengthscale", float(self.lengthscale))


def matern52(r):
    """Unit-variance Matern-5/2 correlation as a function of scaled distance."""
    r = np.asarray(r, dtype=float)
    return (1.0 + SQRT5 * r + 5.0 / 3.0 * r**2) * np.exp(-SQRT5 * r)


def _as_points(X, dim=None, name="X"):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :] if dim is None or X.size == dim else X[:, None]
    if X.ndim != 2:
        raise ValueError(f"{name} must be 1-D or 2-D, got shape {X.shape}")
    if dim is not None and X.shape[1] != dim:
        raise ValueError(f"{name} has {X.shape[1]} columns, expected {dim}")
    if not np.all(np.isfinite(X)):
        raise ValueError(f"{name} contains non-finite entries")
    return X


def _check_fidelity(s, name="s"):
    s = np.atleast_1d(np.asarray(s, dtype=float))
    if not np.all(np.isfinite(s)):
        raise ValueError(f"{name} contains non-finite entries")
    if np.any(s < 0.0) or np.any(s > 1.0):
        raise ValueError(f"fidelity {name} must lie in [0, 1]")
    return s


def input_kernel_matrix(X1, X2, p: InputKernelParams):
    """Cross-covariance ``k_x(X1, X2)`` of shape ``(n1, n2)``."""
    X1 = _as_points(X1, p.dim, "X1")
    X2 = _as_points(X2, p.dim, "X2")
    # Per-dimension differences keep the diagonal exact (no cancellation).
    diff = (X1[:, None, :] - X2[None, :, :]) / p.lengthscales
    r = np.sqrt(np.sum(diff**2, axis=-1))
    return p.signal_variance * matern52(r)


def fidelity_kernel_matrix(S1, S2, p: FidelityKernelParams):
    """Cross-covariance ``k_s(S1, S2)`` of shape ``(n1, n2)``."""
    S1 = _check_fidelity(S1, "S1")
    S2 = _check_fidelity(S2, "S2")
    r = np.abs(S1[:, None] - S2[None, :]) / p.lengthscale
    return matern52(r)


def matern_input_kernel(x, x2, p: InputKernelParams) -> float:
    """Anisotropic Matern-5/2 kernel value between two input vectors."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    x2 = np.atleast_1d(np.asarray(x2, dtype=float))
    if x.shape != (p.dim,) or x2.shape != (p.dim,):
        raise ValueError(
            f"dimension mismatch: x {x.shape}, x2 {x2.shape}, "
            f"lengthscales ({p.dim},)"
        )
    return float(input_kernel_matrix(x[None], x2[None], p)[0, 0])


def fidelity_kernel(s: float, s2: float, p: FidelityKernelParams) -> float:
    return float(fidelity_kernel_matrix([s], [s2], p)[0, 0])


def joint_kernel(x, s, x2, s2, px: InputKernelParams, ps: FidelityKernelParams) -> float:
    """Product kernel ``k_x(x, x2) * k_s(s, s2)``."""
    return matern_input_kernel(x, x2, px) * fidelity_kernel(s, s2, ps)


def joint_kernel_matrix(X1, S1, X2, S2, px: InputKernelParams, ps: FidelityKernelParams):
    """Cross-covariance between two sets of input-fidelity pairs."""
    return input_kernel_matrix(X1, X2, px) * fidelity_kernel_matrix(S1, S2, ps)


def kernel_matrix(X, S, px: InputKernelParams, ps: FidelityKernelParams):
    """Symmetric covariance matrix of ``n`` input-fidelity pairs.

    The upper triangle is mirrored onto the lower one so the result equals
    its transpose bit for bit.
    """
    X = _as_points(X, px.dim)
    S = _check_fidelity(S)
    if X.shape[0] != S.size:
        raise ValueError(f"X has {X.shape[0]} rows but S has {S.size} entries")
    K = joint_kernel_matrix(X, S, X, S, px, ps)
    K = np.triu(K) + np.triu(K, 1).T
    np.fill_diagonal(K, px.signal_variance)
    return K


def kernel_gradients(X, S, px: InputKernelParams, ps: FidelityKernelParams):
    """Derivatives of ``kernel_matrix`` w.r.t. log-hyperparameters.

    Returns a list of ``n x n`` matrices ordered as
    ``[log lengthscale_1 .. log lengthscale_d, log fidelity lengthscale,
    log signal variance]``.
    """
    X = _as_points(X, px.dim)
    S = _check_fidelity(S)
    diff = (X[:, None, :] - X[None, :, :]) / px.lengthscales
    sq = diff**2
    rx = np.sqrt(np.sum(sq, axis=-1))
    kx_unit = matern52(rx)
    rs = np.abs(S[:, None] - S[None, :]) / ps.lengthscale
    ks = matern52(rs)
    # d/dr of the Matern-5/2 profile is -(5/3) r (1 + sqrt5 r) exp(-sqrt5 r);
    # with dr/dlog(l) = -(delta/l)^2 / r the r cancels.
    gx = 5.0 / 3.0 * (1.0 + SQRT5 * rx) * np.exp(-SQRT5 * rx)
    gs = 5.0 / 3.0 * (1.0 + SQRT5 * rs) * np.exp(-SQRT5 * rs)
    sv = px.signal_variance
    grads = [sv * gx * sq[:, :, j] * ks for j in range(px.dim)]
    grads.append(sv * kx_unit * gs * rs**2)
    grads.append(sv * kx_unit * ks)
    return grads
