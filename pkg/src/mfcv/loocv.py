"""Closed-form leave-one-out statistics and chi-squared CV-error moments.

For a GP with covariance ``K`` (including noise) and working responses
``y``, the prediction of ``y_i`` from all other observations is

    mu_{-i}     = y_i - [K^{-1} y]_i / [K^{-1}]_{ii}
    sigma2_{-i} = 1 / [K^{-1}]_{ii}

The squared LOO residual is treated as noncentral chi-squared with one
degree of freedom and noncentrality ``(mu_{-i} - y_i)^2``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import solve_triangular

from .gp import PosteriorGP


@dataclass(frozen=True)
class CVRecord:
    index: int
    loo_mean: float
    loo_variance: float
    ecv_mean: float = np.nan
    ecv_variance: float = np.nan
    log_ecv: float = np.nan


def inverse_diagonal(chol) -> np.ndarray:
    """``diag(K^{-1})`` from the lower factor via unit-vector triangular solves."""
    n = chol.shape[0]
    Linv = solve_triangular(chol, np.eye(n), lower=True, check_finite=False)
    return np.sum(Linv**2, axis=0)


def loo_statistics(gp: PosteriorGP) -> list[CVRecord]:
    """LOO predictive mean and variance of every observation, in working units.

    Reuses the stored factor; nothing is refactorized.
    """
    if gp.n < 2:
        raise ValueError("leave-one-out needs at least two observations")
    kinv_diag = inverse_diagonal(gp.chol)
    y = gp.y_work
    mu = y - gp.alpha / kinv_diag
    var = 1.0 / kinv_diag
    return [CVRecord(i, float(mu[i]), float(var[i])) for i in range(gp.n)]


def cv_error_moments(records: list[CVRecord], y) -> list[CVRecord]:
    """Attach mean, variance and log-mean of the chi-squared CV error.

    ``y`` must be in the same units as ``loo_mean`` (the GP's working units).
    """
    y = np.asarray(y, dtype=float)
    out = []
    for rec in records:
        r2 = (rec.loo_mean - y[rec.index]) ** 2
        mean = 1.0 + r2
        out.append(
            replace(
                rec,
                ecv_mean=mean,
                # Equals 2 (1 + 2 r^2); written via the mean so the moment
                # identity V - 2 = 4 (E - 1) holds without rounding.
                ecv_variance=2.0 * (2.0 * mean - 1.0),
                log_ecv=float(np.log(mean)),
            )
        )
    return out


def log_cv_observations(records: list[CVRecord], dataset) -> tuple:
    """Sites and log expected CV errors as ``(X, S, log_ecv)`` arrays."""
    idx = np.array([r.index for r in records], dtype=int)
    log_ecv = np.array([r.log_ecv for r in records])
    if np.any(~np.isfinite(log_ecv)):
        raise ValueError("records lack CV-error moments; call cv_error_moments first")
    return dataset.X[idx], dataset.S[idx], log_ecv


def cv_field(gp: PosteriorGP) -> list[CVRecord]:
    """LOO statistics and CV-error moments for every observation of ``gp``."""
    return cv_error_moments(loo_statistics(gp), gp.y_work)
