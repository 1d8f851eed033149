"""Fidelity-dependent query cost ``c(s) = c0 * (c2 + exp(-c1 * (1 - s)))``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class CostParams:
    c0: float = 500.0
    c1: float = 10.0
    c2: float = 0.1

    def __post_init__(self):
        for name in ("c0", "c1", "c2"):
            v = getattr(self, name)
            if not np.isfinite(v) or v <= 0:
                raise ValueError(f"cost parameter {name} must be positive, got {v}")


def _check(s):
    s = np.asarray(s, dtype=float)
    if np.any(~np.isfinite(s)) or np.any(s < 0.0) or np.any(s > 1.0):
        raise ValueError("fidelity must lie in [0, 1]")
    return s


def normalized_cost(s, p: CostParams = CostParams()):
    """``c(s) / c0``; used by the acquisition so ``c0`` does not bias it."""
    s = _check(s)
    out = p.c2 + np.exp(-p.c1 * (1.0 - s))
    return float(out) if out.ndim == 0 else out


def cost(s, p: CostParams = CostParams()):
    s = _check(s)
    out = p.c0 * (p.c2 + np.exp(-p.c1 * (1.0 - s)))
    return float(out) if out.ndim == 0 else out


def cumulative_cost(trace, p: CostParams = CostParams()) -> float:
    """Total cost of a sequence of queried fidelities."""
    trace = np.asarray(list(trace), dtype=float)
    if trace.size == 0:
        return 0.0
    return float(np.sum(cost(trace, p)))
