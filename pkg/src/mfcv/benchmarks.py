"""Synthetic multifidelity test functions.

Each function takes inputs ``x`` of shape ``(d,)`` or ``(n, d)`` and a
fidelity ``s`` (scalar or length-``n``) and satisfies ``f(x, 1) = f(x)``, the
target function.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

SQRT2 = np.sqrt(2.0)

HARTMANN_A = np.array(
    [
        [10.0, 3.0, 17.0, 3.5, 1.7, 8.0],
        [0.05, 10.0, 17.0, 0.1, 8.0, 14.0],
        [3.0, 3.5, 1.7, 10.0, 17.0, 8.0],
        [17.0, 8.0, 0.05, 10.0, 0.1, 14.0],
    ]
)
# Division by 10^4 rounds each entry once, matching its decimal literal.
HARTMANN_P = np.array(
    [
        [1312, 1696, 5569, 124, 8283, 5886],
        [2329, 4135, 8307, 3736, 1004, 9991],
        [2348, 1451, 3522, 2883, 3047, 6650],
        [4047, 8828, 8732, 5743, 1091, 381],
    ],
    dtype=float,
) / 1e4
HARTMANN_BETA = np.array([1.0, 1.2, 3.0, 3.2])


def _inputs(x, d):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[1] != d:
        raise ValueError(f"expected inputs with {d} columns, got shape {x.shape}")
    return x, single


def _fidelity(s, n):
    s = np.broadcast_to(np.asarray(s, dtype=float), (n,))
    if np.any(~np.isfinite(s)) or np.any(s < 0.0) or np.any(s > 1.0):
        raise ValueError("fidelity must lie in [0, 1]")
    return s


def _check_box(x, lower, upper, name):
    tol = 1e-12 * (1.0 + np.abs(upper - lower))
    if np.any(x < lower - tol) or np.any(x > upper + tol):
        raise ValueError(f"{name}: input outside the domain {list(zip(lower, upper))}")


def _out(v, single):
    return float(v[0]) if single else v


MULTIMODAL_BOX = (np.array([-4.0, -3.0]), np.array([7.0, 8.0]))
FOUR_BRANCHES_BOX = (np.array([-8.0, -8.0]), np.array([8.0, 8.0]))
ISHIGAMI_BOX = (np.full(3, -np.pi), np.full(3, np.pi))
HARTMANN_BOX = (np.zeros(6), np.ones(6))


def multimodal(x, s):
    """``(x1^2 + 4)(x2 - 1)/20 - s sin(5 x1 / 2) - 2`` on ``[-4, 7] x [-3, 8]``."""
    x, single = _inputs(x, 2)
    _check_box(x, *MULTIMODAL_BOX, "multimodal")
    s = _fidelity(s, x.shape[0])
    x1, x2 = x[:, 0], x[:, 1]
    v = (x1**2 + 4.0) * (x2 - 1.0) / 20.0 - s * np.sin(2.5 * x1) - 2.0
    return _out(v, single)


def four_branches(x, s):
    """Four-branch limit state with level sets translated by ``5 s``."""
    x, single = _inputs(x, 2)
    _check_box(x, *FOUR_BRANCHES_BOX, "four_branches")
    s = _fidelity(s, x.shape[0])
    a = x[:, 0] - 5.0 * s
    b = x[:, 1] - 5.0 * s
    branches = np.stack(
        [
            3.0 + 0.1 * (a - b) ** 2 - (a + b) / SQRT2,
            3.0 + 0.1 * (a - b) ** 2 + (a + b) / SQRT2,
            a - b + 7.0 / SQRT2,
            b - a + 7.0 / SQRT2,
        ]
    )
    return _out(np.min(branches, axis=0), single)


def ishigami(x, s):
    """Ishigami function with every angle shifted by ``-s`` (radians)."""
    x, single = _inputs(x, 3)
    _check_box(x, *ISHIGAMI_BOX, "ishigami")
    s = _fidelity(s, x.shape[0])
    u = np.sin(x[:, 0] - s)
    v = u + 7.0 * np.sin(x[:, 1] - s) ** 2 + 0.1 * x[:, 2] ** 4 * u
    return _out(v, single)


def hartmann6(x, s):
    """Augmented Hartmann-6: the first well's weight drops by ``0.1 (1 - s)``."""
    x, single = _inputs(x, 6)
    _check_box(x, *HARTMANN_BOX, "hartmann6")
    s = _fidelity(s, x.shape[0])
    # Left-to-right accumulation, so s = 1 reproduces the written formula bitwise.
    total = np.zeros(x.shape[0])
    for i in range(4):
        exponent = np.zeros(x.shape[0])
        for j in range(6):
            exponent = exponent + HARTMANN_A[i, j] * (x[:, j] - HARTMANN_P[i, j]) ** 2
        weight = HARTMANN_BETA[i] - 0.1 * (1.0 - s) if i == 0 else HARTMANN_BETA[i]
        total = total + weight * np.exp(-exponent)
    return _out(-total, single)


@dataclass(frozen=True)
class BenchmarkFunction:
    """A named multifidelity function on a box, with its fidelity space.

    ``levels`` is ``None`` for the continuous space ``[0, 1]``.
    """

    name: str
    dim: int
    lower: np.ndarray
    upper: np.ndarray
    func: Callable
    levels: tuple | None = None

    def evaluate(self, x, s):
        s_arr = np.asarray(s, dtype=float)
        if self.levels is not None and not np.all(np.isin(s_arr, self.levels)):
            raise ValueError(f"{self.name}: fidelity {s} not in levels {self.levels}")
        return self.func(x, s)

    def __call__(self, x, s):
        return self.evaluate(x, s)

    @property
    def box(self) -> np.ndarray:
        return np.column_stack([self.lower, self.upper])

    @property
    def discrete(self) -> bool:
        return self.levels is not None


BENCHMARKS = {
    "multimodal": BenchmarkFunction("multimodal", 2, *MULTIMODAL_BOX, multimodal),
    "four_branches": BenchmarkFunction("four_branches", 2, *FOUR_BRANCHES_BOX, four_branches),
    "ishigami": BenchmarkFunction("ishigami", 3, *ISHIGAMI_BOX, ishigami),
    "hartmann6": BenchmarkFunction("hartmann6", 6, *HARTMANN_BOX, hartmann6),
}


def discretize_fidelity(f: BenchmarkFunction, levels) -> BenchmarkFunction:
    """Restrict ``f`` to a finite set of fidelities, which must include 1."""
    levels = tuple(sorted({float(v) for v in levels}))
    if not levels:
        raise ValueError("levels must not be empty")
    if any(v < 0.0 or v > 1.0 for v in levels):
        raise ValueError(f"levels must lie in [0, 1], got {levels}")
    if 1.0 not in levels:
        raise ValueError(f"levels must contain the target fidelity 1.0, got {levels}")
    return replace(f, levels=levels)


def get_benchmark(name: str, levels=None) -> BenchmarkFunction:
    try:
        f = BENCHMARKS[name]
    except KeyError:
        raise ValueError(
            f"unknown benchmark {name!r}; choose from {sorted(BENCHMARKS)}"
        ) from None
    return f if levels is None else discretize_fidelity(f, levels)
