"""Deterministic random and low-discrepancy point generation.

Every stream is derived from ``(seed, repetition, stream name, ...)`` with
``numpy.random.SeedSequence`` so adding draws to one stream never perturbs
another.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc

# Stable ids; never renumber, they define the streams.
STREAMS = {
    "seed": 0,
    "test": 1,
    "outer": 2,
    "inner": 3,
    "acquisition": 4,
    "sobol": 5,
    "fallback": 6,
}

# Bound of scipy's direction-number table.
MAX_SOBOL_DIM = qmc.Sobol.MAXDIM


def stream_seed(seed: int, *keys) -> int:
    """A 32-bit integer seed for the stream identified by ``keys``.

    String keys are looked up in :data:`STREAMS`.
    """
    key = tuple(STREAMS[k] if isinstance(k, str) else int(k) for k in keys)
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=key)
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def stream_rng(seed: int, *keys) -> np.random.Generator:
    return np.random.default_rng(stream_seed(seed, *keys))


def _box(box):
    box = np.asarray(box, dtype=float)
    if box.ndim != 2 or box.shape[1] != 2:
        raise ValueError(f"box must have shape (d, 2), got {box.shape}")
    if np.any(box[:, 1] <= box[:, 0]):
        raise ValueError("box has a dimension of zero or negative width")
    return box


def uniform_points(count: int, box, rng) -> np.ndarray:
    """``count`` i.i.d. uniform points in ``box`` (shape ``(d, 2)``)."""
    if count < 0:
        raise ValueError("count must be >= 0")
    box = _box(box)
    rng = np.random.default_rng(rng)
    u = rng.random((count, box.shape[0]))
    return box[:, 0] + u * (box[:, 1] - box[:, 0])


def sobol_unit(dim: int, count: int, seed: int | None = 0, scramble: bool = True) -> np.ndarray:
    """First ``count`` points of a (scrambled) Sobol sequence in ``[0, 1]^dim``."""
    if dim > MAX_SOBOL_DIM:
        raise ValueError(f"Sobol dimension {dim} exceeds the table bound {MAX_SOBOL_DIM}")
    engine = qmc.Sobol(dim, scramble=scramble, seed=seed)
    with warnings.catch_warnings():
        # Balance properties need powers of two; prefixes are still valid.
        warnings.simplefilter("ignore", UserWarning)
        return engine.random(count)


def sobol_points(count: int, box, seed: int | None = 0, scramble: bool = True) -> np.ndarray:
    """First ``count`` points of a (scrambled) Sobol sequence mapped to ``box``."""
    if count < 0:
        raise ValueError("count must be >= 0")
    box = _box(box)
    u = sobol_unit(box.shape[0], count, seed, scramble)
    return box[:, 0] + u * (box[:, 1] - box[:, 0])


def snap_to_levels(u, levels) -> np.ndarray:
    """Map uniforms in ``[0, 1]`` to equally likely fidelity levels."""
    levels = np.asarray(levels, dtype=float)
    idx = np.minimum((np.asarray(u) * levels.size).astype(int), levels.size - 1)
    return levels[idx]


def random_fidelity(fidelity_space, rng, size=None):
    """Uniform draw(s) from ``[0, 1]`` (``fidelity_space=None``) or a finite set."""
    rng = np.random.default_rng(rng)
    if fidelity_space is None:
        return rng.random() if size is None else rng.random(size)
    levels = np.asarray(fidelity_space, dtype=float)
    out = levels[rng.integers(levels.size, size=size)]
    return float(out) if size is None else out


@dataclass(frozen=True)
class SeedPlan:
    """Seed and test designs for one repetition.

    Seeds are uniform over ``X x S``; test points sit at ``s = 1``.
    """

    seed: int
    box: np.ndarray
    fidelity_space: tuple | None = None
    n_seed: int | None = None
    n_test: int | None = None
    repetition: int = 0

    def __post_init__(self):
        box = _box(self.box)
        object.__setattr__(self, "box", box)
        d = box.shape[0]
        if self.n_seed is None:
            object.__setattr__(self, "n_seed", 10 * d)
        if self.n_test is None:
            object.__setattr__(self, "n_test", 30 * d)
        if self.n_seed < 2:
            raise ValueError("n_seed must be >= 2")
        if self.n_test < 1:
            raise ValueError("n_test must be >= 1")

    def seed_design(self):
        """Seed inputs ``(n_seed, d)`` and fidelities ``(n_seed,)``."""
        rng = stream_rng(self.seed, self.repetition, "seed")
        X = uniform_points(self.n_seed, self.box, rng)
        S = random_fidelity(self.fidelity_space, rng, size=self.n_seed)
        return X, np.asarray(S, dtype=float)

    def test_points(self) -> np.ndarray:
        rng = stream_rng(self.seed, self.repetition, "test")
        return uniform_points(self.n_test, self.box, rng)
