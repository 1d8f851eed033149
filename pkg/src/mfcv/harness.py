"""Active-learning loops (MFCV, HF, Sobol) and repetition bookkeeping."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .acquisition import AcquisitionError, MFCVAcquisition, cost_aware_argmax, fit_inner_gp
from .benchmarks import BenchmarkFunction
from .config import ExperimentConfig
from .cost import cost as query_cost
from .gp import Dataset, PosteriorGP, SingularModelError, TrainingError, fit, train
from .loocv import cv_field, log_cv_observations
from .sampling import SeedPlan, random_fidelity, snap_to_levels, sobol_points, stream_rng, stream_seed

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TraceRow:
    iteration: int
    batch_index: int
    x: np.ndarray
    s: float
    y: float
    query_cost: float
    cumulative_cost: float
    rmse: float
    fallback: bool


@dataclass
class RunRecord:
    """Per-acquisition trace of one strategy on one repetition.

    ``initial_rmse`` belongs to the seed-only GP; each row carries the RMSE
    of the GP retrained after its iteration's batch was appended.
    """

    strategy: str
    repetition: int
    dim: int
    initial_rmse: float
    rows: list = field(default_factory=list)
    seed_data: Dataset | None = None
    final_hyper: dict | None = None
    wall_times: list = field(default_factory=list)

    @property
    def fidelities(self) -> np.ndarray:
        return np.array([r.s for r in self.rows])

    @property
    def final_cost(self) -> float:
        return self.rows[-1].cumulative_cost if self.rows else 0.0

    @property
    def final_rmse(self) -> float:
        return self.rows[-1].rmse if self.rows else self.initial_rmse

    def rmse_events(self):
        """``(costs, rmse)`` at cost 0 and after every completed iteration."""
        costs, values = [0.0], [self.initial_rmse]
        for i, row in enumerate(self.rows):
            last = i + 1 == len(self.rows) or self.rows[i + 1].iteration != row.iteration
            if last:
                costs.append(row.cumulative_cost)
                values.append(row.rmse)
        return np.array(costs), np.array(values)

    def rmse_at(self, grid):
        """Previous-value interpolation of the RMSE history onto cost ``grid``."""
        costs, values = self.rmse_events()
        idx = np.searchsorted(costs, np.asarray(grid, dtype=float), side="right") - 1
        return values[np.clip(idx, 0, None)]


def rmse(gp: PosteriorGP, test_points, truth: BenchmarkFunction) -> float:
    """Root-mean-square error of the posterior mean at ``s = 1``."""
    test_points = np.atleast_2d(np.asarray(test_points, dtype=float))
    if test_points.shape[0] == 0:
        raise ValueError("empty test set")
    mean, _ = gp.predict(test_points, np.ones(len(test_points)))
    target = truth.func(test_points, 1.0)
    return float(np.sqrt(np.mean((mean - target) ** 2)))


def _train_outer(data, config, repetition, iteration, previous=None):
    seed = stream_seed(config.seed, repetition, "outer", iteration)
    try:
        hyper = train(data, restarts=config.gp_restarts, seed=seed, init=previous)
    except TrainingError:
        if previous is None:
            raise
        logger.warning("outer training failed at iteration %d; reusing hyperparameters", iteration)
        hyper = previous
    return fit(data, hyper, standardize=True)


def sobol_stream(config: ExperimentConfig, repetition: int = 0, count: int | None = None):
    """Joint ``(x, s)`` low-discrepancy stream used by the Sobol baseline.

    Returns the first ``count`` pairs (default ``iterations * batch_size``).
    Discrete fidelities come from equal-probability bins of the ``s``
    coordinate, so every level has frequency ``1 / L``.
    """
    f = config.function()
    count = config.iterations * config.batch_size if count is None else count
    box = np.vstack([f.box, [0.0, 1.0]])
    pts = sobol_points(count, box, seed=stream_seed(config.seed, repetition, "sobol"))
    X, S = pts[:, :-1], pts[:, -1]
    if f.levels is not None:
        S = snap_to_levels(S, f.levels)
    return X, S


def _mfcv_batch(gp, data, config, strategy, repetition, iteration):
    records = cv_field(gp)
    Xl, Sl, log_ecv = log_cv_observations(records, data)
    inner = fit_inner_gp(
        Xl, Sl, log_ecv, data.lower, data.upper,
        restarts=config.gp_restarts,
        seed=stream_seed(config.seed, repetition, "inner", iteration),
    )
    acq_seed = stream_seed(config.seed, repetition, "acquisition", iteration)
    acq = MFCVAcquisition(inner, config.acquisition_config(strategy), seed=acq_seed)
    batch = cost_aware_argmax(acq, config.cost, seed=acq_seed)
    return np.array([c.x for c in batch]), np.array([c.s for c in batch])


def _fallback_batch(f, config, strategy, repetition, iteration):
    rng = stream_rng(config.seed, repetition, "fallback", iteration)
    q = config.batch_size
    X = f.lower + rng.random((q, f.dim)) * (f.upper - f.lower)
    if strategy == "hf":
        return X, np.ones(q)
    return X, np.atleast_1d(random_fidelity(f.levels, rng, size=q)).astype(float)


def run_strategy(config: ExperimentConfig, strategy: str, repetition: int = 0) -> RunRecord:
    """Run one active-learning loop.

    Seeds and test points depend only on ``(config.seed, repetition)``, so
    every strategy of a repetition starts from the same seed data.
    """
    if strategy not in ("mfcv", "hf", "sobol"):
        raise ValueError(f"unknown strategy {strategy!r}")
    f = config.function()
    plan = SeedPlan(config.seed, f.box, f.levels, config.n_seed, config.n_test, repetition)
    X0, S0 = plan.seed_design()
    data = Dataset(X0, S0, f(X0, S0), f.lower, f.upper)
    test = plan.test_points()

    gp = _train_outer(data, config, repetition, 0)
    record = RunRecord(strategy, repetition, f.dim, rmse(gp, test, f), seed_data=data)
    sobol_X, sobol_S = sobol_stream(config, repetition) if strategy == "sobol" else (None, None)
    q = config.batch_size
    total = 0.0
    for t in range(1, config.iterations + 1):
        tic = time.perf_counter()
        fallback = False
        if strategy == "sobol":
            Xb, Sb = sobol_X[(t - 1) * q: t * q], sobol_S[(t - 1) * q: t * q]
        else:
            try:
                Xb, Sb = _mfcv_batch(gp, data, config, strategy, repetition, t)
            except (AcquisitionError, SingularModelError, TrainingError) as exc:
                logger.warning("acquisition failed at iteration %d (%s); using a random batch", t, exc)
                Xb, Sb = _fallback_batch(f, config, strategy, repetition, t)
                fallback = True
        yb = np.atleast_1d(f(Xb, Sb))
        data = data.append(Xb, Sb, yb)
        gp = _train_outer(data, config, repetition, t, previous=gp.hyper)
        err = rmse(gp, test, f)
        for j in range(len(Sb)):
            c = query_cost(float(Sb[j]), config.cost)
            total += c
            record.rows.append(
                TraceRow(t, j, np.array(Xb[j]), float(Sb[j]), float(yb[j]), c, total, err, fallback)
            )
        record.wall_times.append(time.perf_counter() - tic)
        if config.cost_cap is not None and total >= config.cost_cap:
            break
    record.final_hyper = gp.hyper.to_dict()
    return record


def run_mfcv(config: ExperimentConfig, repetition: int = 0) -> RunRecord:
    return run_strategy(config, "mfcv", repetition)


def run_hf(config: ExperimentConfig, repetition: int = 0) -> RunRecord:
    """MFCV loop restricted to ``s = 1`` acquisitions (seeds still span ``X x S``)."""
    return run_strategy(config, "hf", repetition)


def run_sobol(config: ExperimentConfig, repetition: int = 0) -> RunRecord:
    return run_strategy(config, "sobol", repetition)


@dataclass
class SuiteResult:
    """All runs of a suite, keyed by strategy, plus aggregate statistics."""

    config: ExperimentConfig
    runs: dict
    failures: dict
    cost_grid: np.ndarray = None
    summary: dict = None
    histograms: dict = None


def aggregate(runs: dict, n_grid: int = 101):
    """Mean and standard deviation of RMSE on a shared cumulative-cost grid.

    The grid spans ``[0, largest final cost]``; for each strategy only grid
    points reached by all of its repetitions are reported.
    """
    finals = [r.final_cost for recs in runs.values() for r in recs]
    grid = np.linspace(0.0, max(finals) if finals else 0.0, n_grid)
    summary = {}
    for strategy, recs in runs.items():
        if not recs:
            continue
        reach = min(r.final_cost for r in recs)
        g = grid[grid <= reach * (1 + 1e-12)]
        curves = np.array([r.rmse_at(g) for r in recs])
        summary[strategy] = {
            "cost": g,
            "mean": curves.mean(axis=0),
            "std": curves.std(axis=0),
            "n": len(recs),
        }
    return grid, summary


def fidelity_histogram(records, levels=None, bins: int = 10):
    """Counts of selected fidelities: per level if discrete, else ``bins`` bins."""
    s = np.concatenate([r.fidelities for r in records]) if records else np.array([])
    if levels is not None:
        levels = np.asarray(levels, dtype=float)
        counts = np.array([np.sum(np.isclose(s, v)) for v in levels])
        return levels, levels, counts
    edges = np.arange(bins + 1) / bins
    counts, _ = np.histogram(s, bins=edges)
    return edges[:-1], edges[1:], counts


def run_suite(config: ExperimentConfig, repetitions: int | None = None) -> SuiteResult:
    """Run every configured strategy for each repetition and aggregate.

    A failing repetition is recorded in ``failures`` and left out of the
    aggregates.
    """
    reps = config.repetitions if repetitions is None else repetitions
    if reps < 1:
        raise ValueError("repetitions must be >= 1")
    runs = {s: [] for s in config.strategy}
    failures = {s: [] for s in config.strategy}
    for rep in range(reps):
        for strategy in config.strategy:
            try:
                runs[strategy].append(run_strategy(config, strategy, rep))
            except Exception as exc:  # noqa: BLE001 - reported, not swallowed
                logger.error("%s repetition %d failed: %s", strategy, rep, exc)
                failures[strategy].append((rep, repr(exc)))
    grid, summary = aggregate(runs)
    hist = {s: fidelity_histogram(recs, config.levels) for s, recs in runs.items()}
    return SuiteResult(config, runs, failures, grid, summary, hist)


def matched_cost_rmse(a: RunRecord, b: RunRecord):
    """RMSE of two runs at the smaller of their final cumulative costs."""
    c = min(a.final_cost, b.final_cost)
    return float(a.rmse_at([c])[0]), float(b.rmse_at([c])[0]), c


def cost_to_reach(record: RunRecord, target: float) -> float:
    """Smallest cumulative cost at which ``record`` attains RMSE <= ``target``."""
    costs, values = record.rmse_events()
    hit = np.nonzero(values <= target)[0]
    return float(costs[hit[0]]) if hit.size else np.inf
