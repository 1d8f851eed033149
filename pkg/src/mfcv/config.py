"""Experiment configuration: defaults, validation and YAML round-trip."""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import yaml

from .acquisition import AcquisitionConfig
from .benchmarks import BENCHMARKS, get_benchmark
from .cost import CostParams

STRATEGIES = ("mfcv", "hf", "sobol")


class ConfigError(ValueError):
    """Invalid experiment configuration; ``field`` names the offending key."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully resolved description of an experiment suite.

    ``strategy`` lists the strategies to run; each is repeated
    ``repetitions`` times on shared seed designs. ``n_seed`` and ``n_test``
    default to ``10 d`` and ``30 d``.
    """

    benchmark: str
    seed: int
    strategy: tuple = ("mfcv",)
    levels: tuple | None = None
    batch_size: int = 1
    iterations: int = 50
    repetitions: int = 1
    n_seed: int | None = None
    n_test: int | None = None
    cost: CostParams = field(default_factory=CostParams)
    cost_cap: float | None = None
    gp_restarts: int = 10
    fantasy_samples: int = 64
    inner_opt_restarts: int = 10
    candidate_grid_size: int = 256
    utility: str = "gain"
    out: str = "results"

    def __post_init__(self):
        if self.benchmark not in BENCHMARKS:
            raise ConfigError(
                "benchmark", f"unknown benchmark {self.benchmark!r}; choose from {sorted(BENCHMARKS)}"
            )
        if isinstance(self.seed, bool) or not isinstance(self.seed, int):
            raise ConfigError("seed", f"must be an integer, got {self.seed!r}")
        strategy = (self.strategy,) if isinstance(self.strategy, str) else tuple(self.strategy)
        if not strategy:
            raise ConfigError("strategy", "at least one strategy is required")
        for s in strategy:
            if s not in STRATEGIES:
                raise ConfigError("strategy", f"unknown strategy {s!r}; choose from {list(STRATEGIES)}")
        if len(set(strategy)) != len(strategy):
            raise ConfigError("strategy", "strategies must be distinct")
        object.__setattr__(self, "strategy", strategy)
        if self.levels is not None:
            try:
                levels = tuple(sorted({float(v) for v in self.levels}))
            except (TypeError, ValueError):
                raise ConfigError("levels", f"must be a list of numbers, got {self.levels!r}") from None
            if not levels or levels[0] < 0.0 or levels[-1] > 1.0:
                raise ConfigError("levels", f"fidelity levels must lie in [0, 1], got {levels}")
            if 1.0 not in levels:
                raise ConfigError("levels", f"fidelity set must contain 1.0, got {list(levels)}")
            object.__setattr__(self, "levels", levels)
        for name, minimum in (
            ("batch_size", 1), ("iterations", 1), ("repetitions", 1), ("gp_restarts", 1),
            ("fantasy_samples", 1), ("inner_opt_restarts", 1), ("candidate_grid_size", 1),
        ):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int) or v < minimum:
                raise ConfigError(name, f"must be an integer >= {minimum}, got {v!r}")
        d = BENCHMARKS[self.benchmark].dim
        if self.n_seed is None:
            object.__setattr__(self, "n_seed", 10 * d)
        if self.n_test is None:
            object.__setattr__(self, "n_test", 30 * d)
        if not isinstance(self.n_seed, int) or self.n_seed < 2:
            raise ConfigError("n_seed", f"must be an integer >= 2, got {self.n_seed!r}")
        if not isinstance(self.n_test, int) or self.n_test < 1:
            raise ConfigError("n_test", f"must be an integer >= 1, got {self.n_test!r}")
        if self.cost_cap is not None and not (float(self.cost_cap) > 0):
            raise ConfigError("cost_cap", f"must be positive, got {self.cost_cap!r}")
        if self.utility not in ("gain", "total"):
            raise ConfigError("utility", f"must be 'gain' or 'total', got {self.utility!r}")

    @property
    def dim(self) -> int:
        return BENCHMARKS[self.benchmark].dim

    def function(self):
        return get_benchmark(self.benchmark, self.levels)

    def acquisition_config(self, strategy: str = "mfcv") -> AcquisitionConfig:
        """Acquisition settings; the HF strategy searches only ``s = 1``."""
        space = (1.0,) if strategy == "hf" else self.levels
        return AcquisitionConfig(
            fantasy_samples=self.fantasy_samples,
            inner_opt_restarts=self.inner_opt_restarts,
            candidate_grid_size=self.candidate_grid_size,
            batch_size=self.batch_size,
            fidelity_space=space,
            utility=self.utility,
        )

    def to_dict(self) -> dict:
        return {
            "benchmark": self.benchmark,
            "levels": None if self.levels is None else list(self.levels),
            "strategy": list(self.strategy),
            "seed": self.seed,
            "batch_size": self.batch_size,
            "iterations": self.iterations,
            "repetitions": self.repetitions,
            "n_seed": self.n_seed,
            "n_test": self.n_test,
            "cost": {"c0": self.cost.c0, "c1": self.cost.c1, "c2": self.cost.c2},
            "cost_cap": self.cost_cap,
            "gp": {"restarts": self.gp_restarts},
            "acquisition": {
                "fantasy_samples": self.fantasy_samples,
                "inner_opt_restarts": self.inner_opt_restarts,
                "candidate_grid_size": self.candidate_grid_size,
                "utility": self.utility,
            },
            "out": self.out,
        }

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)


_NESTED = {
    "gp": {"restarts": "gp_restarts"},
    "acquisition": {
        "fantasy_samples": "fantasy_samples",
        "inner_opt_restarts": "inner_opt_restarts",
        "candidate_grid_size": "candidate_grid_size",
        "utility": "utility",
    },
}
_NESTED_BY_FIELD = {
    flat: (group, sub) for group, mapping in _NESTED.items() for sub, flat in mapping.items()
}
_FLAT = {f.name for f in fields(ExperimentConfig)} - {"cost"}


def from_dict(raw: dict) -> ExperimentConfig:
    """Build a config from the nested mapping produced by ``to_dict``."""
    if not isinstance(raw, dict):
        raise ConfigError("config", "top level must be a mapping")
    kwargs = {}
    for key, value in raw.items():
        if key == "cost":
            if not isinstance(value, dict):
                raise ConfigError("cost", "must be a mapping with c0, c1, c2")
            unknown = set(value) - {"c0", "c1", "c2"}
            if unknown:
                raise ConfigError("cost", f"unknown keys {sorted(unknown)}")
            try:
                kwargs["cost"] = CostParams(**{k: float(v) for k, v in value.items()})
            except (TypeError, ValueError) as exc:
                raise ConfigError("cost", str(exc)) from None
        elif key in _NESTED:
            if not isinstance(value, dict):
                raise ConfigError(key, "must be a mapping")
            for sub, v in value.items():
                if sub not in _NESTED[key]:
                    raise ConfigError(f"{key}.{sub}", "unknown key")
                kwargs[_NESTED[key][sub]] = v
        elif key in _FLAT:
            kwargs[key] = value
        else:
            raise ConfigError(key, "unknown key")
    for required in ("benchmark", "seed"):
        if kwargs.get(required) is None:
            raise ConfigError(required, "is required")
    if kwargs.get("cost_cap") is not None:
        kwargs["cost_cap"] = float(kwargs["cost_cap"])
    return ExperimentConfig(**kwargs)


def parse_config(path=None, **overrides) -> ExperimentConfig:
    """Read a YAML config file (optional) and apply flag overrides.

    Overrides use flat field names; ``None`` values are ignored so unset
    command-line flags do not clobber file values.
    """
    raw = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError("config", f"file not found: {path}")
        try:
            raw = yaml.safe_load(path.read_text()) or {}
        except yaml.YAMLError as exc:
            raise ConfigError("config", f"invalid YAML: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigError("config", "top level must be a mapping")
    raw = dict(raw)
    for key, value in overrides.items():
        if value is None:
            continue
        if key not in _FLAT:
            raise ConfigError(key, "unknown override")
        if key in _NESTED_BY_FIELD:
            group, sub = _NESTED_BY_FIELD[key]
            raw[group] = {**raw.get(group, {}), sub: value}
        else:
            raw[key] = value
    return from_dict(raw)


def with_strategy(config: ExperimentConfig, strategy: str) -> ExperimentConfig:
    return replace(config, strategy=(strategy,))
