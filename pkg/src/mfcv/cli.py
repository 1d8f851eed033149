"""Run multifidelity active-learning experiments and evaluate benchmarks.

Subcommands: ``run``, ``validate`` and ``bench``.

Exit codes: 0 success, 2 configuration error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import logging
import shutil
import sys

import numpy as np

from .benchmarks import BENCHMARKS, get_benchmark
from .config import STRATEGIES, ConfigError, parse_config
from .harness import run_suite
from .report import _csv_text, prepare_output, write_bundle

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3

logger = logging.getLogger("mfcv")


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _experiment_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", help="YAML experiment file; flags override its values")
    p.add_argument("--benchmark", choices=sorted(BENCHMARKS))
    p.add_argument("--levels", type=_floats, help="discrete fidelity levels, e.g. 0,0.5,1")
    p.add_argument("--strategy", nargs="+", choices=STRATEGIES)
    p.add_argument("--seed", type=int)
    p.add_argument("--iterations", type=int, help="acquisition iterations B")
    p.add_argument("--batch", type=int, help="batch size q")
    p.add_argument("--reps", type=int, help="repetitions")
    p.add_argument("--out", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mfcv", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment suite and write the output bundle")
    _experiment_flags(run)
    validate = sub.add_parser("validate", help="check a configuration and print it resolved")
    _experiment_flags(validate)

    bench = sub.add_parser("bench", help="evaluate a benchmark at given points")
    bench.add_argument("--benchmark", required=True, choices=sorted(BENCHMARKS))
    bench.add_argument("--levels", type=_floats)
    bench.add_argument("--point", type=_floats, action="append", required=True,
                       help="comma-separated input, repeatable")
    bench.add_argument("--fidelity", type=float, action="append",
                       help="fidelity per point (one value applies to all; default 1)")
    return parser


def _resolve(args):
    return parse_config(
        args.config,
        benchmark=args.benchmark,
        levels=args.levels,
        strategy=args.strategy,
        seed=args.seed,
        iterations=args.iterations,
        batch_size=args.batch,
        repetitions=args.reps,
        out=args.out,
    )


def cmd_validate(args) -> int:
    config = _resolve(args)
    sys.stdout.write(config.to_yaml())
    return EXIT_OK


def cmd_run(args) -> int:
    config = _resolve(args)
    try:
        staging = prepare_output(config.out)
    except OSError as exc:
        print(f"error: cannot write output directory {config.out}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    try:
        result = run_suite(config)
        out = write_bundle(result, config.out, staging=staging)
    except Exception as exc:  # noqa: BLE001 - mapped to an exit code
        shutil.rmtree(staging, ignore_errors=True)
        logger.exception("run failed")
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    n_fail = sum(len(v) for v in result.failures.values())
    for strategy, recs in result.runs.items():
        if recs:
            finals = [r.final_rmse for r in recs]
            costs = [r.final_cost for r in recs]
            print(f"{strategy}: {len(recs)} run(s), final RMSE mean {np.mean(finals):.6g}, "
                  f"final cost mean {np.mean(costs):.6g}")
    print(f"wrote {out}")
    if n_fail:
        print(f"error: {n_fail} repetition(s) failed; see failures.csv", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_bench(args) -> int:
    try:
        f = get_benchmark(args.benchmark, args.levels)
    except ValueError as exc:
        raise ConfigError("levels" if args.levels else "benchmark", str(exc)) from None
    X = np.array(args.point, dtype=float)
    if X.ndim != 2 or X.shape[1] != f.dim:
        raise ConfigError("point", f"{f.name} takes {f.dim} inputs per point")
    fid = args.fidelity or [1.0]
    if len(fid) not in (1, len(X)):
        raise ConfigError("fidelity", "give one fidelity or one per point")
    S = np.broadcast_to(np.asarray(fid, dtype=float), (len(X),))
    try:
        y = np.atleast_1d(f(X, S))
    except ValueError as exc:
        raise ConfigError("point", str(exc)) from None
    header = [f"x_{i}" for i in range(f.dim)] + ["s", "f"]
    sys.stdout.write(_csv_text(header, [[*x, s, v] for x, s, v in zip(X, S, y)]))
    return EXIT_OK


COMMANDS = {"run": cmd_run, "validate": cmd_validate, "bench": cmd_bench}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
