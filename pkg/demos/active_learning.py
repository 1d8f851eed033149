"""
Comparing MFCV with the HF and Sobol baselines
==============================================

Run a short three-strategy suite on the multimodal benchmark, compare runs at
matched cost, and write the output bundle with its SVG plots.
"""

###########################################################################
# A short configuration; the CLI takes the same keys from YAML.

import tempfile
from pathlib import Path

import numpy as np

from mfcv import ExperimentConfig, cost_to_reach, matched_cost_rmse, run_suite, write_bundle

config = ExperimentConfig(
    "multimodal", seed=0, iterations=8, repetitions=2,
    strategy=("mfcv", "hf", "sobol"), gp_restarts=3, fantasy_samples=16,
)
result = run_suite(config)

###########################################################################
# Per-repetition comparison.

for r in range(config.repetitions):
    mf, hf, sb = (result.runs[s][r] for s in ("mfcv", "hf", "sobol"))
    a, b, c = matched_cost_rmse(mf, sb)
    print(f"rep {r}: initial RMSE {mf.initial_rmse:.3f}")
    print(f"  at cost {c:.0f}: MFCV {a:.3f}, Sobol {b:.3f}")
    print(f"  HF final {hf.final_rmse:.3f} at cost {hf.final_cost:.0f}; "
          f"MFCV reaches it at {cost_to_reach(mf, hf.final_rmse):.0f}")
    print(f"  MFCV fidelities: {np.round(mf.fidelities, 2)}")

###########################################################################
# Aggregated curves on the shared cost grid, then the bundle.

for strategy, curve in result.summary.items():
    print(strategy, "mean RMSE at last grid cost", curve["cost"][-1], "->", round(curve["mean"][-1], 3))

out = write_bundle(result, Path(tempfile.mkdtemp()) / "suite")
print(sorted(str(p.relative_to(out)) for p in out.rglob("*") if p.is_file()))
