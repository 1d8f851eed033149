"""
Discrete fidelity levels and batch queries
==========================================

Restrict Ishigami to the levels {0, 0.5, 1} and acquire two queries per
iteration.
"""

###########################################################################
# The discretized function only accepts the listed levels.

import numpy as np

from mfcv import ExperimentConfig, get_benchmark, run_mfcv, sobol_stream

f = get_benchmark("ishigami", levels=(0.0, 0.5, 1.0))
print("f(0, 0, 0) per level:", [f([0.0, 0.0, 0.0], s) for s in f.levels])
try:
    f([0.0, 0.0, 0.0], 0.3)
except ValueError as exc:
    print("rejected:", exc)

###########################################################################
# The Sobol baseline visits each level about equally often.

config = ExperimentConfig("ishigami", seed=2, levels=(0.0, 0.5, 1.0), iterations=300)
_, S = sobol_stream(config)
print("Sobol level frequencies:", {s: round(float(np.mean(S == s)), 3) for s in (0.0, 0.5, 1.0)})

###########################################################################
# MFCV with q = 2.

config = ExperimentConfig("ishigami", seed=2, levels=(0.0, 0.5, 1.0), iterations=4, batch_size=2,
                          gp_restarts=3, fantasy_samples=16)
rec = run_mfcv(config)
for row in rec.rows:
    print(f"iter {row.iteration} slot {row.batch_index}: s={row.s}  cost {row.query_cost:.1f}  "
          f"RMSE {row.rmse:.3f}")
