"""
Scoring candidate queries with the cost-aware lookahead
=======================================================

Build the inner GP on log expected CV errors, score a few candidates across
fidelity, and let the optimizer pick the next query.
"""

###########################################################################
# Outer GP and its CV-error field.

import numpy as np

from mfcv import (
    AcquisitionConfig,
    Dataset,
    MFCVAcquisition,
    cost,
    cost_aware_argmax,
    cv_field,
    fit_inner_gp,
    get_benchmark,
    log_cv_observations,
    normalized_cost,
    qmfcv_acquisition,
    train_posterior,
)
from mfcv.sampling import SeedPlan

f = get_benchmark("multimodal")
X, S = SeedPlan(seed=1, box=f.box, n_seed=20, n_test=60).seed_design()
outer = train_posterior(Dataset(X, S, f(X, S), f.lower, f.upper), restarts=5, seed=0)
Xc, Sc, log_ecv = log_cv_observations(cv_field(outer), outer.dataset)
inner = fit_inner_gp(Xc, Sc, log_ecv, f.lower, f.upper, restarts=5, seed=0)

###########################################################################
# Utility and cost at one input for several fidelities.

cfg = AcquisitionConfig(fantasy_samples=64, candidate_grid_size=256)
acq = MFCVAcquisition(inner, cfg, seed=0)
x = np.array([1.0, 2.0])
for s in (0.0, 0.25, 0.5, 0.75, 1.0):
    u = acq.utility(x[None, None, :], np.array([[s]]))[0]
    print(f"s={s:.2f}  utility {u:.3e}  cost {cost(s):7.2f}  score {u / normalized_cost(s):.3e}")

###########################################################################
# Lookahead value of a two-query batch: expected inner maximum after both fantasies.

pair = qmfcv_acquisition(inner, [[1.0, 2.0], [5.0, -1.0]], [0.9, 1.0], cfg, seed=0)
print("batch lookahead value:", pair, " current maximum:", acq.current_max())

###########################################################################
# The optimizer returns the next query.

best = cost_aware_argmax(acq, seed=0)[0]
print("next x:", np.round(best.x, 3), "s:", round(best.s, 3), "cost:", round(cost(best.s), 2))
