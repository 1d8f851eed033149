"""
Multifidelity GP and closed-form leave-one-out errors
=====================================================

Fit the outer GP on a seed design of the multimodal benchmark, look at the
closed-form leave-one-out statistics, and confirm one of them by refitting.
"""

###########################################################################
# A seed design mixes every fidelity; the test set lives at s = 1.

import numpy as np

from mfcv import Dataset, cv_field, fit, get_benchmark, loo_statistics, train_posterior
from mfcv.sampling import SeedPlan

f = get_benchmark("multimodal")
plan = SeedPlan(seed=0, box=f.box, n_seed=20, n_test=60)
X, S = plan.seed_design()
data = Dataset(X, S, f(X, S), f.lower, f.upper)
print("seed fidelities:", np.round(np.sort(S), 2))

###########################################################################
# Train by maximum likelihood with multi-start L-BFGS-B.

gp = train_posterior(data, restarts=10, seed=0)
print("lengthscales x:", np.round(gp.hyper.input_kernel.lengthscales, 3))
print("lengthscale s:", round(gp.hyper.fidelity_kernel.lengthscale, 3))
print("noise variance:", gp.hyper.noise_variance)

T = plan.test_points()
mean, _ = gp.predict(T, np.ones(len(T)))
print("RMSE at s = 1:", np.sqrt(np.mean((mean - f(T, 1.0)) ** 2)))

###########################################################################
# Leave-one-out means and variances come from one factorization.

records = cv_field(gp)
for rec in records[:5]:
    print(f"i={rec.index:2d}  s={data.S[rec.index]:.2f}  loo mean {rec.loo_mean:+.3f}  "
          f"E[e_cv] {rec.ecv_mean:.3f}  log {rec.log_ecv:.3f}")

###########################################################################
# Refit without observation 0 and compare.

i = 0
sub = fit(data.with_responses(gp.y_work).subset(np.arange(1, data.n)), gp.hyper)
m, v = sub.predict_working(data.X[i:i + 1], data.S[i:i + 1])
closed = loo_statistics(gp)[i]
print("closed form:", closed.loo_mean, closed.loo_variance)
print("refit      :", m[0], v[0] + gp.hyper.noise_variance + sub.jitter)
