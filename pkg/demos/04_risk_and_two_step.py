"""Prediction-risk estimation along the Lasso path and the two-step estimator.

The first part compares the residual risk, its SURE correction and the true
prediction risk over a lambda grid.  The second part soft-thresholds the
debiased estimate and compares its squared error with the Lasso's.

    python demos/04_risk_and_two_step.py
"""

import numpy as np

from debiaslasso.diagnostics import RiskConfig, TwoStepConfig, risk_curve, two_step_experiment

rc = risk_curve(RiskConfig(cov="circulant:0.1", n=300, p=600, s0=15, replicates=5))
m = rc.means()
print(f"{'lambda':>8} {'R_true':>8} {'R_naive':>8} {'R_sure':>8}")
for j in range(0, rc.lambdas.size, 3):
    print(f"{rc.lambdas[j]:8.4f} {m['R_true'][j]:8.4f} {m['R_naive'][j]:8.4f} {m['R_sure'][j]:8.4f}")

ts = two_step_experiment(TwoStepConfig(n=500, p=800, s0=20, amplitude=1.0, replicates=10))
print(f"\ntwo-step squared error  median {np.median(ts.errors):.3f}")
print(f"lasso squared error     median {np.median(ts.lasso_errors):.3f}")
print(f"debiased squared error  median {np.median(ts.debiased_errors):.3f}")
print(f"minimax-rate bound               {ts.bound:.3f}")
