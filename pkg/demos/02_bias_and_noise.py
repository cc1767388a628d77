"""Where the error of the debiased estimator comes from.

With ground truth available, sqrt(n)(theta_d - theta*) splits exactly into
a Gaussian noise part Z and a bias part R.  The script prints both for one
dataset and then shows how the typical size of R grows with the sparsity.

    python demos/02_bias_and_noise.py
"""

import math

import numpy as np

from debiaslasso import CovarianceModel, simulate
from debiaslasso.debias import debias, decompose_bias_noise
from debiaslasso.designs import precision_matrix
from debiaslasso.diagnostics import bias_growth
from debiaslasso.solvers import lasso_fit

n, p = 400, 200
data = simulate(CovarianceModel.circulant(p, 0.8), n, 10, amplitude=1.0, sigma=1.0, seed=3)
Omega = precision_matrix(data.Sigma)
fit = lasso_fit(data.X, data.y, 8 * math.sqrt(math.log(p) / n))
res = debias(data.X, data.y, fit, Omega)
parts = decompose_bias_noise(data.X, data.w, data.theta_star, fit, Omega, check_y=data.y)

lhs = math.sqrt(n) * (res.theta_d - data.theta_star)
print(f"max |sqrt(n)(theta_d - theta*) - Z - R| = {np.abs(lhs - parts.Z - parts.R).max():.2e}")
print(f"sd(Z) = {parts.Z.std():.3f}   ||R||_inf = {parts.R_inf:.3f}")

s0 = np.array([5, 10, 20, 40])
med = bias_growth("circulant:0.8", 800, 400, s0, amplitude=1.0, replicates=5, seed=1)
slope = np.polyfit(np.log(s0), np.log(med), 1)[0]
for s, m in zip(s0, med):
    print(f"s0 = {s:>3}: median ||R||_inf = {m:.3f}")
print(f"log-log slope {slope:.2f} (square-root growth would be 0.5)")
