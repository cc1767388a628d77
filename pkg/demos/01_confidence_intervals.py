"""Confidence intervals and p-values for a sparse regression with p > n.

Draws one dataset from a correlated Gaussian design, debiases the Lasso
with the true precision matrix and with the node-wise estimate, and prints
intervals for the first few coordinates next to the truth.

    python demos/01_confidence_intervals.py
"""

import math

import numpy as np

from debiaslasso import CovarianceModel, simulate
from debiaslasso.debias import debias_known, debias_nodewise
from debiaslasso.designs import precision_matrix
from debiaslasso.inference import confidence_intervals, p_values
from debiaslasso.solvers import scaled_lasso_fit

n, p, s0 = 250, 400, 8
data = simulate(CovarianceModel.circulant(p, 0.8), n, s0, amplitude=0.6, sigma=1.0, seed=11)
lam = math.sqrt(2 * math.log(p) / n)

known = debias_known(data.X, data.y, lam, precision_matrix(data.Sigma), sigma=1.0)
# the default lambda_bar = 10 sqrt(2 log p / n) is conservative: at this n it zeroes every
# coefficient and sigma_hat is just the rms of y, so use the universal penalty here
sigma_default = scaled_lasso_fit(data.X, data.y).sigma_hat
sigma_hat = scaled_lasso_fit(data.X, data.y, lambda_bar=lam).sigma_hat
print(f"scaled Lasso sigma_hat: default lambda_bar {sigma_default:.3f}, lambda_bar = {lam:.3f}: {sigma_hat:.3f}")
nodewise = debias_nodewise(data.X, data.y, lam, sigma=sigma_hat)

support = np.flatnonzero(data.theta_star)
show = np.concatenate([support[:4], np.setdiff1d(np.arange(p), support)[:4]])

for name, res in (("known Omega", known), ("node-wise M", nodewise)):
    iv = confidence_intervals(res, alpha=0.05)
    pv = p_values(res)
    print(f"\n{name}: sigma_hat = {res.sigma_hat:.3f}, lasso support size = {res.lasso.support.size}")
    print(f"{'i':>4} {'theta*':>8} {'lasso':>8} {'debiased':>9} {'95% interval':>22} {'p':>8}")
    for i in show:
        print(f"{i:>4} {data.theta_star[i]:8.3f} {res.theta_hat[i]:8.3f} {res.theta_d[i]:9.3f} "
              f"  [{iv.lower[i]:7.3f}, {iv.upper[i]:7.3f}] {pv.p[i]:8.2g}")
    print(f"coverage over all {p} coordinates: {iv.covers(data.theta_star).mean():.3f}")
