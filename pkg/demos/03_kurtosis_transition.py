"""Where the debiased estimator turns Gaussian as n/p grows.

For each sparsity fraction the sweep records the mean excess kurtosis of the
standardized coordinates on a grid of sample ratios and reports the smallest
ratio where it drops below its standard error.  The default p = 400 takes
a few minutes; much smaller p leaves the curve within noise of the grid floor.

    python demos/03_kurtosis_transition.py [p]
"""

import sys

from debiaslasso.diagnostics import KurtosisConfig, critical_delta_curve

p = int(sys.argv[1]) if len(sys.argv) > 1 else 400
cfg = KurtosisConfig(p=p, replicates=100)
for sweep in critical_delta_curve(cfg, [0.05, 0.1, 0.2]):
    curve = " ".join(f"{pt.delta:.2f}:{pt.mean_kurtosis:+.2f}" for pt in sweep.points[:8])
    print(f"eps = {sweep.epsilon:.2f}  delta_c = {sweep.delta_c}  ({curve} ...)")
