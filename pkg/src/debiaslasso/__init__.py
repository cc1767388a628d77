"""Debiased-Lasso inference for sparse linear regression with Gaussian designs."""

__version__ = "0.1.0"

from .debias import (  # noqa: E402
    DebiasResult, debias, debias_known, debias_nodewise, debias_split, debias_split_dataset, decompose_bias_noise,
)
from .designs import (  # noqa: E402
    CovarianceModel, Dataset, build_covariance, make_sparse_signal, precision_matrix, sample_design, simulate,
    split_dataset,
)
from .errors import *  # noqa: E402,F401,F403
from .inference import (  # noqa: E402
    confidence_intervals, noise_refit, p_values, sure_estimate, two_step_estimate, two_step_thresholds,
)
from .solvers import (  # noqa: E402
    LassoFit, lasso_fit, nodewise_lasso, scaled_lasso_fit, sigma_denoiser, soft_threshold,
)
