"""One-step debiasing of the Lasso.

The debiased estimator is ``theta_d = theta_hat + M X^T (y - X theta_hat) / n``
for a p x p matrix ``M`` that depends on ``X`` only.  Three choices of ``M``
are supported: the true precision matrix, the node-wise Lasso estimate, and
a sample-split variant where the Lasso and the correction use disjoint
batches.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from .designs import Dataset, format_float, split_dataset
from .errors import DimensionMismatch, TauNonPositive, ValidationError
from .solvers import LassoFit, PrecisionEstimate, lasso_fit, nodewise_lasso, scaled_lasso_fit

KNOWN_OMEGA = "KnownOmega"
NODEWISE = "Nodewise"
SAMPLE_SPLIT = "SampleSplit"


@dataclass(frozen=True)
class DebiasResult:
    theta_d: np.ndarray
    M: np.ndarray
    variance_diag: np.ndarray   # diag(M Sigma_hat M^T), Sigma_hat from the correction batch
    sigma_hat: float
    lasso: LassoFit
    mode: str
    n: int                      # sample size of the correction batch
    precision: PrecisionEstimate | None = None

    @property
    def theta_hat(self) -> np.ndarray:
        return self.lasso.theta_hat

    @property
    def standard_errors(self) -> np.ndarray:
        return self.sigma_hat * np.sqrt(self.variance_diag) / math.sqrt(self.n)

    @property
    def z_scores(self) -> np.ndarray:
        return self.theta_d / self.standard_errors

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "n": self.n,
            "sigma_hat": self.sigma_hat,
            "theta_d": [float(v) for v in self.theta_d],
            "variance_diag": [float(v) for v in self.variance_diag],
            "lasso": self.lasso.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["coordinate", "theta_hat", "theta_d", "var_diag"])
            for i in range(self.theta_d.size):
                w.writerow([i, format_float(self.theta_hat[i]), format_float(self.theta_d[i]),
                            format_float(self.variance_diag[i])])


def _variance_diag(M: np.ndarray, X: np.ndarray) -> np.ndarray:
    # diag(M X^T X M^T) / n without forming Sigma_hat
    MXt = M @ X.T
    return np.einsum("ij,ij->i", MXt, MXt) / X.shape[0]


def debias(X, y, lasso: LassoFit, M, sigma_hat: float = 1.0, mode: str = KNOWN_OMEGA,
           precision: PrecisionEstimate | None = None) -> DebiasResult:
    """Apply the one-step correction to ``lasso`` using ``M``."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    M = np.asarray(M, dtype=float)
    n, p = X.shape
    if y.shape != (n,) or M.shape != (p, p) or lasso.theta_hat.shape != (p,):
        raise DimensionMismatch(f"X {X.shape}, y {y.shape}, M {M.shape}, theta {lasso.theta_hat.shape}")
    resid = y - X @ lasso.theta_hat
    theta_d = lasso.theta_hat + M @ (X.T @ resid) / n
    return DebiasResult(theta_d=theta_d, M=M, variance_diag=_variance_diag(M, X), sigma_hat=float(sigma_hat),
                        lasso=lasso, mode=mode, n=n, precision=precision)


def _resolve_sigma(X, y, sigma):
    if sigma is not None:
        return float(sigma)
    return scaled_lasso_fit(X, y).sigma_hat


def debias_known(X, y, lam: float, Omega, sigma: float | None = None, **lasso_opts) -> DebiasResult:
    """Lasso at ``lam`` followed by debiasing with the true precision matrix.

    ``sigma`` is carried into the result for interval construction; when
    omitted it is estimated by the scaled Lasso.
    """
    fit = lasso_fit(X, y, lam, **lasso_opts)
    return debias(X, y, fit, Omega, _resolve_sigma(X, y, sigma), KNOWN_OMEGA)


def debias_nodewise(X, y, lam: float, lambda_tilde: float | None = None, sigma: float | None = None,
                    K: float = 2.0, threads: int = 1, **lasso_opts) -> DebiasResult:
    """Lasso followed by debiasing with the node-wise Lasso estimate of the precision matrix."""
    X = np.asarray(X, dtype=float)
    fit = lasso_fit(X, y, lam, **lasso_opts)
    if X.shape[1] == 1:
        # no other columns to regress on: gamma is empty and M = n / ||x||^2
        tau2 = float(X[:, 0] @ X[:, 0]) / X.shape[0]
        if not tau2 > 0:
            raise TauNonPositive(0, tau2)
        pe = PrecisionEstimate(gamma=np.zeros((1, 0)), tau_sq=np.array([tau2]), C_hat=np.eye(1),
                               M=np.array([[1.0 / tau2]]), lambda_tilde=float(lambda_tilde or 0.0))
    else:
        pe = nodewise_lasso(X, lambda_tilde, K=K, threads=threads)
    return debias(X, y, fit, pe.M, _resolve_sigma(X, y, sigma), NODEWISE, precision=pe)


def debias_split(batch_a: Dataset, batch_b: Dataset, lam: float, Omega=None, lambda_tilde: float | None = None,
                 sigma: float | None = None, K: float = 2.0, **lasso_opts) -> DebiasResult:
    """Sample-splitting debiased estimator.

    The Lasso is fitted on batch B; ``M`` (the given ``Omega``, or node-wise
    on batch A when ``Omega`` is None) and the correction term
    ``M X_A^T (y_A - X_A theta_hat) / n_A`` use batch A.
    """
    if batch_a.p != batch_b.p:
        raise DimensionMismatch(f"batches have p={batch_a.p} and p={batch_b.p}")
    fit = lasso_fit(batch_b.X, batch_b.y, lam, **lasso_opts)
    precision = None
    if Omega is None:
        precision = nodewise_lasso(batch_a.X, lambda_tilde, K=K)
        M = precision.M
    else:
        M = np.asarray(Omega, dtype=float)
    if sigma is None:
        sigma = scaled_lasso_fit(batch_b.X, batch_b.y).sigma_hat
    return debias(batch_a.X, batch_a.y, fit, M, float(sigma), SAMPLE_SPLIT, precision=precision)


def debias_split_dataset(data: Dataset, lam: float, split_seed: int, **kwargs) -> DebiasResult:
    """Randomly split ``data`` in two and call :func:`debias_split`."""
    a, b = split_dataset(data, split_seed)
    return debias_split(a, b, lam, **kwargs)


@dataclass(frozen=True)
class BiasNoiseSplit:
    Z: np.ndarray
    R: np.ndarray

    @property
    def R_inf(self) -> float:
        return float(np.abs(self.R).max(initial=0.0))


def decompose_bias_noise(X, w, theta_star, lasso: LassoFit, M, check_y=None, tol: float = 1e-10) -> BiasNoiseSplit:
    """Split ``sqrt(n) (theta_d - theta_star)`` into noise ``Z`` and bias ``R``.

    ``Z = M X^T w / sqrt(n)`` and ``R = sqrt(n) (M Sigma_hat - I)(theta_star - theta_hat)``.
    When ``check_y`` is given the identity is verified against the debiased
    estimate computed from that response.
    """
    X = np.asarray(X, dtype=float)
    w = np.asarray(w, dtype=float)
    theta_star = np.asarray(theta_star, dtype=float)
    M = np.asarray(M, dtype=float)
    n, p = X.shape
    if w.shape != (n,) or theta_star.shape != (p,) or M.shape != (p, p):
        raise DimensionMismatch("inconsistent shapes for decomposition")
    rn = math.sqrt(n)
    Z = M @ (X.T @ w) / rn
    u = theta_star - lasso.theta_hat
    R = rn * (M @ (X.T @ (X @ u)) / n - u)
    if check_y is not None:
        lhs = rn * (debias(X, check_y, lasso, M).theta_d - theta_star)
        err = np.abs(lhs - Z - R).max(initial=0.0)
        scale = max(1.0, np.abs(lhs).max(initial=0.0))
        if err > tol * scale:
            raise ValidationError(f"decomposition identity violated by {err:.3e}")
    return BiasNoiseSplit(Z=Z, R=R)
