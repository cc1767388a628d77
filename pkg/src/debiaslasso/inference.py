"""Confidence intervals, p-values, the two-step thresholded estimator and SURE risk estimates."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri

from .debias import DebiasResult
from .designs import format_float
from .errors import BadAlpha, BadSparsity, DegenerateFit, DimensionMismatch, ModelTooLarge, RankDeficient, ValidationError
from .solvers import LassoFit, scaled_lasso_fit, soft_threshold


def normal_cdf(x):
    return ndtr(x)


def normal_quantile(q):
    return ndtri(q)


def z_multiplier(alpha: float) -> float:
    """``Phi^{-1}(1 - alpha / 2)``."""
    if not 0.0 < alpha < 1.0:
        raise BadAlpha(f"alpha must lie in (0, 1), got {alpha}")
    return float(ndtri(1.0 - alpha / 2.0))


@dataclass(frozen=True)
class IntervalSet:
    alpha: float
    center: np.ndarray
    half_width: np.ndarray

    @property
    def lower(self) -> np.ndarray:
        return self.center - self.half_width

    @property
    def upper(self) -> np.ndarray:
        return self.center + self.half_width

    def covers(self, theta) -> np.ndarray:
        return np.abs(np.asarray(theta) - self.center) <= self.half_width


def confidence_intervals(result: DebiasResult, alpha: float = 0.05) -> IntervalSet:
    """Per-coordinate intervals ``theta_d_i +- z_{1-alpha/2} sigma_hat sqrt(V_ii / n)``."""
    q = z_multiplier(alpha)
    if np.any(result.variance_diag <= 0):
        raise ValidationError("variance_diag must be positive")
    return IntervalSet(alpha=float(alpha), center=result.theta_d, half_width=q * result.standard_errors)


@dataclass(frozen=True)
class PValueSet:
    p: np.ndarray
    z: np.ndarray


def p_values(result: DebiasResult) -> PValueSet:
    """Two-sided p-values ``2 (1 - Phi(|z_i|))`` for ``H0: theta_i = 0``."""
    if np.any(result.variance_diag <= 0):
        raise ValidationError("variance_diag must be positive")
    z = result.z_scores
    return PValueSet(p=2.0 * ndtr(-np.abs(z)), z=z)


def write_inference_csv(path, result: DebiasResult, intervals: IntervalSet, pvals: PValueSet) -> None:
    """CSV with columns ``coordinate, theta_hat, theta_d, lower, upper, p_value``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["coordinate", "theta_hat", "theta_d", "lower", "upper", "p_value"])
        for i in range(result.theta_d.size):
            w.writerow([i, format_float(result.theta_hat[i]), format_float(result.theta_d[i]),
                        format_float(intervals.lower[i]), format_float(intervals.upper[i]),
                        format_float(pvals.p[i])])


@dataclass(frozen=True)
class TwoStepEstimate:
    theta2: np.ndarray
    tau: np.ndarray


def two_step_thresholds(Omega_diag, sigma: float, n: int, p: int, s0: int) -> np.ndarray:
    if not 0 < s0 < p:
        raise BadSparsity(f"two-step thresholds need 0 < s0 < p, got s0={s0}, p={p}")
    if not sigma > 0:
        raise ValidationError("sigma must be positive")
    return np.sqrt(2.0 * sigma**2 * np.asarray(Omega_diag, dtype=float) * math.log(p / s0) / n)


def two_step_estimate(result: DebiasResult, Omega, sigma: float, s0: int) -> TwoStepEstimate:
    """Soft-threshold the debiased estimate at ``sqrt(2 sigma^2 Omega_ii log(p/s0) / n)``.

    ``s0`` must be supplied; the procedure is not adaptive to the sparsity.
    """
    Omega = np.asarray(Omega, dtype=float)
    p = result.theta_d.size
    if Omega.shape != (p, p):
        raise DimensionMismatch("Omega does not match the estimate dimension")
    tau = two_step_thresholds(np.diag(Omega), sigma, result.n, p, s0)
    return TwoStepEstimate(theta2=soft_threshold(result.theta_d, tau), tau=tau)


@dataclass(frozen=True)
class RiskTriple:
    R_naive: float
    R_sure: float
    df: int
    R_true: float | None = None


def sure_estimate(X, y, lasso: LassoFit, sigma_hat: float) -> RiskTriple:
    """Residual risk ``||y - X theta||^2 / n`` and its SURE correction ``+ 2 sigma^2 df / n``.

    ``df`` counts exactly-nonzero Lasso coordinates.
    """
    if not sigma_hat > 0:
        raise ValidationError("sigma_hat must be positive")
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    r = np.asarray(y, dtype=float) - X @ lasso.theta_hat
    naive = float(r @ r) / n
    df = int(np.count_nonzero(lasso.theta_hat))
    return RiskTriple(R_naive=naive, R_sure=naive + 2.0 * sigma_hat**2 * df / n, df=df)


def prediction_error(X, lasso: LassoFit, theta_star, w) -> float:
    """``||X (theta_hat - theta_star)||^2 / n + ||w||^2 / n``."""
    X = np.asarray(X, dtype=float)
    theta_star = np.asarray(theta_star, dtype=float)
    w = np.asarray(w, dtype=float)
    n, p = X.shape
    if theta_star.shape != (p,) or w.shape != (n,) or lasso.theta_hat.shape != (p,):
        raise DimensionMismatch("inconsistent shapes for prediction error")
    e = X @ (lasso.theta_hat - theta_star)
    return float(e @ e + w @ w) / n


def universal_lambda_bar(n: int, p: int) -> float:
    return math.sqrt(2.0 * math.log(max(p, 2)) / n)


def noise_refit(X, y, lambda_bar: float | None = None) -> float:
    """Noise level from least squares refitted on the scaled-Lasso support.

    ``lambda_bar`` defaults to the universal penalty ``sqrt(2 log p / n)``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    if lambda_bar is None:
        lambda_bar = universal_lambda_bar(n, p)
    try:
        support = scaled_lasso_fit(X, y, lambda_bar).support
    except DegenerateFit as exc:
        support = np.flatnonzero(exc.theta_hat)
    if support.size == 0:
        return float(np.linalg.norm(y) / math.sqrt(n))
    if support.size >= n:
        raise ModelTooLarge(f"selected model has {support.size} >= n = {n} columns")
    XS = X[:, support]
    coef, _, rank, _ = np.linalg.lstsq(XS, y, rcond=None)
    if rank < support.size:
        raise RankDeficient(f"selected columns have rank {rank} < {support.size}")
    return float(np.linalg.norm(y - XS @ coef) / math.sqrt(n))
