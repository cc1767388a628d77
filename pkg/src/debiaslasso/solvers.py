"""Convex solvers: Lasso, scaled Lasso, node-wise Lasso and the Sigma-weighted denoiser."""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .designs import _check_spd
from .errors import DegenerateFit, DidNotConverge, DimensionMismatch, TauNonPositive, ValidationError

DEFAULT_GAP_TOL = 1e-8
DEFAULT_MAX_ITER = 10_000
DEFAULT_KKT_TOL = 1e-7


def soft_threshold(x, tau):
    """``(|x| - tau)_+ sign(x)``; exactly zero whenever ``|x| <= tau``.

    Works elementwise on arrays; ``tau`` may be an array of the same shape.
    """
    tau = np.asarray(tau, dtype=float)
    if np.any(tau < 0):
        raise ValidationError("threshold must be nonnegative")
    x = np.asarray(x, dtype=float)
    out = np.sign(x) * np.maximum(np.abs(x) - tau, 0.0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class LassoFit:
    theta_hat: np.ndarray
    lam: float
    iterations: int
    gap: float
    objective: float
    converged: bool = True
    trace: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False, compare=False)

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.theta_hat)

    def to_dict(self) -> dict:
        nz = self.support
        return {
            "lambda": self.lam,
            "theta_hat": {str(int(i)): float(self.theta_hat[i]) for i in nz},
            "p": int(self.theta_hat.size),
            "gap": self.gap,
            "iterations": self.iterations,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "LassoFit":
        theta = np.zeros(int(d["p"]))
        for k, v in d["theta_hat"].items():
            theta[int(k)] = v
        return cls(theta_hat=theta, lam=float(d["lambda"]), iterations=int(d["iterations"]),
                   gap=float(d["gap"]), objective=float("nan"))


def lasso_objective(X, y, theta, lam: float) -> float:
    r = y - X @ theta
    return float(r @ r / (2 * X.shape[0]) + lam * np.abs(theta).sum())


def _check_xy(X, y):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise DimensionMismatch(f"X has shape {X.shape}, y has shape {y.shape}")
    return X, y


def lasso_fit(X, y, lam: float, max_iter: int = DEFAULT_MAX_ITER, gap_tol: float = DEFAULT_GAP_TOL,
              warm_start=None, *, Xt=None, kkt_tol: float = DEFAULT_KKT_TOL) -> LassoFit:
    """Solve ``min (1/2n)||y - X theta||^2 + lam ||theta||_1`` by cyclic coordinate descent.

    Iterates full sweeps until the duality gap drops to ``gap_tol`` and the
    stationarity conditions hold to ``kkt_tol`` (relative to ``lam``).  If
    ``max_iter`` sweeps are exhausted first, the fit is returned with
    ``converged=False`` and a :class:`DidNotConverge` warning.

    ``Xt`` may pass a precomputed C-contiguous ``X.T`` to skip the copy when
    the same design is fitted repeatedly.
    """
    X, y = _check_xy(X, y)
    if not lam > 0:
        raise ValidationError(f"lambda must be positive, got {lam}")
    p = X.shape[1]
    theta = np.zeros(p) if warm_start is None else np.array(warm_start, dtype=float)
    if theta.shape != (p,):
        raise DimensionMismatch("warm start has the wrong length")
    if Xt is None:
        Xt = np.ascontiguousarray(X.T)
    sweeps, gap, r, trace, kkt = _kernels.lasso_cd(Xt, y, float(lam), theta, int(max_iter), float(gap_tol), -1,
                                                   float(kkt_tol))
    converged = gap <= gap_tol and kkt <= kkt_tol
    if not converged:
        warnings.warn(f"Lasso stopped after {sweeps} sweeps with gap {gap:.3e} (tol {gap_tol:.1e}), "
                      f"KKT violation {kkt:.1e}", DidNotConverge, stacklevel=2)
    objective = float(r @ r / (2 * X.shape[0]) + lam * np.abs(theta).sum())
    return LassoFit(theta_hat=theta, lam=float(lam), iterations=int(sweeps), gap=float(gap),
                    objective=objective, converged=converged, trace=trace)


def kkt_violation(X, y, fit: LassoFit) -> float:
    """Largest relative violation of the Lasso stationarity conditions.

    Returns ``max(0, ||g||_inf / lam - 1, max_{supp} (1 - sign(theta_i) g_i / lam))``
    with ``g = X^T (y - X theta) / n``.
    """
    g = X.T @ (y - X @ fit.theta_hat) / X.shape[0]
    viol = max(0.0, np.abs(g).max(initial=0.0) / fit.lam - 1.0)
    s = fit.support
    if s.size:
        viol = max(viol, float(np.max(1.0 - np.sign(fit.theta_hat[s]) * g[s] / fit.lam)))
    return viol


@dataclass(frozen=True)
class ScaledLassoFit:
    theta_hat: np.ndarray
    sigma_hat: float
    lambda_bar: float
    iterations: int
    objective_trace: np.ndarray = field(repr=False, compare=False, default_factory=lambda: np.zeros(0))

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.theta_hat)


def default_lambda_bar(n: int, p: int) -> float:
    return 10.0 * math.sqrt(2.0 * math.log(p) / n)


def scaled_lasso_objective(X, y, theta, sigma: float, lambda_bar: float) -> float:
    r = y - X @ theta
    return float(r @ r / (2 * sigma * X.shape[0]) + sigma / 2 + lambda_bar * np.abs(theta).sum())


def scaled_lasso_fit(X, y, lambda_bar: float | None = None, tol: float = 1e-8, max_iter: int = 500,
                     gap_tol: float = 1e-12) -> ScaledLassoFit:
    """Jointly estimate coefficients and noise level.

    Minimizes ``||y - X theta||^2 / (2 sigma n) + sigma / 2 + lambda_bar ||theta||_1``
    by alternating a Lasso at ``lam = sigma * lambda_bar`` with the closed-form
    update ``sigma = ||y - X theta|| / sqrt(n)``.  The cost is jointly convex,
    so the alternation decreases it monotonically.
    """
    X, y = _check_xy(X, y)
    n, p = X.shape
    if lambda_bar is None:
        lambda_bar = default_lambda_bar(n, p)
    if not lambda_bar > 0:
        raise ValidationError("lambda_bar must be positive")
    if not np.any(y):
        raise ValidationError("y is identically zero")
    Xt = np.ascontiguousarray(X.T)
    theta = np.zeros(p)
    sigma = float(np.linalg.norm(y) / math.sqrt(n))
    trace = [scaled_lasso_objective(X, y, theta, sigma, lambda_bar)]
    it = 0
    for it in range(1, max_iter + 1):
        # gap_tol is relative to sigma^2 so the inner solve stays accurate as sigma shrinks
        fit = lasso_fit(X, y, sigma * lambda_bar, gap_tol=gap_tol * sigma * sigma, warm_start=theta, Xt=Xt)
        theta = fit.theta_hat
        new_sigma = float(np.linalg.norm(y - X @ theta) / math.sqrt(n))
        if new_sigma < 1e-12:
            raise DegenerateFit("scaled Lasso noise estimate collapsed to zero (perfect interpolation)", theta)
        trace.append(scaled_lasso_objective(X, y, theta, new_sigma, lambda_bar))
        done = abs(new_sigma - sigma) <= tol * sigma
        sigma = new_sigma
        if done:
            break
    return ScaledLassoFit(theta_hat=theta, sigma_hat=sigma, lambda_bar=float(lambda_bar),
                          iterations=it, objective_trace=np.array(trace))


@dataclass(frozen=True)
class PrecisionEstimate:
    gamma: np.ndarray      # p x (p-1); row i regresses column i on the others
    tau_sq: np.ndarray
    C_hat: np.ndarray
    M: np.ndarray
    lambda_tilde: float


def default_lambda_tilde(n: int, p: int, K: float = 2.0) -> float:
    return K * math.sqrt(math.log(max(p, 2)) / n)


def nodewise_lasso(X, lambda_tilde: float | None = None, K: float = 2.0, gap_tol: float = 1e-12,
                   max_iter: int = DEFAULT_MAX_ITER, threads: int = 1) -> PrecisionEstimate:
    """Node-wise Lasso estimate ``M = T^{-2} C`` of the precision matrix.

    Each column is regressed on the remaining ones at penalty
    ``lambda_tilde`` (default ``K sqrt(log p / n)``).  The p regressions are
    independent; ``threads > 1`` runs them on a thread pool with identical
    results.
    """
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    if n < 2:
        raise ValidationError("node-wise Lasso needs n >= 2")
    if lambda_tilde is None:
        lambda_tilde = default_lambda_tilde(n, p, K)
    if not lambda_tilde > 0:
        raise ValidationError("lambda_tilde must be positive")
    Xt = np.ascontiguousarray(X.T)

    def row(i):
        coef = np.zeros(p)
        sweeps, gap, r, _, kkt = _kernels.lasso_cd(Xt, Xt[i].copy(), float(lambda_tilde), coef, int(max_iter),
                                                   float(gap_tol), i, DEFAULT_KKT_TOL)
        if gap > gap_tol or kkt > DEFAULT_KKT_TOL:
            warnings.warn(f"node-wise regression {i} stopped with gap {gap:.3e}", DidNotConverge, stacklevel=3)
        return coef, float(r @ Xt[i]) / n

    from .parallel import parallel_map

    rows = parallel_map(row, range(p), threads)
    C_hat = np.eye(p)
    gamma = np.empty((p, p - 1))
    tau_sq = np.empty(p)
    for i, (coef, tau2) in enumerate(rows):
        if not tau2 > 0:
            raise TauNonPositive(i, tau2)
        tau_sq[i] = tau2
        others = np.delete(coef, i)
        gamma[i] = others
        C_hat[i, np.arange(p) != i] = -others
    M = C_hat / tau_sq[:, None]
    return PrecisionEstimate(gamma=gamma, tau_sq=tau_sq, C_hat=C_hat, M=M, lambda_tilde=float(lambda_tilde))


def sigma_denoiser(z, Sigma, lam: float, gap_tol: float = 1e-14, max_iter: int = 100_000) -> np.ndarray:
    """``argmin_theta 0.5 ||Sigma^{1/2} (theta - z)||^2 + lam ||theta||_1``.

    For ``Sigma = I`` this is componentwise soft thresholding at ``lam``.
    """
    z = np.asarray(z, dtype=float)
    Sigma = np.asarray(Sigma, dtype=float)
    _check_spd(Sigma)
    if Sigma.shape != (z.size, z.size):
        raise DimensionMismatch("Sigma and z disagree in dimension")
    if not lam > 0:
        raise ValidationError("lambda must be positive")
    theta = np.zeros_like(z)
    scale = max(1.0, float(z @ Sigma @ z))
    sweeps, gap = _kernels.quadratic_cd(np.ascontiguousarray(Sigma), z, float(lam), theta, int(max_iter),
                                        float(gap_tol) * scale)
    if gap > gap_tol * scale:
        warnings.warn(f"denoiser stopped with gap {gap:.3e}", DidNotConverge, stacklevel=2)
    return theta
