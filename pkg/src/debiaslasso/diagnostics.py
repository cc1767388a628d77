"""Design diagnostics and Monte-Carlo experiment drivers.

Design diagnostics
    :func:`rho_subset_norm` -- worst-case l_inf operator norm of inverses of
    principal submatrices of size <= k.
    :func:`compatibility_constant_estimate` -- multi-start projected-gradient
    upper bound on the compatibility constant phi^2(Sigma_hat, S).

Experiments (each returns a result object and can be written to disk with
:func:`write_report`)
    :func:`kurtosis_sweep` / :func:`critical_delta_curve` -- empirical kurtosis of
    the standardized debiased estimate versus n/p, and the one-standard-error
    critical ratio delta_c.
    :func:`coverage_experiment` -- interval coverage and null p-values.
    :func:`risk_curve` -- true, naive and SURE prediction risk along a lambda grid.
    :func:`two_step_experiment` -- l2 risk of the thresholded debiased estimate.
    :func:`denoiser_approximation_check` -- distance between the Lasso and the
    Sigma-weighted denoiser applied to the debiased noisy observation.

Every replicate draws from its own seeded stream and results are gathered in
replicate order, so outputs do not depend on the thread count.
"""

from __future__ import annotations

import csv
import dataclasses
import itertools
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import stats

from . import __version__
from .debias import KNOWN_OMEGA, NODEWISE, SAMPLE_SPLIT, _variance_diag, debias, decompose_bias_noise
from .designs import (
    ROLE_DESIGN, ROLE_NOISE, ROLE_SIGNAL, CovarianceModel, build_covariance, cholesky_factor, format_float,
    make_rng, make_sparse_signal, precision_matrix, sample_design, simulate, split_dataset,
)
from .errors import EmptySupport, ValidationError
from .inference import (
    confidence_intervals, noise_refit, p_values, prediction_error, sure_estimate, two_step_estimate,
    two_step_thresholds,
)
from .parallel import parallel_map
from .plotting import line_plot_svg
from .solvers import lasso_fit, nodewise_lasso, scaled_lasso_fit, sigma_denoiser, soft_threshold

EXACT_ENUMERATION_LIMIT = 10**6
SQRT2 = math.sqrt(2.0)


# ------------------------------------------------------------------ #
# rho(A, k)
# ------------------------------------------------------------------ #


@dataclass(frozen=True)
class SubsetNormReport:
    k: int
    rho: float
    method: str          # "ExactEnumeration" or "GreedyLowerBound"
    argmax: tuple[int, ...] = ()


def _inv_inf_norm(A: np.ndarray, T) -> float:
    T = list(T)
    inv = np.linalg.inv(A[np.ix_(T, T)])
    return float(np.abs(inv).sum(axis=1).max())


def rho_subset_norm(A, k: int, restarts: int = 50, seed: int = 0) -> SubsetNormReport:
    """``max_{|T| <= k} ||(A_TT)^{-1}||_inf`` (max absolute row sum).

    Exact by enumeration when the number of subsets is at most 10^6;
    otherwise a greedy search from every singleton plus random restarts,
    reported as a lower bound.
    """
    A = np.asarray(A, dtype=float)
    cholesky_factor(A)
    p = A.shape[0]
    if not 1 <= k <= p:
        raise ValidationError(f"need 1 <= k <= p, got k={k}, p={p}")
    count = sum(math.comb(p, j) for j in range(1, k + 1))
    if count <= EXACT_ENUMERATION_LIMIT:
        best, arg = -1.0, ()
        for size in range(1, k + 1):
            for T in itertools.combinations(range(p), size):
                v = _inv_inf_norm(A, T)
                if v > best:
                    best, arg = v, T
        return SubsetNormReport(k=k, rho=best, method="ExactEnumeration", argmax=arg)

    rng = make_rng(seed, 0, 0)
    starts = [[i] for i in range(p)] + [list(rng.choice(p, size=min(k, 2), replace=False)) for _ in range(restarts)]
    best, arg = -1.0, ()
    for T in starts:
        T = list(T)
        cur = _inv_inf_norm(A, T)
        while len(T) < k:
            cand = [(_inv_inf_norm(A, T + [j]), j) for j in range(p) if j not in T]
            v, j = max(cand)
            if v <= cur:
                break
            T.append(j)
            cur = v
        if cur > best:
            best, arg = cur, tuple(sorted(T))
    return SubsetNormReport(k=k, rho=best, method="GreedyLowerBound", argmax=arg)


# ------------------------------------------------------------------ #
# Compatibility constant
# ------------------------------------------------------------------ #


def _project_simplex(v: np.ndarray, radius: float = 1.0) -> np.ndarray:
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - radius
    idx = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / idx > 0)[0][-1]
    return np.maximum(v - css[rho] / (rho + 1), 0.0)


def _project_l1_ball(v: np.ndarray, radius: float) -> np.ndarray:
    if v.size == 0 or np.abs(v).sum() <= radius:
        return v
    return np.sign(v) * _project_simplex(np.abs(v), radius)


def compatibility_constant_estimate(Sigma_hat, S, L: float = 3.0, restarts: int = 200, iters: int = 500,
                                    seed: int = 0) -> float:
    """Upper-bound estimate of ``phi^2(Sigma_hat, S)``.

    The ratio ``|S| <theta, Sigma_hat theta> / ||theta_S||_1^2`` is minimized
    over the cone ``||theta_{S^c}||_1 <= L ||theta_S||_1``.  Normalizing
    ``||theta_S||_1 = 1`` and fixing the sign pattern of ``theta_S`` makes each
    subproblem a convex QP over (signed simplex) x (l1 ball), solved by
    accelerated projected gradient.  Sign patterns are enumerated when there
    are at most ``restarts`` of them, otherwise sampled.  The minimum found is
    an upper bound on the true constant.
    """
    Sigma_hat = np.asarray(Sigma_hat, dtype=float)
    p = Sigma_hat.shape[0]
    S = np.unique(np.asarray(S, dtype=int))
    if S.size == 0:
        raise EmptySupport("support set S must be nonempty")
    if not L > 0:
        raise ValidationError("cone parameter L must be positive")
    Sc = np.setdiff1d(np.arange(p), S)
    s = S.size
    # the gradient 2 Sigma theta is Lipschitz with constant 2 lambda_max
    step = 0.5 / max(np.linalg.eigvalsh(Sigma_hat)[-1], 1e-300)
    n_patterns = 2 ** (s - 1)
    if n_patterns <= restarts:
        patterns = [np.array((1,) + bits, dtype=float) for bits in itertools.product((1, -1), repeat=s - 1)]
    else:
        rng = make_rng(seed, 0, 0)
        patterns = [np.concatenate(([1.0], rng.choice([-1.0, 1.0], size=s - 1))) for _ in range(restarts)]

    def project(theta, signs):
        out = np.empty_like(theta)
        out[S] = signs * _project_simplex(signs * theta[S])
        out[Sc] = _project_l1_ball(theta[Sc], L)
        return out

    best = np.inf
    for signs in patterns:
        x = np.zeros(p)
        x[S] = signs / s
        yk, t = x.copy(), 1.0
        for _ in range(iters):
            x_new = project(yk - step * 2.0 * (Sigma_hat @ yk), signs)
            t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
            yk = x_new + (t - 1.0) / t_new * (x_new - x)
            x, t = x_new, t_new
        best = min(best, s * float(x @ Sigma_hat @ x))
    return float(best)


# ------------------------------------------------------------------ #
# Experiment configuration plumbing
# ------------------------------------------------------------------ #


class _Config:
    """Mixin for experiment configs: dict round trip with unknown keys rejected."""

    @classmethod
    def from_dict(cls, d: dict):
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValidationError(f"unknown config keys for {cls.__name__}: {sorted(unknown)}")
        kwargs = {k: (tuple(v) if isinstance(v, list) else v) for k, v in d.items()}
        return cls(**kwargs)

    def to_dict(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in dataclasses.asdict(self).items()}

    def covariance(self) -> CovarianceModel:
        return CovarianceModel.parse(self.cov, self.p)


def _lambda(kappa: float, sigma: float, n: int, p: int) -> float:
    return kappa * sigma * math.sqrt(math.log(p) / n)


def _check(cond: bool, message: str):
    if not cond:
        raise ValidationError(message)


# ------------------------------------------------------------------ #
# Kurtosis sweep
# ------------------------------------------------------------------ #


@dataclass(frozen=True)
class KurtosisConfig(_Config):
    p: int = 400
    epsilon: float = 0.2
    delta_grid: tuple = tuple(round(0.1 + 0.05 * k, 2) for k in range(18))
    replicates: int = 100
    cov: str = "circulant:0.8"
    amplitude: float = 0.15
    sigma: float = 1.0
    m_mode: str = "known"          # "known" (M = Omega) or "nodewise"
    lambda_kappa: float = 0.5      # lambda = kappa sigma sqrt(log p / n); 0 means least squares
    lambda_tilde_k: float = 2.0
    use_sigma_hat: bool = False
    resample_design: bool = False
    refine: bool = True
    refine_step: float = 0.01
    seed: int = 0

    def validate(self):
        _check(self.p >= 2, "p must be >= 2")
        _check(0.0 <= self.epsilon < 1.0, "epsilon must lie in [0, 1)")
        _check(len(self.delta_grid) >= 1 and all(d > 0 for d in self.delta_grid), "delta_grid must be positive")
        _check(all(a <= b for a, b in zip(self.delta_grid, self.delta_grid[1:])), "delta_grid must be nondecreasing")
        _check(self.replicates >= 2, "replicates must be >= 2")
        _check(self.m_mode in ("known", "nodewise"), "m_mode must be 'known' or 'nodewise'")
        _check(self.lambda_kappa >= 0, "lambda_kappa must be nonnegative")
        _check(self.sigma > 0, "sigma must be positive")
        if self.lambda_kappa == 0:
            _check(min(self.delta_grid) > 1.0, "least squares (lambda_kappa = 0) needs n > p on the whole grid")
        self.covariance()
        return self

    @property
    def s0(self) -> int:
        return int(round(self.epsilon * self.p))


@dataclass(frozen=True)
class KurtosisPoint:
    delta: float
    n: int
    mean_kurtosis: float
    sd_kurtosis: float
    se_kurtosis: float

    @property
    def passes(self) -> bool:
        return self.mean_kurtosis <= self.se_kurtosis


@dataclass(frozen=True)
class KurtosisSweep:
    epsilon: float
    points: tuple[KurtosisPoint, ...]
    replicates: int
    delta_c: float | None
    config: KurtosisConfig
    kurtosis_estimator: str = "sample excess kurtosis m4/m2^2 - 3 (no bias correction)"

    @property
    def deltas(self) -> np.ndarray:
        return np.array([pt.delta for pt in self.points])

    @property
    def mean_kurtosis(self) -> np.ndarray:
        return np.array([pt.mean_kurtosis for pt in self.points])

    @property
    def se_kurtosis(self) -> np.ndarray:
        return np.array([pt.se_kurtosis for pt in self.points])


def excess_kurtosis(T: np.ndarray) -> np.ndarray:
    """Column-wise plain sample excess kurtosis ``m4 / m2^2 - 3``."""
    c = T - T.mean(axis=0)
    m2 = (c**2).mean(axis=0)
    m4 = (c**4).mean(axis=0)
    return m4 / m2**2 - 3.0


def _delta_key(delta: float) -> int:
    return int(round(delta * 10_000))


def _sample_size(delta: float, p: int) -> int:
    return max(2, math.ceil(round(delta * p, 9)))


def _standardized_statistics(cfg: KurtosisConfig, delta: float, chol, Omega, theta_star, threads) -> np.ndarray:
    """Replicates x p matrix of T_i = sqrt(n)(theta_d_i - theta*_i) / (sigma sqrt((M Sigma_hat M^T)_ii))."""
    p, n = cfg.p, _sample_size(delta, cfg.p)
    key = _delta_key(delta)

    def design(rep):
        X = sample_design(None, n, make_rng(cfg.seed, key, rep, ROLE_DESIGN), chol=chol)
        M = Omega if cfg.m_mode == "known" else nodewise_lasso(X, K=cfg.lambda_tilde_k).M
        # diag(M Sigma_hat M^T) depends on X only, so it is shared by all noise draws
        return X, np.ascontiguousarray(X.T), M, np.sqrt(_variance_diag(M, X))

    fixed = None if cfg.resample_design else design(0)
    lam = _lambda(cfg.lambda_kappa, cfg.sigma, n, p)

    def one(rep):
        X, Xt, M, sd = design(rep + 1) if fixed is None else fixed
        w = cfg.sigma * make_rng(cfg.seed, key, rep, ROLE_NOISE).standard_normal(n)
        y = X @ theta_star + w
        if lam > 0:
            theta_hat = lasso_fit(X, y, lam, Xt=Xt).theta_hat
        else:
            theta_hat = np.linalg.lstsq(X, y, rcond=None)[0]
        sigma_used = scaled_lasso_fit(X, y).sigma_hat if cfg.use_sigma_hat else cfg.sigma
        theta_d = theta_hat + M @ (Xt @ (y - X @ theta_hat)) / n
        return math.sqrt(n) * (theta_d - theta_star) / (sigma_used * sd)

    return np.array(parallel_map(one, range(cfg.replicates), threads))


def _kurtosis_point(cfg, delta, chol, Omega, theta_star, threads) -> KurtosisPoint:
    T = _standardized_statistics(cfg, delta, chol, Omega, theta_star, threads)
    g = excess_kurtosis(T)
    sd = float(np.std(g, ddof=1))
    return KurtosisPoint(delta=float(delta), n=_sample_size(delta, cfg.p), mean_kurtosis=float(g.mean()),
                         sd_kurtosis=sd, se_kurtosis=sd / math.sqrt(cfg.p))


def kurtosis_sweep(config: KurtosisConfig, threads: int | None = 1) -> KurtosisSweep:
    """Mean excess kurtosis of the standardized debiased estimate across a grid of n/p.

    For every grid value ``delta`` one design with ``n = ceil(delta p)`` rows is
    drawn (the signal is shared by the whole sweep) and only the noise is
    redrawn across replicates.  ``delta_c`` is the smallest grid value with
    ``m(gamma) <= SE(gamma)``; with ``refine`` the interval just below the
    first passing coarse point is rescanned in ``refine_step`` increments.
    ``delta_c`` is None when no grid point passes.
    """
    cfg = config.validate()
    model = cfg.covariance()
    Sigma = build_covariance(model)
    chol = cholesky_factor(Sigma)
    Omega = precision_matrix(Sigma)
    theta_star = make_sparse_signal(cfg.p, cfg.s0, cfg.amplitude, make_rng(cfg.seed, 0, 0, ROLE_SIGNAL)).theta
    points = [_kurtosis_point(cfg, d, chol, Omega, theta_star, threads) for d in dict.fromkeys(cfg.delta_grid)]
    first = next((k for k, pt in enumerate(points) if pt.passes), None)
    delta_c = None if first is None else points[first].delta
    if cfg.refine and first is not None and first > 0:
        lo, hi = points[first - 1].delta, points[first].delta
        grid = np.round(np.arange(lo + cfg.refine_step, hi - 1e-9, cfg.refine_step), 6)
        extra = [_kurtosis_point(cfg, float(d), chol, Omega, theta_star, threads) for d in grid]
        passing = [pt.delta for pt in extra if pt.passes]
        if passing:
            delta_c = min(passing)
        points = sorted(points + extra, key=lambda pt: pt.delta)
    return KurtosisSweep(epsilon=cfg.epsilon, points=tuple(points), replicates=cfg.replicates, delta_c=delta_c,
                         config=cfg)


def critical_delta_curve(config: KurtosisConfig, epsilons, threads: int | None = 1) -> list[KurtosisSweep]:
    """One :func:`kurtosis_sweep` per sparsity fraction (delta_c versus epsilon)."""
    return [kurtosis_sweep(dataclasses.replace(config, epsilon=float(e)), threads) for e in epsilons]


# ------------------------------------------------------------------ #
# Coverage
# ------------------------------------------------------------------ #


@dataclass(frozen=True)
class CoverageConfig(_Config):
    cov: str = "identity"
    n: int = 600
    p: int = 300
    s0: int = 10
    amplitude: float = 0.15
    sigma: float = 1.0
    alpha: float = 0.05
    replicates: int = 500
    mode: str = "known"            # "known", "nodewise" or "split"
    lambda_kappa: float = SQRT2     # the universal penalty sigma sqrt(2 log p / n)
    lambda_tilde_k: float = 2.0
    sigma_known: bool = True
    seed: int = 0

    def validate(self):
        _check(self.replicates >= 1, "replicates must be >= 1")
        _check(0 <= self.s0 <= self.p, "need 0 <= s0 <= p")
        _check(0 < self.alpha < 1, "alpha must lie in (0, 1)")
        _check(self.mode in ("known", "nodewise", "split"), "mode must be known, nodewise or split")
        _check(self.n >= 2 and self.p >= 1, "need n >= 2 and p >= 1")
        _check(self.sigma > 0, "sigma must be positive")
        self.covariance()
        return self


@dataclass(frozen=True)
class CoverageReport:
    alpha: float
    coverage: np.ndarray          # per-coordinate hit rate
    mean_length: np.ndarray       # per-coordinate average interval length
    replicates: int
    null_pvalues: np.ndarray      # pooled over replicates and null coordinates
    theta_star: np.ndarray

    @property
    def mean_coverage(self) -> float:
        return float(self.coverage.mean())

    @property
    def average_length(self) -> float:
        return float(self.mean_length.mean())

    @property
    def null_ks_distance(self) -> float:
        if self.null_pvalues.size == 0:
            return float("nan")
        return float(stats.kstest(self.null_pvalues, "uniform").statistic)


def coverage_experiment(config: CoverageConfig, threads: int | None = 1) -> CoverageReport:
    """Sample, fit, debias and form intervals ``replicates`` times.

    The signal is drawn once; design and noise are redrawn per replicate.
    """
    cfg = config.validate()
    model = cfg.covariance()
    Sigma = build_covariance(model)
    chol = cholesky_factor(Sigma)
    Omega = precision_matrix(Sigma)
    signal = make_sparse_signal(cfg.p, cfg.s0, cfg.amplitude, make_rng(cfg.seed, 0, ROLE_SIGNAL))
    null = signal.theta == 0

    def one(rep):
        d = simulate(model, cfg.n, cfg.s0, cfg.amplitude, cfg.sigma, cfg.seed, rep + 1, Sigma=Sigma, chol=chol,
                     signal=signal)
        if cfg.mode == "split":
            a, b = split_dataset(d, cfg.seed * 1_000_003 + rep)
            fit = lasso_fit(b.X, b.y, _lambda(cfg.lambda_kappa, cfg.sigma, b.n, cfg.p))
            Xc, yc = a.X, a.y
            M = Omega
            sig_data = (b.X, b.y)
        else:
            fit = lasso_fit(d.X, d.y, _lambda(cfg.lambda_kappa, cfg.sigma, cfg.n, cfg.p))
            Xc, yc = d.X, d.y
            M = Omega if cfg.mode == "known" else nodewise_lasso(d.X, K=cfg.lambda_tilde_k).M
            sig_data = (d.X, d.y)
        sigma_hat = cfg.sigma if cfg.sigma_known else scaled_lasso_fit(*sig_data).sigma_hat
        mode = {"known": KNOWN_OMEGA, "nodewise": NODEWISE, "split": SAMPLE_SPLIT}[cfg.mode]
        res = debias(Xc, yc, fit, M, sigma_hat, mode)
        iv = confidence_intervals(res, cfg.alpha)
        pv = p_values(res)
        return iv.covers(signal.theta), 2.0 * iv.half_width, pv.p[null]

    out = parallel_map(one, range(cfg.replicates), threads)
    hits = np.array([o[0] for o in out], dtype=float)
    lengths = np.array([o[1] for o in out])
    nullp = np.concatenate([o[2] for o in out]) if out else np.zeros(0)
    return CoverageReport(alpha=cfg.alpha, coverage=hits.mean(axis=0), mean_length=lengths.mean(axis=0),
                          replicates=cfg.replicates, null_pvalues=nullp, theta_star=signal.theta)


# ------------------------------------------------------------------ #
# Risk curves (SURE)
# ------------------------------------------------------------------ #


@dataclass(frozen=True)
class RiskConfig(_Config):
    cov: str = "circulant:0.1"
    n: int = 360
    p: int = 1000
    s0: int = 20
    amplitude: float = 0.1
    sigma: float = 1.0
    lambda_grid: tuple = ()        # empty: 20 log-spaced values below the null threshold
    replicates: int = 20
    sigma_mode: str = "refit"      # "refit" (noise_refit) or "true"
    seed: int = 0

    def validate(self):
        _check(self.replicates >= 1, "replicates must be >= 1")
        _check(0 <= self.s0 <= self.p, "need 0 <= s0 <= p")
        _check(all(l > 0 for l in self.lambda_grid), "lambda_grid must be positive")
        _check(self.sigma_mode in ("refit", "true"), "sigma_mode must be refit or true")
        _check(self.sigma > 0, "sigma must be positive")
        self.covariance()
        return self


@dataclass(frozen=True)
class RiskCurve:
    lambdas: np.ndarray
    R_true: np.ndarray            # replicates x len(lambdas)
    R_naive: np.ndarray
    R_sure: np.ndarray
    df: np.ndarray
    sigma_hat: np.ndarray         # per replicate

    def means(self) -> dict:
        return {"R_true": self.R_true.mean(axis=0), "R_naive": self.R_naive.mean(axis=0),
                "R_sure": self.R_sure.mean(axis=0)}


def _default_lambda_grid(cfg: RiskConfig) -> np.ndarray:
    # log-spaced from the order of the universal threshold up to several times it
    base = cfg.sigma * math.sqrt(math.log(cfg.p) / cfg.n)
    return np.geomspace(0.5 * base, 6.0 * base, 20)


def risk_curve(config: RiskConfig, threads: int | None = 1) -> RiskCurve:
    """True, naive and SURE prediction risk of the Lasso along a lambda grid.

    Each replicate draws a fresh signal, design and noise, estimates sigma
    once (least squares after scaled-Lasso selection, or the true value), and
    walks the grid from large to small lambda with warm starts.
    """
    cfg = config.validate()
    model = cfg.covariance()
    Sigma = build_covariance(model)
    chol = cholesky_factor(Sigma)
    lambdas = np.array(sorted(cfg.lambda_grid) if cfg.lambda_grid else _default_lambda_grid(cfg), dtype=float)
    order = np.argsort(-lambdas)

    def one(rep):
        d = simulate(model, cfg.n, cfg.s0, cfg.amplitude, cfg.sigma, cfg.seed, rep, Sigma=Sigma, chol=chol)
        sigma_hat = noise_refit(d.X, d.y) if cfg.sigma_mode == "refit" else cfg.sigma
        Xt = np.ascontiguousarray(d.X.T)
        rows = np.empty((lambdas.size, 4))
        warm = None
        for j in order:
            fit = lasso_fit(d.X, d.y, lambdas[j], warm_start=warm, Xt=Xt)
            warm = fit.theta_hat
            rt = sure_estimate(d.X, d.y, fit, sigma_hat)
            rows[j] = (prediction_error(d.X, fit, d.theta_star, d.w), rt.R_naive, rt.R_sure, rt.df)
        return rows, sigma_hat

    out = parallel_map(one, range(cfg.replicates), threads)
    A = np.array([o[0] for o in out])
    return RiskCurve(lambdas=lambdas, R_true=A[:, :, 0], R_naive=A[:, :, 1], R_sure=A[:, :, 2],
                     df=A[:, :, 3].astype(int), sigma_hat=np.array([o[1] for o in out]))


# ------------------------------------------------------------------ #
# Two-step estimator
# ------------------------------------------------------------------ #


@dataclass(frozen=True)
class TwoStepConfig(_Config):
    cov: str = "identity"
    n: int = 1500
    p: int = 2000
    s0: int = 50
    amplitude: float | None = None     # None: three times the (unit-Omega) threshold
    sigma: float = 1.0
    lambda_kappa: float = 8.0
    bound_factor: float = 1.3
    replicates: int = 200
    seed: int = 0

    def validate(self):
        _check(0 < self.s0 < self.p, "two-step needs 0 < s0 < p")
        _check(self.replicates >= 1, "replicates must be >= 1")
        _check(self.sigma > 0, "sigma must be positive")
        self.covariance()
        return self


@dataclass(frozen=True)
class TwoStepReport:
    errors: np.ndarray           # ||theta2 - theta*||^2 per replicate
    lasso_errors: np.ndarray
    debiased_errors: np.ndarray
    bound: float                 # bound_factor * (2 s0 sigma^2 / n) log(p/s0) * mean_{supp} Omega_ii
    amplitude: float

    @property
    def fraction_within(self) -> float:
        return float(np.mean(self.errors <= self.bound))


def two_step_experiment(config: TwoStepConfig, threads: int | None = 1) -> TwoStepReport:
    """Lasso at ``kappa sigma sqrt(log p / n)``, debias with the true precision
    matrix, soft-threshold at the two-step levels, and compare the squared
    error with the minimax-rate bound."""
    cfg = config.validate()
    model = cfg.covariance()
    Sigma = build_covariance(model)
    chol = cholesky_factor(Sigma)
    Omega = precision_matrix(Sigma)
    amp = cfg.amplitude
    if amp is None:
        amp = 3.0 * float(two_step_thresholds([1.0], cfg.sigma, cfg.n, cfg.p, cfg.s0)[0])
    lam = _lambda(cfg.lambda_kappa, cfg.sigma, cfg.n, cfg.p)

    def one(rep):
        d = simulate(model, cfg.n, cfg.s0, amp, cfg.sigma, cfg.seed, rep, Sigma=Sigma, chol=chol)
        fit = lasso_fit(d.X, d.y, lam)
        res = debias(d.X, d.y, fit, Omega, cfg.sigma)
        est = two_step_estimate(res, Omega, cfg.sigma, cfg.s0)
        supp = np.flatnonzero(d.theta_star)
        bound = (cfg.bound_factor * 2.0 * cfg.s0 * cfg.sigma**2 / cfg.n * math.log(cfg.p / cfg.s0)
                 * float(np.mean(np.diag(Omega)[supp])))
        sq = lambda v: float(np.sum((v - d.theta_star) ** 2))  # noqa: E731
        return sq(est.theta2), sq(fit.theta_hat), sq(res.theta_d), bound

    out = np.array(parallel_map(one, range(cfg.replicates), threads))
    return TwoStepReport(errors=out[:, 0], lasso_errors=out[:, 1], debiased_errors=out[:, 2],
                         bound=float(out[0, 3]), amplitude=float(amp))


# ------------------------------------------------------------------ #
# Denoiser approximation
# ------------------------------------------------------------------ #


@dataclass(frozen=True)
class DenoiserConfig(_Config):
    cov: str = "identity"
    n: int = 800
    p: int = 400
    s0: int = 10
    amplitude: float = 1.0
    sigma: float = 1.0
    lambda_kappa: float = 8.0
    replicates: int = 50
    quadrature_nodes: int = 201
    seed: int = 0

    def validate(self):
        _check(0 <= self.s0 <= self.p, "need 0 <= s0 <= p")
        _check(self.replicates >= 1, "replicates must be >= 1")
        _check(self.sigma >= 0, "sigma must be nonnegative")
        self.covariance()
        return self


@dataclass(frozen=True)
class DenoiserReport:
    lasso_err: np.ndarray         # ||theta_hat - theta*||^2
    approx_gap: np.ndarray        # ||theta_hat - eta_Sigma(theta* + Omega X^T w / n)||^2
    predicted_err: float | None   # soft-thresholding risk on the support (Sigma = I only)

    @property
    def ratio(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(self.lasso_err > 0, self.approx_gap / self.lasso_err, 0.0)

    @property
    def median_ratio(self) -> float:
        return float(np.median(self.ratio))


def soft_threshold_risk(mu, noise_sd: float, lam: float, nodes: int = 201) -> np.ndarray:
    """``E[(eta(mu + noise_sd Z; lam) - mu)^2]`` for ``Z ~ N(0, 1)`` by Gauss-Hermite quadrature."""
    x, wts = np.polynomial.hermite_e.hermegauss(nodes)
    wts = wts / wts.sum()
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    vals = soft_threshold(mu[:, None] + noise_sd * x[None, :], lam) - mu[:, None]
    return (vals**2) @ wts


def denoiser_approximation_check(config: DenoiserConfig, threads: int | None = 1) -> DenoiserReport:
    """Compare the Lasso with ``eta_Sigma(theta* + Omega X^T w / n)`` replicate by replicate."""
    cfg = config.validate()
    model = cfg.covariance()
    Sigma = build_covariance(model)
    chol = cholesky_factor(Sigma)
    Omega = precision_matrix(Sigma)
    lam = _lambda(cfg.lambda_kappa, cfg.sigma if cfg.sigma > 0 else 1.0, cfg.n, cfg.p)

    def one(rep):
        d = simulate(model, cfg.n, cfg.s0, cfg.amplitude, cfg.sigma, cfg.seed, rep, Sigma=Sigma, chol=chol)
        fit = lasso_fit(d.X, d.y, lam, gap_tol=1e-12)
        z = d.theta_star + Omega @ (d.X.T @ d.w) / cfg.n
        eta = sigma_denoiser(z, Sigma, lam)
        return (float(np.sum((fit.theta_hat - d.theta_star) ** 2)), float(np.sum((fit.theta_hat - eta) ** 2)))

    out = np.array(parallel_map(one, range(cfg.replicates), threads))
    predicted = None
    if model.kind == "identity":
        mu = np.full(cfg.s0, cfg.amplitude)
        predicted = float(soft_threshold_risk(mu, cfg.sigma / math.sqrt(cfg.n), lam, cfg.quadrature_nodes).sum())
    return DenoiserReport(lasso_err=out[:, 0], approx_gap=out[:, 1], predicted_err=predicted)


# ------------------------------------------------------------------ #
# Bias growth (R versus s0)
# ------------------------------------------------------------------ #


def bias_growth(cov: str, n: int, p: int, s0_values, amplitude: float, sigma: float = 1.0,
                lambda_kappa: float = 8.0, replicates: int = 20, seed: int = 0, threads: int | None = 1) -> np.ndarray:
    """Median ``||R||_inf`` (known Omega) for each sparsity in ``s0_values``."""
    model = CovarianceModel.parse(cov, p)
    Sigma = build_covariance(model)
    chol = cholesky_factor(Sigma)
    Omega = precision_matrix(Sigma)
    lam = _lambda(lambda_kappa, sigma, n, p)
    med = []
    for k, s0 in enumerate(s0_values):
        def one(rep, s0=s0, k=k):
            d = simulate(model, n, s0, amplitude, sigma, seed, k * 100_000 + rep, Sigma=Sigma, chol=chol)
            fit = lasso_fit(d.X, d.y, lam)
            return decompose_bias_noise(d.X, d.w, d.theta_star, fit, Omega, check_y=d.y).R_inf
        med.append(float(np.median(parallel_map(one, range(replicates), threads))))
    return np.array(med)


# ------------------------------------------------------------------ #
# Report emission
# ------------------------------------------------------------------ #


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([format_float(v) if isinstance(v, (float, np.floating)) else v for v in row])


def write_report(outdir, kind: str, config: dict, header, rows, summary: dict | None = None,
                 svg: str | None = None) -> Path:
    """Write ``meta.json`` (kind, config, seed, version, summary), ``results.csv`` and optionally ``plot.svg``."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    meta = {"kind": kind, "config": config, "seed": config.get("seed"), "version": __version__,
            "summary": summary or {}}
    (outdir / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True, default=_json_default) + "\n")
    write_csv(outdir / "results.csv", header, rows)
    if svg is not None:
        (outdir / "plot.svg").write_text(svg)
    return outdir


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialize {type(o)}")


def kurtosis_rows(sweeps: list[KurtosisSweep]):
    header = ["epsilon", "delta", "n", "mean_kurtosis", "sd_kurtosis", "se_kurtosis", "passes"]
    rows = [[s.epsilon, pt.delta, pt.n, pt.mean_kurtosis, pt.sd_kurtosis, pt.se_kurtosis, int(pt.passes)]
            for s in sweeps for pt in s.points]
    return header, rows


def kurtosis_svg(sweeps: list[KurtosisSweep]) -> str:
    if len(sweeps) == 1:
        s = sweeps[0]
        d = list(s.deltas)
        m, se = s.mean_kurtosis, s.se_kurtosis
        series = [("m(gamma)", d, list(m)), ("m + SE", d, list(m + se)), ("m - SE", d, list(m - se))]
        return line_plot_svg(series, title=f"Excess kurtosis, epsilon = {s.epsilon:g}, delta_c = {s.delta_c}",
                             xlabel="delta = n/p", ylabel="mean excess kurtosis", dashed={"m + SE", "m - SE"})
    eps = [s.epsilon for s in sweeps if s.delta_c is not None]
    dc = [s.delta_c for s in sweeps if s.delta_c is not None]
    return line_plot_svg([("delta_c", eps, dc)], title="Critical sampling ratio", xlabel="epsilon = s0/p",
                         ylabel="delta_c")
