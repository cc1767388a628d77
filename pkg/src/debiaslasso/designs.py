"""Population covariance models, Gaussian design sampling and data I/O.

The simulation model is ``y = X @ theta_star + w`` with rows of ``X`` drawn
i.i.d. from ``N(0, Sigma)`` and ``w ~ N(0, sigma^2 I)``.  No intercept and no
column standardization are applied anywhere in the package.

Randomness is always derived from ``numpy.random.SeedSequence`` keyed by
``(seed, replicate, role)`` so that Monte-Carlo replicates can be computed in
any order, on any number of threads, and still produce identical draws.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import BadSparsity, DiagonalTooLarge, DimensionMismatch, NotSPD, ValidationError

# stream roles for make_rng
ROLE_DESIGN = 0
ROLE_NOISE = 1
ROLE_SIGNAL = 2
ROLE_SPLIT = 3

_DIAG_TOL = 1e-12
OMEGA_ZERO_TOL = 1e-10


def make_rng(seed: int, *key: int) -> np.random.Generator:
    """Return a generator for the stream identified by ``(seed, *key)``."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key)))


@dataclass(frozen=True)
class CovarianceModel:
    """Description of a population covariance matrix.

    Use the constructors :meth:`identity`, :meth:`circulant`,
    :meth:`block_diagonal` and :meth:`dense` rather than the raw initializer.
    """

    kind: str
    p: int
    r: float | None = None
    block: np.ndarray | None = field(default=None, compare=False)
    count: int | None = None
    matrix: np.ndarray | None = field(default=None, compare=False)

    @classmethod
    def identity(cls, p: int) -> "CovarianceModel":
        return cls("identity", _positive_int(p, "p"))

    @classmethod
    def circulant(cls, p: int, r: float) -> "CovarianceModel":
        r = float(r)
        if not 0.0 < r < 1.0:
            raise ValidationError(f"circulant parameter r must lie in (0, 1), got {r}")
        return cls("circulant", _positive_int(p, "p"), r=r)

    @classmethod
    def block_diagonal(cls, block, count: int) -> "CovarianceModel":
        block = np.array(block, dtype=float, ndmin=2)
        count = _positive_int(count, "count")
        return cls("block", block.shape[0] * count, block=block, count=count)

    @classmethod
    def dense(cls, matrix) -> "CovarianceModel":
        matrix = np.array(matrix, dtype=float, ndmin=2)
        return cls("dense", matrix.shape[0], matrix=matrix)

    @classmethod
    def parse(cls, text: str, p: int) -> "CovarianceModel":
        """Parse ``identity`` or ``circulant:<r>`` (the CLI notation)."""
        kind, _, arg = text.partition(":")
        kind = kind.strip().lower()
        if kind == "identity":
            return cls.identity(p)
        if kind == "circulant":
            if not arg:
                raise ValidationError("circulant covariance needs a parameter, e.g. circulant:0.8")
            return cls.circulant(p, float(arg))
        raise ValidationError(f"unknown covariance model {text!r}")

    def describe(self) -> str:
        if self.kind == "circulant":
            return f"circulant:{self.r!r}"
        return self.kind


def _positive_int(value, name: str) -> int:
    if int(value) != value or value < 1:
        raise ValidationError(f"{name} must be a positive integer, got {value}")
    return int(value)


def _check_spd(S: np.ndarray) -> np.ndarray:
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise NotSPD(f"expected a square matrix, got shape {S.shape}")
    if not np.all(np.isfinite(S)):
        raise NotSPD("matrix has non-finite entries")
    if not np.allclose(S, S.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(S).max())):
        raise NotSPD("matrix is not symmetric")
    try:
        return np.linalg.cholesky(S)
    except np.linalg.LinAlgError as exc:
        raise NotSPD("Cholesky factorization failed") from exc


def build_covariance(model: CovarianceModel) -> np.ndarray:
    """Realize the p x p covariance matrix described by ``model``."""
    p = model.p
    if model.kind == "identity":
        S = np.eye(p)
    elif model.kind == "circulant":
        idx = np.arange(p)
        S = model.r ** np.abs(idx[:, None] - idx[None, :]).astype(float)
    elif model.kind == "block":
        _check_spd(model.block)
        S = np.kron(np.eye(model.count), model.block)
    elif model.kind == "dense":
        S = model.matrix
    else:
        raise ValidationError(f"unknown covariance kind {model.kind!r}")
    _check_spd(S)
    if np.any(np.diag(S) > 1.0 + _DIAG_TOL):
        raise DiagonalTooLarge(f"max diagonal entry {np.diag(S).max():.6g} exceeds 1")
    return S


def precision_matrix(Sigma: np.ndarray) -> np.ndarray:
    """Inverse of an SPD matrix via its Cholesky factor, symmetrized."""
    Sigma = np.asarray(Sigma, dtype=float)
    L = _check_spd(Sigma)
    Linv = np.linalg.solve(L, np.eye(L.shape[0]))
    Omega = Linv.T @ Linv
    return 0.5 * (Omega + Omega.T)


def row_sparsity(Omega: np.ndarray, tol: float = OMEGA_ZERO_TOL) -> int:
    """Maximum number of off-diagonal entries above ``tol`` in any row."""
    mask = np.abs(Omega) > tol
    np.fill_diagonal(mask, False)
    return int(mask.sum(axis=1).max(initial=0))


def sample_design(Sigma: np.ndarray | None, n: int, seed: int | np.random.Generator,
                  chol: np.ndarray | None = None) -> np.ndarray:
    """Draw an ``n x p`` matrix with i.i.d. ``N(0, Sigma)`` rows.

    Rows are ``L @ g`` with ``L`` the lower Cholesky factor of ``Sigma`` and
    ``g`` standard normal.  Repeated callers can pass ``chol`` (the factor)
    instead of ``Sigma``.
    """
    n = _positive_int(n, "n")
    L = chol if chol is not None else _check_spd(np.asarray(Sigma, dtype=float))
    rng = seed if isinstance(seed, np.random.Generator) else make_rng(seed, 0, ROLE_DESIGN)
    G = rng.standard_normal((n, L.shape[0]))
    if _is_identity(L):
        return G
    return G @ L.T


def _is_identity(L: np.ndarray) -> bool:
    return bool(np.all(np.diag(L) == 1.0) and np.count_nonzero(L) == L.shape[0])


def cholesky_factor(Sigma: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor after SPD validation."""
    return _check_spd(np.asarray(Sigma, dtype=float))


def sample_response(X, theta_star, sigma: float, seed: int | np.random.Generator):
    """Return ``(y, w)`` with ``w ~ N(0, sigma^2 I)`` and ``y = X theta_star + w``."""
    X = np.asarray(X, dtype=float)
    theta_star = np.asarray(theta_star, dtype=float)
    if theta_star.shape != (X.shape[1],):
        raise DimensionMismatch(f"theta_star has shape {theta_star.shape}, X has {X.shape[1]} columns")
    if sigma < 0:
        raise ValidationError(f"sigma must be nonnegative, got {sigma}")
    rng = seed if isinstance(seed, np.random.Generator) else make_rng(seed, 0, ROLE_NOISE)
    w = sigma * rng.standard_normal(X.shape[0])
    return X @ theta_star + w, w


def empirical_covariance(X) -> np.ndarray:
    """``X^T X / n``, exactly symmetric."""
    X = np.asarray(X, dtype=float)
    S = X.T @ X / X.shape[0]
    return 0.5 * (S + S.T)


@dataclass(frozen=True)
class SparseSignal:
    theta: np.ndarray
    support: np.ndarray

    @property
    def s0(self) -> int:
        return int(self.support.size)


def make_sparse_signal(p: int, s0: int, amplitude: float, seed: int | np.random.Generator) -> SparseSignal:
    """``s0`` coordinates chosen uniformly without replacement, set to ``amplitude``."""
    if s0 < 0 or s0 > p:
        raise BadSparsity(f"need 0 <= s0 <= p, got s0={s0}, p={p}")
    rng = seed if isinstance(seed, np.random.Generator) else make_rng(seed, 0, ROLE_SIGNAL)
    support = np.sort(rng.choice(p, size=s0, replace=False)) if s0 else np.zeros(0, dtype=int)
    theta = np.zeros(p)
    theta[support] = amplitude
    return SparseSignal(theta=theta, support=support)


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    y: np.ndarray
    theta_star: np.ndarray | None = None
    w: np.ndarray | None = None
    sigma: float | None = None
    seed: int = 0
    Sigma: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        X, y = self.X, self.y
        if X.ndim != 2 or y.shape != (X.shape[0],):
            raise DimensionMismatch(f"X has shape {X.shape}, y has shape {y.shape}")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ValidationError("dataset contains NaN or Inf")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]


def simulate(model: CovarianceModel, n: int, s0: int, amplitude: float, sigma: float, seed: int,
             replicate: int = 0, *, Sigma=None, chol=None, signal: SparseSignal | None = None) -> Dataset:
    """Draw one complete dataset (design, signal, noise) from ``model``.

    ``Sigma``/``chol``/``signal`` may be passed to reuse work across replicates;
    by default the signal is redrawn for each replicate.
    """
    if Sigma is None:
        Sigma = build_covariance(model)
    if chol is None:
        chol = cholesky_factor(Sigma)
    if signal is None:
        signal = make_sparse_signal(model.p, s0, amplitude, make_rng(seed, replicate, ROLE_SIGNAL))
    X = sample_design(None, n, make_rng(seed, replicate, ROLE_DESIGN), chol=chol)
    y, w = sample_response(X, signal.theta, sigma, make_rng(seed, replicate, ROLE_NOISE))
    return Dataset(X=X, y=y, theta_star=signal.theta, w=w, sigma=float(sigma), seed=int(seed), Sigma=Sigma)


def split_dataset(data: Dataset, seed: int) -> tuple[Dataset, Dataset]:
    """Randomly split into (debiasing batch A, estimation batch B).

    With an odd number of samples the extra row goes to batch B.
    """
    if data.n < 2:
        raise ValidationError("need at least two samples to split")
    perm = make_rng(seed, 0, ROLE_SPLIT).permutation(data.n)
    na = data.n // 2
    parts = []
    for idx in (np.sort(perm[:na]), np.sort(perm[na:])):
        parts.append(Dataset(
            X=data.X[idx], y=data.y[idx], theta_star=data.theta_star,
            w=None if data.w is None else data.w[idx], sigma=data.sigma, seed=data.seed, Sigma=data.Sigma,
        ))
    return parts[0], parts[1]


# ---------------------------------------------------------------- I/O


def format_float(x: float) -> str:
    return repr(float(x))


def write_matrix_csv(path, A) -> None:
    """Row-major CSV with header ``c0..c{p-1}``; vectors are written as one column."""
    A = np.asarray(A, dtype=float)
    if A.ndim == 1:
        A = A[:, None]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"c{j}" for j in range(A.shape[1])])
        for row in A:
            writer.writerow([format_float(v) for v in row])


def read_matrix_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValidationError(f"{path} is empty")
    return np.array([[float(v) for v in row] for row in rows[1:]], dtype=float).reshape(len(rows) - 1, len(rows[0]))


def save_dataset(data: Dataset, outdir) -> Path:
    """Write X.csv, y.csv (and truth files when present) plus the meta.json envelope."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    write_matrix_csv(outdir / "X.csv", data.X)
    write_matrix_csv(outdir / "y.csv", data.y)
    meta = {"n": data.n, "p": data.p, "seed": data.seed, "sigma": data.sigma,
            "X_path": "X.csv", "y_path": "y.csv"}
    if data.theta_star is not None:
        meta["theta_star"] = [float(v) for v in data.theta_star]
    if data.w is not None:
        write_matrix_csv(outdir / "w.csv", data.w)
        meta["w_path"] = "w.csv"
    if data.Sigma is not None:
        write_matrix_csv(outdir / "Sigma.csv", data.Sigma)
        meta["Sigma_path"] = "Sigma.csv"
    path = outdir / "meta.json"
    path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return path


def load_dataset(meta_path) -> Dataset:
    meta_path = Path(meta_path)
    if meta_path.is_dir():
        meta_path = meta_path / "meta.json"
    meta = json.loads(meta_path.read_text())
    base = meta_path.parent
    X = read_matrix_csv(base / meta["X_path"])
    y = read_matrix_csv(base / meta["y_path"])[:, 0]
    if X.shape != (meta["n"], meta["p"]):
        raise DimensionMismatch(f"X.csv has shape {X.shape}, envelope says ({meta['n']}, {meta['p']})")
    theta = meta.get("theta_star")
    w = read_matrix_csv(base / meta["w_path"])[:, 0] if "w_path" in meta else None
    Sigma = read_matrix_csv(base / meta["Sigma_path"]) if "Sigma_path" in meta else None
    sigma = meta.get("sigma")
    return Dataset(X=X, y=y, theta_star=None if theta is None else np.array(theta, dtype=float),
                   w=w, sigma=None if sigma is None else float(sigma), seed=int(meta.get("seed", 0)), Sigma=Sigma)


def default_lambda(n: int, p: int, sigma: float, kappa: float = 8.0) -> float:
    """``kappa * sigma * sqrt(log p / n)``; kappa = 8 is the bottom of the admissible range."""
    return kappa * sigma * math.sqrt(math.log(max(p, 2)) / n)
