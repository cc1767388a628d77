"""Command-line front end: ``debiaslasso {simulate,fit,infer,experiment}``.

Exit codes: 0 on success, 2 on invalid input, 1 on any other failure.  On
failure stderr carries ``<ErrorClassName>: <message>``.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, diagnostics as dg
from .debias import KNOWN_OMEGA, NODEWISE, SAMPLE_SPLIT, debias, debias_split
from .designs import (
    CovarianceModel, default_lambda, load_dataset, precision_matrix, save_dataset, simulate,
    split_dataset,
)
from .errors import DimensionMismatch, ValidationError
from .inference import confidence_intervals, p_values, write_inference_csv, z_multiplier
from .parallel import THREADS_ENV, resolve_threads
from .solvers import default_lambda_tilde, lasso_fit, nodewise_lasso, scaled_lasso_fit

EXPERIMENTS = {
    "kurtosis": dg.KurtosisConfig,
    "coverage": dg.CoverageConfig,
    "risk-curve": dg.RiskConfig,
    "two-step": dg.TwoStepConfig,
    "denoiser-check": dg.DenoiserConfig,
}

PAPER_SCALE = {
    "kurtosis": {"p": 3000, "epsilon": 0.2, "replicates": 100, "cov": "circulant:0.8", "amplitude": 0.15},
    "risk-curve": {"p": 5000, "n": 1800, "s0": 100, "amplitude": 0.1},
    "coverage": {},
    "two-step": {},
    "denoiser-check": {},
}


class UsageError(ValidationError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ------------------------------------------------------------------ #
# simulate / fit / infer
# ------------------------------------------------------------------ #


def cmd_simulate(args) -> None:
    if args.p is None or args.n is None:
        raise UsageError("--p and --n are required")
    model = CovarianceModel.parse(args.cov, args.p)
    data = simulate(model, args.n, args.s0, args.amp, args.sigma, args.seed)
    save_dataset(data, args.out)


def _lambda_for(args, n, p, X=None, y=None) -> float:
    if args.lam is not None:
        if not args.lam > 0:
            raise ValidationError("--lambda must be positive")
        return args.lam
    sigma = args.sigma
    if sigma is None:
        sigma = scaled_lasso_fit(X, y).sigma_hat
    return default_lambda(n, p, sigma, args.kappa)


def cmd_fit(args) -> None:
    data = load_dataset(args.data)
    lam = _lambda_for(args, data.n, data.p, data.X, data.y)
    fit = lasso_fit(data.X, data.y, lam)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(fit.to_json() + "\n")


def cmd_infer(args) -> None:
    data = load_dataset(args.data)
    q = z_multiplier(args.alpha)
    outdir = Path(args.out)
    if args.mode == "known-omega":
        if data.Sigma is None:
            raise ValidationError("known-omega mode needs a Sigma.csv in the dataset envelope")
        if data.Sigma.shape != (data.p, data.p):
            raise DimensionMismatch("Sigma.csv does not match the design dimension")
        Omega = precision_matrix(data.Sigma)
    lam_tilde = None
    if args.mode == "split":
        a, b = split_dataset(data, args.split_seed)
        lam = _lambda_for(args, b.n, b.p, b.X, b.y)
        Omega = precision_matrix(data.Sigma) if data.Sigma is not None else None
        if Omega is None:
            lam_tilde = default_lambda_tilde(a.n, a.p, args.lambda_tilde_k)
        res = debias_split(a, b, lam, Omega=Omega, lambda_tilde=lam_tilde, sigma=args.sigma)
        mode = SAMPLE_SPLIT
    else:
        lam = _lambda_for(args, data.n, data.p, data.X, data.y)
        fit = lasso_fit(data.X, data.y, lam)
        sigma = args.sigma if args.sigma is not None else scaled_lasso_fit(data.X, data.y).sigma_hat
        if args.mode == "known-omega":
            res = debias(data.X, data.y, fit, Omega, sigma, KNOWN_OMEGA)
        else:
            lam_tilde = default_lambda_tilde(data.n, data.p, args.lambda_tilde_k)
            pe = nodewise_lasso(data.X, lam_tilde, threads=resolve_threads(args.threads))
            res = debias(data.X, data.y, fit, pe.M, sigma, NODEWISE, precision=pe)
        mode = res.mode
    iv = confidence_intervals(res, args.alpha)
    pv = p_values(res)
    outdir.mkdir(parents=True, exist_ok=True)
    write_inference_csv(outdir / "inference.csv", res, iv, pv)
    meta = {"kind": "infer", "version": __version__, "data": str(args.data), "mode": mode, "alpha": args.alpha,
            "z_multiplier": round(q, 6), "lambda": lam, "lambda_tilde": lam_tilde, "sigma_hat": res.sigma_hat,
            "n_correction": res.n, "seed": data.seed}
    (outdir / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


# ------------------------------------------------------------------ #
# experiment
# ------------------------------------------------------------------ #


def _parse_value(text: str, default):
    if isinstance(default, bool):
        low = text.lower()
        if low not in ("true", "false", "1", "0", "yes", "no"):
            raise UsageError(f"expected a boolean, got {text!r}")
        return low in ("true", "1", "yes")
    if isinstance(default, tuple):
        return tuple(float(v) for v in text.split(",") if v.strip())
    if isinstance(default, int):
        return int(text)
    if isinstance(default, float) or default is None:
        return float(text)
    return text


def _experiment_config(kind: str, args) -> tuple:
    cls = EXPERIMENTS[kind]
    values: dict = {}
    if args.paper_scale:
        values.update(PAPER_SCALE[kind])
    epsilons = None
    if args.config:
        loaded = json.loads(Path(args.config).read_text())
        if "config" in loaded and isinstance(loaded["config"], dict):
            loaded = loaded["config"]
        loaded = dict(loaded)
        if kind == "kurtosis" and "epsilons" in loaded:
            epsilons = list(loaded.pop("epsilons"))
        values.update(loaded)
    defaults = {f.name: f.default for f in dataclasses.fields(cls)}
    for key, text in args.set or []:
        name = key.replace("-", "_")
        if name not in defaults:
            raise UsageError(f"unknown parameter {key!r} for experiment {kind}")
        values[name] = _parse_value(text, defaults[name])
    for name in defaults:
        text = getattr(args, name, None)
        if text is not None:
            values[name] = _parse_value(text, defaults[name])
    if getattr(args, "r", None) is not None:
        values["cov"] = f"circulant:{args.r}"
    if getattr(args, "epsilons", None):
        epsilons = [float(v) for v in args.epsilons.split(",")]
    cfg = cls.from_dict(values).validate()
    if kind == "kurtosis" and epsilons:
        for e in epsilons:
            dataclasses.replace(cfg, epsilon=e).validate()
    return cfg, epsilons


def run_experiment(kind: str, cfg, outdir, threads: int, epsilons=None) -> Path:
    """Run one experiment and write ``meta.json``, ``results.csv`` and a plot where applicable."""
    config = cfg.to_dict()
    if kind == "kurtosis":
        eps = epsilons or [cfg.epsilon]
        if epsilons:
            config["epsilons"] = list(eps)
        sweeps = dg.critical_delta_curve(cfg, eps, threads)
        header, rows = dg.kurtosis_rows(sweeps)
        summary = {"delta_c": {repr(s.epsilon): s.delta_c for s in sweeps},
                   "grid_too_coarse": [s.epsilon for s in sweeps if s.delta_c is None],
                   "kurtosis_estimator": sweeps[0].kurtosis_estimator}
        return dg.write_report(outdir, kind, config, header, rows, summary, dg.kurtosis_svg(sweeps))
    if kind == "coverage":
        rep = dg.coverage_experiment(cfg, threads)
        header = ["coordinate", "theta_star", "coverage", "mean_length"]
        rows = [[i, float(rep.theta_star[i]), float(rep.coverage[i]), float(rep.mean_length[i])]
                for i in range(rep.coverage.size)]
        summary = {"mean_coverage": rep.mean_coverage, "average_length": rep.average_length,
                   "null_ks_distance": rep.null_ks_distance, "replicates": rep.replicates}
        return dg.write_report(outdir, kind, config, header, rows, summary)
    if kind == "risk-curve":
        rc = dg.risk_curve(cfg, threads)
        m = rc.means()
        header = ["lambda", "R_true", "R_naive", "R_sure"]
        rows = [[float(rc.lambdas[j]), float(m["R_true"][j]), float(m["R_naive"][j]), float(m["R_sure"][j])]
                for j in range(rc.lambdas.size)]
        lam = list(rc.lambdas)
        svg = dg.line_plot_svg([("R_true", lam, list(m["R_true"])), ("R_naive", lam, list(m["R_naive"])),
                                ("R_sure", lam, list(m["R_sure"]))],
                               title=f"Prediction risk, {cfg.cov}", xlabel="lambda", ylabel="risk")
        summary = {"mean_sigma_hat": float(rc.sigma_hat.mean()), "mean_df": [float(v) for v in rc.df.mean(axis=0)]}
        return dg.write_report(outdir, kind, config, header, rows, summary, svg)
    if kind == "two-step":
        ts = dg.two_step_experiment(cfg, threads)
        header = ["replicate", "two_step_error", "lasso_error", "debiased_error", "within_bound"]
        rows = [[k, float(ts.errors[k]), float(ts.lasso_errors[k]), float(ts.debiased_errors[k]),
                 int(ts.errors[k] <= ts.bound)] for k in range(ts.errors.size)]
        summary = {"bound": ts.bound, "fraction_within": ts.fraction_within, "amplitude": ts.amplitude,
                   "median_error": float(np.median(ts.errors))}
        return dg.write_report(outdir, kind, config, header, rows, summary)
    if kind == "denoiser-check":
        dn = dg.denoiser_approximation_check(cfg, threads)
        header = ["replicate", "lasso_err", "approx_gap", "ratio"]
        rows = [[k, float(dn.lasso_err[k]), float(dn.approx_gap[k]), float(dn.ratio[k])]
                for k in range(dn.lasso_err.size)]
        summary = {"median_ratio": dn.median_ratio, "predicted_err": dn.predicted_err,
                   "mean_lasso_err": float(dn.lasso_err.mean())}
        return dg.write_report(outdir, kind, config, header, rows, summary)
    raise UsageError(f"unknown experiment {kind!r}")


def cmd_experiment(args) -> None:
    cfg, epsilons = _experiment_config(args.kind, args)
    run_experiment(args.kind, cfg, args.out, resolve_threads(args.threads), epsilons)


# ------------------------------------------------------------------ #
# argument parsing
# ------------------------------------------------------------------ #


def _add_lambda_flags(p):
    p.add_argument("--lambda", dest="lam", type=float, default=None, help="Lasso penalty (overrides --kappa)")
    p.add_argument("--kappa", type=float, default=8.0, help="lambda = kappa sigma sqrt(log p / n)")
    p.add_argument("--sigma", type=float, default=None, help="known noise level (default: scaled-Lasso estimate)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="debiaslasso", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--threads", type=int, default=None,
                        help=f"worker threads (default: ${THREADS_ENV} or all cores)")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="draw a dataset")
    s.add_argument("--cov", default="identity", help="identity or circulant:<r>")
    s.add_argument("--p", type=int)
    s.add_argument("--n", type=int)
    s.add_argument("--s0", type=int, default=0)
    s.add_argument("--amp", type=float, default=1.0)
    s.add_argument("--sigma", type=float, default=1.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", default="data")
    s.set_defaults(func=cmd_simulate)

    f = sub.add_parser("fit", help="fit the Lasso to a dataset")
    f.add_argument("--data", required=True, help="dataset directory or its meta.json")
    _add_lambda_flags(f)
    f.add_argument("--out", default="fit.json")
    f.set_defaults(func=cmd_fit)

    i = sub.add_parser("infer", help="debiased estimates, confidence intervals and p-values")
    i.add_argument("--data", required=True)
    i.add_argument("--mode", choices=["known-omega", "nodewise", "split"], default="nodewise")
    i.add_argument("--alpha", type=float, default=0.05)
    i.add_argument("--lambda-tilde-k", type=float, default=2.0)
    i.add_argument("--split-seed", type=int, default=0)
    _add_lambda_flags(i)
    i.add_argument("--out", default="inference")
    i.set_defaults(func=cmd_infer)

    e = sub.add_parser("experiment", help="Monte-Carlo experiments")
    e.add_argument("kind", choices=sorted(EXPERIMENTS))
    e.add_argument("--config", help="JSON config, or a meta.json from a previous run")
    e.add_argument("--paper-scale", action="store_true", help="use the full-size configuration (slow)")
    e.add_argument("--set", nargs=2, action="append", metavar=("KEY", "VALUE"), help="override any config key")
    e.add_argument("--epsilons", help="kurtosis only: comma-separated sparsity fractions")
    e.add_argument("--r", type=float, help="shorthand for --cov circulant:<r>")
    e.add_argument("--out", default="report")
    names = sorted({fl.name for cls in EXPERIMENTS.values() for fl in dataclasses.fields(cls)})
    for name in names:
        e.add_argument("--" + name.replace("_", "-"), dest=name, default=None)
    e.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.command == "experiment":
            allowed = {fl.name for fl in dataclasses.fields(EXPERIMENTS[args.kind])}
            stray = [n for n in vars(args) if n not in allowed and getattr(args, n) is not None
                     and n in {fl.name for cls in EXPERIMENTS.values() for fl in dataclasses.fields(cls)}]
            if stray:
                raise UsageError(f"parameters {stray} do not apply to experiment {args.kind}")
        args.func(args)
    except ValidationError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError, KeyError) as exc:
        name = type(exc).__name__
        code = 2 if isinstance(exc, (ValueError, KeyError, FileNotFoundError)) else 1
        print(f"{name}: {exc}", file=sys.stderr)
        return code
    except Exception as exc:  # noqa: BLE001
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
