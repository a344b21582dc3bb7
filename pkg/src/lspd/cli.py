"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .depth import SPD, DepthGeometry, HdlssParams, KernelSpec, hdlss_lspd_limits, hdlss_spd_limits
from .errors import (
    DegenerateFeatureError,
    IngestionError,
    InsufficientDataError,
    InvalidDataError,
    InvalidLabelsError,
    InvalidParameterError,
    NumericalError,
    ShapeError,
)
from .harness import config_from_dict, ingest_csv, read_config_file, run_experiment
from .multiscale import class_whiteners
from .numerics import identity_whitener, parse_mode
from .simgen import ExampleSpec, bayes_risk_mc, make_rng

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

# flag name -> ExperimentConfig field
EXPERIMENT_FLAGS = {
    "example": "source",
    "d": "d",
    "n_train": "n_train",
    "n_test": "n_test",
    "reps": "reps",
    "classifiers": "classifiers",
    "seed": "seed",
    "scatter": "scatter",
    "M": "M",
    "cauchy_scale": "cauchy_scale",
    "df": "df",
    "lambda_": "lam",
    "cv_mode": "cv_mode",
    "fit_features": "fit_features",
    "jobs": "jobs",
    "data": "source",
    "train_frac": "train_frac",
    "label_column": "label_column",
    "delimiter": "delimiter",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _experiment_flags(p, simulated: bool):
    p.add_argument("--config", help="key = value file; flags override it")
    if simulated:
        p.add_argument("--example", choices=["E1", "E2", "E3", "E4", "E5"])
        p.add_argument("--d", type=int)
        p.add_argument("--n-train", type=int, help="training points per class")
        p.add_argument("--n-test", type=int, help="test points per class")
    else:
        p.add_argument("--data", help="CSV file with a label column")
        p.add_argument("--train-frac", type=float)
        p.add_argument("--label-column")
        p.add_argument("--delimiter")
    p.add_argument("--reps", type=int)
    p.add_argument("--classifiers", help="comma list of SPD,LSPD,LDA,QDA,KNN,KDE,BAYES")
    p.add_argument("--seed", type=int)
    p.add_argument("--scatter", choices=["auto", "full", "diagonal", "identity"])
    p.add_argument("--M", type=int, help="number of sampled bandwidths")
    p.add_argument("--cauchy-scale", type=float)
    p.add_argument("--df", type=int)
    p.add_argument("--lambda", dest="lambda_", type=float)
    p.add_argument("--cv-mode", choices=["loo-features", "kfold"])
    p.add_argument("--fit-features", choices=["loo", "full"])
    p.add_argument("--jobs", type=int)
    p.add_argument("--out", help="directory for report.txt and report.csv")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lspd", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    _experiment_flags(sub.add_parser("simulate", help="run a simulated-example experiment"), True)
    _experiment_flags(sub.add_parser("bench", help="run an experiment on a CSV dataset"), False)

    p = sub.add_parser("bayes-risk", help="Monte Carlo Bayes risk of simulated examples")
    p.add_argument("--example", required=True, help="comma list of example ids")
    p.add_argument("--d", default="5", help="comma list of dimensions")
    p.add_argument("--N", type=int, default=100_000, help="draws per class")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")

    p = sub.add_parser("hdlss", help="high-dimension convergence sweep of depth features")
    p.add_argument("--d", default="10,100,1000", help="comma list of dimensions")
    p.add_argument("--sigma2", default="1,4", help="per-class variances")
    p.add_argument("--mu", type=float, default=0.0, help="class-2 mean offset per coordinate")
    p.add_argument("--h-rule", default="spd", help="spd | sqrt:A (h = sqrt(d)/A) | const:h")
    p.add_argument("--n", type=int, default=200, help="sample and query size per class")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")

    p = sub.add_parser("depth", help="print SPD / LSPD features of query points")
    p.add_argument("--train", required=True, help="labelled CSV")
    p.add_argument("--query", required=True, help="CSV of query points (same feature columns)")
    p.add_argument("--label-column", default="label")
    p.add_argument("--delimiter", default=",")
    p.add_argument("--h", default="", help="comma list of bandwidths; empty for SPD only")
    p.add_argument("--scatter", default="auto", choices=["auto", "full", "diagonal", "identity"])
    p.add_argument("--out")
    return parser


def _experiment_config(args, simulated: bool):
    values = read_config_file(args.config) if args.config else {}
    for flag, key in EXPERIMENT_FLAGS.items():
        v = getattr(args, flag, None)
        if v is not None:
            values[key] = v
    if simulated and "source" in values and values["source"] not in ("E1", "E2", "E3", "E4", "E5"):
        raise InvalidParameterError("simulate needs an example id")
    if not simulated and "source" not in values:
        raise InvalidParameterError("bench needs --data")
    return config_from_dict(values)


def _emit(text: str, out: str | None, name: str):
    sys.stdout.write(text)
    if out:
        path = Path(out)
        path.mkdir(parents=True, exist_ok=True)
        (path / name).write_text(text)


def cmd_experiment(args, simulated: bool) -> int:
    cfg = _experiment_config(args, simulated)
    report = run_experiment(cfg)
    _emit(report.to_text(), args.out, "report.txt")
    if args.out:
        report.write_csv(Path(args.out) / "report.csv")
    return EXIT_OK


def _split_list(text, cast):
    return [cast(v) for v in str(text).split(",") if v.strip()]


def cmd_bayes_risk(args) -> int:
    lines = [f"{'example':<8} {'d':>5} {'bayes_risk%':>12} {'se%':>7}"]
    for ex in _split_list(args.example, str.strip):
        for d in _split_list(args.d, int):
            risk, se = bayes_risk_mc(ExampleSpec(ex.upper(), d), args.N, args.seed)
            lines.append(f"{ex.upper():<8} {d:>5} {100 * risk:12.2f} {100 * se:7.2f}")
    _emit("\n".join(lines) + "\n", args.out, "bayes_risk.txt")
    return EXIT_OK


def _parse_h_rule(rule: str):
    if rule == "spd":
        return "spd", None
    kind, _, value = rule.partition(":")
    if kind not in ("sqrt", "const") or not value:
        raise InvalidParameterError(f"bad --h-rule {rule!r}")
    return kind, float(value)


def cmd_hdlss(args) -> int:
    """Compare empirical class-mean depth features with their d -> inf limits."""
    sigma2 = np.array(_split_list(args.sigma2, float))
    if sigma2.size != 2:
        raise InvalidParameterError("--sigma2 needs two values")
    kind, value = _parse_h_rule(args.h_rule)
    rows = [f"# h-rule {args.h_rule}, sigma2 {args.sigma2}, mu {args.mu}, n {args.n}"]
    rows.append(f"{'d':>6} {'h':>10} {'class':>5} {'z1':>9} {'z2':>9} {'lim1':>9} {'lim2':>9}")
    for d in _split_list(args.d, int):
        means = [np.zeros(d), np.full(d, args.mu)]
        samples, queries = [], []
        for j in range(2):
            rng = make_rng(args.seed, d, j)
            samples.append(means[j] + math.sqrt(sigma2[j]) * rng.standard_normal((args.n, d)))
            queries.append(means[j] + math.sqrt(sigma2[j]) * rng.standard_normal((args.n, d)))
        nu = np.array([[0.0, args.mu**2], [args.mu**2, 0.0]])
        params = HdlssParams(sigma2, nu)
        kernel = KernelSpec(d, normalized=False)
        if kind == "spd":
            h, limits = None, hdlss_spd_limits(params)
        elif kind == "sqrt":
            h = math.sqrt(d) / value
            limits = hdlss_lspd_limits(params, value, KernelSpec(1, normalized=False))
        else:
            h = value
            limits = hdlss_lspd_limits(params, math.inf)
        ws = [identity_whitener(d)] * 2
        for j in range(2):
            geom = DepthGeometry(queries[j], samples, ws)
            z = geom.spd() if h is None else geom.lspd(h, kernel)
            zm = z.mean(axis=0)
            hs = "spd" if h is None else f"{h:.4g}"
            rows.append(f"{d:>6} {hs:>10} {j + 1:>5} {zm[0]:9.5f} {zm[1]:9.5f} {limits[j, 0]:9.5f} {limits[j, 1]:9.5f}")
    _emit("\n".join(rows) + "\n", args.out, "hdlss.txt")
    return EXIT_OK


def _read_points(path, delimiter, ncols):
    X = np.loadtxt(path, delimiter=delimiter, skiprows=1, ndmin=2)
    if X.shape[1] == ncols + 1:
        X = X[:, :ncols]
    if X.shape[1] != ncols:
        raise ShapeError(f"query file has {X.shape[1]} columns, expected {ncols}")
    return X


def cmd_depth(args) -> int:
    train, _ = ingest_csv(args.train, args.label_column, args.delimiter)
    try:
        Q = _read_points(args.query, args.delimiter, train.d)
    except ValueError as exc:
        raise IngestionError(f"{args.query}: {exc}") from exc
    ws = class_whiteners(train, parse_mode(args.scatter))
    geom = DepthGeometry(Q, train.perclass(), ws)
    scales = [SPD] + _split_list(args.h, float)
    names = train.class_names or tuple(str(j + 1) for j in range(train.J))
    header = ["row"]
    blocks = []
    for s in scales:
        tag = "spd" if s == SPD else f"lspd_h={s:g}"
        header += [f"{tag}[{c}]" for c in names]
        blocks.append(geom.features(s))
    Z = np.hstack(blocks)
    lines = [",".join(header)]
    for i, row in enumerate(Z):
        lines.append(",".join([str(i + 1)] + [f"{v:.10g}" for v in row]))
    _emit("\n".join(lines) + "\n", args.out, "depth.csv")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"lspd: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    handlers = {
        "simulate": lambda a: cmd_experiment(a, True),
        "bench": lambda a: cmd_experiment(a, False),
        "bayes-risk": cmd_bayes_risk,
        "hdlss": cmd_hdlss,
        "depth": cmd_depth,
    }
    try:
        return handlers[args.command](args)
    except (InvalidParameterError, UsageError) as exc:
        print(f"lspd: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InvalidDataError, IngestionError, InsufficientDataError, InvalidLabelsError, ShapeError, DegenerateFeatureError, OSError) as exc:
        print(f"lspd: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"lspd: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
