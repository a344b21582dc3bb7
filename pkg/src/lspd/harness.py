"""Experiment harness: repeated train/test runs, error tables, efficiencies.

Per-repetition seeds come from the master seed through SplitMix64:
``rep_seed(master, r) = splitmix64(master + r * 0x9E3779B97F4A7C15 mod 2^64)``.
The training sample of repetition r uses that seed and the test sample uses
``splitmix64`` of it, so ports of the harness can reproduce every stream.
"""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import __version__
from .baselines import BaselineConfig, fit_baseline
from .dataset import LabeledDataset
from .errors import IngestionError, InvalidDataError, InvalidParameterError, LspdError
from .multiscale import MultiscaleConfig, fit_multiscale, fit_spd
from .numerics import ScatterMode, parse_mode
from .simgen import EXAMPLES, ExampleSpec, bayes_labels, generate, make_rng

log = logging.getLogger(__name__)

CLASSIFIERS = ("SPD", "LSPD", "LDA", "QDA", "KNN", "KDE", "BAYES")
MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(x: int) -> int:
    z = (x + GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def rep_seed(master: int, r: int) -> int:
    return splitmix64((int(master) + r * GOLDEN) & MASK64)


@dataclass(frozen=True)
class ExperimentConfig:
    source: str = "E3"  # example id or CSV path
    d: int = 5
    n_train: int = 100  # per class (simulated)
    n_test: int = 250  # per class (simulated)
    reps: int = 10
    classifiers: tuple = ("SPD", "LSPD")
    seed: int = 0
    M: int = 25
    cauchy_scale: float = 100.0
    df: int = 5
    lam: float = 1e-3
    cv_mode: str = "loo-features"
    fit_features: str = "loo"
    scatter: str = "auto"
    train_frac: float = 0.5  # CSV sources
    label_column: str = "label"
    delimiter: str = ","
    jobs: int = 1
    rep_seeds: tuple | None = None

    def __post_init__(self):
        if self.reps < 1:
            raise InvalidParameterError("reps must be at least 1")
        if not self.classifiers:
            raise InvalidParameterError("no classifiers requested")
        bad = [c for c in self.classifiers if c not in CLASSIFIERS]
        if bad:
            raise InvalidParameterError(f"unknown classifiers {bad}; choose from {CLASSIFIERS}")
        if "BAYES" in self.classifiers and not self.simulated:
            raise InvalidParameterError("BAYES is only available for simulated examples")
        if self.rep_seeds is not None and len(self.rep_seeds) != self.reps:
            raise InvalidParameterError("rep_seeds must have one entry per repetition")
        if not 0 < self.train_frac < 1:
            raise InvalidParameterError("train_frac must lie in (0, 1)")
        parse_mode(self.scatter)

    @property
    def simulated(self) -> bool:
        return self.source in EXAMPLES

    def multiscale(self, seed: int) -> MultiscaleConfig:
        return MultiscaleConfig(
            M=self.M,
            scale=self.cauchy_scale,
            df=self.df,
            lam=self.lam,
            seed=seed,
            cv_mode=self.cv_mode,
            fit_features=self.fit_features,
            scatter=parse_mode(self.scatter),
        )

    def seeds(self) -> list[int]:
        if self.rep_seeds is not None:
            return [int(s) for s in self.rep_seeds]
        return [rep_seed(self.seed, r) for r in range(self.reps)]


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    classifiers: tuple
    raw: np.ndarray  # reps x classifiers error fractions, NaN for failures
    se_kind: str
    test_size: int
    notes: list = field(default_factory=list)

    @property
    def mean_errors(self) -> np.ndarray:
        with np.errstate(invalid="ignore"):
            ok = ~np.isnan(self.raw)
            counts = ok.sum(axis=0)
            sums = np.where(ok, self.raw, 0.0).sum(axis=0)
            return np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)

    @property
    def standard_errors(self) -> np.ndarray:
        out = np.full(len(self.classifiers), np.nan)
        for t in range(len(self.classifiers)):
            col = self.raw[:, t]
            col = col[~np.isnan(col)]
            if col.size == 0:
                continue
            if self.se_kind == "binomial":
                e = col.mean()
                out[t] = math.sqrt(e * (1 - e) / self.test_size)
            else:
                out[t] = col.std(ddof=1) / math.sqrt(col.size) if col.size > 1 else 0.0
        return out

    @property
    def efficiencies(self) -> np.ndarray:
        means = self.mean_errors
        ok = ~np.isnan(means)
        out = np.full(means.shape, np.nan)
        if ok.any():
            out[ok] = efficiency_scores(means[ok])
        return out

    def rows(self):
        for name, m, s, e in zip(self.classifiers, self.mean_errors, self.standard_errors, self.efficiencies):
            yield name, m, s, e

    def to_text(self) -> str:
        cfg = self.config
        lines = ["# lspd experiment report", f"version = {__version__}"]
        for f in fields(cfg):
            value = getattr(cfg, f.name)
            if f.name == "jobs":
                continue
            if isinstance(value, tuple):
                value = ",".join(str(v) for v in value)
            lines.append(f"{f.name} = {value}")
        lines.append(f"standard_error = {'binomial, single split' if self.se_kind == 'binomial' else 'sd over repetitions / sqrt(R)'}")
        if cfg.simulated and cfg.source == "E5":
            lines.append("e5_shift = class 2 shifted so that mean1 - mean2 = (1/d) 1_d")
        lines.extend(f"note = {n}" for n in self.notes)
        lines.append("")
        lines.append(f"{'classifier':<10} {'error%':>9} {'se%':>8} {'efficiency':>11}")
        for name, m, s, e in self.rows():
            lines.append(f"{name:<10} {_fmt(100 * m, 9, 2)} {_fmt(100 * s, 8, 2)} {_fmt(e, 11, 4)}")
        lines.append("")
        lines.append("# per-repetition error %")
        lines.append("rep " + " ".join(f"{c:>8}" for c in self.classifiers))
        for r, row in enumerate(self.raw):
            lines.append(f"{r:<3} " + " ".join(_fmt(100 * v, 8, 2) for v in row))
        return "\n".join(lines) + "\n"

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["classifier", "mean_error_pct", "se_pct", "efficiency"])
            for name, m, s, e in self.rows():
                w.writerow([name, _num(100 * m, 4), _num(100 * s, 4), _num(e, 4)])


def _fmt(v, width, digits) -> str:
    return f"{'xxxx':>{width}}" if np.isnan(v) else f"{v:{width}.{digits}f}"


def _num(v, digits) -> str:
    return "" if np.isnan(v) else f"{v:.{digits}f}"


def efficiency_scores(errors) -> np.ndarray:
    """``e_t = min(errors) / errors_t``; a zero error scores 1."""
    errors = np.asarray(errors, dtype=float)
    if errors.size == 0:
        raise InvalidParameterError("need at least one error rate")
    if np.any(errors < 0):
        raise InvalidParameterError("error rates must be non-negative")
    best = errors.min()
    out = np.ones_like(errors)
    pos = errors > 0
    out[pos] = best / errors[pos]
    return out


# ---------------------------------------------------------------------------
# data


def ingest_csv(path, label_column: str = "label", delimiter: str = ",") -> tuple[LabeledDataset, int]:
    """Read a labelled CSV; returns the dataset and the number of dropped rows.

    Rows with an empty or NA cell are dropped.  Labels map to ``1..J`` in
    order of first appearance.
    """
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise IngestionError(f"cannot open {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh, delimiter=delimiter)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise IngestionError(f"{path} is empty") from None
        if label_column not in header:
            raise IngestionError(f"label column {label_column!r} not found in header {header}")
        lab_col = header.index(label_column)
        feature_cols = [i for i in range(len(header)) if i != lab_col]
        rows, labels, dropped = [], [], 0
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise IngestionError(f"line {lineno}: expected {len(header)} fields, got {len(row)}")
            cells = [row[i].strip() for i in feature_cols]
            lab = row[lab_col].strip()
            if lab == "" or any(c == "" or c.upper() in ("NA", "NAN", "?") for c in cells):
                dropped += 1
                continue
            try:
                values = [float(c) for c in cells]
            except ValueError:
                bad = next(k for k, c in zip(feature_cols, cells) if not _is_float(c))
                raise IngestionError(f"line {lineno}, column {header[bad]!r}: non-numeric value") from None
            rows.append(values)
            labels.append(lab)
    if dropped:
        log.warning("%s: dropped %d rows with missing values", path, dropped)
    names = list(dict.fromkeys(labels))
    if len(names) < 2:
        raise InvalidDataError("need at least two classes")
    codes = {name: k + 1 for k, name in enumerate(names)}
    X = np.array(rows, dtype=float)
    return LabeledDataset(X, np.array([codes[v] for v in labels]), len(names), tuple(names)), dropped


def _is_float(s) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


def random_split(data: LabeledDataset, train_frac: float, seed: int) -> tuple[LabeledDataset, LabeledDataset]:
    """Stratified random split keeping at least two points of every class in each part when possible."""
    rng = make_rng(seed, 11)
    train_rows, test_rows = [], []
    for j in range(data.J):
        rows = np.flatnonzero(data.labels == j + 1)
        rows = rows[rng.permutation(rows.size)]
        k = int(round(train_frac * rows.size))
        k = min(max(k, min(2, rows.size)), rows.size)
        train_rows.append(rows[:k])
        test_rows.append(rows[k:])
    return data.subset(np.sort(np.concatenate(train_rows))), data.subset(np.sort(np.concatenate(test_rows)))


# ---------------------------------------------------------------------------
# runs


def _fit_predict(name: str, train: LabeledDataset, test: LabeledDataset, cfg: ExperimentConfig, seed: int, spec):
    if name == "BAYES":
        return bayes_labels(spec, test.X)
    if name == "SPD":
        return fit_spd(train, cfg.multiscale(seed)).predict(test.X)
    if name == "LSPD":
        return fit_multiscale(train, cfg.multiscale(seed)).predict(test.X)
    bcfg = BaselineConfig(scatter=parse_mode(cfg.scatter))
    return fit_baseline(name, train, bcfg).predict(test.X)


def _one_rep(args):
    cfg, r, seed, data = args
    spec = None
    if cfg.simulated:
        spec = ExampleSpec(cfg.source, cfg.d)
        train = generate(spec, cfg.n_train, seed)
        test = generate(spec, cfg.n_test, splitmix64(seed))
    else:
        train, test = random_split(data, cfg.train_frac, seed)
    errs, notes = [], []
    for name in cfg.classifiers:
        try:
            pred = _fit_predict(name, train, test, cfg, seed, spec)
            errs.append(float(np.mean(pred != test.labels)))
        except (LspdError, np.linalg.LinAlgError) as exc:
            notes.append(f"rep {r}: {name} failed ({type(exc).__name__}: {exc})")
            errs.append(float("nan"))
    return r, errs, notes, test.n


def run_experiment(cfg: ExperimentConfig, data: LabeledDataset | None = None) -> ExperimentReport:
    """Run every requested classifier over ``cfg.reps`` repetitions.

    For CSV sources pass the ingested ``data``; otherwise it is read from
    ``cfg.source``.
    """
    if not cfg.simulated and data is None:
        data, dropped = ingest_csv(cfg.source, cfg.label_column, cfg.delimiter)
    jobs = [(cfg, r, s, data) for r, s in enumerate(cfg.seeds())]
    if cfg.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(_one_rep, jobs))
    else:
        results = [_one_rep(j) for j in jobs]
    results.sort(key=lambda t: t[0])
    raw = np.array([errs for _, errs, _, _ in results])
    notes = [n for _, _, ns, _ in results for n in ns]
    se_kind = "binomial" if cfg.reps == 1 else "repetitions"
    return ExperimentReport(cfg, tuple(cfg.classifiers), raw, se_kind, results[0][3], notes)


def config_from_dict(values: dict) -> ExperimentConfig:
    """Build a config from string values (config file or CLI), coercing types."""
    kwargs = {}
    by_name = {f.name: f for f in fields(ExperimentConfig)}
    defaults = asdict(ExperimentConfig())
    for key, raw in values.items():
        name = key.replace("-", "_")
        if name not in by_name:
            raise InvalidParameterError(f"unknown config key {key!r}")
        default = defaults[name]
        if name in ("classifiers", "rep_seeds"):
            items = [v.strip() for v in str(raw).split(",") if v.strip()] if isinstance(raw, str) else list(raw)
            kwargs[name] = tuple(v.upper() for v in items) if name == "classifiers" else tuple(int(v) for v in items)
        elif isinstance(default, bool):
            kwargs[name] = str(raw).lower() in ("1", "true", "yes")
        elif isinstance(default, int):
            kwargs[name] = int(raw)
        elif isinstance(default, float):
            kwargs[name] = float(raw)
        else:
            kwargs[name] = str(raw)
    return ExperimentConfig(**kwargs)


def read_config_file(path) -> dict:
    """Flat ``key = value`` file; ``#`` starts a comment."""
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise InvalidParameterError(f"{path}:{lineno}: expected key = value")
            key, value = line.split("=", 1)
            out[key.strip()] = value.strip()
    return out
