"""Multiscale LSPD classifier.

Bandwidths are drawn from a half-Cauchy distribution; for each bandwidth a
GAM is fitted to LSPD features and its leave-one-out risk estimated.  Test
points are classified by the risk-weighted sum of the per-bandwidth
posteriors.  A model whose single scale is ``"spd"`` is the plain SPD
classifier.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .dataset import LabeledDataset
from .depth import SPD, DepthGeometry, KernelSpec, training_geometry
from .errors import InsufficientDataError, InvalidParameterError, ShapeError
from .gam import DEFAULT_DF, DEFAULT_LAMBDA, GamModel, fit_gam
from .numerics import ScatterMode, Whitener, default_mode, estimate_scatter
from .simgen import make_rng

H_MIN, H_MAX = 1e-3, 1e6
CV_MODES = ("loo-features", "kfold")
FIT_FEATURES = ("loo", "full")


@dataclass(frozen=True)
class MultiscaleConfig:
    M: int = 25
    scale: float = 100.0
    df: int = DEFAULT_DF
    lam: float = DEFAULT_LAMBDA
    seed: int = 0
    cv_mode: str = "loo-features"
    folds: int = 10
    fit_features: str = "loo"
    scatter: ScatterMode | None = None  # None: chosen per class by size

    def __post_init__(self):
        if self.M < 1:
            raise InvalidParameterError("M must be at least 1")
        if not self.scale > 0:
            raise InvalidParameterError("Cauchy scale must be positive")
        if self.cv_mode not in CV_MODES:
            raise InvalidParameterError(f"cv mode must be one of {CV_MODES}")
        if self.fit_features not in FIT_FEATURES:
            raise InvalidParameterError(f"fit features must be one of {FIT_FEATURES}")


def bandwidth_from_uniform(u, scale: float) -> np.ndarray:
    """Half-Cauchy quantile transform, clamped to ``[1e-3, 1e6]``."""
    h = scale * np.abs(np.tan(np.pi * (np.asarray(u, dtype=float) - 0.5)))
    return np.clip(h, H_MIN, H_MAX)


def sample_bandwidths(M: int, scale: float = 100.0, seed: int = 0) -> np.ndarray:
    if M < 1:
        raise InvalidParameterError("M must be at least 1")
    if not scale > 0:
        raise InvalidParameterError("scale must be positive")
    return bandwidth_from_uniform(make_rng(seed).random(M), scale)


def compute_weights(risks, n: int) -> np.ndarray:
    """Exponential weights ``exp(-n (r - r0)^2 / (2 r0 (1 - r0)))`` with max 1.

    ``r0 (1 - r0)`` is floored at ``1/(4n)`` so that a zero (or unit) best
    risk still gives finite weights.
    """
    risks = np.asarray(risks, dtype=float)
    if risks.size == 0:
        raise InvalidParameterError("need at least one risk")
    if n < 1:
        raise InvalidParameterError("n must be positive")
    r0 = risks.min()
    var = max(r0 * (1.0 - r0), 1.0 / (4.0 * n))
    return np.exp(-0.5 * n * (risks - r0) ** 2 / var)


def aggregate_posteriors(weights, posteriors) -> np.ndarray:
    """``sum_i W(h_i) p(j | z_{h_i}(x))`` for stacked ``M x ... x J`` posteriors."""
    return np.tensordot(np.asarray(weights, dtype=float), np.asarray(posteriors, dtype=float), axes=1)


def class_whiteners(train: LabeledDataset, mode: ScatterMode | None = None) -> list[Whitener]:
    out = []
    for c in train.perclass():
        m = mode if mode is not None else default_mode(len(c), train.d)
        out.append(estimate_scatter(c, m) if len(c) >= 2 else estimate_scatter(np.vstack([c, c]), "identity"))
    return out


class TrainingFeatures:
    """Full-sample and leave-one-out depth features of a training set."""

    def __init__(self, train: LabeledDataset, whiteners, kernel: KernelSpec | None = None):
        if np.any(train.counts() < 2):
            raise InsufficientDataError("every class needs at least two training points")
        self.train = train
        self.perclass = train.perclass()
        self.whiteners = whiteners
        self.kernel = kernel or KernelSpec(train.d)
        self.full = training_geometry(train.X, train.index, self.perclass, whiteners, loo=False)
        self.loo = training_geometry(train.X, train.index, self.perclass, whiteners, loo=True)

    def fit_scale(self, scale, cfg: MultiscaleConfig) -> tuple[GamModel, float]:
        """Fit the GAM at one scale and estimate its misclassification risk.

        The GAM is fitted on leave-one-out features by default; with
        ``fit_features="full"`` each training point also counts itself,
        which inflates own-class LSPD by ``K_h(0)/n_j`` at small ``h``.
        """
        y = self.train.labels
        z_loo = self.loo.features(scale, self.kernel)
        z_fit = z_loo if cfg.fit_features == "loo" else self.full.features(scale, self.kernel)
        model = fit_gam(z_fit, y, cfg.df, cfg.lam, self.train.J)
        if cfg.cv_mode == "kfold":
            return model, self._kfold_risk(scale, cfg)
        pred = model.predict(z_loo)
        return model, float(np.mean(pred != y))

    def _kfold_risk(self, scale, cfg: MultiscaleConfig) -> float:
        train = self.train
        folds = stratified_folds(train.labels, cfg.folds, cfg.seed)
        wrong = 0
        for f in range(cfg.folds):
            test = folds == f
            if not test.any():
                continue
            rest = train.subset(~test)
            if np.any(rest.counts() < 1):
                raise InsufficientDataError("a fold removed every point of a class")
            perclass = rest.perclass()
            z_fit = DepthGeometry(rest.X, perclass, self.whiteners).features(scale, self.kernel)
            model = fit_gam(z_fit, rest.labels, cfg.df, cfg.lam, train.J)
            z_test = DepthGeometry(train.X[test], perclass, self.whiteners).features(scale, self.kernel)
            wrong += int(np.sum(model.predict(z_test) != train.labels[test]))
        return wrong / train.n


def stratified_folds(labels, k: int, seed: int) -> np.ndarray:
    rng = make_rng(seed, 7)
    folds = np.empty(len(labels), dtype=int)
    for lab in np.unique(labels):
        rows = np.flatnonzero(labels == lab)
        folds[rows[rng.permutation(len(rows))]] = np.arange(len(rows)) % k
    return folds


def cv_risk(h, train: LabeledDataset, cfg: MultiscaleConfig | None = None) -> float:
    cfg = cfg or MultiscaleConfig()
    feats = TrainingFeatures(train, class_whiteners(train, cfg.scatter))
    return feats.fit_scale(h, cfg)[1]


@dataclass(frozen=True)
class MultiscaleModel:
    scales: tuple  # bandwidths, or ("spd",)
    models: tuple
    risks: np.ndarray
    weights: np.ndarray
    whiteners: tuple
    perclass: tuple
    n: int
    J: int
    dim: int
    cauchy_scale: float = 100.0
    kernel: KernelSpec = field(default=None)

    @property
    def bandwidths(self) -> tuple:
        return self.scales

    def posteriors(self, X) -> np.ndarray:
        """Per-scale posteriors, shape ``M x m x J``."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.dim:
            raise ShapeError(f"expected dimension {self.dim}, got {X.shape[1]}")
        geom = DepthGeometry(X, self.perclass, self.whiteners)
        return np.stack([m.posterior(geom.features(s, self.kernel)) for s, m in zip(self.scales, self.models)])

    def aggregate(self, X) -> np.ndarray:
        """Weighted posterior sums (unnormalised; the 1/M factor is dropped)."""
        return aggregate_posteriors(self.weights, self.posteriors(X))

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.aggregate(X), axis=1) + 1

    def predict_proba(self, X) -> np.ndarray:
        agg = self.aggregate(X)
        return agg / agg.sum(axis=1, keepdims=True)

    def with_weights(self, weights) -> MultiscaleModel:
        return replace(self, weights=np.asarray(weights, dtype=float))

    def summary(self) -> str:
        lines = [f"{'h':>14} {'risk':>8} {'weight':>10}"]
        for s, r, w in zip(self.scales, self.risks, self.weights):
            label = s if isinstance(s, str) else f"{s:.6g}"
            lines.append(f"{label:>14} {r:8.4f} {w:10.4g}")
        return "\n".join(lines)


def _assemble(train, feats, scales, cfg) -> MultiscaleModel:
    models, risks = [], []
    for s in scales:
        model, risk = feats.fit_scale(s, cfg)
        models.append(model)
        risks.append(risk)
    risks = np.array(risks)
    return MultiscaleModel(
        tuple(scales),
        tuple(models),
        risks,
        compute_weights(risks, train.n),
        tuple(feats.whiteners),
        tuple(feats.perclass),
        train.n,
        train.J,
        train.d,
        cfg.scale,
        feats.kernel,
    )


def fit_multiscale(train: LabeledDataset, cfg: MultiscaleConfig | None = None) -> MultiscaleModel:
    cfg = cfg or MultiscaleConfig()
    # bandwidths are drawn once, before any per-scale work
    hs = [float(h) for h in sample_bandwidths(cfg.M, cfg.scale, cfg.seed)]
    feats = TrainingFeatures(train, class_whiteners(train, cfg.scatter))
    return _assemble(train, feats, hs, cfg)


def fit_single_scale(train: LabeledDataset, scale, cfg: MultiscaleConfig | None = None) -> MultiscaleModel:
    """Classifier at one fixed bandwidth, or the SPD classifier for ``"spd"``."""
    cfg = cfg or MultiscaleConfig()
    if not isinstance(scale, str):
        scale = float(scale)
        if not scale > 0 or math.isinf(scale):
            raise InvalidParameterError("bandwidth must be positive and finite")
    elif scale != SPD:
        raise InvalidParameterError(f"unknown scale {scale!r}")
    feats = TrainingFeatures(train, class_whiteners(train, cfg.scatter))
    return _assemble(train, feats, [scale], cfg)


def fit_spd(train: LabeledDataset, cfg: MultiscaleConfig | None = None) -> MultiscaleModel:
    return fit_single_scale(train, SPD, cfg)


def classify_multiscale(m: MultiscaleModel, x) -> tuple[int, np.ndarray]:
    """Label and normalised aggregated posterior of a single point."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ShapeError("classify_multiscale expects a single point")
    agg = m.aggregate(x[None, :])[0]
    return int(np.argmax(agg)) + 1, agg / agg.sum()
