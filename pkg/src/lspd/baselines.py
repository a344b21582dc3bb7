"""Reference classifiers: LDA, QDA, k-NN and KDE.

k-NN and KDE work on data whitened by the pooled within-class scatter and
tune their smoothing parameter by leave-one-out error.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import logsumexp

from .dataset import LabeledDataset
from .errors import InvalidParameterError, ShapeError
from .numerics import ScatterMode, Whitener, default_mode, estimate_scatter, pooled_scatter

log = logging.getLogger(__name__)


class Kind(str, enum.Enum):
    LDA = "LDA"
    QDA = "QDA"
    KNN = "KNN"
    KDE = "KDE"


@dataclass(frozen=True)
class BaselineConfig:
    scatter: ScatterMode | None = None
    k_grid: tuple | None = None
    bandwidth_grid: tuple | None = None


@dataclass
class BaselineModel:
    kind: Kind
    J: int
    dim: int
    priors: np.ndarray
    means: np.ndarray | None = None
    whiteners: list = field(default_factory=list)
    log_dets: np.ndarray | None = None
    train_X: np.ndarray | None = None
    train_y: np.ndarray | None = None
    k: int | None = None
    bandwidth: float | None = None
    loo_error: float | None = None
    warnings: list = field(default_factory=list)

    def _check(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.dim:
            raise ShapeError(f"expected dimension {self.dim}, got {X.shape[1]}")
        return X

    def scores(self, X) -> np.ndarray:
        """Per-class decision scores; larger wins."""
        X = self._check(X)
        if self.kind in (Kind.LDA, Kind.QDA):
            return self._gaussian_scores(X)
        Xw = self.whiteners[0].apply(X)
        dist = cdist(Xw, self.train_X)
        if self.kind is Kind.KNN:
            return _knn_votes(dist, self.train_y, self.k, self.J)
        return _kde_scores(dist, self.train_y, self.bandwidth, self.J)

    def _gaussian_scores(self, X):
        out = np.empty((X.shape[0], self.J))
        for j in range(self.J):
            w = self.whiteners[0] if self.kind is Kind.LDA else self.whiteners[j]
            maha = np.sum(w.apply(X - self.means[j]) ** 2, axis=1)
            out[:, j] = math.log(self.priors[j]) - 0.5 * self.log_dets[j] - 0.5 * maha
        return out

    def predict_proba(self, X) -> np.ndarray:
        if self.kind not in (Kind.LDA, Kind.QDA):
            raise InvalidParameterError("posteriors are only defined for LDA and QDA")
        s = self.scores(X)
        return np.exp(s - logsumexp(s, axis=1, keepdims=True))

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.scores(X), axis=1) + 1


def log_det_scatter(w: Whitener) -> float:
    """log |S| for the scatter S whose inverse square root is ``w``."""
    if w.mode is ScatterMode.IDENTITY:
        return 0.0
    if w.mode is ScatterMode.DIAGONAL:
        return float(-2.0 * np.sum(np.log(w.transform)))
    return float(-2.0 * np.linalg.slogdet(w.transform)[1])


def _knn_votes(dist, y, k, J):
    nearest = np.argsort(dist, axis=1, kind="stable")[:, :k]
    votes = np.zeros((dist.shape[0], J))
    for j in range(J):
        votes[:, j] = np.sum(y[nearest] == j + 1, axis=1)
    return votes


def _kde_scores(dist, y, bandwidth, J):
    # prior * class KDE is proportional to the kernel sum over that class
    expo = -0.5 * (dist / bandwidth) ** 2
    out = np.empty((dist.shape[0], J))
    for j in range(J):
        cols = y == j + 1
        out[:, j] = logsumexp(expo[:, cols], axis=1) if cols.any() else -np.inf
    return out


def knn_k_grid(n: int) -> list[int]:
    top = int(round(math.sqrt(n)))
    if top % 2 == 0:
        top += 1
    return list(range(1, max(top, 1) + 1, 2))


def kde_bandwidth_grid(n: int, d: int) -> np.ndarray:
    pilot = n ** (-1.0 / (d + 4))
    return pilot * np.logspace(-1, 1, 10)


def _loo_error(score_fn, dist, y) -> float:
    pred = np.argmax(score_fn(dist), axis=1) + 1
    return float(np.mean(pred != y))


def fit_baseline(kind, train: LabeledDataset, cfg: BaselineConfig | None = None) -> BaselineModel:
    kind = Kind(kind.upper() if isinstance(kind, str) else kind)
    cfg = cfg or BaselineConfig()
    perclass = train.perclass()
    counts = train.counts()
    priors = counts / counts.sum()
    means = np.array([c.mean(axis=0) if len(c) else np.zeros(train.d) for c in perclass])
    model = BaselineModel(kind, train.J, train.d, priors, means)
    pooled_mode = cfg.scatter if cfg.scatter is not None else default_mode(train.n - train.J, train.d)

    if kind is Kind.LDA:
        w = pooled_scatter(perclass, pooled_mode)
        model.whiteners = [w]
        model.log_dets = np.full(train.J, log_det_scatter(w))
        return model

    if kind is Kind.QDA:
        ws = []
        for j, c in enumerate(perclass):
            mode = cfg.scatter if cfg.scatter is not None else default_mode(len(c), train.d)
            if mode is ScatterMode.FULL and _singular(c):
                msg = f"class {j + 1}: singular scatter, using diagonal"
                log.warning(msg)
                model.warnings.append(msg)
                mode = ScatterMode.DIAGONAL
            ws.append(estimate_scatter(c, mode))
        model.whiteners = ws
        model.log_dets = np.array([log_det_scatter(w) for w in ws])
        return model

    w = pooled_scatter(perclass, pooled_mode)
    model.whiteners = [w]
    Xw = w.apply(train.X)
    model.train_X, model.train_y = Xw, train.labels
    dist = cdist(Xw, Xw)
    np.fill_diagonal(dist, np.inf)
    y = train.labels
    if kind is Kind.KNN:
        grid = list(cfg.k_grid) if cfg.k_grid else knn_k_grid(train.n)
        errs = [_loo_error(lambda D, k=k: _knn_votes(D, y, k, train.J), dist, y) for k in grid]
        best = int(np.argmin(errs))
        model.k, model.loo_error = int(grid[best]), errs[best]
    else:
        grid = list(cfg.bandwidth_grid) if cfg.bandwidth_grid else kde_bandwidth_grid(train.n, train.d)
        errs = [_loo_error(lambda D, b=b: _kde_scores(D, y, b, train.J), dist, y) for b in grid]
        best = int(np.argmin(errs))
        model.bandwidth, model.loo_error = float(grid[best]), errs[best]
    return model


def _singular(c) -> bool:
    n, d = c.shape
    if n - 1 < d:
        return True
    evals = np.linalg.eigvalsh(np.atleast_2d(np.cov(c, rowvar=False)))
    return bool(evals.min() <= 1e-10 * max(evals.max(), 1e-300))


def predict_baseline(m: BaselineModel, x) -> int:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ShapeError("predict_baseline expects a single point")
    return int(m.predict(x[None, :])[0])
