"""Scatter estimation and whitening of difference vectors."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientDataError, InvalidDataError, InvalidParameterError, ShapeError

EIGEN_FLOOR = 1e-8


class ScatterMode(str, enum.Enum):
    FULL = "full"
    DIAGONAL = "diagonal"
    IDENTITY = "identity"


@dataclass(frozen=True)
class Whitener:
    """Linear map ``t -> S^{-1/2} t`` for one class.

    ``transform`` is a symmetric d x d matrix in full mode, a length-d vector
    of positive scale factors in diagonal mode and ``None`` for identity.
    """

    mode: ScatterMode
    dim: int
    transform: np.ndarray | None = None

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Whiten a single vector or the rows of a matrix."""
        points = np.asarray(points, dtype=float)
        if points.shape[-1] != self.dim:
            raise ShapeError(f"expected last dimension {self.dim}, got {points.shape[-1]}")
        if self.mode is ScatterMode.IDENTITY:
            return points
        if self.mode is ScatterMode.DIAGONAL:
            return points * self.transform
        # transform is symmetric, so row-wise x @ W equals (W x)^T
        return points @ self.transform

    def matrix(self) -> np.ndarray:
        """Dense d x d representation of the map."""
        if self.mode is ScatterMode.IDENTITY:
            return np.eye(self.dim)
        if self.mode is ScatterMode.DIAGONAL:
            return np.diag(self.transform)
        return self.transform.copy()


def identity_whitener(dim: int) -> Whitener:
    return Whitener(ScatterMode.IDENTITY, int(dim))


def _floor(values: np.ndarray) -> np.ndarray:
    scale = values.mean()
    floor = EIGEN_FLOOR * scale if scale > 0 else 1.0
    return np.maximum(values, floor)


def estimate_scatter(data, mode: ScatterMode | str = ScatterMode.FULL) -> Whitener:
    """Estimate the whitening operator of a sample.

    The sample covariance uses denominator n - 1.  Eigenvalues (full mode) or
    variances (diagonal mode) are floored at ``1e-8 * trace / d`` so that the
    result stays finite for data lying on a proper subspace.
    """
    mode = ScatterMode(mode)
    data = np.asarray(data, dtype=float)
    if data.ndim == 1:
        data = data[:, None]
    if data.ndim != 2:
        raise ShapeError("data must be an n x d matrix")
    n, d = data.shape
    if n < 2:
        raise InsufficientDataError(f"scatter estimation needs n >= 2, got {n}")
    if not np.all(np.isfinite(data)):
        raise InvalidDataError("data contains non-finite values")

    if mode is ScatterMode.IDENTITY:
        return Whitener(mode, d)
    if mode is ScatterMode.DIAGONAL:
        var = _floor(data.var(axis=0, ddof=1))
        return Whitener(mode, d, 1.0 / np.sqrt(var))

    cov = np.atleast_2d(np.cov(data, rowvar=False, ddof=1))
    evals, evecs = np.linalg.eigh(cov)
    evals = _floor(evals)
    inv_sqrt = (evecs / np.sqrt(evals)) @ evecs.T
    inv_sqrt = 0.5 * (inv_sqrt + inv_sqrt.T)
    return Whitener(mode, d, inv_sqrt)


def pooled_scatter(groups, mode: ScatterMode | str = ScatterMode.FULL) -> Whitener:
    """Whitener from the pooled within-group covariance of several samples."""
    mode = ScatterMode(mode)
    groups = [np.atleast_2d(np.asarray(g, dtype=float)) for g in groups]
    centred = np.vstack([g - g.mean(axis=0) for g in groups])
    n = centred.shape[0]
    dof = n - len(groups)
    if dof < 1:
        raise InsufficientDataError("pooled scatter needs more observations than groups")
    # rescale so that np.cov's n - 1 denominator becomes n - J
    return estimate_scatter(centred * np.sqrt((n - 1) / dof), mode)


def whiten(w: Whitener, t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if t.ndim != 1:
        raise ShapeError("whiten expects a single vector")
    return w.apply(t)


def default_mode(n_class: int, dim: int) -> ScatterMode:
    """Full scatter when the class is large enough, else per-coordinate scaling."""
    if n_class > 2 * dim:
        return ScatterMode.FULL
    if n_class >= 2:
        return ScatterMode.DIAGONAL
    return ScatterMode.IDENTITY


def parse_mode(value: str) -> ScatterMode | None:
    """Map a CLI/config string to a mode; ``"auto"`` maps to ``None``."""
    if value is None or value == "auto":
        return None
    try:
        return ScatterMode(value.lower())
    except ValueError:
        raise InvalidParameterError(f"unknown scatter mode {value!r}") from None
