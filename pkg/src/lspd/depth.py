"""Empirical spatial depth (SPD), localized spatial depth (LSPD) and their
high-dimensional limits.

All batch computations go through :class:`DepthGeometry`, which caches the
whitened pairwise distances between a set of query points and every class
sample.  Distances do not depend on the bandwidth, so evaluating LSPD at many
bandwidths costs one matrix product per class and bandwidth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .errors import InsufficientDataError, InvalidDataError, InvalidParameterError, ShapeError
from .numerics import Whitener, identity_whitener

ZERO_NORM = 1e-12
# exp() of anything above this overflows a double
_MAX_LOG = 700.0

SPD = "spd"


@dataclass(frozen=True)
class KernelSpec:
    """Radial kernel ``K(t) = g(||t||)``.

    With ``normalized=True`` the Gaussian density ``(2 pi)^{-d/2} exp(-|t|^2/2)``
    is used; otherwise the bare profile ``exp(-|t|^2/2)`` with ``K(0) = 1``.
    """

    dim: int
    family: str = "gaussian"
    normalized: bool = True

    def __post_init__(self):
        if self.family != "gaussian":
            raise InvalidParameterError(f"unsupported kernel family {self.family!r}")
        if self.dim < 1:
            raise InvalidParameterError("kernel dimension must be positive")

    @property
    def log_k0(self) -> float:
        return -0.5 * self.dim * math.log(2 * math.pi) if self.normalized else 0.0

    @property
    def k0(self) -> float:
        return math.exp(self.log_k0)

    def profile(self, s):
        """``g(s)`` for radius ``s`` (vectorised)."""
        s = np.asarray(s, dtype=float)
        return np.exp(self.log_k0 - 0.5 * s * s)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return self.profile(np.linalg.norm(t, axis=-1))


@dataclass(frozen=True)
class DepthFeatures:
    values: np.ndarray
    bandwidth: float | None = None

    @property
    def J(self) -> int:
        return len(self.values)


def sign_vector(t) -> np.ndarray:
    """Multivariate sign ``t / ||t||`` with ``u(0) = 0``."""
    t = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t)):
        raise InvalidDataError("sign_vector input must be finite")
    norm = np.linalg.norm(t)
    if norm < ZERO_NORM:
        return np.zeros_like(t)
    return t / norm


def _check_bandwidth(h) -> float:
    h = float(h)
    if not h > 0 or not math.isfinite(h):
        raise InvalidParameterError(f"bandwidth must be positive and finite, got {h}")
    return h


class _ClassBlock:
    """Whitened geometry of all queries against one class sample."""

    def __init__(self, queries, sample, whitener: Whitener, exclude=None):
        sample = np.atleast_2d(np.asarray(sample, dtype=float))
        if sample.shape[0] == 0:
            raise InsufficientDataError("class sample is empty")
        if sample.shape[1] != queries.shape[1]:
            raise ShapeError("query and sample dimensions differ")
        sw = whitener.apply(sample)
        qw = whitener.apply(queries)
        # differences are translation invariant; centring keeps the
        # q * sum(a) - a @ c expansion free of cancellation
        centre = sw.mean(axis=0)
        self.s = sw - centre
        self.q = qw - centre
        self.dist = cdist(self.q, self.s)
        n = self.s.shape[0]
        m = self.q.shape[0]
        self.mask = np.ones((m, n))
        if exclude is not None:
            rows = np.flatnonzero(exclude >= 0)
            self.mask[rows, exclude[rows]] = 0.0
        self.count = self.mask.sum(axis=1)
        if np.any(self.count < 1):
            raise InsufficientDataError("leave-one-out left an empty class sample")
        nonzero = self.dist >= ZERO_NORM
        self.inv = np.zeros_like(self.dist)
        self.inv[nonzero] = 1.0 / self.dist[nonzero]
        self.inv *= self.mask

    def _sign_sum_norm(self, weights):
        # || sum_k w_k (q - s_k) / |q - s_k| || for every query row
        a = weights * self.inv
        vec = self.q * a.sum(axis=1)[:, None] - a @ self.s
        return np.linalg.norm(vec, axis=1)

    def spd(self):
        out = 1.0 - self._sign_sum_norm(self.mask) / self.count
        return np.clip(out, 0.0, 1.0)

    def lspd(self, h: float, kernel: KernelSpec):
        d = self.q.shape[1]
        log_scale = kernel.log_k0
        if h <= 1.0:
            log_scale -= d * math.log(h)
        # for h > 1 the h^{-d} of K_h cancels the h^d rescaling exactly
        expo = -0.5 * (self.dist / h) ** 2
        big = np.where(self.mask > 0, expo, -np.inf)
        shift = big.max(axis=1)
        w = np.exp(big - shift[:, None])
        gamma = (w.sum(axis=1) - self._sign_sum_norm(w)) / self.count
        gamma = np.maximum(gamma, 0.0)
        log_total = np.minimum(log_scale + shift, _MAX_LOG)
        return gamma * np.exp(log_total)


class DepthGeometry:
    """Cached whitened distances between query points and J class samples.

    ``exclude`` optionally gives, for each class, an integer array of length
    ``m`` naming the sample index to drop for every query (``-1`` keeps all);
    this is how leave-one-out features are computed.
    """

    def __init__(self, queries, perclass, whiteners, exclude=None):
        queries = np.atleast_2d(np.asarray(queries, dtype=float))
        if len(perclass) != len(whiteners):
            raise ShapeError("need one whitener per class")
        if exclude is None:
            exclude = [None] * len(perclass)
        self.dim = queries.shape[1]
        self.blocks = [
            _ClassBlock(queries, c, w, ex) for c, w, ex in zip(perclass, whiteners, exclude)
        ]

    @property
    def J(self) -> int:
        return len(self.blocks)

    def spd(self) -> np.ndarray:
        return np.column_stack([b.spd() for b in self.blocks])

    def lspd(self, h: float, kernel: KernelSpec | None = None) -> np.ndarray:
        h = _check_bandwidth(h)
        kernel = kernel or KernelSpec(self.dim)
        return np.column_stack([b.lspd(h, kernel) for b in self.blocks])

    def features(self, scale, kernel: KernelSpec | None = None) -> np.ndarray:
        """``m x J`` matrix of SPD (``scale="spd"``) or LSPD_h features."""
        if isinstance(scale, str):
            if scale != SPD:
                raise InvalidParameterError(f"unknown depth scale {scale!r}")
            return self.spd()
        return self.lspd(scale, kernel)


def _single(x, data, w):
    x = np.asarray(x, dtype=float).reshape(1, -1)
    data = np.atleast_2d(np.asarray(data, dtype=float))
    if data.shape[0] == 0:
        raise InsufficientDataError("class sample is empty")
    if w is None:
        w = identity_whitener(x.shape[1])
    return _ClassBlock(x, data, w)


def spd(x, data, w: Whitener | None = None) -> float:
    """Empirical spatial depth of ``x`` with respect to ``data``."""
    return float(_single(x, data, w).spd()[0])


def lspd(x, data, w: Whitener | None = None, h: float = 1.0, kernel: KernelSpec | None = None) -> float:
    """Empirical localized spatial depth at bandwidth ``h``."""
    h = _check_bandwidth(h)
    block = _single(x, data, w)
    kernel = kernel or KernelSpec(block.q.shape[1])
    return float(block.lspd(h, kernel)[0])


def depth_features(x, perclass, whiteners, scale=SPD, kernel: KernelSpec | None = None) -> DepthFeatures:
    if len(perclass) < 2:
        raise InvalidParameterError("depth features need at least two classes")
    geom = DepthGeometry(x, perclass, whiteners)
    bandwidth = None if isinstance(scale, str) else float(scale)
    return DepthFeatures(geom.features(scale, kernel)[0], bandwidth)


def locate(i: int, perclass) -> tuple[int, int]:
    """Map a global index over the concatenated class samples to (class, row)."""
    offset = 0
    for j, c in enumerate(perclass):
        n = len(c)
        if i < offset + n:
            return j, i - offset
        offset += n
    raise IndexError(f"training index {i} out of range")


def depth_features_loo(i: int, perclass, whiteners, scale=SPD, kernel: KernelSpec | None = None) -> DepthFeatures:
    """Features of training point ``i`` with that point removed from its own class.

    ``i`` indexes the concatenation of ``perclass`` in class order.  Whiteners
    are reused as given.
    """
    j, k = locate(i, perclass)
    if len(perclass[j]) < 2:
        raise InsufficientDataError("leave-one-out needs at least two points in the class")
    x = np.asarray(perclass[j])[k]
    exclude = [np.array([k if c == j else -1]) for c in range(len(perclass))]
    geom = DepthGeometry(x, perclass, whiteners, exclude)
    bandwidth = None if isinstance(scale, str) else float(scale)
    return DepthFeatures(geom.features(scale, kernel)[0], bandwidth)


def training_geometry(X, labels, perclass, whiteners, loo: bool) -> DepthGeometry:
    """Geometry of the training points themselves, optionally leave-one-out.

    ``labels`` are 0-based class indices aligned with the rows of ``X``; the
    row of each point inside its class sample is recovered from the order in
    which points of that class appear in ``X``.
    """
    labels = np.asarray(labels)
    exclude = None
    if loo:
        exclude = []
        for j in range(len(perclass)):
            ex = np.full(len(labels), -1)
            rows = np.flatnonzero(labels == j)
            ex[rows] = np.arange(len(rows))
            exclude.append(ex)
    return DepthGeometry(X, perclass, whiteners, exclude)


# ---------------------------------------------------------------------------
# high-dimension, low-sample-size limits


@dataclass(frozen=True)
class HdlssParams:
    """Limiting second moments of standardized class distributions.

    ``sigma2[j]`` is the average per-coordinate variance of class j and
    ``nu[j, i]`` the average squared mean difference between classes j, i.
    """

    sigma2: np.ndarray
    nu: np.ndarray = field(default=None)

    def __post_init__(self):
        sigma2 = np.atleast_1d(np.asarray(self.sigma2, dtype=float))
        J = len(sigma2)
        nu = np.zeros((J, J)) if self.nu is None else np.asarray(self.nu, dtype=float)
        object.__setattr__(self, "sigma2", sigma2)
        object.__setattr__(self, "nu", nu)
        if nu.shape != (J, J):
            raise InvalidParameterError("nu must be J x J")
        if not (np.all(np.isfinite(sigma2)) and np.all(sigma2 > 0)):
            raise InvalidParameterError("sigma2 entries must be positive")
        if not np.all(np.isfinite(nu)) or np.any(nu < 0):
            raise InvalidParameterError("nu entries must be non-negative")
        if not np.allclose(nu, nu.T) or np.any(np.diag(nu) != 0):
            raise InvalidParameterError("nu must be symmetric with zero diagonal")

    @classmethod
    def from_limits(cls, a, b) -> HdlssParams:
        """Build from the limits ``a_j`` and ``b_ji`` of the moment conditions."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        bd = np.diag(b)
        return cls(a - bd, bd[:, None] - 2 * b + bd[None, :])

    @property
    def J(self) -> int:
        return len(self.sigma2)

    def distance_scale(self) -> np.ndarray:
        """``e_ji``: limiting ``||X_j - X_i|| / sqrt(d)`` for independent draws."""
        s = self.sigma2
        e = np.sqrt(s[:, None] + s[None, :] + self.nu)
        np.fill_diagonal(e, np.sqrt(2 * s))
        return e


def hdlss_spd_limits(p: HdlssParams) -> np.ndarray:
    """Matrix whose row j is the limit of z(X) for X from class j."""
    s = p.sigma2
    ratio = (s[:, None] + p.nu) / (s[:, None] + s[None, :] + p.nu)
    c = 1.0 - np.sqrt(ratio)
    np.fill_diagonal(c, 1.0 - math.sqrt(0.5))
    return c


def hdlss_lspd_limits(p: HdlssParams, A: float, kernel: KernelSpec | None = None) -> np.ndarray:
    """Limits of z_h(X) when sqrt(d)/h tends to ``A``.

    ``A = 0`` is the regime where h grows faster than sqrt(d) and
    ``A = inf`` the regime where it grows slower, which gives zero.  The
    default kernel is the unnormalised profile ``exp(-s^2/2)``.
    """
    A = float(A)
    if not A >= 0:
        raise InvalidParameterError("A must be non-negative")
    c = hdlss_spd_limits(p)
    if math.isinf(A):
        return np.zeros_like(c)
    kernel = kernel or KernelSpec(1, normalized=False)
    return kernel.profile(p.distance_scale() * A) * c
