"""Additive multinomial logistic model on depth features.

Each feature gets a cubic B-spline expansion with knots at training
quantiles; the log-odds of class j against the reference class J are

    Phi_j(z) = b_j0 + sum_i  B_i(z_i) . beta_ji

and the coefficients maximise the ridge-penalised multinomial
log-likelihood by damped Newton iterations.
"""

from __future__ import annotations

import io
import logging
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import BSpline
from scipy.special import logsumexp

from .errors import (
    DegenerateFeatureError,
    InvalidLabelsError,
    InvalidParameterError,
    NumericalError,
    ShapeError,
)

log = logging.getLogger(__name__)

DEFAULT_DF = 5
DEFAULT_LAMBDA = 1e-3
GRAD_TOL = 1e-6
MAX_ITER = 100
MAX_HALVINGS = 40


@dataclass(frozen=True)
class BasisColumn:
    """Spline basis of one feature.

    ``df = 1`` is the identity (linear) basis.  For ``df > 1`` the full
    B-spline basis has ``df + 1`` functions; the first one is dropped because
    the basis sums to one and would duplicate the intercept.  Inputs are
    clamped to ``[lo, hi]``.
    """

    df: int
    lo: float
    hi: float
    knots: np.ndarray
    degree: int = 3

    def knot_vector(self) -> np.ndarray:
        k = self.degree
        return np.concatenate([[self.lo] * (k + 1), self.knots, [self.hi] * (k + 1)])

    def full_basis(self, values) -> np.ndarray:
        x = np.clip(np.asarray(values, dtype=float), self.lo, self.hi)
        if self.df == 1:
            return x[:, None]
        # evaluate on [0, 1]; depth features can live far below 1e-300
        span = self.hi - self.lo
        t = (self.knot_vector() - self.lo) / span
        u = np.clip((x - self.lo) / span, 0.0, 1.0)
        return BSpline.design_matrix(u, t, self.degree).toarray()

    def design(self, values) -> np.ndarray:
        full = self.full_basis(values)
        return full if self.df == 1 else full[:, 1:]


def build_basis(values, df: int) -> tuple[BasisColumn, np.ndarray]:
    """Fit a basis to a training column and return it with its design block."""
    values = np.asarray(values, dtype=float).ravel()
    if df < 1:
        raise InvalidParameterError("df must be at least 1")
    lo, hi = float(values.min()), float(values.max())
    if df == 1:
        col = BasisColumn(1, lo, hi, np.empty(0), degree=1)
        return col, col.design(values)
    distinct = np.unique(values)
    if distinct.size < df + 1:
        raise DegenerateFeatureError(f"need {df + 1} distinct values, got {distinct.size}")
    degree = min(3, df)
    n_inner = df - degree
    levels = np.arange(1, n_inner + 1) / (n_inner + 1)
    knots = np.quantile(values, levels)
    if not _valid_knots(knots, lo, hi):
        knots = np.quantile(distinct, levels)
        if not _valid_knots(knots, lo, hi):
            raise DegenerateFeatureError("quantile knots are not distinct")
    col = BasisColumn(df, lo, hi, knots, degree)
    return col, col.design(values)


def _valid_knots(knots, lo, hi) -> bool:
    # strictly increasing once mapped to [0, 1], where the basis is evaluated
    edges = (np.concatenate([[lo], knots, [hi]]) - lo) / (hi - lo)
    return bool(np.all(np.diff(edges) > 0))


@dataclass(frozen=True)
class GamModel:
    """Fitted additive logistic model; class ``J`` is the reference."""

    basis: tuple
    coef: np.ndarray  # (J - 1) x (1 + sum of basis widths)
    lam: float
    J: int
    df: int
    converged: bool = True
    iterations: int = 0

    def design(self, Z) -> np.ndarray:
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        if Z.shape[1] != len(self.basis):
            raise ShapeError(f"expected {len(self.basis)} features, got {Z.shape[1]}")
        blocks = [np.ones((Z.shape[0], 1))]
        blocks += [b.design(Z[:, i]) for i, b in enumerate(self.basis)]
        return np.hstack(blocks)

    def predictors(self, Z) -> np.ndarray:
        """``n x J`` matrix of (Phi_1, ..., Phi_{J-1}, 0)."""
        eta = self.design(Z) @ self.coef.T
        return np.hstack([eta, np.zeros((eta.shape[0], 1))])

    def posterior(self, Z) -> np.ndarray:
        eta = self.predictors(Z)
        return np.exp(eta - logsumexp(eta, axis=1, keepdims=True))

    def predict(self, Z) -> np.ndarray:
        """1-based labels; ties go to the lowest class index."""
        return np.argmax(self.posterior(Z), axis=1) + 1

    def dumps(self) -> str:
        out = io.StringIO()
        out.write(f"gamodel v1 J={self.J} df={self.df} lambda={self.lam!r}\n")
        for b in self.basis:
            knots = " ".join(repr(float(k)) for k in b.knots)
            out.write(f"feature df={b.df} degree={b.degree} lo={b.lo!r} hi={b.hi!r} knots={knots}\n")
        for row in self.coef:
            out.write("coef " + " ".join(repr(float(v)) for v in row) + "\n")
        return out.getvalue()

    @classmethod
    def loads(cls, text: str) -> GamModel:
        lines = text.strip().splitlines()
        head = lines[0].split()
        if head[:2] != ["gamodel", "v1"]:
            raise ValueError("not a gamodel v1 record")
        meta = dict(kv.split("=", 1) for kv in head[2:])
        basis, coef = [], []
        for line in lines[1:]:
            kind, _, rest = line.partition(" ")
            if kind == "feature":
                pre, _, knots = rest.partition("knots=")
                fields = dict(kv.split("=", 1) for kv in pre.split())
                basis.append(
                    BasisColumn(
                        int(fields["df"]),
                        float(fields["lo"]),
                        float(fields["hi"]),
                        np.array([float(k) for k in knots.split()]),
                        int(fields["degree"]),
                    )
                )
            elif kind == "coef":
                coef.append([float(v) for v in rest.split()])
        return cls(tuple(basis), np.array(coef), float(meta["lambda"]), int(meta["J"]), int(meta["df"]))


def predict_posterior(m: GamModel, z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if z.ndim != 1 or z.shape[0] != m.J:
        raise ShapeError(f"expected a length-{m.J} feature vector")
    return m.posterior(z[None, :])[0]


def classify(m: GamModel, z) -> int:
    return int(np.argmax(predict_posterior(m, z))) + 1


# ---------------------------------------------------------------------------
# penalised multinomial likelihood


def penalized_loglik(beta, X, Y, lam):
    """Objective, gradient and negative Hessian for coefficients ``beta``.

    ``beta`` is (J-1) x P, ``X`` the n x P design with a leading column of
    ones and ``Y`` the n x J one-hot response.
    """
    K, P = beta.shape
    eta = np.hstack([X @ beta.T, np.zeros((X.shape[0], 1))])
    lse = logsumexp(eta, axis=1)
    prob = np.exp(eta - lse[:, None])[:, :K]
    pen = beta.copy()
    pen[:, 0] = 0.0
    value = float(np.sum(Y * eta) - lse.sum()) - 0.5 * lam * float(np.sum(pen * pen))
    grad = (Y[:, :K] - prob).T @ X - lam * pen
    hess = np.empty((K * P, K * P))
    for a in range(K):
        for b in range(a, K):
            w = prob[:, a] * ((a == b) - prob[:, b])
            block = X.T @ (X * w[:, None])
            hess[a * P:(a + 1) * P, b * P:(b + 1) * P] = block
            hess[b * P:(b + 1) * P, a * P:(a + 1) * P] = block
    ridge = np.full(P, lam)
    ridge[0] = 0.0
    hess += np.diag(np.tile(ridge, K))
    return value, grad, hess


def newton_fit(X, Y, lam, beta0=None, max_iter=MAX_ITER, tol=GRAD_TOL):
    """Damped Newton ascent; returns (beta, converged, iterations)."""
    K = Y.shape[1] - 1
    P = X.shape[1]
    beta = np.zeros((K, P)) if beta0 is None else np.array(beta0, dtype=float)
    value, grad, hess = penalized_loglik(beta, X, Y, lam)
    for it in range(max_iter):
        if np.max(np.abs(grad)) < tol:
            return beta, True, it
        try:
            step = np.linalg.solve(hess, grad.ravel()).reshape(K, P)
        except np.linalg.LinAlgError as exc:
            raise NumericalError("singular penalized Hessian") from exc
        if not np.all(np.isfinite(step)):
            raise NumericalError("non-finite Newton step")
        t = 1.0
        for _ in range(MAX_HALVINGS):
            cand = beta + t * step
            cval, cgrad, chess = penalized_loglik(cand, X, Y, lam)
            if cval >= value:
                break
            t *= 0.5
        else:
            # no ascent possible at machine precision
            return beta, bool(np.max(np.abs(grad)) < tol), it
        beta, value, grad, hess = cand, cval, cgrad, chess
    return beta, bool(np.max(np.abs(grad)) < tol), max_iter


def one_hot(labels, J) -> np.ndarray:
    labels = np.asarray(labels, dtype=int)
    Y = np.zeros((labels.size, J))
    Y[np.arange(labels.size), labels - 1] = 1.0
    return Y


def fit_gam(Z, labels, df: int = DEFAULT_DF, lam: float = DEFAULT_LAMBDA, J: int | None = None) -> GamModel:
    """Fit the additive multinomial logistic model.

    ``labels`` are 1-based.  A feature whose values are too degenerate for a
    ``df``-dimensional spline falls back to the linear basis.
    """
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    labels = np.asarray(labels, dtype=int).ravel()
    J = Z.shape[1] if J is None else J
    if Z.shape[0] != labels.size:
        raise ShapeError("Z and labels have different lengths")
    if not np.all(np.isfinite(Z)):
        raise NumericalError("depth features contain non-finite values")
    if lam < 0:
        raise InvalidParameterError("lambda must be non-negative")
    present = np.unique(labels)
    if labels.min() < 1 or labels.max() > J or present.size != J:
        raise InvalidLabelsError(f"every class 1..{J} must be present in the labels")

    basis, blocks = [], [np.ones((Z.shape[0], 1))]
    for i in range(Z.shape[1]):
        try:
            col, block = build_basis(Z[:, i], df)
        except DegenerateFeatureError:
            col, block = build_basis(Z[:, i], 1)
        basis.append(col)
        blocks.append(block)
    X = np.hstack(blocks)
    beta, converged, iters = newton_fit(X, one_hot(labels, J), lam)
    if not converged:
        log.debug("GAM fit stopped after %d iterations without reaching tolerance", iters)
    return GamModel(tuple(basis), beta, float(lam), J, df, converged, iters)
