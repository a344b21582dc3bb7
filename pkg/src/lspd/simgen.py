"""Simulated two-class examples E1-E5 with exact Bayes rules.

Random streams: every (seed, class) pair drives its own Philox4x64
generator seeded with ``SeedSequence([seed, class_index])``, so class 2 of a
dataset does not depend on how many class-1 points were drawn.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, logsumexp

from .dataset import LabeledDataset
from .errors import InvalidParameterError, ShapeError

EXAMPLES = ("E1", "E2", "E3", "E4", "E5")
LOG_HALF = math.log(0.5)


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *stream])))


@dataclass(frozen=True)
class ExampleSpec:
    id: str
    d: int

    def __post_init__(self):
        if self.id not in EXAMPLES:
            raise InvalidParameterError(f"unknown example {self.id!r}; choose from {EXAMPLES}")
        if self.d < 1:
            raise InvalidParameterError("dimension must be positive")

    @property
    def priors(self) -> tuple[float, float]:
        return (0.5, 0.5)

    def e5_scales(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Exponential scales of both classes and the class-2 location shift.

        Class 2 is shifted so that the class-1 mean minus the class-2 mean is
        1/d in every coordinate.
        """
        d = self.d
        i = np.arange(1, d + 1)
        s1 = d / (d - i + 1.0)
        s2 = d / (2.0 * i)
        return s1, s2, s1 - s2 - 1.0 / d


# ---------------------------------------------------------------------------
# sampling


def uniform_shell(rng: np.random.Generator, n: int, d: int, r1: float, r2: float) -> np.ndarray:
    """``n`` draws from the uniform distribution on ``{r1 <= |x| <= r2}``."""
    if not 0 <= r1 < r2:
        raise InvalidParameterError("need 0 <= r1 < r2")
    g = rng.standard_normal((n, d))
    norms = np.linalg.norm(g, axis=1)
    norms[norms == 0] = 1.0
    direction = g / norms[:, None]
    u = rng.random(n)
    # r^d uniform on [r1^d, r2^d], written relative to r2 to avoid overflow
    rho_d = (r1 / r2) ** d
    radius = r2 * (rho_d + u * (1.0 - rho_d)) ** (1.0 / d)
    return direction * radius[:, None]


def sample_uniform_shell(d: int, r1: float, r2: float, seed: int) -> np.ndarray:
    return uniform_shell(make_rng(seed), 1, d, r1, r2)[0]


def _mixture_choice(rng, n, k):
    return rng.integers(0, k, size=n)


def _sample_class(spec: ExampleSpec, j: int, n: int, rng) -> np.ndarray:
    d = spec.d
    if spec.id == "E1":
        if j == 0:
            scale = np.where(_mixture_choice(rng, n, 2) == 0, 1.0, math.sqrt(10.0))
            return rng.standard_normal((n, d)) * scale[:, None]
        return rng.standard_normal((n, d)) * math.sqrt(5.0)
    if spec.id == "E2":
        shells = [(0.0, 1.0), (2.0, 3.0)] if j == 0 else [(1.0, 2.0), (3.0, 4.0)]
        comp = _mixture_choice(rng, n, 2)
        draws = [uniform_shell(rng, n, d, *shells[c]) for c in range(2)]
        return np.where((comp == 0)[:, None], draws[0], draws[1])
    if spec.id == "E3":
        if j == 0:
            return rng.standard_normal((n, d))
        return 1.0 + 2.0 * rng.standard_normal((n, d))
    if spec.id == "E4":
        centres = np.array([0.0, 2.0, 4.0]) + j
        comp = _mixture_choice(rng, n, 3)
        return centres[comp][:, None] + 0.5 * rng.standard_normal((n, d))
    s1, s2, shift = spec.e5_scales()
    if j == 0:
        return rng.exponential(s1, size=(n, d))
    return rng.exponential(s2, size=(n, d)) + shift


def sample_class(spec: ExampleSpec, j: int, n: int, seed: int) -> np.ndarray:
    """``n`` draws from class ``j`` (0-based) of an example."""
    return _sample_class(spec, j, n, make_rng(seed, j))


def generate(spec: ExampleSpec, n_per_class: int, seed: int) -> LabeledDataset:
    if n_per_class < 1:
        raise InvalidParameterError("n_per_class must be at least 1")
    parts = [sample_class(spec, j, n_per_class, seed) for j in range(2)]
    labels = np.repeat([1, 2], n_per_class)
    return LabeledDataset(np.vstack(parts), labels, 2)


# ---------------------------------------------------------------------------
# exact densities


def _log_normal(X, mean, var):
    d = X.shape[1]
    sq = np.sum((X - mean) ** 2, axis=1)
    return -0.5 * d * math.log(2 * math.pi * var) - 0.5 * sq / var


def _log_shell(X, r1, r2):
    d = X.shape[1]
    r = np.linalg.norm(X, axis=1)
    log_unit_ball = 0.5 * d * math.log(math.pi) - gammaln(0.5 * d + 1)
    log_vol = log_unit_ball + d * math.log(r2) + math.log1p(-((r1 / r2) ** d))
    return np.where((r >= r1) & (r <= r2), -log_vol, -np.inf)


def _log_exponential(X, scales):
    inside = np.all(X >= 0, axis=1)
    with np.errstate(invalid="ignore"):
        val = -np.sum(np.log(scales)) - np.sum(X / scales, axis=1)
    return np.where(inside, val, -np.inf)


def log_density(spec: ExampleSpec, j: int, X) -> np.ndarray:
    """Log density of class ``j`` (0-based) at the rows of ``X``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != spec.d:
        raise ShapeError(f"expected dimension {spec.d}, got {X.shape[1]}")
    if spec.id == "E1":
        if j == 0:
            return np.logaddexp(LOG_HALF + _log_normal(X, 0.0, 1.0), LOG_HALF + _log_normal(X, 0.0, 10.0))
        return _log_normal(X, 0.0, 5.0)
    if spec.id == "E2":
        shells = [(0.0, 1.0), (2.0, 3.0)] if j == 0 else [(1.0, 2.0), (3.0, 4.0)]
        return np.logaddexp(LOG_HALF + _log_shell(X, *shells[0]), LOG_HALF + _log_shell(X, *shells[1]))
    if spec.id == "E3":
        return _log_normal(X, 0.0, 1.0) if j == 0 else _log_normal(X, 1.0, 4.0)
    if spec.id == "E4":
        comps = [_log_normal(X, c + j, 0.25) for c in (0.0, 2.0, 4.0)]
        return logsumexp(np.column_stack(comps), axis=1) - math.log(3.0)
    s1, s2, shift = spec.e5_scales()
    return _log_exponential(X, s1) if j == 0 else _log_exponential(X - shift, s2)


def bayes_labels(spec: ExampleSpec, X) -> np.ndarray:
    """Bayes rule for every row; ties and points outside both supports go to class 1."""
    lp = np.column_stack([math.log(p) + log_density(spec, j, X) for j, p in enumerate(spec.priors)])
    return np.where(lp[:, 1] > lp[:, 0], 2, 1)


def bayes_label(spec: ExampleSpec, x) -> int:
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise InvalidParameterError("x must be finite")
    return int(bayes_labels(spec, x[None, :])[0])


def bayes_risk_mc(spec: ExampleSpec, N: int, seed: int) -> tuple[float, float]:
    """Monte Carlo Bayes risk with ``N`` draws per class and its standard error."""
    if N < 1:
        raise InvalidParameterError("N must be at least 1")
    errors = 0
    for j in range(2):
        X = sample_class(spec, j, N, seed)
        errors += int(np.sum(bayes_labels(spec, X) != j + 1))
    p = errors / (2 * N)
    return p, math.sqrt(p * (1 - p) / (2 * N))
