"""The labelled-sample container used throughout the package."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidDataError, InvalidLabelsError, ShapeError


@dataclass(frozen=True)
class LabeledDataset:
    """``n`` observations in R^d with integer class labels in ``1..J``.

    ``class_names`` optionally keeps the original label strings (CSV input),
    indexed by ``label - 1``.
    """

    X: np.ndarray
    labels: np.ndarray
    J: int
    class_names: tuple = field(default=())

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        labels = np.asarray(self.labels, dtype=int).ravel()
        if X.shape[0] != labels.shape[0]:
            raise ShapeError("X and labels have different lengths")
        if not np.all(np.isfinite(X)):
            raise InvalidDataError("observations must be finite")
        if labels.size and (labels.min() < 1 or labels.max() > self.J):
            raise InvalidLabelsError(f"labels must lie in 1..{self.J}")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @property
    def index(self) -> np.ndarray:
        """0-based class indices."""
        return self.labels - 1

    def perclass(self) -> list[np.ndarray]:
        return [self.X[self.labels == j + 1] for j in range(self.J)]

    def counts(self) -> np.ndarray:
        return np.bincount(self.labels - 1, minlength=self.J)

    def subset(self, rows) -> LabeledDataset:
        return LabeledDataset(self.X[rows], self.labels[rows], self.J, self.class_names)

    def to_csv(self, path) -> None:
        """Write ``x1,...,xd,label`` rows with round-trip float formatting."""
        header = ",".join([f"x{k + 1}" for k in range(self.d)] + ["label"])
        with open(path, "w") as fh:
            fh.write(header + "\n")
            for row, lab in zip(self.X, self.labels):
                fh.write(",".join(repr(float(v)) for v in row) + f",{lab}\n")
