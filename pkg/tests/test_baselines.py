import dataclasses

import numpy as np
import pytest

from lspd.baselines import (
    BaselineConfig,
    Kind,
    _knn_votes,
    fit_baseline,
    kde_bandwidth_grid,
    knn_k_grid,
    predict_baseline,
)
from lspd.dataset import LabeledDataset
from lspd.errors import InvalidParameterError, ShapeError
from lspd.numerics import ScatterMode
from lspd.simgen import ExampleSpec, generate


def two_gaussians(rng, n=40, d=2, gap=2.0):
    a = rng.standard_normal((n, d)) + gap
    return LabeledDataset(np.vstack([a, rng.standard_normal((n, d))]), np.repeat([1, 2], n), 2)


class TestGrids:
    def test_k_grid(self):
        assert knn_k_grid(100) == [1, 3, 5, 7, 9, 11]
        assert knn_k_grid(50) == [1, 3, 5, 7]
        assert knn_k_grid(1) == [1]

    def test_bandwidth_grid(self):
        g = kde_bandwidth_grid(81, 0)
        assert len(g) == 10
        assert g[0] == pytest.approx(0.1 * 81 ** -0.25)
        assert g[-1] == pytest.approx(10 * 81 ** -0.25)
        np.testing.assert_allclose(np.diff(np.log(g)), np.log(100) / 9)


class TestLinear:
    def test_midpoint_goes_to_first_class(self, rng):
        a = rng.standard_normal((30, 2)) + [3.0, 1.0]
        train = LabeledDataset(np.vstack([a, -a]), np.repeat([1, 2], 30), 2)
        m = fit_baseline("LDA", train)
        assert predict_baseline(m, [0.0, 0.0]) == 1
        p = m.predict_proba([[0.0, 0.0]])[0]
        s = m.scores([[0.0, 0.0]])[0]
        assert s[0] == s[1]
        np.testing.assert_allclose(p, 0.5)
        assert predict_baseline(m, [3.0, 1.0]) == 1
        assert predict_baseline(m, [-3.0, -1.0]) == 2

    def test_equal_means_follow_prior(self, rng):
        a = rng.standard_normal((10, 3))
        train = LabeledDataset(np.vstack([a, a, a]), np.array([1] * 10 + [2] * 20), 2)
        m = fit_baseline(Kind.LDA, train)
        assert np.all(m.predict(rng.normal(0, 5, (50, 3))) == 2)

    def test_posteriors_sum_to_one(self, rng):
        train = two_gaussians(rng)
        X = rng.normal(0, 3, (30, 2))
        for kind in ("LDA", "QDA"):
            p = fit_baseline(kind, train).predict_proba(X)
            np.testing.assert_allclose(p.sum(axis=1), 1.0)

    def test_qda_with_shared_scatter_is_lda(self, rng):
        train = two_gaussians(rng, d=3)
        lda = fit_baseline("LDA", train)
        qda = fit_baseline("QDA", train)
        shared = dataclasses.replace(qda, whiteners=[lda.whiteners[0]] * 2, log_dets=lda.log_dets)
        X = rng.normal(1, 3, (200, 3))
        np.testing.assert_array_equal(shared.predict(X), lda.predict(X))

    def test_singular_scatter_falls_back_to_diagonal(self, rng):
        X = np.vstack([rng.standard_normal((3, 5)), rng.standard_normal((20, 5))])
        train = LabeledDataset(X, np.array([1] * 3 + [2] * 20), 2)
        m = fit_baseline("QDA", train, BaselineConfig(scatter=ScatterMode.FULL))
        assert m.whiteners[0].mode is ScatterMode.DIAGONAL
        assert m.whiteners[1].mode is ScatterMode.FULL
        assert len(m.warnings) == 1 and "class 1" in m.warnings[0]

    def test_qda_on_e3(self):
        spec = ExampleSpec("E3", 5)
        errs = []
        for seed in range(5):
            m = fit_baseline("QDA", generate(spec, 200, seed))
            test = generate(spec, 1000, 100 + seed)
            errs.append(np.mean(m.predict(test.X) != test.labels))
        assert abs(100 * np.mean(errs) - 11.09) <= 2.0


class TestNeighbours:
    def test_one_nn_has_zero_training_error(self, rng):
        train = two_gaussians(rng, gap=0.5)
        m = fit_baseline("KNN", train, BaselineConfig(k_grid=(1,)))
        np.testing.assert_array_equal(m.predict(train.X), train.labels)

    def test_matches_sort_oracle(self, rng):
        train = two_gaussians(rng, n=10, gap=1.0)
        m = fit_baseline("KNN", train, BaselineConfig(scatter=ScatterMode.IDENTITY, k_grid=(5,)))
        for x in rng.normal(0.5, 1.5, (40, 2)):
            d2 = [float(np.sum((x - xi) ** 2)) for xi in train.X]
            order = sorted(range(20), key=lambda i: (d2[i], i))[:5]
            ones = sum(train.labels[i] == 1 for i in order)
            assert predict_baseline(m, x) == (1 if ones >= 3 else 2)

    def test_votes_ignore_monotone_transform(self, rng):
        dist = rng.uniform(size=(15, 30))
        y = rng.integers(1, 4, 30)
        np.testing.assert_array_equal(_knn_votes(dist, y, 7, 3), _knn_votes(dist**2, y, 7, 3))

    def test_k_is_loo_optimal(self, rng):
        train = two_gaussians(rng, n=30, gap=1.0)
        m = fit_baseline("KNN", train)
        assert m.k in knn_k_grid(train.n)
        for k in knn_k_grid(train.n):
            other = fit_baseline("KNN", train, BaselineConfig(k_grid=(k,)))
            assert m.loo_error <= other.loo_error


class TestKernel:
    def test_huge_bandwidth_follows_prior(self, rng):
        X = rng.standard_normal((30, 2))
        train = LabeledDataset(X, np.array([1] * 12 + [2] * 18), 2)
        m = fit_baseline("KDE", train, BaselineConfig(bandwidth_grid=(1e6,)))
        assert np.all(m.predict(rng.normal(0, 3, (20, 2))) == 2)

    def test_separable(self, rng):
        train = two_gaussians(rng, gap=8.0)
        m = fit_baseline("KDE", train)
        assert m.loo_error == 0.0
        assert predict_baseline(m, [8.0, 8.0]) == 1

    def test_no_posteriors(self, rng):
        m = fit_baseline("KDE", two_gaussians(rng))
        with pytest.raises(InvalidParameterError):
            m.predict_proba([[0.0, 0.0]])


def test_dimension_mismatch(rng):
    m = fit_baseline("LDA", two_gaussians(rng))
    with pytest.raises(ShapeError):
        m.predict(np.zeros((1, 3)))
    with pytest.raises(ShapeError):
        predict_baseline(m, np.zeros((1, 2)))
