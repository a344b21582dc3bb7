import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import multivariate_normal, ortho_group

from lspd.depth import (
    DepthGeometry,
    HdlssParams,
    KernelSpec,
    depth_features,
    depth_features_loo,
    hdlss_lspd_limits,
    hdlss_spd_limits,
    lspd,
    sign_vector,
    spd,
)
from lspd.errors import InsufficientDataError, InvalidDataError, InvalidParameterError
from lspd.numerics import estimate_scatter, identity_whitener

C_SAME = 1 - math.sqrt(0.5)


def spd_oracle(x, data, W=None):
    """Literal 1 - || mean_i u(W (x - x_i)) || with explicit loops."""
    d = len(x)
    W = np.eye(d) if W is None else W
    acc = [0.0] * d
    for xi in data:
        t = W @ (np.asarray(x) - xi)
        norm = math.sqrt(sum(v * v for v in t))
        if norm > 0:
            for k in range(d):
                acc[k] += t[k] / norm
    return 1 - math.sqrt(sum((a / len(data)) ** 2 for a in acc))


class TestSignVector:
    def test_normalises(self):
        np.testing.assert_allclose(sign_vector([3.0, 4.0]), [0.6, 0.8])

    def test_zero(self):
        np.testing.assert_array_equal(sign_vector([0.0, 0.0]), [0.0, 0.0])

    def test_unit_norm(self, rng):
        for _ in range(20):
            assert abs(np.linalg.norm(sign_vector(rng.standard_normal(4))) - 1) < 1e-12

    def test_rejects_non_finite(self):
        with pytest.raises(InvalidDataError):
            sign_vector([np.inf, 0.0])


class TestSpd:
    def test_single_point_equal_to_query(self):
        assert spd([1.0, 2.0], [[1.0, 2.0]]) == 1.0

    def test_midpoint_of_two_points(self):
        assert spd([0.5, 0.5], [[0.0, 0.0], [1.0, 1.0]]) == pytest.approx(1.0, abs=1e-15)

    def test_univariate_median(self, rng):
        data = rng.standard_normal((9, 1))
        assert spd(np.median(data, axis=0), data) == pytest.approx(1.0, abs=1e-15)

    def test_matches_loop_oracle(self, rng):
        data = rng.standard_normal((7, 2))
        x = rng.standard_normal(2)
        assert spd(x, data) == pytest.approx(spd_oracle(x, data), abs=1e-12)

    def test_matches_loop_oracle_whitened(self, rng):
        data = rng.standard_normal((30, 3)) @ rng.standard_normal((3, 3))
        w = estimate_scatter(data)
        x = rng.standard_normal(3)
        assert spd(x, data, w) == pytest.approx(spd_oracle(x, data, w.transform), abs=1e-12)

    def test_far_point_has_small_depth(self, rng):
        data = rng.standard_normal((50, 2))
        assert spd([1e3, 0.0], data) < 1e-3

    def test_empty_sample(self):
        with pytest.raises(InsufficientDataError):
            spd([0.0], np.empty((0, 1)))


class TestLspd:
    def test_single_point(self):
        for h in (0.3, 1.0):
            d = 3
            expected = h ** (-d) * (2 * math.pi) ** (-d / 2)
            assert lspd(np.zeros(d), np.zeros((1, d)), h=h) == pytest.approx(expected, rel=1e-12)

    def test_huge_bandwidth_tends_to_scaled_spd(self, rng):
        data = rng.standard_normal((20, 2))
        x = rng.standard_normal(2)
        k0 = KernelSpec(2).k0
        assert lspd(x, data, h=1e6) == pytest.approx(k0 * spd(x, data), rel=1e-3)

    @pytest.mark.parametrize("h", [0.2, 0.7, 2.5])
    def test_first_term_is_gaussian_kde(self, rng, h):
        # a sample symmetric about x makes the sign term vanish exactly
        half = rng.standard_normal((15, 2))
        x = np.array([0.3, -0.2])
        data = np.vstack([x + half, x - half])
        kde = np.mean([multivariate_normal.pdf(x, mean=xi, cov=h * h * np.eye(2)) for xi in data])
        scale = h**2 if h > 1 else 1.0
        assert lspd(x, data, h=h) == pytest.approx(scale * kde, rel=1e-12)

    def test_continuous_at_one(self, rng):
        data = rng.standard_normal((25, 3))
        x = rng.standard_normal(3)
        lo = lspd(x, data, h=1 - 1e-9)
        hi = lspd(x, data, h=1 + 1e-9)
        assert hi == pytest.approx(lo, rel=1e-6)

    def test_bad_bandwidth(self):
        with pytest.raises(InvalidParameterError):
            lspd([0.0], [[1.0]], h=0.0)

    def test_tiny_bandwidth_high_dimension_is_finite(self, rng):
        data = rng.standard_normal((10, 50))
        z = lspd(data[0], data, h=1e-3)
        assert np.isfinite(z) and z > 0

    def test_unnormalised_kernel(self, rng):
        data = rng.standard_normal((10, 2))
        x = rng.standard_normal(2)
        ratio = lspd(x, data, h=3.0) / lspd(x, data, h=3.0, kernel=KernelSpec(2, normalized=False))
        assert ratio == pytest.approx(1 / (2 * math.pi))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 100_000), st.integers(1, 4), st.floats(0.05, 50.0))
def test_depth_ranges(seed, d, h):
    rng = np.random.default_rng(seed)
    data = rng.standard_normal((12, d)) * rng.uniform(0.1, 5)
    X = np.vstack([rng.standard_normal((5, d)) * 3, data[:2]])
    geom = DepthGeometry(X, [data], [identity_whitener(d)])
    s = geom.spd()
    assert np.all((s >= 0) & (s <= 1))
    assert np.all(geom.lspd(h) >= 0)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 100_000))
def test_rotation_invariance(seed):
    rng = np.random.default_rng(seed)
    data = rng.standard_normal((15, 3))
    x = rng.standard_normal(3)
    Q = ortho_group.rvs(3, random_state=seed)
    assert spd(Q @ x, data @ Q.T) == pytest.approx(spd(x, data), abs=1e-10)


class TestDepthFeatures:
    def test_mirrored_classes_give_equal_entries(self, rng):
        a = rng.standard_normal((10, 2)) + [2.0, 0.0]
        b = a * [-1.0, 1.0]
        ws = [identity_whitener(2)] * 2
        for scale in ("spd", 0.8, 4.0):
            z = depth_features([0.0, 0.0], [a, b], ws, scale).values
            assert z[0] == pytest.approx(z[1], rel=1e-12)

    def test_entries_match_per_class_calls(self, rng):
        classes = [rng.standard_normal((8 + j, 3)) + j for j in range(3)]
        ws = [estimate_scatter(c, "diagonal") for c in classes]
        x = rng.standard_normal(3)
        z = depth_features(x, classes, ws, "spd").values
        np.testing.assert_allclose(z, [spd(x, c, w) for c, w in zip(classes, ws)], atol=1e-14)
        z = depth_features(x, classes, ws, 0.7).values
        np.testing.assert_allclose(z, [lspd(x, c, w, 0.7) for c, w in zip(classes, ws)], rtol=1e-12)
        assert np.all((0 <= depth_features(x, classes, ws).values) & (depth_features(x, classes, ws).values <= 1))


class TestLooFeatures:
    def test_pair_leaves_a_single_sign(self):
        classes = [np.array([[0.0, 0.0], [1.0, 1.0]]), np.array([[5.0, 5.0], [6.0, 5.0]])]
        ws = [identity_whitener(2)] * 2
        assert depth_features_loo(0, classes, ws).values[0] == pytest.approx(0.0, abs=1e-15)

    @pytest.mark.parametrize("scale", ["spd", 0.5, 3.0])
    def test_equals_delete_and_recompute(self, rng, scale):
        classes = [rng.standard_normal((6, 2)), rng.standard_normal((5, 2)) + 1]
        ws = [estimate_scatter(c) for c in classes]
        for i, (j, k) in enumerate([(0, r) for r in range(6)] + [(1, r) for r in range(5)]):
            x = classes[j][k]
            reduced = [np.delete(c, k, axis=0) if c_idx == j else c for c_idx, c in enumerate(classes)]
            want = depth_features(x, reduced, ws, scale).values
            got = depth_features_loo(i, classes, ws, scale).values
            np.testing.assert_allclose(got, want, rtol=1e-12, atol=1e-15)

    def test_other_class_entry_unchanged(self, rng):
        classes = [rng.standard_normal((6, 2)), rng.standard_normal((5, 2)) + 1]
        ws = [identity_whitener(2)] * 2
        x = classes[0][2]
        assert depth_features_loo(2, classes, ws).values[1] == depth_features(x, classes, ws).values[1]

    def test_singleton_class(self):
        classes = [np.array([[0.0]]), np.array([[1.0], [2.0]])]
        with pytest.raises(InsufficientDataError):
            depth_features_loo(0, classes, [identity_whitener(1)] * 2)


class TestHdlssLimits:
    def test_equal_variances_give_constant_matrix(self):
        c = hdlss_spd_limits(HdlssParams([1.0, 1.0]))
        np.testing.assert_allclose(c, C_SAME)

    def test_unequal_variances(self):
        c = hdlss_spd_limits(HdlssParams([1.0, 4.0]))
        assert c[0, 1] == pytest.approx(1 - math.sqrt(1 / 5))
        assert c[0, 1] == pytest.approx(0.55279, abs=5e-6)

    def test_diagonal_constant(self, rng):
        for _ in range(10):
            J = 3
            nu = rng.uniform(0, 2, (J, J))
            nu = nu + nu.T
            np.fill_diagonal(nu, 0)
            c = hdlss_spd_limits(HdlssParams(rng.uniform(0.1, 5, J), nu))
            np.testing.assert_allclose(np.diag(c), C_SAME)
            assert np.all((c > 0) & (c < 1))

    def test_from_limits(self):
        # a_j = E X^2 averages, b_ji = products of means
        mu = np.array([0.0, 1.0])
        var = np.array([1.0, 4.0])
        p = HdlssParams.from_limits(var + mu**2, np.outer(mu, mu))
        np.testing.assert_allclose(p.sigma2, var)
        np.testing.assert_allclose(p.nu, [[0, 1], [1, 0]])

    @pytest.mark.parametrize("s1", [0.5, 1.0, 2.0])
    @pytest.mark.parametrize("s2", [0.5, 1.0, 2.0])
    @pytest.mark.parametrize("nu", [0.0, 0.3, 1.0])
    def test_rows_distinct_iff_classes_differ(self, s1, s2, nu):
        c = hdlss_spd_limits(HdlssParams([s1, s2], [[0, nu], [nu, 0]]))
        rows_equal = np.allclose(c[0], c[1], atol=1e-12)
        assert rows_equal == (s1 == s2 and nu == 0.0)

    def test_lspd_regimes(self):
        p = HdlssParams([1.0, 1.0])
        np.testing.assert_allclose(hdlss_lspd_limits(p, 0.0), hdlss_spd_limits(p))
        np.testing.assert_array_equal(hdlss_lspd_limits(p, math.inf), 0.0)
        assert hdlss_lspd_limits(p, 1.0)[0, 0] == pytest.approx(math.exp(-1) * C_SAME)
        assert hdlss_lspd_limits(p, 1.0)[0, 0] == pytest.approx(0.10775, abs=5e-6)

    def test_lspd_normalised_profile_at_zero(self):
        p = HdlssParams([1.0, 3.0])
        k = KernelSpec(4)
        np.testing.assert_allclose(hdlss_lspd_limits(p, 0.0, k), k.k0 * hdlss_spd_limits(p))

    def test_invalid_params(self):
        with pytest.raises(InvalidParameterError):
            HdlssParams([1.0, -1.0])
        with pytest.raises(InvalidParameterError):
            HdlssParams([1.0, 1.0], [[0, 1], [2, 0]])


class TestHdlssSimulation:
    def _features(self, d, h=None, n=100, seed=0):
        rng = np.random.default_rng(seed)
        samples = [rng.standard_normal((n, d)), 2 * rng.standard_normal((n, d))]
        queries = rng.standard_normal((n, d))
        geom = DepthGeometry(queries, samples, [identity_whitener(d)] * 2)
        if h is None:
            return geom.spd().mean(axis=0)
        return geom.lspd(h, KernelSpec(d, normalized=False)).mean(axis=0)

    def test_spd_limit_at_d2000(self):
        z = self._features(2000)
        np.testing.assert_allclose(z, hdlss_spd_limits(HdlssParams([1.0, 4.0]))[0], atol=0.02)

    def test_lspd_limit_at_sqrt_d_over_h_one(self):
        z = self._features(4096, h=64.0)
        want = hdlss_lspd_limits(HdlssParams([1.0, 4.0]), 1.0)[0]
        np.testing.assert_allclose(z, want, atol=0.01)


class TestStatisticalProperties:
    def test_spd_decreases_outward(self):
        data = np.random.default_rng(1).standard_normal((100_000, 2))
        radii = [0.5, 1.0, 2.0, 4.0]
        z = DepthGeometry(np.column_stack([radii, np.zeros(4)]), [data], [identity_whitener(2)]).spd()[:, 0]
        assert np.all(np.diff(z) < -0.01)

    def test_small_bandwidth_approaches_density(self):
        data = np.random.default_rng(2).standard_normal((100_000, 2))
        pts = np.array([[0.0, 0.0], [0.5, 0.0], [0.0, -0.7], [0.3, 0.3]])
        true = multivariate_normal.pdf(pts, mean=[0, 0])
        geom = DepthGeometry(pts, [data], [identity_whitener(2)])
        errs = [np.max(np.abs(geom.lspd(h)[:, 0] - true)) for h in (0.5, 0.25, 0.1)]
        assert errs[0] > errs[1] > errs[2]
        assert errs[2] < 0.01

    def test_uniform_convergence_trend(self):
        g = np.linspace(-2, 2, 5)
        grid = np.array([[a, b] for a in g for b in g])
        gaps = {1_000: [], 10_000: []}
        for seed in range(4):
            rng = np.random.default_rng(100 + seed)
            big = rng.standard_normal((100_000, 2))
            ref = DepthGeometry(grid, [big], [identity_whitener(2)]).lspd(1.0)[:, 0]
            for n in gaps:
                small = rng.standard_normal((n, 2))
                z = DepthGeometry(grid, [small], [identity_whitener(2)]).lspd(1.0)[:, 0]
                gaps[n].append(np.max(np.abs(z - ref)))
        assert np.mean(gaps[1_000]) > np.mean(gaps[10_000])
