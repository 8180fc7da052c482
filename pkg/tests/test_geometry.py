import math

import numpy as np
import pytest

import fairshift as fs
from fairshift.errors import ValidationError
from fairshift.geometry import sample_ball_hyperplane

from helpers import rand_dist, rand_policy, rand_threshold_policy


def sampled_tprs(ctx, group, radius, n, seed=0, clamp=True):
    geo = ctx.per_group[group]
    rng = np.random.default_rng(seed)
    samples = sample_ball_hyperplane(ctx, group, radius, n, rng)
    num = samples @ (geo.t * geo.s)
    den = samples @ geo.s
    ok = den > 0
    beta = num[ok] / den[ok]
    return np.clip(beta, 0.0, 1.0) if clamp else beta


class TestInnerProduct:
    def test_zero_vector(self):
        assert fs.inner_product(np.zeros(3), np.zeros(3), np.ones(3)) == 0.0

    def test_ones_sum_weights(self):
        s = np.array([0.2, 0.3, 0.5])
        assert fs.inner_product(np.ones(3), np.ones(3), s) == pytest.approx(1.0, abs=1e-15)

    def test_cauchy_schwarz(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            n = int(rng.integers(2, 8))
            a, b = rng.normal(size=n), rng.normal(size=n)
            s = rng.uniform(0.1, 1.0, size=n)
            lhs = abs(fs.inner_product(a, b, s))
            rhs = math.sqrt(fs.inner_product(a, a, s) * fs.inner_product(b, b, s))
            assert lhs <= rhs + 1e-10

    def test_length_mismatch(self):
        with pytest.raises(ValidationError, match="equal lengths"):
            fs.inner_product(np.ones(2), np.ones(3), np.ones(3))

    def test_nonpositive_weight(self):
        with pytest.raises(ValidationError, match="positive"):
            fs.inner_product(np.ones(2), np.ones(2), np.array([0.5, 0.0]))


class TestGeometricContext:
    def test_normalization_hyperplane(self):
        rng = np.random.default_rng(1)
        d = rand_dist(rng, n_bins=5)
        ctx = fs.geometric_context(rand_policy(rng, d), d)
        for g in d.groups:
            geo = ctx.per_group[g]
            inv_s = 1.0 / geo.s
            assert fs.inner_product(geo.r_source, inv_s, geo.s) == pytest.approx(
                1.0, abs=1e-12
            )
            assert 0.0 <= geo.xi <= math.pi / 2 + 1e-12

    def test_requires_positive_s(self):
        # a bin with mass but no positives breaks s > 0
        records = [(0, 1, "g", 1), (0, 0, "g", 1), (1, 0, "g", 2), (1, 1, "h", 1), (0, 1, "h", 1)]
        d = fs.build_empirical(records, labels=(0, 1))
        pol = fs.constant_policy(d.feature_bins, d.groups, 0.5)
        with pytest.raises(ValidationError, match="positive"):
            fs.geometric_context(pol, d)


class TestTprFromGeometry:
    def test_accept_all_gives_one(self):
        rng = np.random.default_rng(2)
        d = rand_dist(rng, n_bins=4)
        ctx = fs.geometric_context(fs.constant_policy(d.feature_bins, d.groups, 1.0), d)
        for g in d.groups:
            geo = ctx.per_group[g]
            assert fs.tpr_from_geometry(ctx, g, geo.r_source) == pytest.approx(1.0, abs=1e-12)

    def test_matches_outcome_stats(self):
        rng = np.random.default_rng(3)
        for _ in range(15):
            d = rand_dist(rng, n_bins=4)
            pol = rand_threshold_policy(rng, d)
            ctx = fs.geometric_context(pol, d)
            stats = fs.outcome_stats(pol, d)
            for g in d.groups:
                got = fs.tpr_from_geometry(ctx, g, ctx.per_group[g].r_source)
                assert got == pytest.approx(stats.beta_plus[g], abs=1e-10)

    def test_cross_move_matches_target_stats(self):
        # the ratio evaluated at a shifted marginal equals the target's TPR
        rng = np.random.default_rng(4)
        from helpers import rand_covariate_pair

        src, tgt = rand_covariate_pair(rng, n_bins=4)
        pol = rand_policy(rng, src)
        ctx = fs.geometric_context(pol, src)
        stats_t = fs.outcome_stats(pol, tgt)
        for k, g in enumerate(src.groups):
            r_t = tgt.feature_marginal()[:, k]
            assert fs.tpr_from_geometry(ctx, g, r_t) == pytest.approx(
                stats_t.beta_plus[g], abs=1e-10
            )

    def test_off_hyperplane_rejected(self):
        rng = np.random.default_rng(5)
        d = rand_dist(rng)
        ctx = fs.geometric_context(rand_policy(rng, d), d)
        g = d.groups[0]
        bad = ctx.per_group[g].r_source * 1.5
        with pytest.raises(ValidationError, match="hyperplane"):
            fs.tpr_from_geometry(ctx, g, bad)


class TestProjection:
    def test_preserves_plane_inner_products(self):
        rng = np.random.default_rng(6)
        for _ in range(20):
            d = rand_dist(rng, n_bins=5)
            pol = rand_policy(rng, d)
            ctx = fs.geometric_context(pol, d)
            for g in d.groups:
                geo = ctx.per_group[g]
                r = rng.normal(size=len(geo.s))
                rp = fs.geometry.project_to_plane(ctx, g, r)
                ones = np.ones_like(geo.s)
                assert geo.ip(rp, geo.t) == pytest.approx(geo.ip(r, geo.t), abs=1e-10)
                assert geo.ip(rp, ones) == pytest.approx(geo.ip(r, ones), abs=1e-10)

    def test_cos_ratio_identity(self):
        # beta+ . ||1|| / ||t|| equals cos(phi) / cos(xi - phi) at the
        # projected angle, for random admissible marginals
        rng = np.random.default_rng(7)
        for _ in range(20):
            d = rand_dist(rng, n_bins=5)
            pol = rand_policy(rng, d)
            ctx = fs.geometric_context(pol, d)
            for g in d.groups:
                geo = ctx.per_group[g]
                if geo.degenerate:
                    continue
                r = rng.dirichlet(np.ones(len(geo.s)))
                beta = fs.tpr_from_geometry(ctx, g, r)
                c1, c2 = geo.ip(r, geo.e1), geo.ip(r, geo.e2)
                phi = math.atan2(c2, c1)
                assert beta * geo.norm_one / geo.norm_t == pytest.approx(
                    math.cos(phi) / math.cos(geo.xi - phi), rel=1e-9, abs=1e-10
                )


class TestCosRatioMonotonicity:
    def test_strictly_decreasing_on_grid(self):
        # finite differences of cos(phi)/cos(xi - phi) stay negative
        rng = np.random.default_rng(8)
        for _ in range(10):
            xi = float(rng.uniform(0.05, math.pi / 2 - 0.05))
            phis = np.linspace(xi - math.pi / 2 + 1e-3, xi + math.pi / 2 - 1e-3, 1000)
            vals = np.cos(phis) / np.cos(xi - phis)
            assert np.all(np.diff(vals) < 0.0)


class TestTprInterval:
    def test_zero_radius_is_point(self):
        rng = np.random.default_rng(9)
        d = rand_dist(rng, n_bins=4)
        pol = rand_threshold_policy(rng, d)
        ctx = fs.geometric_context(pol, d)
        stats = fs.outcome_stats(pol, d)
        for g in d.groups:
            iv = fs.tpr_interval(ctx, g, 0.0)
            assert iv.lower == iv.upper == pytest.approx(stats.beta_plus[g], abs=1e-12)

    def test_accept_all_constant_one(self):
        rng = np.random.default_rng(10)
        d = rand_dist(rng, n_bins=4)
        ctx = fs.geometric_context(fs.constant_policy(d.feature_bins, d.groups, 1.0), d)
        for g in d.groups:
            iv = fs.tpr_interval(ctx, g, 0.5)
            assert iv.lower == iv.upper == 1.0

    def test_huge_radius_clamps_to_unit(self):
        # stochastic policies keep t off the degenerate parallel-to-ones ray
        rng = np.random.default_rng(11)
        d = rand_dist(rng, n_bins=4)
        pol = rand_policy(rng, d)
        ctx = fs.geometric_context(pol, d)
        for g in d.groups:
            assert not ctx.per_group[g].degenerate
            iv = fs.tpr_interval(ctx, g, 50.0)
            assert (iv.lower, iv.upper) == (0.0, 1.0)

    def test_reject_all_policy_pins_interval_at_zero(self):
        rng = np.random.default_rng(16)
        d = rand_dist(rng, n_bins=4)
        ctx = fs.geometric_context(fs.constant_policy(d.feature_bins, d.groups, 0.0), d)
        for g in d.groups:
            iv = fs.tpr_interval(ctx, g, 50.0)
            assert iv.lower == iv.upper == 0.0

    def test_nesting(self):
        rng = np.random.default_rng(12)
        for _ in range(10):
            d = rand_dist(rng, n_bins=4)
            pol = rand_threshold_policy(rng, d)
            ctx = fs.geometric_context(pol, d)
            radii = sorted(rng.uniform(0.0, 0.6, size=4))
            for g in d.groups:
                prev = fs.tpr_interval(ctx, g, radii[0])
                for r in radii[1:]:
                    cur = fs.tpr_interval(ctx, g, r)
                    assert cur.lower <= prev.lower + 1e-9
                    assert cur.upper >= prev.upper - 1e-9
                    prev = cur

    def test_contains_rejection_samples(self):
        rng = np.random.default_rng(13)
        for _ in range(10):
            d = rand_dist(rng, n_bins=4)
            pol = rand_threshold_policy(rng, d)
            ctx = fs.geometric_context(pol, d)
            for g in d.groups:
                for radius in (0.05, 0.15):
                    iv = fs.tpr_interval(ctx, g, radius)
                    beta = sampled_tprs(ctx, g, radius, 20_000, seed=int(rng.integers(1 << 30)))
                    assert beta.min() >= iv.lower - 1e-9
                    assert beta.max() <= iv.upper + 1e-9

    def test_interval_is_reasonably_tight(self):
        # samples should come close to both ends on an easy instance
        rng = np.random.default_rng(14)
        d = rand_dist(rng, n_bins=3)
        pol = rand_threshold_policy(rng, d)
        ctx = fs.geometric_context(pol, d)
        g = d.groups[0]
        iv = fs.tpr_interval(ctx, g, 0.1)
        beta = sampled_tprs(ctx, g, 0.1, 200_000, seed=3)
        if iv.upper - iv.lower > 1e-6:
            width = iv.upper - iv.lower
            assert beta.max() >= iv.upper - 0.05 * width - 1e-9
            assert beta.min() <= iv.lower + 0.05 * width + 1e-9

    def test_negative_radius_rejected(self):
        rng = np.random.default_rng(15)
        d = rand_dist(rng)
        ctx = fs.geometric_context(rand_policy(rng, d), d)
        with pytest.raises(ValidationError, match="negative"):
            fs.tpr_interval(ctx, d.groups[0], -0.1)
