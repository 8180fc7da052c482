import math

import numpy as np
import pytest

import fairshift as fs
from fairshift.errors import ValidationError

from helpers import rand_covariate_pair, rand_dist, rand_policy, rand_threshold_policy


def label_budget(rng, groups, hi=0.3):
    return fs.ShiftBudget("qual-rate", {g: float(rng.uniform(0, hi)) for g in groups})


class TestLabelOracle:
    def test_zero_budget_returns_source(self):
        rng = np.random.default_rng(0)
        d = rand_dist(rng)
        pol = rand_policy(rng, d)
        res = fs.sup_dp_label_shift(pol, d, fs.ShiftBudget.zero("qual-rate", d.groups))
        assert res.exact
        assert res.witness is d
        assert res.v_estimate == pytest.approx(fs.disparity_dp(pol, d).value, abs=1e-12)

    def test_opposing_vertex_attains_bound(self):
        # group-independent rates 0.9 / 0.1 at Q = 0.5: the bound is met
        # exactly at the (Q+B, Q-B) vertex
        records = []
        for g in ("g", "h"):
            records += [(0, 1, g, 0.45), (1, 1, g, 0.05), (0, 0, g, 0.05), (1, 0, g, 0.45)]
        d = fs.build_empirical(records, labels=(0, 1))
        scores = {(x, g): float(-x) for x in (0, 1) for g in ("g", "h")}
        pol = fs.threshold_policy(d.feature_bins, d.groups, scores, {"g": -0.5, "h": -0.5})
        stats = fs.outcome_stats(pol, d)
        assert stats.beta_plus == pytest.approx({"g": 0.9, "h": 0.9})
        assert stats.beta_minus == pytest.approx({"g": 0.1, "h": 0.1})
        B = fs.ShiftBudget("qual-rate", {"g": 0.05, "h": 0.05})
        res = fs.sup_dp_label_shift(pol, d, B)
        rep = fs.bound_dp_label(stats, B)
        assert res.v_estimate == pytest.approx(0.16, abs=1e-12)
        assert res.v_estimate == pytest.approx(rep.bound, abs=1e-12)
        q = res.witness.qualification_rates()
        assert sorted([q["g"], q["h"]]) == pytest.approx([0.45, 0.55], abs=1e-12)

    def test_never_exceeds_closed_form(self):
        rng = np.random.default_rng(1)
        for _ in range(300):
            d = rand_dist(rng, n_bins=int(rng.integers(2, 6)))
            pol = rand_policy(rng, d)
            B = label_budget(rng, d.groups)
            res = fs.sup_dp_label_shift(pol, d, B)
            rep = fs.bound_dp_label(fs.outcome_stats(pol, d), B)
            assert res.v_estimate <= rep.bound + 1e-12

    def test_vertex_dominates_grid(self):
        # convexity sanity: a dense grid over the box never beats the vertices
        rng = np.random.default_rng(2)
        for _ in range(5):
            d = rand_dist(rng)
            pol = rand_policy(rng, d)
            B = label_budget(rng, d.groups, hi=0.2)
            res = fs.sup_dp_label_shift(pol, d, B)
            stats = fs.outcome_stats(pol, d)
            axes = []
            for g in d.groups:
                q, b = stats.qual[g], B.per_group[g]
                axes.append(np.linspace(max(q - b, 0), min(q + b, 1), 200))
            best = 0.0
            for qg in axes[0]:
                bg = stats.beta_minus["g"] + (stats.beta_plus["g"] - stats.beta_minus["g"]) * qg
                bh = stats.beta_minus["h"] + (stats.beta_plus["h"] - stats.beta_minus["h"]) * axes[1]
                best = max(best, float(np.max(2 * np.abs(bg - bh))))
            assert best <= res.v_estimate + 1e-12

    def test_witness_reproduces_value(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            d = rand_dist(rng)
            pol = rand_policy(rng, d)
            res = fs.sup_dp_label_shift(pol, d, label_budget(rng, d.groups))
            assert fs.disparity_dp(pol, res.witness).value == pytest.approx(
                res.v_estimate, abs=1e-12
            )

    def test_group_cap(self):
        groups = tuple(f"g{i}" for i in range(21))
        d = rand_dist(np.random.default_rng(4), n_bins=2, groups=groups)
        pol = rand_policy(np.random.default_rng(5), d)
        with pytest.raises(ValidationError, match="capped"):
            fs.sup_dp_label_shift(pol, d, fs.ShiftBudget.zero("qual-rate", groups))


class TestCovariateOracle:
    def test_zero_budget_returns_source(self):
        rng = np.random.default_rng(5)
        d = rand_dist(rng)
        pol = rand_policy(rng, d)
        res = fs.sup_dp_covariate_shift(
            pol, d, fs.ShiftBudget.zero("var-omega", d.groups), search_budget=200, seed=1
        )
        assert res.witness is d
        assert not res.exact
        assert res.v_estimate == pytest.approx(fs.disparity_dp(pol, d).value, abs=1e-12)

    def test_two_bin_matches_grid_scan(self):
        # with two bins the per-group feasible set is an interval; scan it
        rng = np.random.default_rng(6)
        for trial in range(5):
            d = rand_dist(rng, n_bins=2)
            pol = rand_policy(rng, d)
            B = fs.ShiftBudget("var-omega", {g: float(rng.uniform(0.01, 0.3)) for g in d.groups})
            res = fs.sup_dp_covariate_shift(pol, d, B, search_budget=4000, seed=trial)

            fm = d.feature_marginal()
            a = pol.accept_probs(1)
            grids = []
            for k, g in enumerate(d.groups):
                s0 = fm[0, k]
                # chi-square ball: (r - s0)^2 / (s0 (1 - s0)) <= B
                half = math.sqrt(B.per_group[g] * s0 * (1 - s0))
                lo, hi = max(s0 - half, 0.0), min(s0 + half, 1.0)
                r = np.linspace(lo, hi, 10_000)
                grids.append(a[0, k] * r + a[1, k] * (1 - r))
            best = max(
                float(np.max(2 * np.abs(bg - grids[1]))) for bg in grids[0][:, None].T
            )
            best = float(np.max(2 * np.abs(grids[0][:, None] - grids[1][None, :])))
            assert abs(res.v_estimate - best) <= 1e-6

    def test_witness_within_budget_and_bound(self):
        rng = np.random.default_rng(7)
        for trial in range(50):
            d = rand_dist(rng, n_bins=int(rng.integers(2, 6)))
            pol = rand_threshold_policy(rng, d)
            B = fs.ShiftBudget("var-omega", {g: float(rng.uniform(0, 0.2)) for g in d.groups})
            res = fs.sup_dp_covariate_shift(pol, d, B, search_budget=600, seed=trial, restarts=2)
            var = fs.divergence_var_omega(res.witness, d)
            for g in d.groups:
                assert var[g] <= B.per_group[g] + 1e-9
            rep = fs.bound_dp_covariate(fs.outcome_stats(pol, d), B)
            assert res.v_estimate <= rep.bound + 1e-9
            assert fs.disparity_dp(pol, res.witness).value == pytest.approx(
                res.v_estimate, abs=1e-12
            )

    def test_seed_determinism(self):
        rng = np.random.default_rng(8)
        d = rand_dist(rng, n_bins=4)
        pol = rand_policy(rng, d)
        B = fs.ShiftBudget("var-omega", {g: 0.1 for g in d.groups})
        r1 = fs.sup_dp_covariate_shift(pol, d, B, search_budget=800, seed=42)
        r2 = fs.sup_dp_covariate_shift(pol, d, B, search_budget=800, seed=42)
        assert r1.v_estimate == r2.v_estimate
        assert r1.evaluations == r2.evaluations
        assert np.array_equal(r1.witness.prob, r2.witness.prob)
        r3 = fs.sup_dp_covariate_shift(pol, d, B, search_budget=800, seed=43)
        assert r3.metadata["seed"] == 43

    def test_metadata_records_generator(self):
        rng = np.random.default_rng(9)
        d = rand_dist(rng)
        pol = rand_policy(rng, d)
        res = fs.sup_dp_covariate_shift(
            pol, d, fs.ShiftBudget.zero("var-omega", d.groups), search_budget=50, seed=0
        )
        assert res.metadata["rng"] == "numpy.PCG64"


class TestEopOracle:
    def test_zero_budget_recovers_source_tpr(self):
        rng = np.random.default_rng(10)
        d = rand_dist(rng, n_bins=4)
        pol = rand_threshold_policy(rng, d)
        res = fs.sup_eop_covariate_shift(
            pol, d, fs.ShiftBudget.zero("weighted-l2", d.groups), n_samples=100, seed=0
        )
        assert res.v_estimate == pytest.approx(fs.disparity_eop(pol, d).value, abs=1e-10)

    def test_within_interval_and_corner_bound(self):
        rng = np.random.default_rng(11)
        for trial in range(10):
            d = rand_dist(rng, n_bins=4)
            pol = rand_threshold_policy(rng, d)
            B = fs.ShiftBudget("weighted-l2", {g: 0.1 for g in d.groups})
            res = fs.sup_eop_covariate_shift(pol, d, B, n_samples=20_000, seed=trial)
            ctx = fs.geometric_context(pol, d)
            lo, hi = {}, {}
            for g in d.groups:
                iv = fs.tpr_interval(ctx, g, 0.1)
                lo[g], hi[g] = iv.lower, iv.upper
            corner = fs.bound_eop_corners(lo, hi)
            assert res.v_estimate <= corner + 1e-9
            assert res.v_estimate <= fs.eop_cap(d.n_groups)

    def test_accept_all_policy_sticks_at_one(self):
        rng = np.random.default_rng(12)
        d = rand_dist(rng, n_bins=3)
        pol = fs.constant_policy(d.feature_bins, d.groups, 1.0)
        B = fs.ShiftBudget("weighted-l2", {g: 0.3 for g in d.groups})
        res = fs.sup_eop_covariate_shift(pol, d, B, n_samples=5000, seed=0)
        assert res.v_estimate == pytest.approx(0.0, abs=1e-12)


class TestCovarianceIdentity:
    def test_identity_shift_zero_residual(self):
        rng = np.random.default_rng(13)
        d = rand_dist(rng)
        pol = rand_policy(rng, d)
        res = fs.covariance_identity_check(pol, d, d)
        assert all(v <= 1e-15 for v in res.values())

    def test_random_covariate_pairs(self):
        rng = np.random.default_rng(14)
        for _ in range(50):
            src, tgt = rand_covariate_pair(rng, n_bins=5)
            pol = rand_policy(rng, src)
            res = fs.covariance_identity_check(pol, src, tgt)
            assert all(v < 1e-10 for v in res.values())

    def test_strategic_instances(self):
        src = fs.unit_grid_source(500, ("g", "h"))
        params = fs.StrategicParams(
            tau={"g": 0.4, "h": 0.6}, m={"g": 0.1, "h": 0.05}, n_bins=500
        )
        tgt = fs.strategic_target(src, params)
        pol = fs.grid_threshold_policy(src, params.tau)
        res = fs.covariance_identity_check(pol, src, tgt)
        assert all(v < 1e-10 for v in res.values())

    def test_detects_non_covariate_pair(self):
        rng = np.random.default_rng(15)
        d = rand_dist(rng)
        shifted = fs.apply_label_shift(d, {g: 0.5 for g in d.groups})
        pol = rand_policy(rng, d)
        with pytest.raises(ValidationError, match="covariate"):
            fs.covariance_identity_check(pol, d, shifted)


class TestVarianceExpectation:
    def test_constant_samples(self):
        assert fs.variance_expectation_check([0.3, 0.3, 0.3])

    def test_bernoulli_equality(self):
        # exact two-point table: equality Var = p(1-p)
        p = 0.37
        assert fs.variance_expectation_check([0.0, 1.0], weights=[1 - p, p])

    def test_random_tables(self):
        rng = np.random.default_rng(16)
        for _ in range(100):
            x = rng.uniform(size=8)
            w = rng.uniform(size=8)
            assert fs.variance_expectation_check(x, weights=w)

    def test_out_of_range(self):
        with pytest.raises(ValidationError, match="\\[0, 1\\]"):
            fs.variance_expectation_check([0.2, 1.4])


class TestTheoremProbes:
    def test_slope_never_exceeds_lipschitz_vector(self):
        # finite-difference slope of v in each budget coordinate stays below
        # the ordered-pair Lipschitz constant 2 (|G| - 1) |beta+ - beta-|
        rng = np.random.default_rng(17)
        for _ in range(40):
            d = rand_dist(rng, n_bins=4)
            pol = rand_policy(rng, d)
            stats = fs.outcome_stats(pol, d)
            base = {g: float(rng.uniform(0, 0.1)) for g in d.groups}
            h = 1e-4
            for g in d.groups:
                lo = fs.sup_dp_label_shift(pol, d, fs.ShiftBudget("qual-rate", base))
                bumped = dict(base)
                bumped[g] = base[g] + h
                hi = fs.sup_dp_label_shift(pol, d, fs.ShiftBudget("qual-rate", bumped))
                slope = (hi.v_estimate - lo.v_estimate) / h
                lip = 2 * (len(d.groups) - 1) * abs(stats.beta_plus[g] - stats.beta_minus[g])
                assert slope <= lip + 1e-9

    def test_first_order_bound_on_subadditive_instances(self):
        # where the increase w is empirically subadditive along coordinate
        # triples, the tangent-at-zero bound dominates v(B)
        rng = np.random.default_rng(18)
        checked = 0
        for _ in range(60):
            d = rand_dist(rng, n_bins=3)
            pol = rand_policy(rng, d)
            delta_s = fs.disparity_dp(pol, d).value

            def w(budget_map):
                res = fs.sup_dp_label_shift(
                    pol, d, fs.ShiftBudget("qual-rate", budget_map)
                )
                return res.v_estimate - delta_s

            B = {g: float(rng.uniform(0.05, 0.25)) for g in d.groups}
            zero = {g: 0.0 for g in d.groups}
            subadditive = True
            for g in d.groups:
                for frac in (0.3, 0.5):
                    a = dict(zero); a[g] = frac * B[g]
                    c = dict(zero); c[g] = (1 - frac) * B[g]
                    full = dict(zero); full[g] = B[g]
                    if w(a) + w(c) < w(full) - 1e-12:
                        subadditive = False
            if not subadditive:
                continue
            checked += 1
            h = 1e-6
            bound = delta_s
            for g in d.groups:
                e = dict(zero); e[g] = h
                bound += (w(e) / h) * B[g]
            assert w(B) + delta_s <= bound + 1e-9
        assert checked >= 10
