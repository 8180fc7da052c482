"""Adversarial oracles: ground truth the closed-form bounds are validated against.

The label-shift oracle is exact (the disparity is convex in the qualification
rates, so the supremum sits at a vertex of the budget box). The covariate and
equal-opportunity oracles are certified lower bounds: randomized search whose
witnesses re-verify their budget constraints before being reported.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np

from .dist import EmpiricalDistribution, Policy, _check_alphabets, outcome_stats
from .disparity import dp_from_beta
from .errors import InfeasibleError, UndefinedRateError, ValidationError
from .geometry import geometric_context, sample_ball_hyperplane
from .shifts import (
    ShiftBudget,
    apply_covariate_shift,
    apply_label_shift,
    is_covariate_shift_pair,
    reweighting,
)

LABEL_GROUP_CAP = 20  # 2^n vertex enumeration cost cap
RNG_NAME = "numpy.PCG64"


@dataclass(frozen=True)
class OracleResult:
    """Outcome of a supremal-disparity computation.

    ``v_estimate`` is exact for the label oracle and a best-found lower bound
    otherwise; ``witness`` is the extremal target (a distribution for the
    label/covariate oracles, per-group marginals for the equal-opportunity
    oracle). ``metadata`` records the generator and stream derivation.
    """

    v_estimate: float
    witness: object
    evaluations: int
    exact: bool
    metadata: Mapping

    def __post_init__(self):
        object.__setattr__(self, "metadata", dict(self.metadata))


def _budget_vector(budget: ShiftBudget, groups, kind: str) -> np.ndarray:
    if budget.kind != kind:
        raise ValidationError(f"expected a {kind!r} budget, got {budget.kind!r}")
    missing = [g for g in groups if g not in budget.per_group]
    if missing:
        raise ValidationError(f"budget missing groups {missing!r}")
    return np.array([budget.per_group[g] for g in groups], dtype=float)


def sup_dp_label_shift(
    policy: Policy, source: EmpiricalDistribution, budget: ShiftBudget
) -> OracleResult:
    """Exact supremum of DP disparity over the label-shift budget box.

    Acceptance rates are affine in the qualification rates, so the disparity
    is convex over the box Q_g in [Q_g(S) +- B_g] clipped to [0, 1] and the
    supremum is attained at one of the 2^|G| vertices, all of which are
    evaluated.
    """
    stats = outcome_stats(policy, source)
    groups = list(stats.groups)
    if len(groups) > LABEL_GROUP_CAP:
        raise ValidationError(f"vertex enumeration capped at {LABEL_GROUP_CAP} groups")
    b = _budget_vector(budget, groups, "qual-rate")

    vertex_axes = []
    for i, g in enumerate(groups):
        q = stats.qual[g]
        if b[i] > 0 and (stats.beta_plus[g] is None or stats.beta_minus[g] is None):
            raise UndefinedRateError(
                f"group {g!r} cannot be label-shifted: a conditional rate is undefined"
            )
        lo, hi = max(q - b[i], 0.0), min(q + b[i], 1.0)
        vertex_axes.append((lo,) if lo == hi else (lo, hi))

    def beta_at(g: object, q: float) -> float:
        if q == stats.qual[g]:
            return stats.beta[g]
        return stats.beta_minus[g] + (stats.beta_plus[g] - stats.beta_minus[g]) * q

    best_v, best_q, evals = -math.inf, None, 0
    for vertex in itertools.product(*vertex_axes):
        betas = [beta_at(g, q) for g, q in zip(groups, vertex)]
        v = dp_from_beta(betas)
        evals += 1
        if v > best_v:
            best_v, best_q = v, dict(zip(groups, vertex))
    witness = apply_label_shift(source, best_q)
    return OracleResult(
        v_estimate=float(best_v),
        witness=witness,
        evaluations=evals,
        exact=True,
        metadata={"method": "vertex-enumeration", "budget": budget},
    )


class _CovariateSearchState:
    """Per-group marginals over the source support, with incremental chi-square."""

    def __init__(self, supports, base, accepts, caps):
        self.supports = supports            # support indices per group
        self.base = base                    # source support marginals per group
        self.accepts = accepts              # policy acceptance per group
        self.caps = caps                    # chi-square budget per group
        self.marginals = [m.copy() for m in base]

    def chi2(self, k: int, m: Optional[np.ndarray] = None) -> float:
        m = self.marginals[k] if m is None else m
        d = m - self.base[k]
        return float(np.sum(d * d / self.base[k]))

    def betas(self) -> list:
        return [float(a @ m) for a, m in zip(self.accepts, self.marginals)]


def sup_dp_covariate_shift(
    policy: Policy,
    source: EmpiricalDistribution,
    budget: ShiftBudget,
    search_budget: int = 4000,
    seed: int = 0,
    restarts: int = 4,
) -> OracleResult:
    """Best-found DP disparity over the variance-of-omega covariate ball.

    Randomized search: Dirichlet proposals around the incumbent, annealed over
    five stages and snapped to the budget boundary (the variance constraint is
    a chi-square ball around the source marginal, so the snap is closed form),
    followed by greedy pairwise mass moves with steps halving from 0.05 to
    1e-4. Returns a certified feasible witness; the true supremum may be
    larger, so ``exact`` is False. Deterministic given (seed, restarts).
    Intended for small feature supports (roughly a dozen bins); cost grows
    with the square of the support size.
    """
    _check_alphabets(policy, source)
    groups = list(source.groups)
    b = _budget_vector(budget, groups, "var-omega")
    fm = source.feature_marginal()
    accept = policy.accept_probs(1)

    supports, base, accepts = [], [], []
    for k in range(len(groups)):
        sup = np.flatnonzero(fm[:, k] > 0)
        if sup.size == 0:
            raise InfeasibleError(f"group {groups[k]!r} has no feature support")
        supports.append(sup)
        base.append(fm[sup, k])
        accepts.append(accept[sup, k])

    def snapped(k: int, m: np.ndarray) -> np.ndarray:
        # scale toward the source so the chi-square constraint holds exactly
        d = m - base[k]
        chi2 = float(np.sum(d * d / base[k]))
        if chi2 <= b[k] or chi2 == 0.0:
            return m
        return base[k] + d * math.sqrt(b[k] / chi2)

    best_v, best_m, evals = -math.inf, None, 0
    anneal = (0.8, 0.4, 0.2, 0.1, 0.05)
    for r in range(restarts):
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(r,))))
        state = _CovariateSearchState(supports, base, accepts, b)
        local_v = dp_from_beta(state.betas())
        evals += 1
        budget_left = search_budget

        n_prop = max(budget_left // 10 // len(anneal), 1)
        for w in anneal:
            for _ in range(n_prop):
                cand = []
                for k in range(len(groups)):
                    if len(base[k]) == 1 or b[k] == 0.0:
                        cand.append(base[k].copy())
                        continue
                    noise = rng.dirichlet(np.ones(len(base[k])))
                    cand.append(snapped(k, (1.0 - w) * state.marginals[k] + w * noise))
                v = dp_from_beta([float(a @ m) for a, m in zip(accepts, cand)])
                evals += 1
                budget_left -= 1
                if v > local_v:
                    local_v, state.marginals = v, cand

        step = 0.05
        while step >= 1e-4 and budget_left > 0:
            improved = True
            while improved and budget_left > 0:
                improved = False
                for k in range(len(groups)):
                    if b[k] == 0.0:
                        continue
                    m = state.marginals[k]
                    sb, ab = base[k], accepts[k]
                    chi2_now = state.chi2(k)
                    for i in range(len(m)):
                        if m[i] <= 0:
                            continue
                        for j in range(len(m)):
                            if i == j:
                                continue
                            # chi-square along m + t (e_j - e_i) is quadratic in t
                            qa = 1.0 / sb[i] + 1.0 / sb[j]
                            qb = 2.0 * ((m[j] - sb[j]) / sb[j] - (m[i] - sb[i]) / sb[i])
                            qc = chi2_now - b[k]
                            disc = qb * qb - 4.0 * qa * qc
                            if disc <= 0:
                                continue
                            t = min(step, m[i], (-qb + math.sqrt(disc)) / (2.0 * qa))
                            if t <= 1e-15:
                                continue
                            m2 = m.copy()
                            m2[i] -= t
                            m2[j] += t
                            cand = list(state.marginals)
                            cand[k] = m2
                            v = dp_from_beta(
                                [float(a @ mm) for a, mm in zip(accepts, cand)]
                            )
                            evals += 1
                            budget_left -= 1
                            if v > local_v + 1e-14:
                                local_v, state.marginals = v, cand
                                m, chi2_now = m2, state.chi2(k)
                                improved = True
                            if budget_left <= 0:
                                break
                        if budget_left <= 0:
                            break
            step /= 2.0

        if local_v > best_v:
            best_v, best_m = local_v, [m.copy() for m in state.marginals]

    for k in range(len(groups)):  # independent feasibility re-check of the witness
        d = best_m[k] - base[k]
        if float(np.sum(d * d / base[k])) > b[k] + 1e-12:
            raise InfeasibleError("search produced an infeasible witness")

    if all(np.array_equal(m, s) for m, s in zip(best_m, base)):
        witness = source
    else:
        marginals = {}
        for k, g in enumerate(groups):
            full = np.zeros(source.n_bins)
            full[supports[k]] = best_m[k]
            marginals[g] = full
        witness = apply_covariate_shift(source, marginals)
    return OracleResult(
        v_estimate=float(best_v),
        witness=witness,
        evaluations=evals,
        exact=False,
        metadata={
            "rng": RNG_NAME,
            "seed": seed,
            "restarts": restarts,
            "search_budget": search_budget,
            "streams": "SeedSequence(seed, spawn_key=(restart,))",
            "budget": budget,
        },
    )


def sup_eop_covariate_shift(
    policy: Policy,
    source: EmpiricalDistribution,
    budget: ShiftBudget,
    n_samples: int = 100_000,
    seed: int = 0,
) -> OracleResult:
    """Best-found equal-opportunity disparity over weighted-L2 shift balls.

    Per group, marginals are sampled from the ball-hyperplane intersection
    (positivity not required); true positive rates are clamped to [0, 1], the
    range the certified intervals live on. The reported disparity assembles
    the most adversarial combination of each group's observed extremes.
    """
    ctx = geometric_context(policy, source)
    groups = list(ctx.groups)
    b = _budget_vector(budget, groups, "weighted-l2")

    lo_val, hi_val, lo_r, hi_r = {}, {}, {}, {}
    evals = 0
    for k, g in enumerate(groups):
        geo = ctx.per_group[g]
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(k,))))
        samples = sample_ball_hyperplane(ctx, g, float(b[k]), n_samples, rng)
        samples = np.vstack([geo.r_source, samples])  # zero shift is always feasible
        num = samples @ (geo.t * geo.s)
        den = samples @ geo.s
        ok = den > 0
        beta = np.clip(num[ok] / den[ok], 0.0, 1.0)
        if beta.size == 0:
            raise InfeasibleError(f"no sample kept positive mass for group {g!r}")
        evals += int(beta.size)
        idx = np.flatnonzero(ok)
        i_lo, i_hi = idx[int(np.argmin(beta))], idx[int(np.argmax(beta))]
        lo_val[g], hi_val[g] = float(beta.min()), float(beta.max())
        lo_r[g], hi_r[g] = samples[i_lo], samples[i_hi]

    best_v, best_corner = -math.inf, None
    for corner in itertools.product((0, 1), repeat=len(groups)):
        vals = [hi_val[g] if c else lo_val[g] for g, c in zip(groups, corner)]
        v = dp_from_beta(vals)
        if v > best_v:
            best_v, best_corner = v, corner

    witness = {}
    for g, c in zip(groups, best_corner):
        r = hi_r[g] if c else lo_r[g]
        geo = ctx.per_group[g]
        d = r - geo.r_source
        if math.sqrt(max(float(np.sum(d * d * geo.s)), 0.0)) > budget.per_group[g] + 1e-12:
            raise InfeasibleError("search produced an infeasible witness")
        witness[g] = r
    return OracleResult(
        v_estimate=float(best_v),
        witness=witness,
        evaluations=evals,
        exact=False,
        metadata={
            "rng": RNG_NAME,
            "seed": seed,
            "n_samples": n_samples,
            "streams": "SeedSequence(seed, spawn_key=(group_index,))",
            "budget": budget,
        },
    )


def covariance_identity_check(
    policy: Policy, source: EmpiricalDistribution, target: EmpiricalDistribution
) -> dict:
    """Residual of the acceptance-shift covariance identity, per group.

    Under covariate shift the acceptance-rate change equals the source
    covariance between the reweighting coefficient and the acceptance
    probability; both sides are exact finite sums here, so residuals should
    sit at float precision.
    """
    _check_alphabets(policy, source)
    if not is_covariate_shift_pair(target, source):
        raise ValidationError("target is not a covariate shift of source: Pr(Y|X,G) changed")
    omega = reweighting(target, source).omega
    rs = source.feature_marginal()
    rt = target.feature_marginal()
    a = policy.accept_probs(1)
    out = {}
    for k, g in enumerate(source.groups):
        delta = float(a[:, k] @ rt[:, k] - a[:, k] @ rs[:, k])
        e_wa = float(np.sum(rs[:, k] * omega[:, k] * a[:, k]))
        e_w = float(np.sum(rs[:, k] * omega[:, k]))
        e_a = float(np.sum(rs[:, k] * a[:, k]))
        out[g] = abs(delta - (e_wa - e_w * e_a))
    return out


def variance_expectation_check(values, weights=None) -> bool:
    """Exact check that Var[X] <= E[X](1 - E[X]) for a [0, 1]-valued table."""
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        raise ValidationError("empty sample")
    if x.min() < 0.0 or x.max() > 1.0:
        raise ValidationError("all sample values must lie in [0, 1]")
    if weights is None:
        w = np.full(x.size, 1.0 / x.size)
    else:
        w = np.asarray(weights, dtype=float)
        if w.shape != x.shape or w.min() < 0 or w.sum() <= 0:
            raise ValidationError("weights must be non-negative and match the values")
        w = w / w.sum()
    mean = float(w @ x)
    var = float(w @ (x - mean) ** 2)
    return var <= mean * (1.0 - mean) + 1e-12
