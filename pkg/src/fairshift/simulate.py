"""Synthetic shift generators: strategic feature manipulation and replicator dynamics.

Strategic response moves probability mass across per-group decision
thresholds on a unit feature grid (a covariate shift); replicator dynamics
evolves qualification rates by popularity-weighted utility (a label shift).
Each generator comes with its specialized disparity bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .bounds import BoundReport, bound_dp_label, max_pair_disparity
from .dist import EmpiricalDistribution, GroupOutcomeStats, Policy, outcome_stats
from .errors import ValidationError
from .shifts import ReweightingTable, ShiftBudget, apply_covariate_shift, apply_label_shift


@dataclass(frozen=True)
class StrategicParams:
    """Per-group thresholds and manipulation budgets on the unit feature grid.

    The piecewise reweighting formula needs tau_g - m_g >= 0 and
    tau_g + m_g <= 1.
    """

    tau: Mapping
    m: Mapping
    n_bins: int = 1000

    def __post_init__(self):
        object.__setattr__(self, "tau", dict(self.tau))
        object.__setattr__(self, "m", dict(self.m))
        if set(self.tau) != set(self.m):
            raise ValidationError("tau and m must cover the same groups")
        if self.n_bins < 2:
            raise ValidationError("need at least two feature bins")
        for g in self.tau:
            tau, m = self.tau[g], self.m[g]
            if not 0.0 <= tau <= 1.0:
                raise ValidationError(f"threshold {tau!r} for group {g!r} outside [0, 1]")
            if m <= 0:
                raise ValidationError(f"manipulation budget for group {g!r} must be positive")
            if tau - m < 0 or tau + m > 1:
                raise ValidationError(
                    f"budget {m!r} exceeds threshold margins for group {g!r}: "
                    f"need tau - m >= 0 and tau + m <= 1"
                )

    @property
    def groups(self) -> tuple:
        return tuple(self.tau)


@dataclass(frozen=True)
class ReplicatorParams:
    """Agent utilities U[y, yhat] > 0, initial qualification rates, and a horizon."""

    utilities: np.ndarray
    q0: Mapping
    steps: int

    def __post_init__(self):
        u = np.asarray(self.utilities, dtype=float)
        object.__setattr__(self, "utilities", u)
        object.__setattr__(self, "q0", dict(self.q0))
        if u.shape != (2, 2):
            raise ValidationError("utilities must be a 2x2 table indexed [y, yhat]")
        if u.min() <= 0:
            raise ValidationError("all utilities must be strictly positive")
        if self.steps < 0:
            raise ValidationError("horizon must be non-negative")
        for g, q in self.q0.items():
            if not 0.0 <= q <= 1.0:
                raise ValidationError(f"initial qualification rate {q!r} for group {g!r}")


def grid_midpoints(n_bins: int) -> np.ndarray:
    return (np.arange(n_bins) + 0.5) / n_bins


def unit_grid_source(
    n_bins: int,
    groups: Sequence,
    group_shares: Sequence[float] | None = None,
) -> EmpiricalDistribution:
    """Uniform feature distribution on the unit grid with Pr(Y=1 | x) = x."""
    mids = grid_midpoints(n_bins)
    shares = (
        np.full(len(groups), 1.0 / len(groups))
        if group_shares is None
        else np.asarray(group_shares, dtype=float)
    )
    table = np.empty((n_bins, 2, len(groups)))
    for k, share in enumerate(shares):
        table[:, 1, k] = share * mids / n_bins
        table[:, 0, k] = share * (1.0 - mids) / n_bins
    return EmpiricalDistribution(tuple(mids.tolist()), (0, 1), tuple(groups), table)


def mlr_instance(
    n_bins: int,
    qual: Mapping,
    c: float = 0.1,
    group_shares: Sequence[float] | None = None,
) -> EmpiricalDistribution:
    """Binary instance with a strictly increasing likelihood ratio.

    Feature conditionals are Pr(x | Y=1) proportional to x + c and
    Pr(x | Y=0) proportional to (1 - x) + c on the grid, shared by all
    groups; qualification rates are per group.
    """
    groups = tuple(qual)
    mids = grid_midpoints(n_bins)
    pos = mids + c
    neg = (1.0 - mids) + c
    pos /= pos.sum()
    neg /= neg.sum()
    shares = (
        np.full(len(groups), 1.0 / len(groups))
        if group_shares is None
        else np.asarray(group_shares, dtype=float)
    )
    table = np.empty((n_bins, 2, len(groups)))
    for k, g in enumerate(groups):
        table[:, 1, k] = shares[k] * qual[g] * pos
        table[:, 0, k] = shares[k] * (1.0 - qual[g]) * neg
    return EmpiricalDistribution(tuple(mids.tolist()), (0, 1), groups, table)


def grid_threshold_policy(dist: EmpiricalDistribution, tau: Mapping) -> Policy:
    """Deterministic policy accepting grid bins whose midpoint exceeds tau_g."""
    mids = np.asarray(dist.feature_bins, dtype=float)
    a1 = np.zeros((dist.n_bins, dist.n_groups))
    for k, g in enumerate(dist.groups):
        a1[:, k] = (mids > tau[g]).astype(float)
    return Policy(dist.feature_bins, dist.groups, (0, 1), np.stack([1.0 - a1, a1], axis=2))


def _interpolated_accept(n_bins: int, tau: float) -> np.ndarray:
    """Per-bin acceptance of a continuum threshold: the tau bin is split pro rata."""
    edges = np.arange(n_bins + 1) / n_bins
    frac = (edges[1:] - tau) / (edges[1:] - edges[:-1])
    return np.clip(frac, 0.0, 1.0)


def dp_fair_thresholds(
    dist: EmpiricalDistribution,
    accept_rate: float,
    tol: float = 1e-9,
) -> tuple[Policy, dict]:
    """Per-group continuum thresholds equalizing acceptance rates.

    Bisection on tau against the interpolated acceptance curve, which is
    continuous and non-increasing, until each group's rate is within ``tol``
    of ``accept_rate``.
    """
    if not 0.0 <= accept_rate <= 1.0:
        raise ValidationError(f"target acceptance rate {accept_rate!r} outside [0, 1]")
    fm = dist.feature_marginal()
    taus = {}
    a1 = np.zeros((dist.n_bins, dist.n_groups))
    for k, g in enumerate(dist.groups):
        mass = fm[:, k]

        def rate(tau: float) -> float:
            return float(mass @ _interpolated_accept(dist.n_bins, tau))

        lo, hi = 0.0, 1.0
        for _ in range(100):
            mid = 0.5 * (lo + hi)
            if rate(mid) > accept_rate:
                lo = mid
            else:
                hi = mid
        tau = 0.5 * (lo + hi)
        if abs(rate(tau) - accept_rate) > tol:
            raise ValidationError(
                f"could not equalize acceptance for group {g!r} within {tol}"
            )
        taus[g] = tau
        a1[:, k] = _interpolated_accept(dist.n_bins, tau)
    policy = Policy(dist.feature_bins, dist.groups, (0, 1), np.stack([1.0 - a1, a1], axis=2))
    return policy, taus


def strategic_omega(params: StrategicParams) -> ReweightingTable:
    """Reweighting coefficients of the strategic response, at grid midpoints.

    Mass just below the threshold thins out as agents cross it, mass just
    above thickens, and everything farther than the budget is untouched:
    1 below tau - m, (tau - x) / m on [tau - m, tau), (tau + 2m - x) / m on
    [tau, tau + m), and 1 above.
    """
    mids = grid_midpoints(params.n_bins)
    groups = params.groups
    omega = np.ones((params.n_bins, len(groups)))
    for k, g in enumerate(groups):
        tau, m = params.tau[g], params.m[g]
        w = np.ones_like(mids)
        below = (mids >= tau - m) & (mids < tau)
        above = (mids >= tau) & (mids < tau + m)
        w[below] = (tau - mids[below]) / m
        w[above] = (tau + 2.0 * m - mids[above]) / m
        omega[:, k] = w
    return ReweightingTable(tuple(mids.tolist()), groups, omega)


def strategic_target(
    source: EmpiricalDistribution, params: StrategicParams
) -> EmpiricalDistribution:
    """Covariate-shifted target induced by the strategic response.

    The source must live on the unit grid with uniform per-group feature
    marginals. The target marginal is the source marginal times omega,
    renormalized to absorb quadrature error, with Pr(Y | X, G) preserved.
    """
    if params.groups != source.groups:
        raise ValidationError("params and source disagree on groups")
    if source.n_bins != params.n_bins:
        raise ValidationError("params and source disagree on the grid size")
    fm = source.feature_marginal()
    if np.abs(fm - 1.0 / source.n_bins).max() > 1e-9:
        raise ValidationError("strategic response assumes uniform source feature marginals")
    omega = strategic_omega(params).omega
    marginals = {}
    for k, g in enumerate(source.groups):
        m = fm[:, k] * omega[:, k]
        marginals[g] = m / m.sum()
    return apply_covariate_shift(source, marginals)


@dataclass(frozen=True)
class StrategicBoundPair:
    """The proposition's literal increment next to the theorem-derived one."""

    literal: BoundReport
    derived: BoundReport


def strategic_bound(params: StrategicParams, delta_source: float) -> StrategicBoundPair:
    """Both strategic-response DP bounds for two groups.

    The literal variant adds tau (1 - tau) (2/3) m per group; the derived
    variant pushes Var[omega] = (2/3) m through the covariate-shift theorem
    and adds sqrt(tau (1 - tau) (2/3) m) per group.
    """
    groups = params.groups
    if len(groups) != 2:
        raise ValidationError("the strategic bound is stated for exactly two groups")
    lit, der = {}, {}
    for g in groups:
        tau, m = params.tau[g], params.m[g]
        lit[g] = tau * (1.0 - tau) * (2.0 / 3.0) * m
        der[g] = math.sqrt(tau * (1.0 - tau) * (2.0 / 3.0) * m)
    cap = max_pair_disparity(len(groups))
    inputs = {"tau": dict(params.tau), "m": dict(params.m)}
    mk = lambda kind, terms: BoundReport(
        kind=kind,
        source_disparity=float(delta_source),
        bound=float(min(delta_source + sum(terms.values()), cap)),
        per_group_terms=terms,
        inputs=inputs,
    )
    return StrategicBoundPair(
        literal=mk("strategic-literal", lit), derived=mk("strategic-derived", der)
    )


def replicator_step(utilities: np.ndarray, rho: Mapping) -> dict:
    """One replicator update of the qualification rates.

    ``rho[g][y, yhat]`` are outcome fractions; with fraction-weighted
    utilities u = U * rho, the next rate is the positive share of total
    utility, (u11 + u10) / (u11 + u10 + u00 + u01).
    """
    u = np.asarray(utilities, dtype=float)
    if u.shape != (2, 2) or u.min() <= 0:
        raise ValidationError("utilities must be a strictly positive 2x2 table")
    out = {}
    for g, r in rho.items():
        r = np.asarray(r, dtype=float)
        w = u * r
        denom = w.sum()
        if denom <= 0:
            raise ValidationError(f"all outcome fractions are zero for group {g!r}")
        out[g] = float(w[1].sum() / denom)
    return out


def replicator_trajectory(
    base: EmpiricalDistribution,
    policy: Policy,
    params: ReplicatorParams,
) -> list[dict]:
    """Qualification-rate trajectory under a fixed policy.

    Labels are re-shifted onto ``base``'s feature conditionals each step, so
    this is label shift throughout. Returns ``steps + 1`` rate maps,
    starting from ``params.q0``.
    """
    qs = [dict(params.q0)]
    for _ in range(params.steps):
        shifted = apply_label_shift(base, qs[-1])
        stats = outcome_stats(policy, shifted)
        qs.append(replicator_step(params.utilities, stats.rho))
    return qs


def replicator_bound(
    stats: GroupOutcomeStats, q_now: Mapping, q_next: Mapping
) -> BoundReport:
    """Label-shift DP bound for one replicator step, budgeted by |Q[t+1] - Q[t]|.

    Requires a two-group binary task and positive acceptance mass per group.
    """
    if len(stats.groups) != 2:
        raise ValidationError("the replicator bound is stated for exactly two groups")
    for g in stats.groups:
        rho = np.asarray(stats.rho[g])
        if rho[1, 1] + rho[0, 1] <= 0:
            raise ValidationError(f"zero acceptance mass for group {g!r}")
    budget = ShiftBudget(
        "qual-rate", {g: abs(q_next[g] - q_now[g]) for g in stats.groups}
    )
    report = bound_dp_label(stats, budget)
    return BoundReport(
        kind="dp-replicator",
        source_disparity=report.source_disparity,
        bound=report.bound,
        per_group_terms=report.per_group_terms,
        inputs={"budget": budget, "q_now": dict(q_now), "q_next": dict(q_next)},
    )
