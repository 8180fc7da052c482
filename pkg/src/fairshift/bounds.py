"""Closed-form transferability bounds on disparity under bounded shift.

Every bound has the shape ``disparity(source) + increment(budget)`` and is
reported with its per-group increments. Increments carry the ordered-pair
multiplicity 2(|G| - 1): each group's rate appears in that many ordered pair
terms of the disparity, so the per-group deviation is charged once per term.
Reports are clipped at the metric's trivial maximum so they are never
vacuously above its range.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .dist import GroupOutcomeStats, require_rates
from .disparity import dp_from_beta
from .errors import ValidationError
from .shifts import ShiftBudget

CORNER_GROUP_CAP = 16  # 2^n corner enumeration cost cap


@dataclass(frozen=True)
class LipschitzVector:
    """Per-group slope bounds for the generic Lipschitz combinator."""

    kind: str
    per_group: Mapping

    def __post_init__(self):
        object.__setattr__(self, "per_group", dict(self.per_group))
        for g, v in self.per_group.items():
            if not math.isfinite(v) or v < 0:
                raise ValidationError(f"Lipschitz entry {v!r} for group {g!r} must be finite and >= 0")


@dataclass(frozen=True)
class BoundReport:
    """A certified upper bound on target disparity.

    ``bound`` dominates ``source_disparity`` whenever the budget and all
    increments are non-negative, and equals it exactly for a zero budget.
    ``per_group_terms`` sum to the (unclipped) increment.
    """

    kind: str
    source_disparity: float
    bound: float
    per_group_terms: Mapping
    inputs: Mapping

    def __post_init__(self):
        object.__setattr__(self, "per_group_terms", dict(self.per_group_terms))
        object.__setattr__(self, "inputs", dict(self.inputs))
        if self.bound < self.source_disparity - 1e-12:
            raise ValidationError(
                f"bound {self.bound!r} fell below the source disparity {self.source_disparity!r}"
            )


def pair_multiplicity(n_groups: int) -> int:
    """Ordered-pair terms each group participates in: 2(n - 1)."""
    return 2 * (n_groups - 1)


def max_pair_disparity(n_groups: int) -> float:
    """Maximum of the ordered-pair sum of |x_g - x_h| over x in [0, 1]^n.

    Attained by splitting the groups across the endpoints, giving
    2 * floor(n/2) * ceil(n/2). This doubles the unordered-pair count, which
    would be floor(n/2) * ceil(n/2).
    """
    return float(2 * (n_groups // 2) * ((n_groups + 1) // 2))


def eop_cap(n_groups: int) -> float:
    """Upper limit of equal-opportunity disparity, used to clip corner bounds."""
    if n_groups < 2:
        raise ValidationError(f"need at least two groups, got {n_groups}")
    return max_pair_disparity(n_groups)


def _budget_vector(budget: ShiftBudget, groups: Sequence, kind: str) -> np.ndarray:
    if budget.kind != kind:
        raise ValidationError(f"expected a {kind!r} budget, got {budget.kind!r}")
    missing = [g for g in groups if g not in budget.per_group]
    if missing:
        raise ValidationError(f"budget missing groups {missing!r}")
    return np.array([budget.per_group[g] for g in groups], dtype=float)


def _report(kind, groups, source_disparity, terms, cap, inputs) -> BoundReport:
    raw = source_disparity + float(sum(terms.values()))
    return BoundReport(
        kind=kind,
        source_disparity=float(source_disparity),
        bound=float(min(raw, cap)),
        per_group_terms=terms,
        inputs=inputs,
    )


def lipschitz_bound(
    source_disparity: float, lipschitz: LipschitzVector, budget: ShiftBudget
) -> BoundReport:
    """Generic combinator: source disparity plus the dot product L . B."""
    if lipschitz.kind != budget.kind:
        raise ValidationError(
            f"Lipschitz kind {lipschitz.kind!r} does not match budget kind {budget.kind!r}"
        )
    groups = list(lipschitz.per_group)
    b = _budget_vector(budget, groups, budget.kind)
    terms = {g: float(lipschitz.per_group[g] * b[i]) for i, g in enumerate(groups)}
    return _report(
        "lipschitz",
        groups,
        source_disparity,
        terms,
        cap=math.inf,
        inputs={"budget": budget, "lipschitz": lipschitz},
    )


def bound_dp_covariate(stats: GroupOutcomeStats, budget: ShiftBudget) -> BoundReport:
    """Demographic parity under covariate shift with Var_S[omega_g] <= B_g.

    Per-group deviation is at most sqrt(beta_g (1 - beta_g) B_g), charged for
    each of the 2(|G| - 1) ordered pair terms the group appears in.
    """
    groups = list(stats.groups)
    b = _budget_vector(budget, groups, "var-omega")
    beta = np.array([stats.beta[g] for g in groups])
    mult = pair_multiplicity(len(groups))
    root = np.sqrt(np.maximum(beta * (1.0 - beta) * b, 0.0))
    terms = {g: float(mult * root[i]) for i, g in enumerate(groups)}
    return _report(
        "dp-covariate",
        groups,
        dp_from_beta(beta),
        terms,
        cap=max_pair_disparity(len(groups)),
        inputs={"budget": budget, "beta": {g: stats.beta[g] for g in groups}},
    )


def bound_dp_covariate_multiclass(
    class_rates: Mapping, budget: ShiftBudget
) -> BoundReport:
    """Multi-class demographic parity under covariate shift.

    ``class_rates[g][y]`` is Pr(Yhat=y | G=g) on the source. The increment
    sums sqrt(beta_{g,y} (1 - beta_{g,y}) B_g) over predicted labels with the
    same ordered-pair multiplicity as the binary bound.
    """
    groups = list(class_rates)
    if not groups:
        raise ValidationError("empty class-rate table")
    labels = list(class_rates[groups[0]])
    b = _budget_vector(budget, groups, "var-omega")
    mult = pair_multiplicity(len(groups))

    source = 0.0
    for y in labels:
        source += dp_from_beta([class_rates[g][y] for g in groups])
    terms = {}
    for i, g in enumerate(groups):
        acc = 0.0
        for y in labels:
            r = class_rates[g][y]
            acc += math.sqrt(max(r * (1.0 - r) * b[i], 0.0))
        terms[g] = mult * acc
    return _report(
        "dp-covariate-multi",
        groups,
        source,
        terms,
        cap=2.0 * max_pair_disparity(len(groups)),
        inputs={"budget": budget, "class_rates": {g: dict(class_rates[g]) for g in groups}},
    )


def bound_dp_label(stats: GroupOutcomeStats, budget: ShiftBudget) -> BoundReport:
    """Demographic parity under label shift with |Q_g(S) - Q_g(T)| <= B_g.

    The acceptance rate moves at slope |beta+_g - beta-_g| in Q_g, so each
    group contributes 2(|G| - 1) B_g |beta+_g - beta-_g|.
    """
    require_rates(stats, plus=True, minus=True)
    groups = list(stats.groups)
    b = _budget_vector(budget, groups, "qual-rate")
    mult = pair_multiplicity(len(groups))
    beta = np.array([stats.beta[g] for g in groups])
    terms = {
        g: float(mult * b[i] * abs(stats.beta_plus[g] - stats.beta_minus[g]))
        for i, g in enumerate(groups)
    }
    return _report(
        "dp-label",
        groups,
        dp_from_beta(beta),
        terms,
        cap=max_pair_disparity(len(groups)),
        inputs={"budget": budget, "beta": {g: stats.beta[g] for g in groups}},
    )


def bound_eop_corners(lower: Mapping, upper: Mapping) -> float:
    """Worst ordered-pair TPR disparity over per-group intervals [l_g, u_g].

    The objective is convex in each coordinate, so the maximum sits at a
    corner; all 2^|G| corners are enumerated (|G| <= 16).
    """
    groups = list(lower)
    if set(upper) != set(groups):
        raise ValidationError("lower and upper interval maps must cover the same groups")
    if len(groups) > CORNER_GROUP_CAP:
        raise ValidationError(f"corner enumeration capped at {CORNER_GROUP_CAP} groups")
    lo = np.array([lower[g] for g in groups], dtype=float)
    hi = np.array([upper[g] for g in groups], dtype=float)
    if (lo > hi).any():
        bad = groups[int(np.argmax(lo > hi))]
        raise ValidationError(f"lower bound exceeds upper bound for group {bad!r}")
    if (lo < 0).any() or (hi > 1).any():
        raise ValidationError("interval endpoints must lie in [0, 1]")
    best = 0.0
    for corner in itertools.product((0, 1), repeat=len(groups)):
        x = np.where(np.array(corner, dtype=bool), hi, lo)
        best = max(best, dp_from_beta(x))
    return float(best)
