"""Premetrics on outcome distributions and the statistical group disparity.

The disparity sums a premetric over all ordered group pairs, both orders
included, so each unordered pair counts twice. All closed-form bounds in
:mod:`fairshift.bounds` follow the same convention.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from .dist import EmpiricalDistribution, Policy, joint_outcome_table, _check_alphabets
from .errors import UndefinedRateError, ValidationError

PAIR_SUM_TOL = 1e-12


@dataclass(frozen=True)
class Premetric:
    """A shift measure on group-conditional outcome distributions.

    ``eval(p, q)`` takes two (n_bins, n_labels, n_pred) outcome tables and
    returns a non-negative shift that is exactly 0 when ``p is q``. ``kind``
    is one of DP, EO, EOp, MultiDP or custom.
    """

    kind: str
    eval: Callable[[np.ndarray, np.ndarray], float]


@dataclass(frozen=True)
class DisparityValue:
    """A disparity together with its per-ordered-pair decomposition."""

    value: float
    pairwise: Mapping[tuple, float]

    def __post_init__(self):
        total = sum(self.pairwise.values())
        if abs(total - self.value) > PAIR_SUM_TOL:
            raise ValidationError(
                f"pairwise terms sum to {total!r}, not the stated value {self.value!r}"
            )


def _pred1_index(pred_labels: tuple) -> int:
    if set(pred_labels) != {0, 1}:
        raise ValidationError(f"non-binary predicted-label alphabet {pred_labels}")
    return pred_labels.index(1)


def ordered_pair_sum(groups: tuple, term: Callable) -> DisparityValue:
    """Assemble a DisparityValue from a per-ordered-pair term function."""
    pairwise = {}
    for g in groups:
        for h in groups:
            pairwise[(g, h)] = 0.0 if g == h else float(term(g, h))
    return DisparityValue(value=float(sum(pairwise.values())), pairwise=pairwise)


def disparity(premetric: Premetric, policy: Policy, dist: EmpiricalDistribution) -> DisparityValue:
    """Generic disparity: the premetric summed over all ordered group pairs."""
    outcome = joint_outcome_table(policy, dist)
    tables = {g: outcome[..., k] for k, g in enumerate(dist.groups)}
    return ordered_pair_sum(dist.groups, lambda g, h: premetric.eval(tables[g], tables[h]))


def dp_from_beta(beta: np.ndarray) -> float:
    """Demographic-parity disparity of an acceptance-rate vector (ordered pairs)."""
    b = np.asarray(beta, dtype=float)
    return float(2.0 * np.sum(np.abs(b[:, None] - b[None, :])[np.triu_indices(len(b), 1)]))


def disparity_dp(policy: Policy, dist: EmpiricalDistribution) -> DisparityValue:
    """Demographic parity violation: sum over ordered pairs of |Pr(Yhat=1|g) - Pr(Yhat=1|h)|."""
    _check_alphabets(policy, dist)
    m = _pred1_index(policy.pred_labels)
    fm = dist.feature_marginal()
    beta = np.einsum("xg,xg->g", fm, policy.accept[:, :, m])
    bd = {g: beta[k] for k, g in enumerate(dist.groups)}
    return ordered_pair_sum(dist.groups, lambda g, h: abs(bd[g] - bd[h]))


def disparity_eo(policy: Policy, dist: EmpiricalDistribution) -> DisparityValue:
    """Equalized-odds violation: TPR and FPR gaps summed over ordered pairs."""
    from .dist import outcome_stats, require_rates

    stats = outcome_stats(policy, dist)
    require_rates(stats, plus=True, minus=True)
    return ordered_pair_sum(
        dist.groups,
        lambda g, h: abs(stats.beta_plus[g] - stats.beta_plus[h])
        + abs(stats.beta_minus[g] - stats.beta_minus[h]),
    )


def disparity_eop(policy: Policy, dist: EmpiricalDistribution) -> DisparityValue:
    """Equal-opportunity violation: the TPR-only restriction of equalized odds."""
    from .dist import outcome_stats, require_rates

    stats = outcome_stats(policy, dist)
    require_rates(stats, plus=True, minus=False)
    return ordered_pair_sum(
        dist.groups, lambda g, h: abs(stats.beta_plus[g] - stats.beta_plus[h])
    )


def disparity_dp_multiclass(policy: Policy, dist: EmpiricalDistribution) -> DisparityValue:
    """Multi-class demographic parity: class-rate gaps summed over labels and ordered pairs."""
    from .dist import class_acceptance_rates

    if len(policy.pred_labels) < 2:
        raise ValidationError("multi-class disparity needs at least two predicted labels")
    rates = class_acceptance_rates(policy, dist)
    return ordered_pair_sum(
        dist.groups,
        lambda g, h: sum(abs(rates[g][y] - rates[h][y]) for y in policy.pred_labels),
    )


def _eval_dp(p: np.ndarray, q: np.ndarray) -> float:
    i1 = 1  # binary alphabets are validated by the caller
    return abs(float(p[:, :, i1].sum() - q[:, :, i1].sum()))


def _cond_rate(table: np.ndarray, y_idx: int, pred_idx: int) -> float:
    denom = table[:, y_idx, :].sum()
    if denom <= 0:
        raise UndefinedRateError(f"conditional rate undefined: no mass with label index {y_idx}")
    return float(table[:, y_idx, pred_idx].sum() / denom)


def _eval_eo(p: np.ndarray, q: np.ndarray) -> float:
    return sum(abs(_cond_rate(p, y, 1) - _cond_rate(q, y, 1)) for y in range(p.shape[1]))


def _eval_eop(p: np.ndarray, q: np.ndarray) -> float:
    return abs(_cond_rate(p, 1, 1) - _cond_rate(q, 1, 1))


def _eval_multidp(p: np.ndarray, q: np.ndarray) -> float:
    return float(np.abs(p.sum(axis=(0, 1)) - q.sum(axis=(0, 1))).sum())


PREMETRIC_DP = Premetric("DP", _eval_dp)
PREMETRIC_EO = Premetric("EO", _eval_eo)
PREMETRIC_EOP = Premetric("EOp", _eval_eop)
PREMETRIC_MULTI_DP = Premetric("MultiDP", _eval_multidp)


def custom_premetric(fn: Callable[[np.ndarray, np.ndarray], float]) -> Premetric:
    """Wrap a user shift function; only the premetric axioms are enforced, at test time."""
    return Premetric("custom", fn)
