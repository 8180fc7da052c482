"""Finite joint probability tables, stochastic policies, and per-group outcome statistics.

Distributions are exact tables over (feature-bin, label, group); every derived
quantity is a finite sum, so identities can be tested at float precision.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable, Iterable, Mapping, Optional, Sequence

import numpy as np

from .errors import UndefinedRateError, ValidationError

MASS_TOL = 1e-12      # tolerance for probability normalization at construction
DERIVED_TOL = 1e-10   # tolerance for derived identities

BinId = Hashable
GroupId = Hashable
LabelId = Hashable


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class EmpiricalDistribution:
    """Probability table over (feature-bin, label, group).

    ``prob[i, j, k]`` is the joint mass of ``(feature_bins[i], labels[j],
    groups[k])``. Total mass is 1 and every group has strictly positive
    marginal mass. Instances are immutable and safe to share.
    """

    feature_bins: tuple
    labels: tuple
    groups: tuple
    prob: np.ndarray

    def __post_init__(self):
        p = _freeze(self.prob)
        object.__setattr__(self, "prob", p)
        object.__setattr__(self, "feature_bins", tuple(self.feature_bins))
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "groups", tuple(self.groups))
        if p.shape != (len(self.feature_bins), len(self.labels), len(self.groups)):
            raise ValidationError(
                f"prob shape {p.shape} does not match alphabets "
                f"({len(self.feature_bins)}, {len(self.labels)}, {len(self.groups)})"
            )
        if len(self.groups) < 1:
            raise ValidationError("at least one group is required")
        if p.min(initial=0.0) < -MASS_TOL:
            raise ValidationError(f"negative probability mass {p.min():.3e}")
        total = float(p.sum())
        if abs(total - 1.0) > MASS_TOL:
            raise ValidationError(f"total mass {total!r} is not 1 within {MASS_TOL}")
        gm = p.sum(axis=(0, 1))
        for k, g in enumerate(self.groups):
            if gm[k] <= 0.0:
                raise ValidationError(f"group {g!r} has zero mass")

    @property
    def n_bins(self) -> int:
        return len(self.feature_bins)

    @property
    def n_labels(self) -> int:
        return len(self.labels)

    @property
    def n_groups(self) -> int:
        return len(self.groups)

    def group_mass(self) -> np.ndarray:
        """Pr(G=g), indexed like ``groups``."""
        return self.prob.sum(axis=(0, 1))

    def feature_marginal(self) -> np.ndarray:
        """Pr(X=x | G=g) as an (n_bins, n_groups) array."""
        return self.prob.sum(axis=1) / self.group_mass()

    def qualification_rates(self) -> dict:
        """Q_g = Pr(Y=1 | G=g) per group; requires a label literally equal to 1."""
        j1 = self._label_index(1)
        q = self.prob[:, j1, :].sum(axis=0) / self.group_mass()
        return {g: float(q[k]) for k, g in enumerate(self.groups)}

    def _label_index(self, label) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise ValidationError(f"label {label!r} not in alphabet {self.labels}") from None

    def _group_index(self, group) -> int:
        try:
            return self.groups.index(group)
        except ValueError:
            raise ValidationError(f"group {group!r} not in alphabet {self.groups}") from None


@dataclass(frozen=True)
class Policy:
    """Stochastic prediction policy: a distribution over predicted labels per (bin, group).

    ``accept[i, k, m]`` is Pr(Yhat = pred_labels[m] | X = feature_bins[i],
    G = groups[k]). Rows sum to 1. Prediction is independent of Y given (X, G)
    by construction: no label axis exists.
    """

    feature_bins: tuple
    groups: tuple
    pred_labels: tuple
    accept: np.ndarray

    def __post_init__(self):
        a = _freeze(self.accept)
        object.__setattr__(self, "accept", a)
        object.__setattr__(self, "feature_bins", tuple(self.feature_bins))
        object.__setattr__(self, "groups", tuple(self.groups))
        object.__setattr__(self, "pred_labels", tuple(self.pred_labels))
        expect = (len(self.feature_bins), len(self.groups), len(self.pred_labels))
        if a.shape != expect:
            raise ValidationError(f"accept shape {a.shape} does not match alphabets {expect}")
        if a.min(initial=0.0) < -MASS_TOL or a.max(initial=0.0) > 1.0 + MASS_TOL:
            raise ValidationError("policy probabilities must lie in [0, 1]")
        rows = a.sum(axis=2)
        if np.abs(rows - 1.0).max(initial=0.0) > MASS_TOL:
            raise ValidationError("each (bin, group) policy row must sum to 1")

    def accept_probs(self, pred_label=1) -> np.ndarray:
        """Pr(Yhat = pred_label | x, g) as an (n_bins, n_groups) array."""
        try:
            m = self.pred_labels.index(pred_label)
        except ValueError:
            raise ValidationError(
                f"predicted label {pred_label!r} not in alphabet {self.pred_labels}"
            ) from None
        return self.accept[:, :, m]


@dataclass(frozen=True)
class GroupOutcomeStats:
    """Per-group outcome rates of a policy on a binary-label distribution.

    ``beta`` is the acceptance rate Pr(Yhat=1 | g), ``beta_plus``/``beta_minus``
    the true/false positive rates, ``qual`` the qualification rate
    Pr(Y=1 | g), and ``rho[g][y, yhat]`` the joint outcome fractions.
    Conditional rates whose conditioning event has zero mass are ``None``
    (an explicit undefined sentinel, never NaN).
    """

    groups: tuple
    beta: Mapping[GroupId, float]
    beta_plus: Mapping[GroupId, Optional[float]]
    beta_minus: Mapping[GroupId, Optional[float]]
    qual: Mapping[GroupId, float]
    rho: Mapping[GroupId, np.ndarray] = field(repr=False)


def _check_alphabets(policy: Policy, dist: EmpiricalDistribution) -> None:
    if policy.feature_bins != dist.feature_bins:
        raise ValidationError("policy and distribution disagree on feature bins")
    if policy.groups != dist.groups:
        raise ValidationError("policy and distribution disagree on groups")


def build_empirical(
    records: Iterable[tuple],
    feature_bins: Optional[Sequence[BinId]] = None,
    labels: Optional[Sequence[LabelId]] = None,
    groups: Optional[Sequence[GroupId]] = None,
) -> EmpiricalDistribution:
    """Normalize weighted ``(bin, label, group, weight)`` records into a distribution.

    Alphabets default to first-appearance order of the records; passing them
    explicitly fixes both membership and ordering (a declared group with zero
    total weight is an error).
    """
    recs = list(records)
    if not recs:
        raise ValidationError("empty input: no records")
    bins = list(feature_bins) if feature_bins is not None else []
    labs = list(labels) if labels is not None else []
    grps = list(groups) if groups is not None else []
    seen_b, seen_l, seen_g = set(bins), set(labs), set(grps)
    for x, y, g, w in recs:
        if w < 0:
            raise ValidationError(f"negative weight {w!r} for record ({x!r}, {y!r}, {g!r})")
        if feature_bins is None and x not in seen_b:
            bins.append(x), seen_b.add(x)
        if labels is None and y not in seen_l:
            labs.append(y), seen_l.add(y)
        if groups is None and g not in seen_g:
            grps.append(g), seen_g.add(g)
    bi = {b: i for i, b in enumerate(bins)}
    li = {l: i for i, l in enumerate(labs)}
    gi = {g: i for i, g in enumerate(grps)}
    table = np.zeros((len(bins), len(labs), len(grps)))
    for x, y, g, w in recs:
        if x not in bi or y not in li or g not in gi:
            raise ValidationError(f"record ({x!r}, {y!r}, {g!r}) outside declared alphabets")
        table[bi[x], li[y], gi[g]] += w
    total = table.sum()
    if total <= 0:
        raise ValidationError("records carry zero total weight")
    for g, k in gi.items():
        if table[:, :, k].sum() <= 0:
            raise ValidationError(f"group {g!r} has zero mass")
    return EmpiricalDistribution(tuple(bins), tuple(labs), tuple(grps), table / total)


def joint_outcome_table(policy: Policy, dist: EmpiricalDistribution) -> np.ndarray:
    """Group-conditional outcome distributions Pr(X, Y, Yhat | G=g).

    Returns an (n_bins, n_labels, n_pred, n_groups) array; each [..., k] slice
    sums to 1. The factorization multiplies the policy row into the joint
    table, which encodes the conditional independence of Yhat and Y given
    (X, G).
    """
    _check_alphabets(policy, dist)
    if policy.pred_labels != dist.labels:
        raise ValidationError("policy predicted-label alphabet must match distribution labels")
    # (x, y, g) x (x, g, yhat) -> (x, y, yhat, g)
    out = dist.prob[:, :, None, :] * policy.accept.transpose(0, 2, 1)[:, None, :, :]
    return out / dist.group_mass()


def class_acceptance_rates(policy: Policy, dist: EmpiricalDistribution) -> dict:
    """Pr(Yhat = y | G = g) for every predicted label, as {g: {y: rate}}."""
    _check_alphabets(policy, dist)
    fm = dist.feature_marginal()  # (n_bins, n_groups)
    rates = np.einsum("xg,xgm->gm", fm, policy.accept)
    return {
        g: {y: float(rates[k, m]) for m, y in enumerate(policy.pred_labels)}
        for k, g in enumerate(dist.groups)
    }


def outcome_stats(policy: Policy, dist: EmpiricalDistribution) -> GroupOutcomeStats:
    """Exact per-group acceptance, TPR, FPR, qualification rates and outcome fractions.

    Requires binary labels {0, 1} and a matching predicted-label alphabet.
    Zero-mass conditioning events yield the ``None`` sentinel rather than NaN.
    """
    _check_alphabets(policy, dist)
    if set(dist.labels) != {0, 1}:
        raise ValidationError(f"outcome_stats requires binary labels {{0, 1}}, got {dist.labels}")
    if policy.pred_labels != dist.labels:
        raise ValidationError("policy predicted-label alphabet must match distribution labels")
    j1 = dist._label_index(1)
    j0 = dist._label_index(0)
    gm = dist.group_mass()
    a1 = policy.accept_probs(1)  # (n_bins, n_groups)

    pos = dist.prob[:, j1, :]  # joint (x, g) mass with Y=1
    neg = dist.prob[:, j0, :]
    q = pos.sum(axis=0) / gm
    beta = ((pos + neg) * a1).sum(axis=0) / gm
    tp = (pos * a1).sum(axis=0) / gm  # rho^{1,1}
    fp = (neg * a1).sum(axis=0) / gm  # rho^{0,1}

    beta_d, bp_d, bm_d, q_d, rho_d = {}, {}, {}, {}, {}
    for k, g in enumerate(dist.groups):
        beta_d[g] = float(beta[k])
        q_d[g] = float(q[k])
        bp_d[g] = float(tp[k] / q[k]) if q[k] > 0 else None
        bm_d[g] = float(fp[k] / (1.0 - q[k])) if q[k] < 1 else None
        rho = np.array(
            [
                [float(neg[:, k].sum() / gm[k] - fp[k]), float(fp[k])],
                [float(pos[:, k].sum() / gm[k] - tp[k]), float(tp[k])],
            ]
        )
        rho_d[g] = _freeze(rho)  # rho[y, yhat]
    return GroupOutcomeStats(
        groups=dist.groups, beta=beta_d, beta_plus=bp_d, beta_minus=bm_d, qual=q_d, rho=rho_d
    )


def require_rates(stats: GroupOutcomeStats, plus: bool = True, minus: bool = True) -> None:
    """Raise if any group's requested conditional rate is the undefined sentinel."""
    for g in stats.groups:
        if plus and stats.beta_plus[g] is None:
            raise UndefinedRateError(f"true positive rate undefined for group {g!r} (no positives)")
        if minus and stats.beta_minus[g] is None:
            raise UndefinedRateError(f"false positive rate undefined for group {g!r} (no negatives)")


def threshold_policy(
    feature_bins: Sequence[BinId],
    groups: Sequence[GroupId],
    scores: Mapping[tuple, float],
    thresholds: Mapping[GroupId, float],
) -> Policy:
    """Deterministic binary policy accepting where ``scores[(x, g)] > thresholds[g]``."""
    bins, grps = tuple(feature_bins), tuple(groups)
    a1 = np.zeros((len(bins), len(grps)))
    for k, g in enumerate(grps):
        if g not in thresholds:
            raise ValidationError(f"missing threshold for group {g!r}")
        tau = thresholds[g]
        for i, x in enumerate(bins):
            if (x, g) not in scores:
                raise ValidationError(f"missing score entry for ({x!r}, {g!r})")
            a1[i, k] = 1.0 if scores[(x, g)] > tau else 0.0
    accept = np.stack([1.0 - a1, a1], axis=2)
    return Policy(bins, grps, (0, 1), accept)


def constant_policy(
    feature_bins: Sequence[BinId],
    groups: Sequence[GroupId],
    accept_prob: float = 1.0,
    pred_labels: Sequence[LabelId] = (0, 1),
) -> Policy:
    """Binary policy with the same acceptance probability everywhere."""
    if not 0.0 <= accept_prob <= 1.0:
        raise ValidationError(f"acceptance probability {accept_prob!r} outside [0, 1]")
    bins, grps = tuple(feature_bins), tuple(groups)
    a1 = np.full((len(bins), len(grps)), float(accept_prob))
    accept = np.stack([1.0 - a1, a1], axis=2)
    return Policy(bins, grps, tuple(pred_labels), accept)


def mixture(
    dists: Sequence[EmpiricalDistribution], weights: Sequence[float]
) -> EmpiricalDistribution:
    """Convex mixture of distributions over identical alphabets."""
    if len(dists) != len(weights) or not dists:
        raise ValidationError("mixture needs matching, non-empty dists and weights")
    w = np.asarray(weights, dtype=float)
    if w.min() < 0 or abs(w.sum() - 1.0) > MASS_TOL:
        raise ValidationError("mixture weights must be a probability vector")
    first = dists[0]
    for d in dists[1:]:
        if (d.feature_bins, d.labels, d.groups) != (
            first.feature_bins,
            first.labels,
            first.groups,
        ):
            raise ValidationError("mixture components must share alphabets")
    table = sum(wi * d.prob for wi, d in zip(w, dists))
    return EmpiricalDistribution(first.feature_bins, first.labels, first.groups, table)
