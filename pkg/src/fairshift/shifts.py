"""Divergences between group-conditional distributions and shift constructors.

Three divergences drive the bounds: the source variance of the importance
reweighting coefficient (covariate shift), the absolute qualification-rate
difference (label shift), and a weighted-L2 metric on feature marginals
(the geometric equal-opportunity route).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .dist import EmpiricalDistribution, MASS_TOL, _freeze
from .errors import SupportViolationError, UndefinedRateError, ValidationError

BUDGET_KINDS = ("var-omega", "qual-rate", "weighted-l2")
OMEGA_MEAN_TOL = 1e-10


@dataclass(frozen=True)
class ShiftBudget:
    """Per-group non-negative shift bounds, tagged with their divergence kind."""

    kind: str
    per_group: Mapping

    def __post_init__(self):
        if self.kind not in BUDGET_KINDS:
            raise ValidationError(f"unknown budget kind {self.kind!r}, expected one of {BUDGET_KINDS}")
        object.__setattr__(self, "per_group", dict(self.per_group))
        for g, b in self.per_group.items():
            if b < 0:
                raise ValidationError(f"negative budget {b!r} for group {g!r}")

    @classmethod
    def zero(cls, kind: str, groups) -> "ShiftBudget":
        return cls(kind, {g: 0.0 for g in groups})


@dataclass(frozen=True)
class ReweightingTable:
    """Importance weights omega_g(x) = Pr_T(x|g) / Pr_S(x|g) on a shared bin alphabet."""

    feature_bins: tuple
    groups: tuple
    omega: np.ndarray  # (n_bins, n_groups)

    def __post_init__(self):
        w = _freeze(self.omega)
        object.__setattr__(self, "omega", w)
        object.__setattr__(self, "feature_bins", tuple(self.feature_bins))
        object.__setattr__(self, "groups", tuple(self.groups))
        if w.shape != (len(self.feature_bins), len(self.groups)):
            raise ValidationError("omega shape does not match alphabets")
        if w.min(initial=0.0) < 0:
            raise ValidationError("reweighting coefficients must be non-negative")


def _same_alphabets(target: EmpiricalDistribution, source: EmpiricalDistribution) -> None:
    if (target.feature_bins, target.labels, target.groups) != (
        source.feature_bins,
        source.labels,
        source.groups,
    ):
        raise ValidationError("target and source must share (bin, label, group) alphabets")


def reweighting(target: EmpiricalDistribution, source: EmpiricalDistribution) -> ReweightingTable:
    """omega_g(x) = Pr_T(x|g) / Pr_S(x|g); jointly-zero bins get weight 1.

    Setting omega to 1 where both marginals vanish keeps E_S[omega | g] = 1
    and adds nothing to its variance. Target mass on a zero-source bin is a
    support violation.
    """
    _same_alphabets(target, source)
    rs = source.feature_marginal()
    rt = target.feature_marginal()
    omega = np.ones_like(rs)
    pos = rs > 0
    omega[pos] = rt[pos] / rs[pos]
    bad = (~pos) & (rt > 0)
    if bad.any():
        i, k = np.argwhere(bad)[0]
        raise SupportViolationError(
            f"target has mass at bin {source.feature_bins[i]!r} for group "
            f"{source.groups[k]!r} where the source has none"
        )
    table = ReweightingTable(source.feature_bins, source.groups, omega)
    means = np.einsum("xg,xg->g", rs, omega)
    if np.abs(means - 1.0).max() > OMEGA_MEAN_TOL:
        raise ValidationError("reweighting table failed the unit-mean check")
    return table


def divergence_var_omega(
    target: EmpiricalDistribution, source: EmpiricalDistribution
) -> dict:
    """Var_S[omega_g(X)] per group, the covariate-shift divergence."""
    table = reweighting(target, source)
    rs = source.feature_marginal()
    second = np.einsum("xg,xg->g", rs, table.omega**2)
    var = np.maximum(second - 1.0, 0.0)  # E_S[omega] = 1 exactly
    return {g: float(var[k]) for k, g in enumerate(source.groups)}


def divergence_qual_rate(
    target: EmpiricalDistribution, source: EmpiricalDistribution
) -> dict:
    """|Q_g(S) - Q_g(T)| per group, the label-shift divergence."""
    _same_alphabets(target, source)
    if set(source.labels) != {0, 1}:
        raise ValidationError("qualification-rate divergence requires binary labels")
    qs = source.qualification_rates()
    qt = target.qualification_rates()
    return {g: abs(qs[g] - qt[g]) for g in source.groups}


def divergence_weighted_l2(
    target: EmpiricalDistribution,
    source: EmpiricalDistribution,
    s_weights: Mapping,
) -> dict:
    """sqrt(sum_x (r_T(x) - r_S(x))^2 s_g(x)) per group, for positive weights s_g.

    ``s_weights[g]`` is an array over the full bin alphabet; every entry must
    be strictly positive.
    """
    _same_alphabets(target, source)
    rs = source.feature_marginal()
    rt = target.feature_marginal()
    out = {}
    for k, g in enumerate(source.groups):
        s = np.asarray(s_weights[g], dtype=float)
        if s.shape != (source.n_bins,):
            raise ValidationError(f"weight vector for group {g!r} has wrong length")
        if s.min() <= 0:
            raise ValidationError(f"non-positive weight for group {g!r}")
        diff = rt[:, k] - rs[:, k]
        out[g] = float(np.sqrt(np.sum(diff * diff * s)))
    return out


def apply_label_shift(
    source: EmpiricalDistribution, new_qual: Mapping
) -> EmpiricalDistribution:
    """Rebuild the joint table with new qualification rates, preserving Pr(X|Y,G).

    Group marginals Pr(G) are kept fixed. Requesting positive mass for a label
    whose source conditional Pr(X | Y=y, G=g) is undefined is an error. When
    every requested rate equals the source rate the source object is returned
    unchanged.
    """
    if set(source.labels) != {0, 1}:
        raise ValidationError("label shift requires binary labels")
    qs = source.qualification_rates()
    for g in source.groups:
        if g not in new_qual:
            raise ValidationError(f"missing qualification rate for group {g!r}")
        if not 0.0 <= new_qual[g] <= 1.0:
            raise ValidationError(f"qualification rate {new_qual[g]!r} outside [0, 1]")
    if all(new_qual[g] == qs[g] for g in source.groups):
        return source

    j1 = source._label_index(1)
    j0 = source._label_index(0)
    gm = source.group_mass()
    table = np.zeros_like(np.asarray(source.prob))
    for k, g in enumerate(source.groups):
        for j, qmass in ((j1, new_qual[g]), (j0, 1.0 - new_qual[g])):
            src_mass = source.prob[:, j, k].sum()
            if src_mass <= 0:
                if qmass > 0:
                    raise UndefinedRateError(
                        f"cannot place mass on label {source.labels[j]!r} for group {g!r}: "
                        "source conditional Pr(X | Y, G) is undefined"
                    )
                continue
            cond = source.prob[:, j, k] / src_mass
            table[:, j, k] = gm[k] * qmass * cond
    out = EmpiricalDistribution(source.feature_bins, source.labels, source.groups, table)
    _assert_preserved_conditional(out, source, axis="label")
    return out


def apply_covariate_shift(
    source: EmpiricalDistribution, new_feature_marginals: Mapping
) -> EmpiricalDistribution:
    """Rebuild the joint table with new per-group feature marginals, preserving Pr(Y|X,G).

    ``new_feature_marginals[g]`` is a probability vector over the bin
    alphabet. Mass on a bin where the source conditional Pr(Y | X=x, G=g) is
    undefined is an error. Group marginals Pr(G) are kept fixed.
    """
    gm = source.group_mass()
    table = np.zeros_like(np.asarray(source.prob))
    for k, g in enumerate(source.groups):
        if g not in new_feature_marginals:
            raise ValidationError(f"missing feature marginal for group {g!r}")
        r = np.asarray(new_feature_marginals[g], dtype=float)
        if r.shape != (source.n_bins,):
            raise ValidationError(f"feature marginal for group {g!r} has wrong length")
        if r.min() < -MASS_TOL or abs(r.sum() - 1.0) > MASS_TOL:
            raise ValidationError(f"feature marginal for group {g!r} is not a probability vector")
        r = np.clip(r, 0.0, None)
        bin_mass = source.prob[:, :, k].sum(axis=1)
        bad = (bin_mass <= 0) & (r > 0)
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            raise UndefinedRateError(
                f"cannot place mass on bin {source.feature_bins[i]!r} for group {g!r}: "
                "source conditional Pr(Y | X, G) is undefined"
            )
        pos = bin_mass > 0
        cond = np.zeros_like(np.asarray(source.prob[:, :, k]))
        cond[pos] = source.prob[pos, :, k] / bin_mass[pos, None]
        table[:, :, k] = gm[k] * r[:, None] * cond
    out = EmpiricalDistribution(source.feature_bins, source.labels, source.groups, table)
    _assert_preserved_conditional(out, source, axis="feature")
    return out


def _assert_preserved_conditional(
    target: EmpiricalDistribution, source: EmpiricalDistribution, axis: str
) -> None:
    """Post-hoc validation that the shift preserved the required conditional."""
    for k in range(source.n_groups):
        s = source.prob[:, :, k]
        t = target.prob[:, :, k]
        if axis == "feature":  # Pr(Y | X, G) preserved wherever both sides have mass
            sm, tm = s.sum(axis=1), t.sum(axis=1)
            both = (sm > 0) & (tm > 0)
            cs = s[both] / sm[both, None]
            ct = t[both] / tm[both, None]
        else:  # Pr(X | Y, G) preserved
            sm, tm = s.sum(axis=0), t.sum(axis=0)
            both = (sm > 0) & (tm > 0)
            cs = s[:, both] / sm[both]
            ct = t[:, both] / tm[both]
        if cs.size and np.abs(cs - ct).max() > MASS_TOL:
            raise ValidationError(f"{axis} shift failed to preserve the required conditional")


def is_covariate_shift_pair(
    target: EmpiricalDistribution,
    source: EmpiricalDistribution,
    tol: float = 1e-9,
) -> bool:
    """True when Pr(Y|X,G) agrees on the common support of target and source."""
    _same_alphabets(target, source)
    for k in range(source.n_groups):
        s, t = source.prob[:, :, k], target.prob[:, :, k]
        sm, tm = s.sum(axis=1), t.sum(axis=1)
        both = (sm > 0) & (tm > 0)
        if not both.any():
            continue
        if np.abs(s[both] / sm[both, None] - t[both] / tm[both, None]).max() > tol:
            return False
    return True
