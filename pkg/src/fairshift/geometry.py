"""Weighted inner-product geometry for equal-opportunity intervals under covariate shift.

Per group, feature marginals live in an inner-product space weighted by
s_g(x) = Pr_S(Y=1 | X=x, G=g) > 0. The true positive rate is a ratio of inner
products, constant along rays in the plane spanned by the policy vector t_g
and the all-ones vector, so extremal TPRs over a shift ball correspond to
extremal angles of the ball's projection onto that plane.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .dist import EmpiricalDistribution, Policy, _check_alphabets, _freeze
from .errors import UndefinedRateError, ValidationError

ANGLE_TOL = 1e-10       # bisection tolerance for extremal angles
HYPERPLANE_TOL = 1e-9   # admission tolerance for target marginals
_DEGENERATE_TOL = 1e-12


def inner_product(a, b, s_weights) -> float:
    """Weighted inner product sum_x a(x) b(x) s(x); bilinear, symmetric, positive-definite."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    s = np.asarray(s_weights, dtype=float)
    if not (a.shape == b.shape == s.shape):
        raise ValidationError("inner product arguments must have equal lengths")
    if s.size and s.min() <= 0:
        raise ValidationError("inner product weights must be strictly positive")
    return float(np.sum(a * b * s))


@dataclass(frozen=True)
class TprInterval:
    """Certified range of a group's true positive rate over a shift ball.

    ``phi_lower`` attains ``upper`` and ``phi_upper`` attains ``lower``: the
    cosine ratio is strictly decreasing in the angle.
    """

    lower: float
    upper: float
    phi_lower: float
    phi_upper: float

    def __post_init__(self):
        if not 0.0 <= self.lower <= self.upper <= 1.0:
            raise ValidationError(
                f"interval [{self.lower!r}, {self.upper!r}] violates 0 <= l <= u <= 1"
            )


@dataclass(frozen=True)
class _GroupGeometry:
    """Per-group vectors and cached plane data, restricted to the source support."""

    support: np.ndarray      # indices into the full bin alphabet
    r_source: np.ndarray     # Pr_S(x | g) on the support
    s: np.ndarray            # Pr_S(Y=1 | x, g) on the support, all > 0
    t: np.ndarray            # Pr_pi(Yhat=1 | x, g) on the support
    norm_t: float
    norm_one: float
    xi: float                # angle between t and the all-ones vector
    degenerate: bool         # t numerically parallel to the all-ones vector (or zero)
    e1: np.ndarray
    e2: np.ndarray
    center: tuple            # plane coordinates of r_source
    gram: tuple              # (g11, g12, g22) of the hyperplane-projected plane basis
    proj_one_norm: float     # norm of the projected all-ones vector
    beta_source: float

    @property
    def norm_ratio(self) -> float:
        """‖1‖ / ‖t‖, the scale factor between the cosine ratio and the TPR."""
        return self.norm_one / self.norm_t if self.norm_t > 0 else math.inf

    def ip(self, a, b) -> float:
        return inner_product(a, b, self.s)

    def cos_ratio(self, phi: float) -> float:
        """TPR as a function of the plane angle: (‖t‖/‖1‖) cos(phi) / cos(xi - phi)."""
        denom = math.cos(self.xi - phi)
        if abs(denom) < _DEGENERATE_TOL:
            return math.inf if math.cos(phi) > 0 else -math.inf
        return (self.norm_t / self.norm_one) * math.cos(phi) / denom


@dataclass(frozen=True)
class GeometricContext:
    """Source-side geometry of a policy, one entry per group."""

    groups: tuple
    per_group: Mapping[object, _GroupGeometry]


def geometric_context(policy: Policy, source: EmpiricalDistribution) -> GeometricContext:
    """Build per-group geometry from a policy and its source distribution.

    Each group is restricted to bins with positive source mass, where
    s_g(x) = Pr_S(Y=1 | x, g) must be strictly positive.
    """
    _check_alphabets(policy, source)
    if set(source.labels) != {0, 1}:
        raise ValidationError("geometric context requires binary labels")
    j1 = source._label_index(1)
    accept = policy.accept_probs(1)
    per_group = {}
    for k, g in enumerate(source.groups):
        joint = source.prob[:, :, k]
        bin_mass = joint.sum(axis=1)
        support = np.flatnonzero(bin_mass > 0)
        r = bin_mass[support] / bin_mass.sum()
        s = joint[support, j1] / bin_mass[support]
        if s.min() <= 0:
            i = support[int(np.argmin(s))]
            raise ValidationError(
                f"Pr(Y=1 | x, g) must be positive; zero at bin "
                f"{source.feature_bins[i]!r} for group {g!r}"
            )
        t = accept[support, k]
        per_group[g] = _build_group_geometry(r, s, t)
    return GeometricContext(groups=source.groups, per_group=per_group)


def _build_group_geometry(r, s, t) -> _GroupGeometry:
    r, s, t = _freeze(r), _freeze(s), _freeze(t)
    if abs(float(r.sum()) - 1.0) > HYPERPLANE_TOL:
        raise ValidationError("source marginal is off the normalization hyperplane")
    ones = np.ones_like(s)
    ip = lambda a, b: float(np.sum(a * b * s))
    norm_one = math.sqrt(ip(ones, ones))
    norm_t = math.sqrt(ip(t, t))
    denom_src = ip(r, ones)
    beta_source = ip(r, t) / denom_src

    if norm_t <= _DEGENERATE_TOL * norm_one:
        # reject-all policy: the TPR is identically zero
        zero = np.zeros_like(s)
        return _GroupGeometry(
            support=np.arange(len(s)), r_source=r, s=s, t=t,
            norm_t=norm_t, norm_one=norm_one, xi=0.0, degenerate=True,
            e1=_freeze(zero), e2=_freeze(zero), center=(0.0, 0.0),
            gram=(0.0, 0.0, 0.0), proj_one_norm=0.0, beta_source=0.0,
        )

    e1 = t / norm_t
    u = ones - ip(ones, e1) * e1
    u_norm = math.sqrt(max(ip(u, u), 0.0))
    cos_xi = min(1.0, max(-1.0, ip(t, ones) / (norm_t * norm_one)))
    xi = math.acos(cos_xi)
    degenerate = u_norm <= 1e-9 * norm_one
    e2 = u / u_norm if not degenerate else np.zeros_like(u)

    # The hyperplane tangent is {d : sum_x d(x) = 0}; its normal in this inner
    # product is the entrywise inverse of s. Projected Gram entries follow from
    # <Pa, Pb> = <a, b> - (sum a)(sum b) / sum(1/s).
    inv_s_norm_sq = float(np.sum(1.0 / s))
    sum_e1, sum_e2, sum_one = float(e1.sum()), float(e2.sum()), float(ones.sum())
    g11 = max(1.0 - sum_e1 * sum_e1 / inv_s_norm_sq, 0.0)
    g12 = -sum_e1 * sum_e2 / inv_s_norm_sq
    g22 = max(1.0 - sum_e2 * sum_e2 / inv_s_norm_sq, 0.0)
    proj_one_norm = math.sqrt(max(norm_one**2 - sum_one * sum_one / inv_s_norm_sq, 0.0))
    center = (ip(r, e1), ip(r, e2))

    return _GroupGeometry(
        support=np.arange(len(s)), r_source=r, s=s, t=t,
        norm_t=norm_t, norm_one=norm_one, xi=xi, degenerate=degenerate,
        e1=_freeze(e1), e2=_freeze(e2), center=center,
        gram=(g11, g12, g22), proj_one_norm=proj_one_norm, beta_source=beta_source,
    )


def tpr_from_geometry(ctx: GeometricContext, group, r_target) -> float:
    """TPR as the ratio <r, t> / <r, 1> for a marginal on the hyperplane."""
    geo = ctx.per_group[group]
    r = np.asarray(r_target, dtype=float)
    if r.shape != geo.r_source.shape:
        raise ValidationError("target marginal has the wrong length for this group")
    if abs(float(r.sum()) - 1.0) > HYPERPLANE_TOL:
        raise ValidationError("target marginal is off the normalization hyperplane")
    denom = geo.ip(r, np.ones_like(geo.s))
    if denom == 0.0:
        raise UndefinedRateError("the projected positive mass <r, 1> vanished")
    return float(geo.ip(r, geo.t) / denom)


def project_to_plane(ctx: GeometricContext, group, r) -> np.ndarray:
    """Orthogonal projection of a vector onto the (1, t_g)-plane."""
    geo = ctx.per_group[group]
    r = np.asarray(r, dtype=float)
    out = geo.ip(r, geo.e1) * geo.e1
    if not geo.degenerate:
        out = out + geo.ip(r, geo.e2) * geo.e2
    return out


def _support_h(geo: _GroupGeometry, radius: float, w1: float, w2: float) -> float:
    """Support function of the projected feasible set in plane direction (w1, w2)."""
    g11, g12, g22 = geo.gram
    spread = math.sqrt(max(w1 * w1 * g11 + 2.0 * w1 * w2 * g12 + w2 * w2 * g22, 0.0))
    return geo.center[0] * w1 + geo.center[1] * w2 + radius * spread


def tpr_interval(ctx: GeometricContext, group, radius: float) -> TprInterval:
    """Certified TPR interval for one group over the weighted-L2 shift ball.

    The ball, intersected with the normalization hyperplane, projects onto the
    (1, t)-plane as a convex set; its extremal angles are located by bisection
    on the set's support function and mapped through the monotone cosine
    ratio. The positivity constraint r >= 0 is deliberately not imposed, so
    the interval is conservative.
    """
    if radius < 0:
        raise ValidationError(f"negative shift radius {radius!r}")
    geo = ctx.per_group[group]

    if geo.degenerate:
        const = min(1.0, max(0.0, geo.norm_t / geo.norm_one if geo.norm_t > 0 else 0.0))
        return TprInterval(lower=const, upper=const, phi_lower=0.0, phi_upper=0.0)
    if radius == 0.0:
        phi_c = math.atan2(geo.center[1], geo.center[0])
        b = min(1.0, max(0.0, geo.beta_source))
        return TprInterval(lower=b, upper=b, phi_lower=phi_c, phi_upper=phi_c)

    # If the ball reaches <r, 1> <= 0 the angular sweep covers the plane and
    # the TPR is unconstrained: clamp to [0, 1].
    min_pos_mass = geo.ip(geo.r_source, np.ones_like(geo.s)) - radius * geo.proj_one_norm
    if min_pos_mass <= _DEGENERATE_TOL:
        return TprInterval(
            lower=0.0, upper=1.0, phi_lower=geo.xi - math.pi / 2, phi_upper=geo.xi + math.pi / 2
        )

    phi_c = math.atan2(geo.center[1], geo.center[0])

    def reaches_at_least(phi: float) -> bool:
        # some feasible point has plane angle >= phi
        return _support_h(geo, radius, -math.sin(phi), math.cos(phi)) >= 0.0

    def reaches_at_most(phi: float) -> bool:
        # some feasible point has plane angle <= phi
        return _support_h(geo, radius, math.sin(phi), -math.cos(phi)) >= 0.0

    lo, hi = phi_c, geo.xi + math.pi / 2
    while hi - lo > ANGLE_TOL:
        mid = 0.5 * (lo + hi)
        if reaches_at_least(mid):
            lo = mid
        else:
            hi = mid
    phi_upper = lo

    lo, hi = geo.xi - math.pi / 2, phi_c
    while hi - lo > ANGLE_TOL:
        mid = 0.5 * (lo + hi)
        if reaches_at_most(mid):
            hi = mid
        else:
            lo = mid
    phi_lower = hi

    upper = min(1.0, max(0.0, geo.cos_ratio(phi_lower)))
    lower = min(1.0, max(0.0, geo.cos_ratio(phi_upper)))
    if lower > upper:  # angle-tolerance jitter on a near-point interval
        lower, upper = upper, lower
    return TprInterval(lower=lower, upper=upper, phi_lower=phi_lower, phi_upper=phi_upper)


def sample_ball_hyperplane(
    ctx: GeometricContext, group, radius: float, n_samples: int, rng: np.random.Generator
) -> np.ndarray:
    """Random marginals from the shift ball intersected with the hyperplane.

    Rows are r_source plus a zero-sum perturbation of weighted-L2 norm at most
    ``radius``. Positivity is not enforced, matching the interval's domain.
    """
    geo = ctx.per_group[group]
    k = len(geo.r_source)
    if k == 1 or radius == 0.0:
        return np.tile(geo.r_source, (n_samples, 1))
    d = rng.standard_normal((n_samples, k))
    d -= d.mean(axis=1, keepdims=True)
    norms = np.sqrt(np.einsum("ij,ij,j->i", d, d, geo.s))
    norms[norms == 0] = 1.0
    radii = radius * rng.uniform(0.0, 1.0, size=n_samples) ** (1.0 / max(k - 1, 1))
    return geo.r_source + d * (radii / norms)[:, None]
