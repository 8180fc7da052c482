"""Shared random-instance builders for the test suite."""

import numpy as np

import fairshift as fs


def rand_dist(rng, n_bins=4, groups=("g", "h"), full_support=True):
    """Random binary-label table; full support keeps every conditional defined."""
    shape = (n_bins, 2, len(groups))
    p = rng.dirichlet(np.ones(shape[0] * shape[1] * shape[2])).reshape(shape)
    if full_support:
        p = p + 0.01 / p.size
        p = p / p.sum()
    return fs.EmpiricalDistribution(tuple(range(n_bins)), (0, 1), tuple(groups), p)


def rand_policy(rng, dist):
    a1 = rng.uniform(size=(dist.n_bins, dist.n_groups))
    return fs.Policy(dist.feature_bins, dist.groups, (0, 1), np.stack([1 - a1, a1], axis=2))


def rand_threshold_policy(rng, dist):
    scores = {
        (x, g): float(rng.uniform()) for x in dist.feature_bins for g in dist.groups
    }
    taus = {g: float(rng.uniform(0.2, 0.8)) for g in dist.groups}
    return fs.threshold_policy(dist.feature_bins, dist.groups, scores, taus)


def rand_covariate_pair(rng, n_bins=4, groups=("g", "h"), max_mix=1.0):
    """Source plus a random covariate shift of it (same Pr(Y|X,G) by construction)."""
    src = rand_dist(rng, n_bins, groups)
    fm = src.feature_marginal()
    marg = {}
    for k, g in enumerate(groups):
        w = rng.uniform(0.0, max_mix)
        marg[g] = (1.0 - w) * fm[:, k] + w * rng.dirichlet(np.ones(n_bins))
    return src, fs.apply_covariate_shift(src, marg)


def beta_policy(dist, rates):
    """Constant per-group acceptance probabilities (handy for pinning disparities)."""
    a1 = np.zeros((dist.n_bins, dist.n_groups))
    for k, g in enumerate(dist.groups):
        a1[:, k] = rates[g]
    return fs.Policy(dist.feature_bins, dist.groups, (0, 1), np.stack([1 - a1, a1], axis=2))


def uniform_dist(n_bins=3, groups=("g", "h"), qual=0.5):
    """Uniform bins, identical groups, fixed qualification rate."""
    n_g = len(groups)
    p = np.empty((n_bins, 2, n_g))
    p[:, 1, :] = qual / (n_bins * n_g)
    p[:, 0, :] = (1 - qual) / (n_bins * n_g)
    return fs.EmpiricalDistribution(tuple(range(n_bins)), (0, 1), tuple(groups), p)
