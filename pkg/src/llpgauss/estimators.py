"""Empirical bag statistics and their exact closed-form counterparts.

The estimator follows the two-batch scheme: from m bags take one uniformly
chosen instance each for the mean and bag covariance (biased, divide by m),
then from m fresh bags take one uniformly chosen ordered pair without
replacement each for the pair second-moment matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numkit import RngStream, trunc_normal_mean, trunc_normal_second_moment
from .oracle import GaussianSpec, LTF, OracleConfig, _sample_bags_arrays, normalize_ltf

__all__ = [
    "MomentEstimates",
    "mean_covs_estimator",
    "pooled_bag_moments",
    "closed_form_moments",
    "mixture_closed_form_moments",
]


@dataclass(frozen=True, eq=False)
class MomentEstimates:
    """Estimated bag mean, bag covariance, and pair covariance from m bags each."""

    mu_b: np.ndarray
    sigma_b: np.ndarray
    sigma_d: np.ndarray
    m: int


def mean_covs_estimator(cfg: OracleConfig, m: int, rng: RngStream) -> MomentEstimates:
    """Estimate (mu_b, sigma_b, sigma_d) from 2m fresh bags."""
    if m < 2:
        raise ValueError("need m >= 2 bags")
    q = cfg.q
    rows = np.arange(m)

    x1, _ = _sample_bags_arrays(cfg, m, rng)
    picks = rng.gen.integers(0, q, size=m)
    v = x1[rows, picks]
    mu_b = v.mean(axis=0)
    centered = v - mu_b
    sigma_b = centered.T @ centered / m

    x2, _ = _sample_bags_arrays(cfg, m, rng)
    i = rng.gen.integers(0, q, size=m)
    j = (i + 1 + rng.gen.integers(0, q - 1, size=m)) % q
    z = x2[rows, i] - x2[rows, j]
    sigma_d = z.T @ z / m

    return MomentEstimates(mu_b, 0.5 * (sigma_b + sigma_b.T), 0.5 * (sigma_d + sigma_d.T), m)


def pooled_bag_moments(cfg: OracleConfig, m: int, rng: RngStream) -> MomentEstimates:
    """All-instance, all-pair moment estimates from a single batch of m bags.

    Every instance enters the mean and bag covariance, and every within-bag
    ordered pair enters the pair matrix through the scatter identity
    sum_{i != j} (x_i - x_j)(x_i - x_j)^T = 2 q S_bag.  The population
    targets are identical to mean_covs_estimator's, but with q (resp.
    q(q-1)) times the per-bag data the estimates are accurate enough for the
    spectral step at practical bag counts.
    """
    if m < 1:
        raise ValueError("need m >= 1 bags")
    q = cfg.q
    if q < 2:
        raise ValueError("pairs need bags of size >= 2")
    x, _ = _sample_bags_arrays(cfg, m, rng)
    flat = x.reshape(m * q, -1)
    mu_b = flat.mean(axis=0)
    centered = flat - mu_b
    sigma_b = centered.T @ centered / (m * q)
    within = x - x.mean(axis=1, keepdims=True)
    scatter = np.einsum("bqi,bqj->ij", within, within)
    sigma_d = 2.0 * scatter / ((q - 1) * m)
    return MomentEstimates(mu_b, 0.5 * (sigma_b + sigma_b.T), 0.5 * (sigma_d + sigma_d.T), m)


def _standardized_moments(ell: float, q: int, k: int):
    """Bag mean, bag variance, and pair rank-1 weight along the standardized axis.

    In standardized coordinates the positive class is a truncated normal above
    ell and the negative class below it; orthogonal coordinates are standard
    normal, so the only non-identity structure lies on the first axis.
    """
    w = k / q
    m1 = trunc_normal_mean(ell, "above")
    m0 = trunc_normal_mean(ell, "below")
    s1 = trunc_normal_second_moment(ell, "above")
    s0 = trunc_normal_second_moment(ell, "below")
    mean_b = w * m1 + (1.0 - w) * m0
    var_b = w * s1 + (1.0 - w) * s0 - mean_b * mean_b
    pair_weight = 0.0
    if q > 1:
        pair_weight = (2.0 / (q - 1)) * w * (1.0 - w) * (m1 - m0) ** 2
    return mean_b, var_b, pair_weight


def closed_form_moments(dist: GaussianSpec, target: LTF, q: int, k: int):
    """Exact population (mu_b, sigma_b, sigma_d) for the exact oracle.

    sigma_d satisfies the rank-1 identity
    sigma_d = 2 sigma_b + (2/(q-1)) (k/q)(1-k/q) dd^T with d the difference of
    the class-conditional means.  Accepts k in {0..q}; the oracle itself only
    uses 1..q-1, but the mixture closed form needs the endpoints too.
    """
    if not 0 <= k <= q:
        raise ValueError("k must lie in {0..q}")
    ell, u_star = normalize_ltf(target, dist)
    mean_b, var_b, pair_weight = _standardized_moments(ell, q, k)
    gu = dist.gamma @ u_star
    outer = np.outer(gu, gu)
    mu_b = mean_b * gu + dist.mu
    sigma_b = dist.sigma + (var_b - 1.0) * outer
    sigma_d = 2.0 * sigma_b + pair_weight * outer
    return mu_b, sigma_b, sigma_d


def mixture_closed_form_moments(dist: GaussianSpec, target: LTF, q: int, p):
    """Mixture (sigma_b, sigma_d): per-count closed forms combined with p_k^2 weights."""
    p = np.asarray(p, dtype=float)
    if p.shape != (q + 1,) or (p < 0).any() or abs(p.sum() - 1.0) > 1e-9:
        raise ValueError("p must be a probability vector over {0..q}")
    d = dist.dim
    sigma_b = np.zeros((d, d))
    sigma_d = np.zeros((d, d))
    for k, pk in enumerate(p):
        if pk == 0.0:
            continue
        _, sb, sd = closed_form_moments(dist, target, q, k)
        sigma_b += pk * pk * sb
        sigma_d += pk * pk * sd
    return sigma_b, sigma_d
