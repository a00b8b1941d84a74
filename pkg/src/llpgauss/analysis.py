"""Closed-form coefficients and inequalities behind the spectral method.

The pair-to-bag variance ratio along a direction r depends only on the
alignment gamma(r) between r and the target in the Sigma inner product:

    ratio(r) = 2 + gamma(r)^2 kappa2 / (1 - gamma(r)^2 kappa1)

with kappa1, kappa2 scalar functions of (q, k) and, for non-centered
targets, of the standardized offset ell.  This module exposes those
coefficients, the ratio identities, sample-size trend expressions, the
two-binomial collision bound, and the normalized-transform stability check
used by the property suites.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .numkit import gaussian_cdf, gaussian_pdf

__all__ = [
    "KappaSet",
    "eta",
    "kappas",
    "gamma_of",
    "rho",
    "rho_closed",
    "sample_complexity",
    "prob_equal_binomials",
    "angle_bound_check",
]

_TWO_OVER_PI = 2.0 / math.pi


@dataclass(frozen=True)
class KappaSet:
    """Scalar coefficients controlling the spectral gap of the variance ratio."""

    kappa1: float
    kappa2: float
    kappa3: float
    theta: float
    variant: str


def eta(q: int, k: int) -> float:
    """Signed magnitude (2k/q - 1) sqrt(2/pi) of the standardized bag mean."""
    if not 1 <= k <= q - 1:
        raise ValueError("need 1 <= k <= q-1")
    return (2.0 * k / q - 1.0) * math.sqrt(_TWO_OVER_PI)


def _theta_from(kappa1: float, kappa2: float, lam_ratio: float) -> float:
    return (
        2.0
        * lam_ratio
        * (
            1.0 / (2.0 - max(0.0, 2.0 * kappa1 - kappa2))
            + 1.0 / (1.0 - max(0.0, kappa1))
        )
    )


def _kappa12_offset(q: int, k: int, ell: float) -> tuple[float, float]:
    w = k / q
    phi = gaussian_pdf(ell)
    cdf = gaussian_cdf(ell)
    denom = cdf * (1.0 - cdf)
    b = (w - (1.0 - cdf)) / denom
    kappa1 = (phi * b) ** 2 - ell * phi * b
    kappa2 = (2.0 / (q - 1)) * w * (1.0 - w) * (phi / denom) ** 2
    return kappa1, kappa2


def kappas(
    q: int,
    k: int | None = None,
    *,
    ell: float | None = None,
    p=None,
    lam_ratio: float = 1.0,
) -> KappaSet:
    """Spectral-gap coefficients for a bag distribution.

    Homogeneous (k given, ell/p omitted):
        kappa1 = (2k/q - 1)^2 (2/pi),
        kappa2 = (k/q)(1 - k/q) 16 / (pi (q-1)),
        kappa3 = kappa2 / (1 - kappa1).
    Offset (ell given): the truncated-normal generalizations of the same
        quantities, which reduce to the homogeneous ones at ell = 0
        (kappa3 picks up an extra 1/(1 - max(0, kappa1)) factor).
    Mixture (p given): p_k^2-weighted averages of the per-count homogeneous
        coefficients, normalized by sum(p_k^2).

    theta scales the ratio's estimation sensitivity and needs the covariance
    eigenvalue ratio lam_ratio = lam_max / lam_min.
    """
    if lam_ratio < 1.0:
        raise ValueError("lam_ratio must be >= 1")
    if p is not None:
        p = np.asarray(p, dtype=float)
        if p.ndim != 1 or (p < 0).any() or abs(p.sum() - 1.0) > 1e-9:
            raise ValueError("p must be a probability vector")
        qq = p.size - 1
        ks = np.arange(qq + 1)
        kap1 = (2.0 * ks / qq - 1.0) ** 2 * _TWO_OVER_PI
        kap2 = (ks / qq) * (1.0 - ks / qq) * 16.0 / (math.pi * (qq - 1))
        w2 = p * p
        total = float(w2.sum())
        kappa1 = float((w2 * kap1).sum()) / total
        kappa2 = float((w2 * kap2).sum()) / total
        kappa3 = kappa2 / (1.0 - kappa1)
        return KappaSet(kappa1, kappa2, kappa3, _theta_from(kappa1, kappa2, lam_ratio), "mixture")
    if k is None or not 1 <= k <= q - 1:
        raise ValueError("need 1 <= k <= q-1")
    if ell is None:
        kappa1 = (2.0 * k / q - 1.0) ** 2 * _TWO_OVER_PI
        kappa2 = (k / q) * (1.0 - k / q) * 16.0 / (math.pi * (q - 1))
        kappa3 = kappa2 / (1.0 - kappa1)
        return KappaSet(kappa1, kappa2, kappa3, _theta_from(kappa1, kappa2, lam_ratio), "homogeneous")
    kappa1, kappa2 = _kappa12_offset(q, k, ell)
    kappa3 = kappa2 / ((1.0 - kappa1) * (1.0 - max(0.0, kappa1)))
    return KappaSet(kappa1, kappa2, kappa3, _theta_from(kappa1, kappa2, lam_ratio), f"offset({ell})")


def gamma_of(r: np.ndarray, r_star: np.ndarray, sigma: np.ndarray) -> float:
    """Alignment of r with r_star in the sigma inner product, in [-1, 1]."""
    r = np.asarray(r, dtype=float)
    r_star = np.asarray(r_star, dtype=float)
    num = float(r @ sigma @ r_star)
    den = math.sqrt(float(r @ sigma @ r)) * math.sqrt(float(r_star @ sigma @ r_star))
    if den == 0.0:
        raise ValueError("zero vector")
    return num / den


def rho(r: np.ndarray, sigma_b: np.ndarray, sigma_d: np.ndarray) -> float:
    """Quadratic-form ratio (r.sigma_d.r) / (r.sigma_b.r)."""
    r = np.asarray(r, dtype=float)
    den = float(r @ sigma_b @ r)
    if den == 0.0:
        raise ValueError("zero vector")
    return float(r @ sigma_d @ r) / den


def rho_closed(gamma: float, kset: KappaSet) -> float:
    """Closed form 2 + gamma^2 kappa2 / (1 - gamma^2 kappa1)."""
    g2 = gamma * gamma
    return 2.0 + g2 * kset.kappa2 / (1.0 - g2 * kset.kappa1)


def sample_complexity(
    theorem: str,
    d: int,
    eps: float,
    delta: float,
    q: int,
    k: int,
    lam_ratio: float = 1.0,
    ell: float | None = None,
    mu_norm: float | None = None,
) -> float:
    """Bag-count trend expressions with all constants set to 1.

    These are asymptotic shapes for ratio/trend comparisons only, never
    absolute thresholds.  main1 is the mean-based regime, main2 the centered
    spectral regime, main3 the general regime.  For main3 the eigenvalue
    floor is normalized to 1 (so sqrt(lam_max) = sqrt(lam_ratio)) and the
    offset factor uses max(1, ell^2), keeping the expression positive at
    ell = 0.
    """
    if min(d, q, k) <= 0 or eps <= 0 or not 0 < delta < 1 or lam_ratio < 1:
        raise ValueError("parameters out of range")
    log_term = math.log(d / delta)
    if theorem == "main1":
        return (d / eps**2) * log_term
    if theorem == "main2":
        return (d / eps**4) * log_term * lam_ratio**6 * q**8
    if theorem == "main3":
        ell = 0.0 if ell is None else ell
        mu_norm = 0.0 if mu_norm is None else mu_norm
        cdf = gaussian_cdf(ell)
        off = max(1.0, ell * ell) / (cdf * (1.0 - cdf)) ** 2
        stretch = (math.sqrt(lam_ratio) + mu_norm) ** 4
        return (d / eps**4) * off * log_term * lam_ratio**4 * stretch * q**8
    raise ValueError(f"unknown theorem {theorem!r}")


def _log_binom_pmf(n: int, p: float, r: np.ndarray) -> np.ndarray:
    """log C(n,r) + r log p + (n-r) log(1-p), with 0^0 = 1 conventions."""
    r = np.asarray(r)
    out = np.full(r.shape, -np.inf)
    valid = (r >= 0) & (r <= n)
    rv = r[valid].astype(float)
    log_comb = (
        math.lgamma(n + 1)
        - np.array([math.lgamma(v + 1) + math.lgamma(n - v + 1) for v in rv])
    )
    with np.errstate(divide="ignore", invalid="ignore"):
        term_p = np.where(rv == 0, 0.0, rv * (math.log(p) if p > 0 else -np.inf))
        term_q = np.where(rv == n, 0.0, (n - rv) * (math.log1p(-p) if p < 1 else -np.inf))
    out[valid] = log_comb + term_p + term_q
    return out


def prob_equal_binomials(u: int, p1: float, v: int, p2: float) -> float:
    """Exact Pr[X1 = X2] for independent X1 ~ Bin(u, p1), X2 ~ Bin(v, p2).

    Direct summation of the pmf product; pmfs are formed in log space so
    large counts cannot overflow.
    """
    if u < 1 or v < 1:
        raise ValueError("u, v must be >= 1")
    for p in (p1, p2):
        if not 0.0 <= p <= 1.0:
            raise ValueError("probabilities must lie in [0, 1]")
    r = np.arange(0, min(u, v) + 1)
    log_a = _log_binom_pmf(u, p1, r)
    log_b = _log_binom_pmf(v, p2, r)
    return float(np.exp(log_a + log_b).sum())


def angle_bound_check(
    a: np.ndarray,
    b: np.ndarray,
    r1: np.ndarray,
    r2: np.ndarray,
    eps1: float,
    eps2: float,
) -> bool:
    """Stability of normalized PD transforms.

    Given ||a - b|| <= eps1 ||a|| and ||r1 - r2|| <= eps2 with
    cond(a) (eps1 + eps2) <= 1/2, checks that the normalized images
    a r1 / ||a r1|| and b r2 / ||b r2|| differ by at most
    4 cond(a) (eps1 + eps2).
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    r1 = np.asarray(r1, dtype=float)
    r2 = np.asarray(r2, dtype=float)
    eig_a = np.linalg.eigvalsh(a)
    cond = float(eig_a[-1] / eig_a[0])
    if eig_a[0] <= 0:
        raise ValueError("a must be positive definite")
    if np.linalg.norm(a - b, 2) > eps1 * eig_a[-1] * (1 + 1e-12):
        raise ValueError("||a - b|| exceeds eps1 ||a||")
    if np.linalg.norm(r1 - r2) > eps2 * (1 + 1e-12):
        raise ValueError("||r1 - r2|| exceeds eps2")
    if cond * (eps1 + eps2) > 0.5:
        raise ValueError("cond(a) (eps1 + eps2) must be <= 1/2")
    u = a @ r1
    w = b @ r2
    lhs = float(np.linalg.norm(u / np.linalg.norm(u) - w / np.linalg.norm(w)))
    return lhs <= 4.0 * cond * (eps1 + eps2) + 1e-12
