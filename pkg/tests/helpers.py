"""Independent oracles shared across the test modules.

These deliberately avoid the package's own closed forms: quadrature for
Gaussian integrals, exhaustive sweeps for threshold selection, and plain
numpy for matrix checks.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate


def pdf(x: float) -> float:
    return math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)


def quad_cdf(x: float) -> float:
    """CDF by quadrature from 0 (avoids relying on erf)."""
    val, _ = integrate.quad(pdf, 0.0, x)
    return 0.5 + val


def quad_trunc_mean(ell: float, side: str) -> float:
    if side == "above":
        num, _ = integrate.quad(lambda t: t * pdf(t), ell, np.inf)
        den, _ = integrate.quad(pdf, ell, np.inf)
    else:
        num, _ = integrate.quad(lambda t: t * pdf(t), -np.inf, ell)
        den, _ = integrate.quad(pdf, -np.inf, ell)
    return num / den


def quad_trunc_second(ell: float, side: str) -> float:
    if side == "above":
        num, _ = integrate.quad(lambda t: t * t * pdf(t), ell, np.inf)
        den, _ = integrate.quad(pdf, ell, np.inf)
    else:
        num, _ = integrate.quad(lambda t: t * t * pdf(t), -np.inf, ell)
        den, _ = integrate.quad(pdf, -np.inf, ell)
    return num / den


def best_threshold_satisfied(proj: np.ndarray, ks) -> int:
    """Exhaustive sweep: max bags satisfiable by any single real threshold.

    A bag with target count k is satisfied by threshold t exactly when
    #(proj > t) == k.  The count function only changes at projection values,
    so sweeping all midpoints of consecutive distinct values, the values
    themselves, and points beyond the extremes is exhaustive.
    """
    proj = np.asarray(proj, dtype=float)
    n, q = proj.shape
    ks = np.full(n, ks) if np.ndim(ks) == 0 else np.asarray(ks)
    vals = np.unique(proj.ravel())
    cands = [vals[0] - 1.0, vals[-1] + 1.0]
    cands.extend(vals.tolist())
    cands.extend((0.5 * (vals[1:] + vals[:-1])).tolist())
    best = 0
    for t in cands:
        sat = int((((proj > t).sum(axis=1)) == ks).sum())
        best = max(best, sat)
    return best


def random_symmetric(d: int, seed: int) -> np.ndarray:
    g = np.random.default_rng(seed).standard_normal((d, d))
    return 0.5 * (g + g.T)


def random_spd(d: int, seed: int, cond: float = 10.0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    lam = np.exp(rng.uniform(0.0, math.log(cond), d))
    m = (q * lam) @ q.T
    return 0.5 * (m + m.T)
