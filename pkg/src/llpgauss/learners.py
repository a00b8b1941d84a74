"""The learning algorithms: mean-based, spectral, general (with offset),
plus the random-halfspace baseline, offset selection, class-ratio fitting,
and disagreement scoring.

Sign disambiguation and offset selection both score candidates by the
fraction of sample bags whose positive count they fail to reproduce; ties
are broken deterministically (+r over -r, smaller offset first).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .numkit import RngStream, angle_min_dist, inv_sqrt_psd, principal_eigenvector
from .oracle import Bag, GaussianSpec, LTF, OracleConfig, sample_bags
from .estimators import mean_covs_estimator, pooled_bag_moments

__all__ = [
    "LearnedHypothesis",
    "bag_err_sample",
    "spectral_direction",
    "learn_mean_based",
    "learn_spectral_homogeneous",
    "select_offset",
    "learn_general",
    "random_ltf_baseline",
    "class_ratio_fit",
    "instance_disagreement",
    "hypothesis_angle",
]

_CANDIDATE_CHUNK = 512


@dataclass(frozen=True, eq=False)
class LearnedHypothesis:
    ltf: LTF
    meta: dict = field(default_factory=dict)


def _stack(bags: list[Bag]) -> np.ndarray:
    if not bags:
        raise ValueError("empty bag list")
    return np.stack([b.instances for b in bags])


def _positive_counts(x: np.ndarray, ltf: LTF) -> np.ndarray:
    return (x @ ltf.r + ltf.c > 0.0).sum(axis=1)


def bag_err_sample(h: LTF, bags: list[Bag], k: int, q: int) -> float:
    """Fraction of bags whose positive count under h differs from k."""
    x = _stack(bags)
    if x.shape[1] != q:
        raise ValueError(f"bags have size {x.shape[1]}, expected q={q}")
    return float(np.mean(_positive_counts(x, h) != k))


def _bag_err_own_counts(h: LTF, bags: list[Bag]) -> float:
    """Like bag_err_sample but scored against each bag's own label count."""
    x = _stack(bags)
    counts = np.array([b.label_count for b in bags])
    return float(np.mean(_positive_counts(x, h) != counts))


def _nominal_count(cfg: OracleConfig):
    """Per-bag target count used for scoring; None for mixed oracles, which
    are scored against each bag's own realized count."""
    return cfg.k if cfg.kind in ("exact", "noisy") else None


def _score(h: LTF, bags: list[Bag], k: int | None, q: int) -> float:
    if k is None:
        return _bag_err_own_counts(h, bags)
    return bag_err_sample(h, bags, k, q)


def spectral_direction(sigma_b: np.ndarray, sigma_d: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Unit direction maximizing the pair-to-bag variance ratio.

    Computed as B^{-1/2} v with v the principal eigenvector of
    B^{-1/2} D B^{-1/2}; raises NotPositiveDefiniteError when the bag
    covariance estimate is not invertible.
    """
    w = inv_sqrt_psd(sigma_b, tol)
    v = principal_eigenvector(w @ sigma_d @ w)
    r = w @ v
    return r / np.linalg.norm(r)


def _estimate_moments(cfg: OracleConfig, m: int, rng: RngStream, moments: str):
    """Moment source for the learners.

    "pooled" (default) uses every instance and within-bag pair of one m-bag
    batch; "single" is the one-instance/one-pair two-batch scheme.  Both
    estimate the same population matrices; pooled needs far fewer bags for
    the spectral step's eigengap.
    """
    if moments == "pooled":
        return pooled_bag_moments(cfg, m, rng)
    if moments == "single":
        return mean_covs_estimator(cfg, m, rng)
    raise ValueError(f"unknown moments source {moments!r}")


def learn_mean_based(
    cfg: OracleConfig, m: int, rng: RngStream, moments: str = "pooled"
) -> LearnedHypothesis:
    """Homogeneous direction from the bag mean; standard-Gaussian regime.

    The bag mean points along the target direction with signed magnitude
    (2k/q - 1) sqrt(2/pi), so the estimate is the normalized empirical mean,
    negated when k < q/2.  Balanced bags carry no mean signal.
    """
    if m < 1:
        raise ValueError("need m >= 1")
    if cfg.kind == "mixed" or cfg.k is None or 2 * cfg.k == cfg.q:
        raise ValueError("balanced bags unsupported by mean-based learner")
    if moments == "single" and m == 1:
        bag = sample_bags(cfg, 1, rng)[0]
        mu = bag.instances[int(rng.gen.integers(0, cfg.q))]
    else:
        mu = _estimate_moments(cfg, m, rng, moments).mu_b
    norm = float(np.linalg.norm(mu))
    if norm < 1e-12:
        raise ValueError("degenerate mean")
    sign = 1.0 if 2 * cfg.k > cfg.q else -1.0
    r = sign * np.asarray(mu) / norm
    return LearnedHypothesis(
        LTF(r, 0.0), meta={"algorithm": "mean", "m": m, "mean_norm": norm}
    )


def learn_spectral_homogeneous(
    cfg: OracleConfig, m: int, s: int, rng: RngStream, moments: str = "pooled"
) -> LearnedHypothesis:
    """Spectral direction estimate with sign disambiguation on fresh bags.

    For balanced bags the sign is unidentifiable; +r is returned and the
    ambiguity recorded so callers can score both h and its complement.
    """
    est = _estimate_moments(cfg, m, rng, moments)
    r = spectral_direction(est.sigma_b, est.sigma_d)
    k = _nominal_count(cfg)
    balanced = k is not None and 2 * k == cfg.q
    meta = {"algorithm": "spectral", "m": m, "s": 0, "ambiguous": balanced}
    if balanced:
        return LearnedHypothesis(LTF(r, 0.0), meta=meta)
    if s < 1:
        raise ValueError("need s >= 1 disambiguation bags when k != q/2")
    bags = sample_bags(cfg, s, rng)
    err_pos = _score(LTF(r, 0.0), bags, k, cfg.q)
    err_neg = _score(LTF(-r, 0.0), bags, k, cfg.q)
    if err_neg < err_pos:
        r = -r
    meta.update(s=s, candidate_errs=(err_pos, err_neg), bag_err=min(err_pos, err_neg))
    return LearnedHypothesis(LTF(r, 0.0), meta=meta)


def _offset_candidates(proj_desc: np.ndarray, ks: np.ndarray) -> np.ndarray:
    """Candidate offsets from per-bag projection order statistics.

    A bag with target count k is satisfied by offset c exactly when the
    threshold -c falls in [v_{k+1}, v_k) of its descending projections.  The
    midpoint of that window satisfies the generating bag; the left endpoint
    v_{k+1} is included too because the best real-valued offset can always be
    slid to some bag's window endpoint, which keeps the achieved satisfied
    count within one of the optimum.  Window edges beyond the extremes use
    surrogates one unit out.
    """
    n, q = proj_desc.shape
    rows = np.arange(n)
    hi = proj_desc[:, 0] + 1.0
    lo = proj_desc[:, q - 1] - 1.0
    upper = np.where(ks == 0, hi, proj_desc[rows, np.maximum(ks - 1, 0)])
    lower = np.where(ks == q, lo, proj_desc[rows, np.minimum(ks, q - 1)])
    mids = -0.5 * (upper + lower)
    ends = -lower
    return np.unique(np.concatenate([mids, ends]))


def _satisfied_by_candidates(proj: np.ndarray, cands: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Satisfied-bag count per candidate offset, chunked to bound memory."""
    out = np.empty(cands.size, dtype=np.int64)
    for lo in range(0, cands.size, _CANDIDATE_CHUNK):
        chunk = cands[lo : lo + _CANDIDATE_CHUNK]
        # pos(p + c) = 1 iff p > -c; comparing avoids materializing p + c.
        counts = (proj[None, :, :] > -chunk[:, None, None]).sum(axis=2)
        out[lo : lo + chunk.size] = (counts == target[None, :]).sum(axis=1)
    return out


def _select_offset_proj(proj_desc: np.ndarray, counts) -> tuple[float, float]:
    n, q = proj_desc.shape
    ks = np.full(n, counts) if np.ndim(counts) == 0 else np.asarray(counts)
    cands = _offset_candidates(proj_desc, ks)
    sat = _satisfied_by_candidates(proj_desc, cands, ks)
    best = int(np.argmax(sat))  # first max -> smallest candidate offset
    return float(cands[best]), float(1.0 - sat[best] / n)


def select_offset(bags: list[Bag], r: np.ndarray, k: int, q: int) -> tuple[float, float]:
    """Pick the offset along r whose halfspace satisfies the most bags.

    Returns (c_hat, achieved_err).  The satisfied-bag count of c_hat is
    guaranteed to be within one of the best achievable over all real offsets;
    ties resolve to the smallest candidate value.
    """
    if not 1 <= k <= q:
        raise ValueError("k must lie in {1..q}")
    x = _stack(bags)
    if x.shape[1] != q:
        raise ValueError(f"bags have size {x.shape[1]}, expected q={q}")
    proj = np.sort(x @ np.asarray(r, dtype=float), axis=1)[:, ::-1]
    return _select_offset_proj(proj, k)


def learn_general(
    cfg: OracleConfig, m: int, s: int, rng: RngStream, moments: str = "pooled"
) -> LearnedHypothesis:
    """Spectral direction plus selected offset; handles non-centered Gaussians.

    For unbalanced bags both signed directions get their own offset and the
    lower sample bag error wins (ties prefer +r).  Balanced bags fit an
    offset for +r only; the complement ambiguity is recorded.
    """
    if m < 2 or s < 1:
        raise ValueError("need m >= 2 and s >= 1")
    est = _estimate_moments(cfg, m, rng, moments)
    r = spectral_direction(est.sigma_b, est.sigma_d)
    k = _nominal_count(cfg)
    balanced = k is not None and 2 * k == cfg.q
    bags = sample_bags(cfg, s, rng)
    x = _stack(bags)
    counts = k if k is not None else np.array([b.label_count for b in bags])
    proj = x @ r
    meta = {"algorithm": "general", "m": m, "s": s, "ambiguous": balanced}
    if balanced:
        c_hat, err = _select_offset_proj(np.sort(proj, axis=1)[:, ::-1], counts)
        meta.update(bag_err=err)
        return LearnedHypothesis(LTF(r, c_hat), meta=meta)
    c_pos, err_pos = _select_offset_proj(np.sort(proj, axis=1)[:, ::-1], counts)
    c_neg, err_neg = _select_offset_proj(np.sort(-proj, axis=1)[:, ::-1], counts)
    meta.update(candidate_errs=(err_pos, err_neg))
    if err_neg < err_pos:
        meta.update(bag_err=err_neg)
        return LearnedHypothesis(LTF(-r, c_neg), meta=meta)
    meta.update(bag_err=err_pos)
    return LearnedHypothesis(LTF(r, c_pos), meta=meta)


def random_ltf_baseline(
    bags: list[Bag],
    trials: int,
    k: int,
    q: int,
    rng: RngStream,
    with_offset: bool = False,
) -> LearnedHypothesis:
    """Best of `trials` random halfspaces by bag satisfaction (ties: first)."""
    if trials < 1:
        raise ValueError("need trials >= 1")
    x = _stack(bags)
    d = x.shape[2]
    dirs = rng.gen.standard_normal((trials, d))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    offs = rng.gen.standard_normal(trials) if with_offset else np.zeros(trials)
    best_idx, best_sat = 0, -1
    for t in range(trials):
        sat = int(((x @ dirs[t] + offs[t] > 0.0).sum(axis=1) == k).sum())
        if sat > best_sat:
            best_idx, best_sat = t, sat
    err = 1.0 - best_sat / len(bags)
    return LearnedHypothesis(
        LTF(dirs[best_idx], float(offs[best_idx])),
        meta={"algorithm": "random", "trials": trials, "bag_err": err},
    )


def class_ratio_fit(bag: Bag, r: np.ndarray, target_count: int) -> LTF:
    """Halfspace along r labeling exactly target_count of this bag positive.

    Thresholds at the midpoint between the target_count-th and next largest
    projections; the ends use surrogates one unit beyond the extremes.
    """
    q = bag.size
    if not 0 <= target_count <= q:
        raise ValueError("target_count must lie in {0..q}")
    proj = np.sort(np.asarray(bag.instances @ np.asarray(r, dtype=float)))[::-1]
    upper = proj[0] + 1.0 if target_count == 0 else proj[target_count - 1]
    lower = proj[-1] - 1.0 if target_count == q else proj[target_count]
    if upper == lower:
        raise ValueError("non-generic projections")
    return LTF(np.asarray(r, dtype=float), -0.5 * (upper + lower))


def instance_disagreement(
    h: LTF,
    g: LTF,
    dist: GaussianSpec,
    mode: str = "exact_homogeneous",
    n: int = 100_000,
    rng: RngStream | None = None,
) -> float:
    """Probability that h and g label a fresh instance differently.

    exact_homogeneous: both halfspaces must pass through the Gaussian mean
    (c + r.mu = 0); the disagreement is then the whitened angle over pi.
    monte_carlo: empirical fraction over n fresh draws.
    """
    if mode == "exact_homogeneous":
        for ltf in (h, g):
            if abs(ltf.c + float(ltf.r @ dist.mu)) > 1e-9:
                raise ValueError("exact mode needs effectively homogeneous halfspaces")
        u = dist.gamma @ h.r
        v = dist.gamma @ g.r
        cos = float(u @ v / (np.linalg.norm(u) * np.linalg.norm(v)))
        return math.acos(min(1.0, max(-1.0, cos))) / math.pi
    if mode == "monte_carlo":
        if rng is None:
            raise ValueError("monte_carlo mode needs an RngStream")
        x = dist.sample(n, rng)
        return float(np.mean(h.predict(x) != g.predict(x)))
    raise ValueError(f"unknown mode {mode!r}")


def hypothesis_angle(h: LearnedHypothesis, r_star: np.ndarray) -> float:
    """Sign-blind distance between the learned direction and a reference."""
    return angle_min_dist(h.ltf.r, r_star)
