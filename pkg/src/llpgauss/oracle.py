"""Targets, Gaussian instance distributions, and the bag oracles.

A target is a halfspace ``pos(r.x + c)`` with ``pos(t) = 1 iff t > 0``.  The
oracle draws bags of ``q`` feature vectors from a Gaussian, conditioned so
that exactly ``k`` of them are labeled positive (exact oracle), or with
per-instance label flips (noisy oracle), or with a random per-bag positive
count (mixed oracle).

Sampling works in a standardized coordinate system: whiten the Gaussian and
rotate the whitened normal direction onto the first axis.  There the target
reads ``label = 1 iff z_1 > ell`` for a scalar ``ell``, so class-conditional
sampling is a one-sided truncated normal in coordinate 1 and standard normal
elsewhere.  The rotation is a Householder reflection, rebuilt
deterministically from the target/distribution pair and cached on the config.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .numkit import (
    NotPositiveDefiniteError,
    RngStream,
    sample_trunc_normal,
    sym_eig,
)

__all__ = [
    "LTF",
    "GaussianSpec",
    "Bag",
    "OracleConfig",
    "exact_oracle",
    "noisy_oracle",
    "mixed_oracle",
    "normalize_ltf",
    "householder_to_e1",
    "sample_conditional",
    "sample_bag",
    "sample_bags",
    "bag_label_proportion_check",
    "random_unit_vector",
    "random_pd_covariance",
    "random_gaussian_spec",
    "save_bags",
    "load_bags",
]


@dataclass(frozen=True, eq=False)
class LTF:
    """Halfspace pos(r.x + c); r must be a unit vector."""

    r: np.ndarray
    c: float = 0.0

    def __post_init__(self) -> None:
        r = np.asarray(self.r, dtype=float)
        if r.ndim != 1 or abs(float(np.linalg.norm(r)) - 1.0) > 1e-9:
            raise ValueError("r must be a unit vector")
        r = r.copy()
        r.setflags(write=False)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "c", float(self.c))

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Labels in {0,1}; x may be a single vector or a stack (..., d)."""
        x = np.asarray(x, dtype=float)
        return (x @ self.r + self.c > 0.0).astype(np.int64)

    def complement(self) -> "LTF":
        """pos(-r.x - c); agrees with 1 - predict() except on the boundary."""
        return LTF(-self.r, -self.c)


@dataclass(frozen=True, eq=False)
class GaussianSpec:
    """Gaussian N(mu, sigma) with cached symmetric square root and its inverse."""

    mu: np.ndarray
    sigma: np.ndarray
    pd_tol: float = 1e-10
    gamma: np.ndarray = field(init=False, repr=False)
    inv_gamma: np.ndarray = field(init=False, repr=False)
    eigvals: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        mu = np.asarray(self.mu, dtype=float).copy()
        sigma = np.asarray(self.sigma, dtype=float).copy()
        if mu.ndim != 1 or sigma.shape != (mu.size, mu.size):
            raise ValueError("mu must be a vector and sigma a matching square matrix")
        w, v = sym_eig(sigma)
        if w[0] <= 0.0 or w[-1] <= self.pd_tol * w[0]:
            raise NotPositiveDefiniteError("sigma is not positive definite")
        gamma = (v * np.sqrt(w)) @ v.T
        inv_gamma = (v * (w ** -0.5)) @ v.T
        for arr in (mu, sigma, gamma, inv_gamma, w):
            arr.setflags(write=False)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "gamma", 0.5 * (gamma + gamma.T))
        object.__setattr__(self, "inv_gamma", 0.5 * (inv_gamma + inv_gamma.T))
        object.__setattr__(self, "eigvals", w)

    @property
    def dim(self) -> int:
        return self.mu.size

    @classmethod
    def standard(cls, d: int) -> "GaussianSpec":
        return cls(np.zeros(d), np.eye(d))

    def sample(self, n: int, rng: RngStream) -> np.ndarray:
        """n unconditional draws, shape (n, d)."""
        z = rng.gen.standard_normal((n, self.dim))
        return z @ self.gamma + self.mu


@dataclass(frozen=True, eq=False)
class Bag:
    """q feature vectors plus the count of positive labels among them."""

    instances: np.ndarray
    label_count: int

    def __post_init__(self) -> None:
        x = np.asarray(self.instances, dtype=float)
        if x.ndim != 2:
            raise ValueError("instances must have shape (q, d)")
        x = x.copy()
        x.setflags(write=False)
        object.__setattr__(self, "instances", x)
        object.__setattr__(self, "label_count", int(self.label_count))

    @property
    def size(self) -> int:
        return self.instances.shape[0]


def normalize_ltf(target: LTF, dist: GaussianSpec):
    """Standardize a target against a Gaussian.

    Returns (ell, u_star) with u_star = gamma r / ||gamma r|| and
    ell = -(c + r.mu) / ||gamma r||, so that after whitening and rotating
    u_star onto e1 the label is 1 exactly when the first coordinate
    exceeds ell.  The positive class then has mass 1 - cdf(ell).
    """
    gr = dist.gamma @ target.r
    norm = float(np.linalg.norm(gr))
    u_star = gr / norm
    ell = -(target.c + float(target.r @ dist.mu)) / norm
    return ell, u_star


def householder_to_e1(u: np.ndarray) -> np.ndarray:
    """Orthonormal symmetric U with U u = e1 (and U e1 = u)."""
    u = np.asarray(u, dtype=float)
    d = u.size
    v = u.copy()
    v[0] -= 1.0
    vv = float(v @ v)
    if vv < 1e-24:
        return np.eye(d)
    return np.eye(d) - 2.0 * np.outer(v, v) / vv


@dataclass(frozen=True, eq=False)
class OracleConfig:
    """One bag oracle: kind, bag geometry, target, and instance distribution.

    kind "exact":  1 <= k <= q-1 positives per bag.
    kind "noisy":  exact layout, but each instance's intended label flips
                   independently with probability flip_p before conditional
                   sampling; label_count records the realized positive count.
    kind "mixed":  per-bag positive count drawn from Multinoulli(p) over 0..q.
    """

    kind: str
    q: int
    target: LTF
    dist: GaussianSpec
    k: int | None = None
    flip_p: float = 0.0
    p: np.ndarray | None = None
    ell: float = field(init=False, repr=False)
    u_star: np.ndarray = field(init=False, repr=False)
    transform: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.kind not in ("exact", "noisy", "mixed"):
            raise ValueError(f"unknown oracle kind {self.kind!r}")
        if self.q < 1:
            raise ValueError("q must be positive")
        if self.kind in ("exact", "noisy"):
            if self.k is None or not 1 <= self.k <= self.q - 1:
                raise ValueError("exact/noisy oracles need 1 <= k <= q-1")
        if self.kind == "noisy" and not 0.0 <= self.flip_p <= 1.0:
            raise ValueError("flip_p must lie in [0, 1]")
        if self.kind == "mixed":
            p = np.asarray(self.p, dtype=float)
            if p.shape != (self.q + 1,) or (p < 0).any() or abs(p.sum() - 1.0) > 1e-9:
                raise ValueError("p must be a probability vector over {0..q}")
            p = p.copy()
            p.setflags(write=False)
            object.__setattr__(self, "p", p)
        ell, u_star = normalize_ltf(self.target, self.dist)
        u = householder_to_e1(u_star)
        transform = self.dist.gamma @ u.T
        for arr in (u_star, transform):
            arr.setflags(write=False)
        object.__setattr__(self, "ell", ell)
        object.__setattr__(self, "u_star", u_star)
        object.__setattr__(self, "transform", transform)

    @property
    def dim(self) -> int:
        return self.dist.dim


def exact_oracle(target: LTF, dist: GaussianSpec, q: int, k: int) -> OracleConfig:
    return OracleConfig(kind="exact", q=q, k=k, target=target, dist=dist)


def noisy_oracle(
    target: LTF, dist: GaussianSpec, q: int, k: int, flip_p: float
) -> OracleConfig:
    return OracleConfig(kind="noisy", q=q, k=k, flip_p=flip_p, target=target, dist=dist)


def mixed_oracle(target: LTF, dist: GaussianSpec, q: int, p) -> OracleConfig:
    return OracleConfig(kind="mixed", q=q, p=np.asarray(p, dtype=float), target=target, dist=dist)


def _conditional_z(labels: np.ndarray, ell: float, rng: RngStream) -> np.ndarray:
    """Coordinate-1 draws for a 0/1 label array: above ell for 1, below for 0."""
    out = np.empty(labels.shape, dtype=float)
    pos = labels.astype(bool)
    n_pos = int(pos.sum())
    n_neg = labels.size - n_pos
    if n_pos:
        out[pos] = sample_trunc_normal(rng, ell, "above", size=n_pos)
    if n_neg:
        out[~pos] = sample_trunc_normal(rng, ell, "below", size=n_neg)
    return out


def _transform_z(cfg: OracleConfig, z: np.ndarray) -> np.ndarray:
    flat = z.reshape(-1, cfg.dim)
    x = flat @ cfg.transform.T + cfg.dist.mu
    return x.reshape(z.shape)


def _draw_conditioned(cfg: OracleConfig, labels: np.ndarray, rng: RngStream) -> np.ndarray:
    """Instances for a (n, q) 0/1 label layout; every output satisfies its label."""
    n, q = labels.shape
    z = np.empty((n, q, cfg.dim), dtype=float)
    z[:, :, 0] = _conditional_z(labels, cfg.ell, rng)
    if cfg.dim > 1:
        z[:, :, 1:] = rng.gen.standard_normal((n, q, cfg.dim - 1))
    x = _transform_z(cfg, z)
    # Guard the (measure-zero) case where transform roundoff flips a label.
    got = cfg.target.predict(x.reshape(-1, cfg.dim)).reshape(n, q)
    bad = got != labels
    while bad.any():
        idx = np.argwhere(bad)
        for i, j in idx:
            z1 = sample_trunc_normal(rng, cfg.ell, "above" if labels[i, j] else "below")
            zrest = rng.gen.standard_normal(cfg.dim - 1) if cfg.dim > 1 else np.empty(0)
            zi = np.concatenate(([z1], zrest))
            x[i, j] = cfg.transform @ zi + cfg.dist.mu
        got = cfg.target.predict(x.reshape(-1, cfg.dim)).reshape(n, q)
        bad = got != labels
    return x


def _sample_bags_arrays(cfg: OracleConfig, n: int, rng: RngStream):
    """n bags as arrays: instances (n, q, d) and label counts (n,).

    Instance order within each bag is uniformly shuffled so that the label
    layout cannot be read off positions.
    """
    q = cfg.q
    kind = cfg.kind
    # Degenerate noisy/mixed oracles reduce to the exact oracle without
    # consuming extra randomness, so fixed seeds replay identical bags.
    if kind == "noisy" and cfg.flip_p == 0.0:
        kind = "exact"
    k0 = None
    if kind == "mixed" and float(cfg.p.max()) == 1.0:
        k0 = int(np.argmax(cfg.p))
        kind = "exact"

    if kind == "exact":
        k = cfg.k if cfg.k is not None else k0
        labels = np.zeros((n, q), dtype=np.int64)
        labels[:, :k] = 1
    elif kind == "noisy":
        labels = np.zeros((n, q), dtype=np.int64)
        labels[:, : cfg.k] = 1
        flips = rng.gen.random((n, q)) < cfg.flip_p
        labels = labels ^ flips.astype(np.int64)
    else:  # mixed
        ks = rng.gen.choice(q + 1, size=n, p=cfg.p)
        labels = (np.arange(q)[None, :] < ks[:, None]).astype(np.int64)

    counts = labels.sum(axis=1)
    x = _draw_conditioned(cfg, labels, rng)
    perm = np.argsort(rng.gen.random((n, q)), axis=1)
    rows = np.arange(n)[:, None]
    return x[rows, perm], counts


def sample_bags(cfg: OracleConfig, n: int, rng: RngStream) -> list[Bag]:
    x, counts = _sample_bags_arrays(cfg, n, rng)
    return [Bag(x[i], int(counts[i])) for i in range(n)]


def sample_bag(cfg: OracleConfig, rng: RngStream) -> Bag:
    return sample_bags(cfg, 1, rng)[0]


def sample_conditional(
    dist: GaussianSpec, target: LTF, label: int, rng: RngStream, size: int | None = None
):
    """Exact draw(s) from the Gaussian conditioned on the target label."""
    if label not in (0, 1):
        raise ValueError("label must be 0 or 1")
    cfg = OracleConfig(kind="exact", q=2, k=1, target=target, dist=dist)
    n = 1 if size is None else size
    labels = np.full((n, 1), label, dtype=np.int64)
    x = _draw_conditioned(cfg, labels, rng)[:, 0, :]
    return x[0] if size is None else x


def bag_label_proportion_check(bag: Bag, target: LTF) -> int:
    """Count of instances in the bag the target labels positive."""
    return int(target.predict(bag.instances).sum())


def random_unit_vector(d: int, rng: RngStream) -> np.ndarray:
    v = rng.gen.standard_normal(d)
    return v / np.linalg.norm(v)


def random_pd_covariance(d: int, rng: RngStream) -> np.ndarray:
    """Random PD covariance Q^T diag(lam) Q, eigenvalues log-uniform in [0.25, 4]."""
    g = rng.gen.standard_normal((d, d))
    q_mat, r_mat = np.linalg.qr(g)
    q_mat = q_mat * np.sign(np.diag(r_mat))
    lam = np.exp(rng.gen.uniform(np.log(0.25), np.log(4.0), d))
    sigma = q_mat.T @ np.diag(lam) @ q_mat
    return 0.5 * (sigma + sigma.T)


def random_gaussian_spec(d: int, rng: RngStream, centered: bool = True) -> GaussianSpec:
    sigma = random_pd_covariance(d, rng)
    mu = np.zeros(d) if centered else rng.gen.standard_normal(d)
    return GaussianSpec(mu, sigma)


# ---------------------------------------------------------------------------
# Dataset persistence: header (d, q, count), then per bag its label count
# followed by the q*d instance scalars row-major.  Binary files are flat
# little-endian float64; CSV carries the same layout in text.
# ---------------------------------------------------------------------------


def _bag_matrix(bags: list[Bag]):
    if not bags:
        raise ValueError("cannot serialize an empty bag list")
    q, d = bags[0].instances.shape
    for b in bags:
        if b.instances.shape != (q, d):
            raise ValueError("all bags must share the same (q, d)")
    return q, d


def save_bags(path, bags: list[Bag], fmt: str = "binary") -> None:
    q, d = _bag_matrix(bags)
    if fmt == "binary":
        rec = np.empty((len(bags), 1 + q * d), dtype="<f8")
        for i, b in enumerate(bags):
            rec[i, 0] = b.label_count
            rec[i, 1:] = b.instances.ravel()
        with open(path, "wb") as fh:
            np.array([d, q, len(bags)], dtype="<f8").tofile(fh)
            rec.tofile(fh)
    elif fmt == "csv":
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([d, q, len(bags)])
            for b in bags:
                writer.writerow([b.label_count] + [repr(float(v)) for v in b.instances.ravel()])
    else:
        raise ValueError(f"unknown format {fmt!r}")


def load_bags(path, fmt: str = "binary") -> list[Bag]:
    if fmt == "binary":
        raw = np.fromfile(path, dtype="<f8")
        d, q, count = (int(v) for v in raw[:3])
        rec = raw[3:].reshape(count, 1 + q * d)
        return [
            Bag(rec[i, 1:].reshape(q, d), int(rec[i, 0])) for i in range(count)
        ]
    if fmt == "csv":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            d, q, count = (int(float(v)) for v in next(reader))
            bags = []
            for row in reader:
                vals = [float(v) for v in row]
                bags.append(Bag(np.array(vals[1:]).reshape(q, d), int(vals[0])))
        if len(bags) != count:
            raise ValueError("bag count does not match header")
        return bags
    raise ValueError(f"unknown format {fmt!r}")
