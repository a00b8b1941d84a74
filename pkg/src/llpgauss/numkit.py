"""Numerical kernel: scalar Gaussian functions, one-sided truncated normals,
dense symmetric eigendecomposition, and deterministic random streams.

Everything here is pure and deterministic.  Matrices are plain numpy arrays;
symmetric inputs are validated rather than wrapped in a dedicated type.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np
from scipy import special

__all__ = [
    "NotSymmetricError",
    "NotPositiveDefiniteError",
    "RngStream",
    "gaussian_pdf",
    "gaussian_cdf",
    "trunc_normal_mean",
    "trunc_normal_second_moment",
    "sample_std_normal",
    "sample_trunc_normal",
    "sym_eig",
    "principal_eigenvector",
    "inv_sqrt_psd",
    "angle_min_dist",
]

_SQRT_2PI = math.sqrt(2.0 * math.pi)
_SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)
_MASK64 = (1 << 64) - 1

# Below this conditional mass the inverse-CDF loses too many bits and the
# tail rejection sampler takes over.
_INV_CDF_MIN_MASS = 1e-6


class NotSymmetricError(ValueError):
    """Matrix is not symmetric within tolerance."""


class NotPositiveDefiniteError(ValueError):
    """Matrix has an eigenvalue at or below the positive-definiteness cutoff."""


def _mix64(*parts) -> int:
    """Collapse integers into one 64-bit value via SHA-256 (stable across platforms)."""
    digest = hashlib.sha256(":".join(str(p) for p in parts).encode("ascii")).digest()
    return int.from_bytes(digest[:8], "big")


@dataclass(eq=False)
class RngStream:
    """Counter-based random stream keyed by (seed, stream id).

    The same (seed, stream) always replays the same sample sequence, on any
    platform (Philox).  A stream is single-consumer: never share one across
    threads; derive independent children with :meth:`child` instead.
    """

    seed: int
    stream: int = 0

    def __post_init__(self) -> None:
        key = np.array([self.seed & _MASK64, self.stream & _MASK64], dtype=np.uint64)
        self._gen = np.random.Generator(np.random.Philox(key=key))

    @property
    def gen(self) -> np.random.Generator:
        return self._gen

    def child(self, index: int) -> "RngStream":
        """Derive an independent child stream; deterministic in (seed, stream, index)."""
        return RngStream(self.seed, _mix64(self.seed, self.stream, index))


def gaussian_pdf(x):
    """Standard normal density (1/sqrt(2*pi)) * exp(-x^2/2)."""
    x = np.asarray(x, dtype=float)
    out = np.exp(-0.5 * x * x) / _SQRT_2PI
    return float(out) if out.ndim == 0 else out


def gaussian_cdf(x):
    """Standard normal CDF, evaluated through the complementary error function."""
    x = np.asarray(x, dtype=float)
    out = 0.5 * special.erfc(-x / math.sqrt(2.0))
    return float(out) if out.ndim == 0 else out


def trunc_normal_mean(ell: float, side: str = "above") -> float:
    """Mean of a standard normal truncated to one side of ``ell``.

    side="above": E[X | X > ell] = pdf(ell) / (1 - cdf(ell)),
    side="below": E[X | X < ell] = -pdf(ell) / cdf(ell).

    Evaluated as sqrt(2/pi)/erfcx(+-ell/sqrt(2)), which stays accurate out to
    |ell| ~ 30 where the naive pdf/cdf quotient would divide underflowed terms.
    """
    if side == "above":
        return _SQRT_2_OVER_PI / float(special.erfcx(ell / math.sqrt(2.0)))
    if side == "below":
        return -_SQRT_2_OVER_PI / float(special.erfcx(-ell / math.sqrt(2.0)))
    raise ValueError(f"side must be 'above' or 'below', got {side!r}")


def trunc_normal_second_moment(ell: float, side: str = "above") -> float:
    """Second moment of the one-sided truncated standard normal.

    Both sides reduce to 1 + ell * trunc_normal_mean(ell, side).
    """
    return 1.0 + ell * trunc_normal_mean(ell, side)


def sample_std_normal(rng: RngStream, size=None):
    """Standard normal draw(s) from the given stream."""
    out = rng.gen.standard_normal(size)
    return float(out) if size is None else out


def _sample_upper_tail(rng: RngStream, ell: float, shape) -> np.ndarray:
    """Exact draws of X ~ N(0,1) conditioned on X > ell."""
    mass = gaussian_cdf(-ell)
    if mass >= _INV_CDF_MIN_MASS:
        # Inverse CDF through the complementary tail: 1 - cdf(x) uniform in
        # (0, mass]; ndtri is well conditioned near 0.
        u = rng.gen.random(shape)
        x = -special.ndtri((1.0 - u) * mass)
    else:
        # Exponential-proposal rejection for the far tail.
        alpha = 0.5 * (ell + math.sqrt(ell * ell + 4.0))
        x = np.empty(shape, dtype=float)
        pending = np.ones(shape, dtype=bool)
        while pending.any():
            n = int(pending.sum())
            z = ell + rng.gen.exponential(1.0 / alpha, n)
            accept = rng.gen.random(n) <= np.exp(-0.5 * (z - alpha) ** 2)
            slots = np.flatnonzero(pending.ravel())[accept]
            x.ravel()[slots] = z[accept]
            pending.ravel()[slots] = False
    return np.maximum(x, np.nextafter(ell, math.inf))


def sample_trunc_normal(rng: RngStream, ell: float, side: str = "above", size=None):
    """Draw from a standard normal truncated strictly above or below ``ell``.

    Uses the inverse CDF while the truncated region keeps mass >= 1e-6 and a
    tail-specific rejection sampler beyond that.  Returned values always lie
    strictly inside the region.
    """
    shape = 1 if size is None else size
    if side == "above":
        x = _sample_upper_tail(rng, ell, shape)
    elif side == "below":
        x = -_sample_upper_tail(rng, -ell, shape)
    else:
        raise ValueError(f"side must be 'above' or 'below', got {side!r}")
    return float(x[0]) if size is None else x


def _check_symmetric(m: np.ndarray, rtol: float = 1e-12) -> np.ndarray:
    a = np.asarray(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise NotSymmetricError(f"expected a square matrix, got shape {a.shape}")
    if not np.isfinite(a).all():
        raise NotSymmetricError("matrix has non-finite entries")
    scale = max(1.0, float(np.abs(a).max()))
    if float(np.abs(a - a.T).max()) > rtol * scale:
        raise NotSymmetricError("matrix is not symmetric within tolerance")
    return a


def sym_eig(m, max_sweeps: int = 60):
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns (eigenvalues descending, eigenvectors as orthonormal columns).
    Each eigenvector is sign-fixed so its largest-magnitude component (first
    such index on ties) is non-negative, making results reproducible
    byte-for-byte.
    """
    a = _check_symmetric(m).copy()
    a = 0.5 * (a + a.T)
    d = a.shape[0]
    v = np.eye(d)
    if d == 1:
        return a.diagonal().copy(), v

    fro = float(np.linalg.norm(a))
    stop = 1e-14 * max(fro, 1.0)
    for _ in range(max_sweeps):
        off = math.sqrt(max(0.0, fro * fro - float(np.sum(a.diagonal() ** 2))))
        if off <= stop:
            break
        for p in range(d - 1):
            for q in range(p + 1, d):
                apq = a[p, q]
                if abs(apq) <= 1e-18 * (abs(a[p, p]) + abs(a[q, q]) + 1e-300):
                    continue
                tau = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, tau) / (abs(tau) + math.sqrt(1.0 + tau * tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                a[p, q] = 0.0
                a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
        fro = float(np.linalg.norm(a))

    w = a.diagonal().copy()
    order = np.argsort(-w, kind="stable")
    w = w[order]
    v = v[:, order]
    lead = np.argmax(np.abs(v), axis=0)
    flip = v[lead, np.arange(d)] < 0.0
    v[:, flip] *= -1.0
    return w, v


def principal_eigenvector(m) -> np.ndarray:
    """Unit eigenvector of the largest eigenvalue, under sym_eig's sign rule."""
    _, v = sym_eig(m)
    return v[:, 0].copy()


def inv_sqrt_psd(m, tol: float = 1e-10) -> np.ndarray:
    """Symmetric inverse square root V diag(w^-1/2) V^T of a PD matrix.

    Any eigenvalue at or below ``tol`` times the largest raises
    NotPositiveDefiniteError.
    """
    w, v = sym_eig(m)
    if w[0] <= 0.0 or w[-1] <= tol * w[0]:
        raise NotPositiveDefiniteError(
            f"not positive definite: eigenvalue range [{w[-1]:.3e}, {w[0]:.3e}]"
        )
    root = (v * (w ** -0.5)) @ v.T
    return 0.5 * (root + root.T)


def angle_min_dist(a, b) -> float:
    """min(||a - b||, ||a + b||) for unit vectors; the sign-blind distance."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    for name, vec in (("a", a), ("b", b)):
        if abs(float(np.linalg.norm(vec)) - 1.0) > 1e-9:
            raise ValueError(f"{name} is not a unit vector")
    return float(min(np.linalg.norm(a - b), np.linalg.norm(a + b)))
