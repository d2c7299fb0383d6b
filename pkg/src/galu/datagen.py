"""Seeded synthetic data: gaussian and sphere samples, margin-filtered linear
data, parity, and the clustered piecewise-linear model.

Every generator is a pure function of its arguments, seed included.
"""
import math
from dataclasses import dataclass

import numpy as np

from ._rng import make_rng
from .errors import PreconditionError
from .model import LabeledSet


def gen_gaussian(m, d, seed):
    """Rows iid N(0, I_d), labels iid N(0, 1)."""
    rng = make_rng(seed)
    xs = rng.standard_normal((m, d))
    ys = rng.standard_normal(m)
    return LabeledSet(xs, ys)


def gen_sphere(m, d, seed):
    """Rows uniform on the unit sphere (normalized gaussians), labels iid N(0, 1)."""
    rng = make_rng(seed)
    xs = rng.standard_normal((m, d))
    xs /= np.linalg.norm(xs, axis=1, keepdims=True)
    ys = rng.standard_normal(m)
    return LabeledSet(xs, ys, unit_norm=True)


def gen_linear_margin(m, d, margin, seed, cosine=False, min_acceptance=1e-4, return_separator=False):
    """Gaussian points labelled by a random unit separator, keeping only ``|<w, x>| >= margin``.

    With ``cosine=True`` the threshold applies to ``<w, x> / ||x||`` instead.
    Labels are ``sign(<w, x>)`` in ``{-1, +1}``.
    """
    if margin < 0:
        raise ValueError("margin must be non-negative")
    rng = make_rng(seed)
    w = rng.standard_normal(d)
    w /= np.linalg.norm(w)
    kept = []
    n_kept = n_drawn = 0
    while n_kept < m:
        batch = max(2 * (m - n_kept), 1024)
        xs = rng.standard_normal((batch, d))
        score = xs @ w
        if cosine:
            score = score / np.linalg.norm(xs, axis=1)
        ok = np.abs(score) >= margin
        kept.append(xs[ok])
        n_kept += int(ok.sum())
        n_drawn += batch
        if n_drawn >= 1_000_000 and n_kept / n_drawn < min_acceptance:
            raise PreconditionError(
                f"acceptance rate {n_kept / n_drawn:.2e} below {min_acceptance:.0e}; margin too large"
            )
    xs = np.concatenate(kept)[:m]
    ys = np.where(xs @ w >= 0, 1.0, -1.0)
    data = LabeledSet(xs, ys)
    return (data, w) if return_separator else data


def gen_parity(m, d, seed):
    """Uniform ``{-1, +1}^d`` points labelled by the product of their coordinates."""
    rng = make_rng(seed)
    xs = rng.choice(np.array([-1.0, 1.0]), size=(m, d))
    return LabeledSet(xs, np.prod(xs, axis=1))


@dataclass(frozen=True, eq=False)
class ClusterModel:
    """``n`` unit centers, per-cluster linear label maps, cap radius and mixing weights."""

    centers: np.ndarray
    directions: np.ndarray
    radius: float
    mixing: np.ndarray

    def __post_init__(self):
        centers = np.asarray(self.centers, dtype=np.float64)
        directions = np.asarray(self.directions, dtype=np.float64)
        mixing = np.asarray(self.mixing, dtype=np.float64)
        n, _ = centers.shape
        if directions.shape != centers.shape:
            raise ValueError("directions must have the same shape as centers")
        if np.max(np.abs(np.linalg.norm(centers, axis=1) - 1.0)) > 1e-9:
            raise ValueError("cluster centers must be unit vectors")
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        if mixing.shape != (n,) or np.any(mixing < 0) or abs(mixing.sum() - 1.0) > 1e-12:
            raise ValueError("mixing must be a probability vector of length n")
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "directions", directions)
        object.__setattr__(self, "mixing", mixing)

    @property
    def n(self):
        return self.centers.shape[0]

    @property
    def d(self):
        return self.centers.shape[1]


def cluster_radius(n, d, k, delta):
    """``r = delta / (n k sqrt(d))``."""
    return delta / (n * k * math.sqrt(d))


def cluster_width(n, mu, delta):
    """Smallest ``k >= (8 n / mu) log(n / delta)``."""
    return max(1, math.ceil(8.0 * n / mu * math.log(n / delta)))


def cluster_dimension(n, delta):
    """Smallest ``d >= (n^2 / 2) log(2 n^2 / delta)``."""
    return math.ceil(n * n / 2.0 * math.log(2.0 * n * n / delta))


def make_cluster_model(n, d, seed, delta, k, mixing=None):
    """Random-sign centers ``{+-1/sqrt(d)}^d``, gaussian label directions, radius ``delta / (n k sqrt(d))``."""
    rng = make_rng(seed)
    centers = rng.choice(np.array([-1.0, 1.0]), size=(n, d)) / math.sqrt(d)
    directions = rng.standard_normal((n, d))
    mixing = np.full(n, 1.0 / n) if mixing is None else mixing
    return ClusterModel(centers, directions, cluster_radius(n, d, k, delta), mixing)


def cap_sample(center, radius, rng, size):
    """Points ``normalize(v + r' t)`` with ``t`` uniform on the sphere and ``r'`` uniform in ``[0, 0.99 r]``.

    A sample sits at chord distance at most ``sqrt(2 - 2 sqrt(1 - r'^2))``
    from ``v``.  That is below ``r`` whenever ``r <= 0.28``, which covers the
    tiny radii used by the clustered model.
    """
    d = center.shape[0]
    t = rng.standard_normal((size, d))
    t /= np.linalg.norm(t, axis=1, keepdims=True)
    r = rng.uniform(0.0, 0.99 * radius, size)
    x = center + r[:, None] * t
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def gen_clustered(model: ClusterModel, m, seed):
    """Sample ``m`` labelled points; returns ``(LabeledSet, cluster_assignments)``.

    Each point picks ``q ~ mixing``, lands in the spherical cap of chord radius
    ``r`` around ``v_q``, and gets label ``x . l_q``.
    """
    if model.radius >= 2.0:
        raise PreconditionError("cluster radius must be below 2 (the cap would cover the sphere)")
    rng = make_rng(seed)
    q = rng.choice(model.n, size=m, p=model.mixing)
    xs = np.empty((m, model.d))
    for c in range(model.n):
        idx = np.flatnonzero(q == c)
        if idx.size:
            xs[idx] = cap_sample(model.centers[c], model.radius, rng, idx.size)
    ys = np.einsum("ij,ij->i", xs, model.directions[q])
    return LabeledSet(xs, ys, unit_norm=True), q


def cluster_mu(centers):
    """``lambda_min`` of ``H[i, j] = 1/2 - arccos(v_i . v_j) / (2 pi)`` over unit centers."""
    centers = np.asarray(centers, dtype=np.float64)
    if np.max(np.abs(np.linalg.norm(centers, axis=1) - 1.0)) > 1e-9:
        raise ValueError("centers must be unit vectors")
    cos = np.clip(centers @ centers.T, -1.0, 1.0)
    np.fill_diagonal(cos, 1.0)
    H = 0.5 - np.arccos(cos) / (2.0 * np.pi)
    return float(np.linalg.eigvalsh(0.5 * (H + H.T))[0])
