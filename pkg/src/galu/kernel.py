"""The GaLU kernel, its Gram matrix, RKHS norms and the finite-width concentration check.

For gaussian gates ``u ~ N(0, I_d)``,

    kappa(x, y) = E[1[u.x >= 0] 1[u.y >= 0]] <x, y> = (1/2 - theta / (2 pi)) <x, y>,

where ``theta`` is the angle between ``x`` and ``y``.  The kernel only sees
directions through ``theta``, so inputs need not be unit vectors.
"""
import math
from dataclasses import dataclass

import numpy as np

from ._linalg import EIG_RTOL, solve_psd, sym_eigh
from .errors import SingularGramError
from .features import build_feature_matrix, embed_point, gram
from .model import GateBank, LabeledSet


def _angle_factor(cos):
    return 0.5 - np.arccos(np.clip(cos, -1.0, 1.0)) / (2.0 * np.pi)


def kappa(x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("kappa requires finite inputs")
    nx, ny = np.linalg.norm(x), np.linalg.norm(y)
    if nx == 0.0 or ny == 0.0:
        return 0.0
    # the half-angle form keeps full relative accuracy near 0 and pi,
    # where arccos of a rounded cosine does not
    xu, yu = x / nx, y / ny
    theta = 2.0 * math.atan2(float(np.linalg.norm(xu - yu)), float(np.linalg.norm(xu + yu)))
    return (0.5 - theta / (2.0 * np.pi)) * float(x @ y)


def kernel_matrix(xs, ys=None):
    """``K[i, j] = kappa(xs[i], ys[j])`` for all pairs (``ys`` defaults to ``xs``)."""
    xs = np.asarray(xs, dtype=np.float64)
    same = ys is None
    ys = xs if same else np.asarray(ys, dtype=np.float64)
    ip = xs @ ys.T
    nx = np.linalg.norm(xs, axis=1)
    ny = np.linalg.norm(ys, axis=1)
    denom = np.outer(nx, ny)
    cos = np.divide(ip, denom, out=np.zeros_like(ip), where=denom > 0)
    if same:
        np.fill_diagonal(cos, 1.0)
    return _angle_factor(cos) * ip


@dataclass(frozen=True, eq=False)
class KernelGram:
    """``H^inf`` for a sample, with the row norms it was built from."""

    matrix: np.ndarray
    source_norms: np.ndarray

    @property
    def m(self):
        return self.matrix.shape[0]


def gram_infinity(data: LabeledSet):
    """The infinite-width Gram ``H^inf[i, j] = kappa(x_i, x_j)``."""
    K = kernel_matrix(data.xs)
    K = 0.5 * (K + K.T)
    return KernelGram(K, np.linalg.norm(data.xs, axis=1))


def mc_kernel_estimate(x, y, k, seed):
    """One random-features estimate ``<Phi_U(x), Phi_U(y)> / k`` with gaussian gates."""
    gates = GateBank.draw(len(x), k, seed, source="gaussian")
    return float(embed_point(x, gates, normalized=True) @ embed_point(y, gates, normalized=True))


def rkhs_norm_sq(data: LabeledSet):
    """``y^T (H^inf)^{-1} y``, the squared RKHS norm of the kernel interpolant."""
    H = gram_infinity(data).matrix
    c = solve_psd(H, data.ys, what="kernel Gram H^inf")
    return max(float(data.ys @ c), 0.0)


def kernel_interpolant_coefficients(data: LabeledSet):
    """``c`` solving ``H^inf c = y``; the interpolant is ``sum_i c_i kappa(., x_i)``."""
    return solve_psd(gram_infinity(data).matrix, data.ys, what="kernel Gram H^inf")


@dataclass(frozen=True)
class NormTransfer:
    w_norm_sq: float
    kernel_norm_sq: float
    gap: float


def norm_transfer_check(data: LabeledSet, k, seed):
    """Compare ``||w*||^2 = y^T H^{-1} y`` (normalized features) with ``y^T (H^inf)^{-1} y``.

    ``H`` is ``(1/k) X-bar X-bar^T`` for ``k`` gaussian gates drawn from ``seed``.
    """
    gates = GateBank.draw(data.d, k, seed, source="gaussian")
    fm = build_feature_matrix(data, gates, materialize=False)
    H = gram(fm, scale="one_over_k")
    y = data.ys
    if not np.any(y):
        return NormTransfer(0.0, 0.0, 0.0)
    w_norm_sq = float(y @ solve_psd(H, y, what="finite-width Gram H"))
    kernel_norm_sq = float(y @ solve_psd(gram_infinity(data).matrix, y, what="kernel Gram H^inf"))
    return NormTransfer(w_norm_sq, kernel_norm_sq, abs(w_norm_sq - kernel_norm_sq))


def hoeffding_width(data: LabeledSet, r, delta, lam=None):
    """Smallest ``k`` with ``k >= 32 r^2 ||X||^4 / lambda(X)^2 * log(m / delta)``."""
    from .spectral import lambda_exact, spectral_norm_sq

    lam = lambda_exact(data) if lam is None else lam
    if lam <= 0:
        raise SingularGramError("lambda(X) must be positive", min_eigenvalue=lam)
    R = spectral_norm_sq(data.xs)
    return _ceil(32.0 * r * r * R * R / (lam * lam) * math.log(data.m / delta))


def _ceil(v):
    # guard against 16.000000000000004 rounding up to 17
    return max(1, math.ceil(v * (1.0 - 1e-12)))


def gram_deviation(data: LabeledSet, k, seed, h_inf=None):
    """Spectral norm ``||(1/k) X-bar X-bar^T - H^inf||`` for one gaussian gate draw."""
    h_inf = gram_infinity(data).matrix if h_inf is None else h_inf
    gates = GateBank.draw(data.d, k, seed, source="gaussian")
    H = gram(build_feature_matrix(data, gates, materialize=False), scale="one_over_k")
    return float(np.linalg.norm(H - h_inf, 2))


def min_eig_with_rank(H):
    """Minimum eigenvalue and numerical rank of a symmetric matrix."""
    vals, _ = sym_eigh(H)
    top = max(vals[-1], 0.0)
    return float(vals[0]), int(np.count_nonzero(vals > EIG_RTOL * top)) if top > 0 else 0
