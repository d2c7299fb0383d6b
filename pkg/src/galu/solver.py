"""Closed-form minimum-norm least squares on the feature matrix.

Losses reported here are mean squared errors ``(1/m) ||X-bar w - y||^2``.
"""
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack, solve_triangular

from ._linalg import EIG_RTOL, sym_eigh
from .errors import ShapeError
from .features import FeatureMatrix, gram


@dataclass(frozen=True, eq=False)
class SolveResult:
    w_star: np.ndarray
    train_mse: float
    rank: int
    residual: np.ndarray
    dual_coef: np.ndarray = None

    def predict(self, features: FeatureMatrix):
        return features.matvec(self.w_star)


def _check_y(features, y):
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (features.m,):
        raise ShapeError(f"y must have shape ({features.m},), got {y.shape}")
    return y


def min_norm_solve(features: FeatureMatrix, y, method="auto"):
    """Minimum-norm minimizer of ``||X-bar w - y||^2``.

    ``method="svd"`` runs a thin SVD of the dense matrix.  ``method="gram"``
    (also what ``"auto"`` selects) eigendecomposes the smaller of
    ``X-bar^T X-bar`` and ``X-bar X-bar^T``; with ``m <= d k`` it never
    materializes X-bar.  Both truncate at ``sigma^2 <= EIG_RTOL * sigma_max^2``.
    """
    y = _check_y(features, y)
    m, n = features.shape
    if method == "auto":
        method = "gram"
    if method == "svd":
        U, s, Vt = np.linalg.svd(features.data, full_matrices=False)
        keep = s**2 > EIG_RTOL * s[0] ** 2 if s.size and s[0] > 0 else np.zeros(s.size, bool)
        r = int(keep.sum())
        w = Vt[:r].T @ ((U[:, :r].T @ y) / s[:r])
        dual = None
    elif method == "gram":
        if m <= n:
            vals, vecs = sym_eigh(gram(features, "raw"))
            top = max(vals[-1], 0.0)
            keep = vals > EIG_RTOL * top if top > 0 else np.zeros(vals.size, bool)
            r = int(keep.sum())
            V = vecs[:, keep]
            dual = V @ ((V.T @ y) / vals[keep])
            w = features.rmatvec(dual)
        else:
            X = features.data
            vals, vecs = sym_eigh(X.T @ X)
            top = max(vals[-1], 0.0)
            keep = vals > EIG_RTOL * top if top > 0 else np.zeros(vals.size, bool)
            r = int(keep.sum())
            V = vecs[:, keep]
            w = V @ ((V.T @ (X.T @ y)) / vals[keep])
            dual = None
    else:
        raise ValueError(f"unknown method {method!r}")
    residual = features.matvec(w) - y
    return SolveResult(
        w_star=w,
        train_mse=float(residual @ residual) / m,
        rank=r,
        residual=residual,
        dual_coef=dual,
    )


def predict_dual(features: FeatureMatrix, result: SolveResult, xs_new, mask_new):
    """Predictions at new points from the dual coefficients, without X-bar."""
    if result.dual_coef is None:
        raise ValueError("result has no dual coefficients; use result.predict instead")
    return features.cross_gram(xs_new, mask_new) @ result.dual_coef


def projected_loss(features: FeatureMatrix, ys, rtol=EIG_RTOL):
    """Minimum mean squared loss for one or many label vectors, and the rank.

    ``ys`` is ``(m,)`` or ``(m, p)``.  Uses a pivoted Cholesky factorization of
    the smaller Gram matrix; the factorization stops once every remaining
    pivot is at most ``rtol`` times the largest diagonal entry.  This is the
    fast path for large sweeps; :func:`min_norm_solve` is the reference.
    """
    ys = np.asarray(ys, dtype=np.float64)
    single = ys.ndim == 1
    Y = ys[:, None] if single else ys
    if Y.shape[0] != features.m:
        raise ShapeError(f"ys must have {features.m} rows, got {Y.shape[0]}")
    m, n = features.shape
    if m <= n:
        losses, r = _null_space_loss(features.hadamard_gram(), Y, rtol)
    else:
        losses, r = _column_space_loss(features, Y, rtol)
    losses = np.maximum(losses, 0.0) / m
    return (float(losses[0]) if single else losses), r


def _pstrf(G, rtol):
    # Consumes G.  Only one triangle is read, so a C-ordered symmetric G is
    # handed to LAPACK as its (Fortran-ordered) transpose without a copy.  The
    # returned factor holds L in its lower triangle; the upper one is junk.
    top = float(np.max(np.diag(G))) if G.size else 0.0
    if top <= 0.0:
        return None, np.arange(G.shape[0]), 0
    a = G.T if G.flags.c_contiguous else np.asfortranarray(G)
    c, piv, r, info = lapack.dpstrf(a, lower=1, tol=rtol * top, overwrite_a=1)
    if info < 0:
        raise RuntimeError(f"dpstrf failed with info={info}")
    return c, piv - 1, int(r)


def _null_space_loss(H, Y, rtol):
    # H = X-bar X-bar^T; the residual of the best fit is the projection of y
    # onto null(H), spanned by N = [-L1^{-T} L2^T ; I] in pivoted order.
    m = H.shape[0]
    L, piv, r = _pstrf(H, rtol)
    if r == m:
        return np.zeros(Y.shape[1]), r
    Yp = Y[piv]
    if r == 0:
        return np.sum(Yp**2, axis=0), 0
    L1 = L[:r, :r]
    L2 = L[r:, :r]
    T = solve_triangular(L1, L2.T, lower=True, trans="T")  # L1^{-T} L2^T, shape (r, m - r)
    Nty = -T.T @ Yp[:r] + Yp[r:]
    NtN = np.eye(m - r) + T.T @ T
    coef = np.linalg.solve(NtN, Nty)
    return np.sum(Nty * coef, axis=0), r


def _column_space_loss(features, Y, rtol):
    # G = X-bar^T X-bar; the first r pivoted columns span the column space and
    # X-bar_I L1^{-T} is an orthonormal basis of it.
    X = features.data
    G = X.T @ X
    L, piv, r = _pstrf(G, rtol)
    total = np.sum(Y**2, axis=0)
    if r == 0:
        return total, 0
    z = solve_triangular(L[:r, :r], (X.T @ Y)[piv[:r]], lower=True)
    return total - np.sum(z**2, axis=0), r


def expected_loss_law(features: FeatureMatrix, rank=None):
    """``1 - rank(X-bar) / m``: expected minimum loss for labels ``y ~ N(0, I_m)``."""
    from .spectral import numerical_rank

    r = numerical_rank(features) if rank is None else rank
    return 1.0 - r / features.m


@dataclass(frozen=True)
class LossPrediction:
    m_prime: int
    loss_bound: float
    valid: bool
    vacuous: bool


def underparam_loss_prediction(m, d, k, delta, c1, c2):
    """Under-parametrized loss bound ``1 - m'/m`` with caller-chosen constants.

    ``m' = floor(k d c1^2 / (64 pi) / log(c2 d^2 / delta))``.  ``valid`` reports
    whether ``d <= m' <= c2 d^2``; ``vacuous`` flags a negative bound.
    """
    denom = math.log(c2 * d * d / delta)
    if denom <= 0:
        raise ValueError("constants make bound vacuous: log(c2 d^2 / delta) <= 0")
    m_prime = math.floor(k * d * c1 * c1 / (64.0 * math.pi) / denom * (1.0 + 1e-12))
    if m_prime <= 0:
        raise ValueError("constants make bound vacuous: m' <= 0")
    bound = 1.0 - m_prime / m
    return LossPrediction(
        m_prime=m_prime,
        loss_bound=bound,
        valid=d <= m_prime <= c2 * d * d,
        vacuous=bound < 0,
    )


def c1_for_ideal_width(d, delta, c2):
    """The ``c1`` that makes ``m' = k d`` exactly (the idealized limiting case)."""
    return math.sqrt(64.0 * math.pi * math.log(c2 * d * d / delta))
