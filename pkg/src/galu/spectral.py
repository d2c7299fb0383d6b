"""Spectral quantities behind the memorization results.

``lambda(X)`` is the minimum eigenvalue of the expected normalized Gram
``(1/k) E[X-bar X-bar^T]``.  That expectation does not depend on ``k`` and
equals the kernel Gram ``H^inf``, so :func:`lambda_exact` reads it off the
closed-form kernel.  :func:`lambda_mc` estimates the same number by averaging
over gate draws and exists to validate the identity.
"""
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._linalg import EIG_RTOL, min_eig, rank_from_eigs
from ._rng import derive_seed
from .errors import NotDiverseError
from .features import FeatureMatrix, build_feature_matrix, gram
from .kernel import _ceil, gram_infinity
from .model import GateBank, LabeledSet


@dataclass(frozen=True)
class SpectralReport:
    sigma_min_xbar: float
    lambda_min_H: float
    lambda_X_exact: float
    lambda_X_mc: float
    lambda_X_mc_stderr: float
    khatri_rao_bound: float
    chernoff_k: Optional[int]


def spectral_norm_sq(xs):
    """``||X||^2``, the squared largest singular value of the example matrix."""
    s = np.linalg.svd(np.asarray(xs, dtype=np.float64), compute_uv=False)
    return float(s[0] ** 2)


def lambda_exact(data: LabeledSet):
    return min_eig(gram_infinity(data).matrix)


def lambda_mc(data: LabeledSet, k, trials, seed):
    """Monte Carlo ``lambda(X)`` with a jackknife standard error.

    Trial ``t`` uses gaussian gates seeded by ``derive_seed(seed, t)``.
    Returns ``(estimate, stderr)``.
    """
    if trials < 2:
        raise ValueError("lambda_mc needs at least 2 trials")
    m = data.m
    per_trial = np.empty((trials, m, m))
    for t in range(trials):
        gates = GateBank.draw(data.d, k, derive_seed(seed, t), source="gaussian")
        per_trial[t] = gram(build_feature_matrix(data, gates, materialize=False), "one_over_k")
    total = per_trial.sum(axis=0)
    estimate = min_eig(total / trials)
    loo = np.array([min_eig((total - per_trial[t]) / (trials - 1)) for t in range(trials)])
    stderr = math.sqrt((trials - 1) / trials * float(np.sum((loo - loo.mean()) ** 2)))
    return estimate, stderr


def khatri_rao_bound(data: LabeledSet):
    """``sigma_min(X * X)^2 / (2 pi)`` where row ``i`` of ``X * X`` is ``x_i (x) x_i``."""
    xs = data.xs
    m, d = xs.shape
    kr = np.einsum("ia,ib->iab", xs, xs).reshape(m, d * d)
    s = np.linalg.svd(kr, compute_uv=False)
    if m > s.size:
        return 0.0
    smin = s[-1]
    if smin <= math.sqrt(EIG_RTOL) * s[0]:
        return 0.0
    return float(smin**2 / (2.0 * math.pi))


def chernoff_width(data: LabeledSet, delta, lam=None):
    """Smallest ``k`` with ``k >= 8 ||X||^2 log(m / delta) / lambda(X)``."""
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    H = gram_infinity(data).matrix
    vals = np.linalg.eigvalsh(H)
    lam = float(vals[0]) if lam is None else lam
    if lam <= EIG_RTOL * max(vals[-1], 0.0) or lam <= 0.0:
        raise NotDiverseError(f"data not diverse: lambda(X) = {lam:.3e}")
    R = spectral_norm_sq(data.xs)
    return _ceil(8.0 * R * math.log(data.m / delta) / lam)


def sigma_min(features: FeatureMatrix):
    """Smallest singular value of X-bar, by SVD.

    When ``m > d * k`` the rank is below ``m`` and the answer is 0.
    """
    m, n = features.shape
    if m > n:
        return 0.0
    s = np.linalg.svd(features.data, compute_uv=False)
    return float(s[-1])


def lambda_min_gram(features: FeatureMatrix):
    return min_eig(gram(features, "raw"))


def numerical_rank(features: FeatureMatrix):
    """Rank of X-bar: eigenvalues of the smaller Gram above ``EIG_RTOL`` times the largest."""
    m, n = features.shape
    if n < m:
        X = features.data
        eigs = np.linalg.eigvalsh(X.T @ X)
    else:
        eigs = np.linalg.eigvalsh(gram(features, "raw"))
    return rank_from_eigs(eigs)


def spectral_report(data: LabeledSet, gates: GateBank, trials=200, seed=0, delta=0.1):
    """Every spectral diagnostic for one sample and one gate bank."""
    fm = build_feature_matrix(data, gates)
    lam = lambda_exact(data)
    est, err = lambda_mc(data, gates.k, trials, seed)
    try:
        ck = chernoff_width(data, delta, lam=lam)
    except NotDiverseError:
        ck = None
    return SpectralReport(
        sigma_min_xbar=sigma_min(fm),
        lambda_min_H=lambda_min_gram(fm),
        lambda_X_exact=lam,
        lambda_X_mc=est,
        lambda_X_mc_stderr=err,
        khatri_rao_bound=khatri_rao_bound(data),
        chernoff_k=ck,
    )
