"""Small symmetric-matrix helpers shared by spectral, kernel and solver."""
import numpy as np

from .errors import SingularGramError

# Eigenvalues below EIG_RTOL * (largest eigenvalue) count as zero.  For a
# feature matrix this is the rule sigma^2 <= EIG_RTOL * sigma_max^2.
EIG_RTOL = 1e-10


def sym_eigh(a):
    a = np.asarray(a, dtype=np.float64)
    return np.linalg.eigh(0.5 * (a + a.T))


def min_eig(a):
    a = np.asarray(a, dtype=np.float64)
    return float(np.linalg.eigvalsh(0.5 * (a + a.T))[0])


def rank_from_eigs(eigs, rtol=EIG_RTOL):
    eigs = np.asarray(eigs)
    if eigs.size == 0:
        return 0
    top = eigs.max()
    if top <= 0:
        return 0
    return int(np.count_nonzero(eigs > rtol * top))


def solve_psd(a, b, what="Gram matrix"):
    """Solve ``a x = b`` for symmetric PSD ``a``; raise if numerically singular."""
    vals, vecs = sym_eigh(a)
    top = max(vals[-1], 0.0)
    if vals[0] <= EIG_RTOL * top or top == 0.0:
        raise SingularGramError(
            f"{what} is numerically singular: min eigenvalue {vals[0]:.3e}, "
            f"max eigenvalue {top:.3e}",
            min_eigenvalue=float(vals[0]),
        )
    return vecs @ ((vecs.T @ b).T / vals).T
