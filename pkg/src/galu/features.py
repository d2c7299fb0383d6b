"""The random feature map Phi_U and the block feature matrix X-bar.

Row ``i`` of X-bar is ``Phi_U(x_i)``; column block ``j`` (width ``d``) is the
gated copy ``1[u_j . x_i >= 0] * x_i``.  Training the GaLU network on the
stacked weights is ordinary least squares against this matrix.

A :class:`FeatureMatrix` keeps the examples and the ``(m, k)`` gate mask next
to the dense matrix.  Products and Grams can then be formed without
materializing X-bar, using

    X-bar X-bar^T = (X X^T) * (S S^T)        (Hadamard product, S = mask).
"""
import math

import numpy as np

from .errors import CapacityError, ShapeError
from .model import GateBank, LabeledSet, gate, stack_weights, unstack_weights

DEFAULT_MEMORY_BUDGET = 4 * 2**30  # bytes


def _dense_bytes(m, d, k):
    return 8 * m * d * k


class FeatureMatrix:
    """The ``(m, d * k)`` feature matrix, with its mask and examples.

    ``normalized`` features carry the factor ``1 / sqrt(k)``.  The dense array
    is built lazily on first access of :attr:`data` (or eagerly by
    :func:`build_feature_matrix`).  The dense array and the Hadamard Gram are
    refused with :class:`CapacityError` if they would exceed ``memory_budget``
    bytes.
    """

    def __init__(self, xs, mask, normalized=False, memory_budget=DEFAULT_MEMORY_BUDGET):
        xs = np.asarray(xs, dtype=np.float64)
        mask = np.asarray(mask, dtype=np.float64)
        if xs.ndim != 2 or mask.ndim != 2 or xs.shape[0] != mask.shape[0]:
            raise ShapeError(f"incompatible xs {xs.shape} and mask {mask.shape}")
        self.xs = xs
        self.mask = mask
        self.normalized = bool(normalized)
        self.memory_budget = memory_budget
        self._data = None

    @property
    def m(self):
        return self.xs.shape[0]

    @property
    def d(self):
        return self.xs.shape[1]

    @property
    def k(self):
        return self.mask.shape[1]

    @property
    def shape(self):
        return (self.m, self.d * self.k)

    @property
    def scale(self):
        return 1.0 / math.sqrt(self.k) if self.normalized else 1.0

    @property
    def is_materialized(self):
        return self._data is not None

    @property
    def data(self):
        if self._data is None:
            self._require(_dense_bytes(self.m, self.d, self.k), "dense feature matrix")
            dense = (self.mask[:, :, None] * self.xs[:, None, :]).reshape(self.m, -1)
            if self.normalized:
                dense *= self.scale
            self._data = dense
        return self._data

    def _require(self, need, what):
        if self.memory_budget is not None and need > self.memory_budget:
            raise CapacityError(
                f"{what} needs {need} bytes (m={self.m}, d={self.d}, k={self.k}); "
                f"budget is {self.memory_budget}"
            )

    def block(self, j):
        """Column block ``j``: the ``(m, d)`` matrix of gate ``j``."""
        return self.scale * self.mask[:, j : j + 1] * self.xs

    def matvec(self, w):
        """``X-bar @ w`` without materializing X-bar."""
        W = unstack_weights(w, self.d)
        return self.scale * np.sum(self.mask * (self.xs @ W), axis=1)

    def rmatvec(self, r):
        """``X-bar.T @ r`` without materializing X-bar."""
        r = np.asarray(r, dtype=np.float64)
        return stack_weights(self.scale * (self.xs.T @ (self.mask * r[:, None])))

    def hadamard_gram(self):
        """``X-bar X-bar^T`` through the Hadamard identity."""
        # two m x m temporaries are live at once
        self._require(16 * self.m * self.m, "Gram matrix")
        return (self.scale**2) * (self.xs @ self.xs.T) * (self.mask @ self.mask.T)

    def cross_gram(self, xs_new, mask_new):
        """``Phi(xs_new) @ X-bar.T`` for new points with their own gate mask."""
        return (self.scale**2) * (np.asarray(xs_new) @ self.xs.T) * (np.asarray(mask_new) @ self.mask.T)


def gate_mask(xs, gates: GateBank):
    """The ``(m, k)`` matrix ``S[i, j] = 1[u_j . x_i >= 0]``."""
    xs = np.asarray(xs, dtype=np.float64)
    if xs.shape[-1] != gates.d:
        raise ShapeError(f"points have dimension {xs.shape[-1]} but gates have d={gates.d}")
    return gate(xs @ gates.gates)


def embed_point(x, gates: GateBank, normalized=False):
    """``Phi_U(x)``, the length ``d * k`` embedding of a single point."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (gates.d,):
        raise ShapeError(f"expected a point of shape ({gates.d},), got {x.shape}")
    phi = np.outer(gate(x @ gates.gates), x).reshape(-1)
    return phi / math.sqrt(gates.k) if normalized else phi


def build_feature_matrix(
    data: LabeledSet,
    gates: GateBank,
    normalized=False,
    materialize=True,
    memory_budget=DEFAULT_MEMORY_BUDGET,
):
    """Feature matrix of ``data`` under ``gates`` (unnormalized by default).

    Raises :class:`CapacityError` when ``materialize`` is set and the dense
    matrix does not fit in ``memory_budget`` bytes.
    """
    xs = data.xs if isinstance(data, LabeledSet) else np.asarray(data, dtype=np.float64)
    fm = FeatureMatrix(xs, gate_mask(xs, gates), normalized=normalized, memory_budget=memory_budget)
    if materialize:
        fm.data  # noqa: B018 - force the budget check and allocation
    return fm


def gram(features: FeatureMatrix, scale="raw"):
    """``X-bar X-bar^T``, divided by ``k`` when ``scale == "one_over_k"``."""
    if scale not in ("raw", "one_over_k"):
        raise ValueError(f"scale must be 'raw' or 'one_over_k', got {scale!r}")
    if features.is_materialized:
        X = features.data
        H = X @ X.T
    else:
        H = features.hadamard_gram()
    H = 0.5 * (H + H.T)
    return H / features.k if scale == "one_over_k" else H


def gate_gram(features: FeatureMatrix, j):
    """Per-gate Gram ``H^(j) = X-bar^(j) X-bar^(j)^T``."""
    B = features.block(j)
    return B @ B.T
