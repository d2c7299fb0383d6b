"""Network objects and forward evaluation for GaLU and ReLU networks.

Layout convention, used everywhere in the package:

* examples are rows: ``xs`` has shape ``(m, d)``;
* gates and first-layer weights are columns: ``gates`` and ``W`` have shape
  ``(d, k)`` and column ``j`` belongs to neuron ``j``;
* a weight stack ``w`` of length ``d * k`` holds neuron ``j`` in the
  contiguous slice ``w[j * d:(j + 1) * d]``, i.e. ``w = W.flatten(order="F")``.

The gate indicator is ``1[t >= 0]``, so a gate is open on its boundary.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from ._rng import MASK64, make_rng
from .errors import ShapeError

GATE_SOURCES = ("gaussian", "sphere")


def _finite_matrix(a, name):
    a = np.array(a, dtype=np.float64, copy=True)
    if a.ndim != 2:
        raise ShapeError(f"{name} must be a 2-D array, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")
    return a


def _finite_vector(a, name):
    a = np.array(a, dtype=np.float64, copy=True)
    if a.ndim != 1:
        raise ShapeError(f"{name} must be a 1-D array, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")
    return a


@dataclass(frozen=True, eq=False)
class LabeledSet:
    """A sample ``(X, y)``: ``xs`` is ``(m, d)``, ``ys`` has length ``m``.

    With ``unit_norm=True`` every row is checked to have Euclidean norm 1
    within 1e-9.
    """

    xs: np.ndarray
    ys: np.ndarray
    unit_norm: bool = False

    def __post_init__(self):
        xs = _finite_matrix(self.xs, "xs")
        ys = _finite_vector(self.ys, "ys")
        m, d = xs.shape
        if m < 1 or d < 1:
            raise ShapeError(f"need m >= 1 and d >= 1, got {xs.shape}")
        if ys.shape[0] != m:
            raise ShapeError(f"xs has {m} rows but ys has length {ys.shape[0]}")
        if self.unit_norm:
            norms = np.linalg.norm(xs, axis=1)
            if np.max(np.abs(norms - 1.0)) > 1e-9:
                raise ValueError("unit_norm=True but some rows are not unit length")
        xs.flags.writeable = False
        ys.flags.writeable = False
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)

    @property
    def m(self):
        return self.xs.shape[0]

    @property
    def d(self):
        return self.xs.shape[1]

    def with_labels(self, ys):
        return LabeledSet(self.xs, ys, unit_norm=self.unit_norm)

    def subset(self, index):
        return LabeledSet(self.xs[index], self.ys[index], unit_norm=self.unit_norm)


@dataclass(frozen=True, eq=False)
class GateBank:
    """Fixed gate vectors ``u_1 .. u_k`` stored as the columns of a ``(d, k)`` matrix."""

    gates: np.ndarray
    source: str = "gaussian"
    seed: int = 0

    def __post_init__(self):
        gates = _finite_matrix(self.gates, "gates")
        if gates.shape[0] < 1 or gates.shape[1] < 1:
            raise ShapeError(f"need d >= 1 and k >= 1, got {gates.shape}")
        if self.source not in GATE_SOURCES:
            raise ValueError(f"source must be one of {GATE_SOURCES}, got {self.source!r}")
        if self.source == "sphere":
            norms = np.linalg.norm(gates, axis=0)
            if np.max(np.abs(norms - 1.0)) > 1e-9:
                raise ValueError("sphere gates must have unit-norm columns")
        gates.flags.writeable = False
        object.__setattr__(self, "gates", gates)
        object.__setattr__(self, "seed", int(self.seed) & MASK64)

    @classmethod
    def draw(cls, d, k, seed, source="gaussian"):
        """Draw ``k`` gates in dimension ``d``: iid N(0, I_d), or uniform on the sphere."""
        if source not in GATE_SOURCES:
            raise ValueError(f"source must be one of {GATE_SOURCES}, got {source!r}")
        g = make_rng(seed).standard_normal((d, k))
        if source == "sphere":
            g /= np.linalg.norm(g, axis=0)
        return cls(g, source=source, seed=seed)

    @property
    def d(self):
        return self.gates.shape[0]

    @property
    def k(self):
        return self.gates.shape[1]

    def to_sphere(self):
        """Same gate directions, rescaled to unit norm."""
        return GateBank(self.gates / np.linalg.norm(self.gates, axis=0), "sphere", self.seed)


@dataclass(frozen=True, eq=False)
class NaturalParams:
    """Trainable weights of the two-layer network: ``W`` is ``(d, k)``, ``alpha`` has length ``k``."""

    W: np.ndarray
    alpha: np.ndarray = field(default=None)

    def __post_init__(self):
        W = _finite_matrix(self.W, "W")
        alpha = np.ones(W.shape[1]) if self.alpha is None else self.alpha
        alpha = _finite_vector(alpha, "alpha")
        if alpha.shape[0] != W.shape[1]:
            raise ShapeError(f"W has {W.shape[1]} columns but alpha has length {alpha.shape[0]}")
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "alpha", alpha)

    @property
    def d(self):
        return self.W.shape[0]

    @property
    def k(self):
        return self.W.shape[1]

    def stack(self):
        """The collapsed weight stack ``v(W, alpha) = [alpha_1 w_1; ...; alpha_k w_k]``."""
        return stack_weights(self.W * self.alpha)

    def check_gates(self, gates):
        if (self.d, self.k) != (gates.d, gates.k):
            raise ShapeError(
                f"params are (d={self.d}, k={self.k}) but gates are (d={gates.d}, k={gates.k})"
            )


def stack_weights(W):
    """``(d, k)`` weight matrix to the length ``d * k`` weight stack."""
    return np.asarray(W, dtype=np.float64).flatten(order="F")


def unstack_weights(w, d):
    """Inverse of :func:`stack_weights`."""
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 1 or w.size % d:
        raise ShapeError(f"weight stack of length {w.size} is not a multiple of d={d}")
    return w.reshape((w.size // d, d)).T


def gate(t):
    """The indicator ``1[t >= 0]`` as float64."""
    return (np.asarray(t) >= 0).astype(np.float64)


def galu_neuron(x, w, u):
    """``1[u.x >= 0] * (x.w)``."""
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    if not (x.ndim == w.ndim == u.ndim == 1) or not (x.shape == w.shape == u.shape):
        raise ShapeError(f"x, w, u must be vectors of equal length: {x.shape}, {w.shape}, {u.shape}")
    return float(x @ w) if float(u @ x) >= 0 else 0.0


def _check_point(x, d):
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (d,):
        raise ShapeError(f"expected a point of shape ({d},), got {x.shape}")
    return x


def galu_forward(x, params: NaturalParams, gates: GateBank, normalized=True):
    """Network output ``c * sum_j alpha_j g_{w_j,u_j}(x)`` with ``c = 1/sqrt(k)`` if normalized.

    Terms are accumulated with :func:`math.fsum`, so the result does not depend
    on summation order.
    """
    params.check_gates(gates)
    x = _check_point(x, gates.d)
    open_ = (x @ gates.gates) >= 0
    lin = x @ params.W
    total = math.fsum(a * v for a, v, o in zip(params.alpha, lin, open_) if o)
    return total / math.sqrt(gates.k) if normalized else total


def relu_forward(x, gates: GateBank, alpha, normalized=True):
    """ReLU network with first-layer weights equal to ``gates``: ``c * sum_j alpha_j max(u_j.x, 0)``."""
    alpha = np.asarray(alpha, dtype=np.float64)
    if alpha.shape != (gates.k,):
        raise ShapeError(f"alpha must have shape ({gates.k},), got {alpha.shape}")
    return galu_forward(x, NaturalParams(gates.gates, alpha), gates, normalized=normalized)


def galu_predict(xs, params: NaturalParams, gates: GateBank, normalized=True):
    """Vectorized :func:`galu_forward` over the rows of ``xs``."""
    params.check_gates(gates)
    xs = np.asarray(xs, dtype=np.float64)
    out = (gate(xs @ gates.gates) * (xs @ params.W)) @ params.alpha
    return out / math.sqrt(gates.k) if normalized else out


def relu_predict(xs, U, alpha, normalized=True):
    """Vectorized ReLU network output; ``U`` is the ``(d, k)`` weight matrix."""
    xs = np.asarray(xs, dtype=np.float64)
    U = np.asarray(U, dtype=np.float64)
    out = np.maximum(xs @ U, 0.0) @ np.asarray(alpha, dtype=np.float64)
    return out / math.sqrt(U.shape[1]) if normalized else out
