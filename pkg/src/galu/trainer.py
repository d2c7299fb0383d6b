"""Iterative training.

Two families live here:

* :func:`gd_convex` runs full-batch gradient descent on the collapsed weight
  stack ``w`` with objective ``F(w) = (1/2m) ||X-bar w - y||^2`` and step
  ``eta = m / (k ||X||^2)``, and logs the exponential bound on ``F(w_t)``.
* :func:`train_natural` and :func:`train_relu` optimize the two-layer
  ``(W, alpha)`` parameterization of normalized GaLU / ReLU networks with
  GD, SGD or Adam.

Loss conventions for the natural parameterization (``n`` examples, output
``o``): ``mse`` is ``(1/2n) sum (o - y)^2``, ``hinge`` is
``(1/n) sum max(1 - y o, 0)`` and ``linear`` is ``-(1/n) sum y o``.  Traces
record the optimized objective; ``mse`` reported elsewhere is
``(1/n) sum (o - y)^2``.
"""
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from ._linalg import EIG_RTOL, sym_eigh
from ._rng import derive_seed, make_rng
from .errors import DegenerateInstanceError, PreconditionError, ShapeError
from .features import FeatureMatrix, gram
from .model import GateBank, LabeledSet, NaturalParams, gate

LOSSES = ("mse", "hinge", "linear")
METHODS = ("gd", "sgd", "adam")


@dataclass
class TraceRecord:
    iteration: int
    objective: float
    grad_norm: float
    dist_to_opt: Optional[float] = None
    gd_bound: Optional[float] = None


@dataclass
class TrainTrace:
    records: List[TraceRecord] = field(default_factory=list)
    info: dict = field(default_factory=dict)

    def append(self, *args, **kwargs):
        self.records.append(TraceRecord(*args, **kwargs))

    def column(self, name):
        return np.array([np.nan if getattr(r, name) is None else getattr(r, name) for r in self.records])

    @property
    def iterations(self):
        return self.column("iteration").astype(int)

    @property
    def objectives(self):
        return self.column("objective")

    @property
    def final_objective(self):
        return self.records[-1].objective

    def plateaued(self, window=0.1, rtol=0.01):
        """True when the objective improved by less than ``rtol`` (relative) over the last ``window`` of logs."""
        obj = self.objectives
        if obj.size < 3:
            return True
        tail = max(2, int(math.ceil(window * obj.size)))
        start, end = obj[-tail], obj[-1]
        return (start - end) <= rtol * max(abs(start), 1e-12)


@dataclass(frozen=True)
class OptimizerConfig:
    method: str = "adam"
    step_size: float = 1e-3
    batch_size: int = 128
    iterations: int = 1000
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if not self.step_size > 0:
            raise ValueError("step_size must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if self.iterations < 0:
            raise ValueError("iterations must be non-negative")
        if not (0 < self.adam_beta1 < 1 and 0 < self.adam_beta2 < 1 and self.adam_eps > 0):
            raise ValueError("adam parameters must satisfy 0<beta1<1, 0<beta2<1, eps>0")


# ---------------------------------------------------------------------------
# convex path


def gd_step_size(features: FeatureMatrix, R=None):
    """``eta = m / (k ||X||^2)`` (``k`` is replaced by 1 for normalized features)."""
    from .spectral import spectral_norm_sq

    R = spectral_norm_sq(features.xs) if R is None else R
    k_eff = features.k * features.scale**2
    return features.m / (k_eff * R)


def gd_iterations(lam, R, k_eff, m, w_dist_sq, eps):
    """Iterations after which the exponential bound drops to ``eps``."""
    arg = k_eff * R * w_dist_sq / (m * eps)
    if arg <= 1.0:
        return 0
    return int(math.ceil(2.0 * R / lam * math.log(arg)))


def gd_convex(features: FeatureMatrix, y, iterations, delta=0.1, step_size=None, log_every=1,
              keep_iterates=False, lam=None):
    """Full-batch gradient descent on ``F(w) = (1/2m) ||X-bar w - y||^2`` from ``w_0 = 0``.

    Because ``w_0 = 0``, every iterate is ``w_t = X-bar^T c_t`` and the
    recursion runs on the ``m``-vector ``c_t`` using only ``H = X-bar X-bar^T``:
    ``c_{t+1} = c_t - (eta/m) (H c_t - y)``.  This is the same iteration, not
    an approximation.

    When ``rank(X-bar) = m`` each record carries ``||w_t - w*||`` and the bound
    ``exp(-t lambda / (2 ||X||^2)) (k ||X||^2 / m) ||w_0 - w*||^2``.
    ``trace.info`` holds ``eta``, ``lambda``, ``R``, the Chernoff width for
    ``delta``, whether ``sigma_min^2 >= (k/2) lambda`` holds, and ``w_final``.
    """
    from .spectral import chernoff_width, lambda_exact, spectral_norm_sq
    from .errors import NotDiverseError

    y = np.asarray(y, dtype=np.float64)
    m = features.m
    if y.shape != (m,):
        raise ShapeError(f"y must have shape ({m},), got {y.shape}")
    R = spectral_norm_sq(features.xs)
    data = LabeledSet(features.xs, np.zeros(m))
    lam = lambda_exact(data) if lam is None else lam
    k_eff = features.k * features.scale**2
    eta = gd_step_size(features, R) if step_size is None else step_size

    H = gram(features, "raw")
    vals, vecs = sym_eigh(H)
    top = max(vals[-1], 0.0)
    full_rank = top > 0 and vals[0] > EIG_RTOL * top
    try:
        width = chernoff_width(data, delta, lam=lam) if lam > 0 else None
    except NotDiverseError:
        width = None
    info = {
        "eta": eta,
        "lambda": lam,
        "R": R,
        "k": features.k,
        "chernoff_k": width,
        "full_rank": bool(full_rank),
        "lambda_min_H": float(vals[0]),
        "event_holds": bool(vals[0] >= 0.5 * k_eff * lam),
    }
    if full_rank:
        c_star = vecs @ ((vecs.T @ y) / vals)
        w0_dist_sq = float(c_star @ (H @ c_star))  # ||w*||^2
        info["w_star_norm_sq"] = w0_dist_sq
    trace = TrainTrace(info=info)
    iterates = []
    c = np.zeros(m)
    for t in range(iterations + 1):
        Hc = H @ c
        r = Hc - y
        if t % log_every == 0 or t == iterations:
            obj = float(r @ r) / (2 * m)
            gnorm = math.sqrt(max(float(r @ (H @ r)), 0.0)) / m
            dist = bound = None
            if full_rank:
                e = c - c_star
                dist = math.sqrt(max(float(e @ (H @ e)), 0.0))
                bound = math.exp(-t * lam / (2 * R)) * (k_eff * R / m) * w0_dist_sq
            trace.append(t, obj, gnorm, dist, bound)
            if keep_iterates:
                iterates.append(features.rmatvec(c))
        if t < iterations:
            c = c - (eta / m) * r
    info["w_final"] = features.rmatvec(c)
    if keep_iterates:
        info["iterates"] = iterates
    return trace


# ---------------------------------------------------------------------------
# natural parameterization


def _loss_terms(out, y, loss):
    n = y.shape[0]
    if loss == "mse":
        diff = out - y
        return float(diff @ diff) / (2 * n), diff / n
    if loss == "hinge":
        margin = 1.0 - y * out
        active = margin >= 0
        return float(np.sum(margin[active])) / n, np.where(active, -y, 0.0) / n
    if loss == "linear":
        return -float(y @ out) / n, -y / n
    raise ValueError(f"loss must be one of {LOSSES}, got {loss!r}")


def galu_loss_and_grads(xs, y, mask, W, alpha, loss="mse", normalized=True):
    """Objective and gradients ``(obj, dW, dalpha, out)`` of the GaLU network on a batch."""
    c = 1.0 / math.sqrt(W.shape[1]) if normalized else 1.0
    A = mask * (xs @ W)
    out = c * (A @ alpha)
    obj, g = _loss_terms(out, y, loss)
    dalpha = c * (A.T @ g)
    dW = c * (xs.T @ (mask * g[:, None])) * alpha
    return obj, dW, dalpha, out


def relu_loss_and_grads(xs, y, U, alpha, loss="mse", normalized=True):
    """Objective and gradients ``(obj, dU, dalpha, out)`` of the ReLU network.

    The subgradient of ``max(t, 0)`` at ``t = 0`` is taken as 1.
    """
    c = 1.0 / math.sqrt(U.shape[1]) if normalized else 1.0
    Z = xs @ U
    act = gate(Z)
    A = act * Z
    out = c * (A @ alpha)
    obj, g = _loss_terms(out, y, loss)
    dalpha = c * (A.T @ g)
    dU = c * (xs.T @ (act * g[:, None])) * alpha
    return obj, dU, dalpha, out


class _Adam:
    def __init__(self, shapes, cfg):
        self.cfg = cfg
        self.m = [np.zeros(s) for s in shapes]
        self.v = [np.zeros(s) for s in shapes]
        self.t = 0

    def step(self, params, grads):
        cfg = self.cfg
        self.t += 1
        b1, b2 = cfg.adam_beta1, cfg.adam_beta2
        lr = cfg.step_size * math.sqrt(1 - b2**self.t) / (1 - b1**self.t)
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            p -= lr * m / (np.sqrt(v) + cfg.adam_eps * math.sqrt(1 - b2**self.t))


def _batches(n, cfg):
    """Infinite stream of index batches: seeded permutation per epoch."""
    if cfg.method == "gd" or cfg.batch_size >= n:
        full = np.arange(n)
        while True:
            yield full
    epoch = 0
    while True:
        perm = make_rng(cfg.seed, epoch).permutation(n)
        for s in range(0, n, cfg.batch_size):
            yield perm[s : s + cfg.batch_size]
        epoch += 1


def _run(params, grad_fn, full_fn, n, cfg, trainable, log_every):
    trace = TrainTrace()
    shapes = [p.shape for p in params]
    adam = _Adam(shapes, cfg) if cfg.method == "adam" else None
    if log_every is None:
        log_every = 1 if cfg.method == "gd" else max(1, cfg.iterations // 50)
    batches = _batches(n, cfg)
    for t in range(cfg.iterations + 1):
        if t % log_every == 0 or t == cfg.iterations:
            obj, grads = full_fn()
            gnorm = math.sqrt(sum(float(np.sum(g * g)) for g, tr in zip(grads, trainable) if tr))
            trace.append(t, obj, gnorm)
        if t == cfg.iterations:
            break
        grads = grad_fn(next(batches))
        grads = [g if tr else np.zeros_like(g) for g, tr in zip(grads, trainable)]
        if adam is not None:
            adam.step(params, grads)
        else:
            for p, g in zip(params, grads):
                p -= cfg.step_size * g
    trace.info["plateaued"] = trace.plateaued()
    return trace


def train_natural(data: LabeledSet, gates: GateBank, init: NaturalParams, cfg: OptimizerConfig,
                  loss="mse", train_alpha=True, log_every=None):
    """Train ``(W, alpha)`` of the normalized GaLU network; the gates never change.

    Returns ``(params, trace)``.
    """
    init.check_gates(gates)
    xs, ys = data.xs, data.ys
    mask = gate(xs @ gates.gates)
    W = init.W.copy()
    alpha = init.alpha.copy()

    def grad_fn(idx):
        _, dW, da, _ = galu_loss_and_grads(xs[idx], ys[idx], mask[idx], W, alpha, loss)
        return [dW, da]

    def full_fn():
        obj, dW, da, _ = galu_loss_and_grads(xs, ys, mask, W, alpha, loss)
        return obj, [dW, da]

    trace = _run([W, alpha], grad_fn, full_fn, data.m, cfg, [True, bool(train_alpha)], log_every)
    return NaturalParams(W, alpha), trace


def train_relu(data: LabeledSet, init_gates: GateBank, init_alpha, cfg: OptimizerConfig,
               loss="mse", log_every=None):
    """Train both layers of the normalized ReLU network.

    ``init_gates`` supplies the initial first-layer weights.  Returns
    ``(U, alpha, trace)``.
    """
    xs, ys = data.xs, data.ys
    U = np.array(init_gates.gates, dtype=np.float64)
    alpha = np.array(init_alpha, dtype=np.float64)
    if alpha.shape != (U.shape[1],):
        raise ShapeError(f"alpha must have shape ({U.shape[1]},), got {alpha.shape}")

    def grad_fn(idx):
        _, dU, da, _ = relu_loss_and_grads(xs[idx], ys[idx], U, alpha, loss)
        return [dU, da]

    def full_fn():
        obj, dU, da, _ = relu_loss_and_grads(xs, ys, U, alpha, loss)
        return obj, [dU, da]

    trace = _run([U, alpha], grad_fn, full_fn, data.m, cfg, [True, True], log_every)
    return U, alpha, trace


def mse(pred, y):
    d = np.asarray(pred) - np.asarray(y)
    return float(d @ d) / d.size


def accuracy(pred, y):
    return float(np.mean(np.where(np.asarray(pred) >= 0, 1.0, -1.0) == np.asarray(y)))


# ---------------------------------------------------------------------------
# GaLU versus ReLU checks


@dataclass(frozen=True)
class GradEquality:
    galu_grad_norm: float
    relu_grad_norm: float
    max_abs_diff: float


def hinge_grad_equality(data: LabeledSet, gates: GateBank, W, alpha, negate_indicator=False):
    """Compare ``dL/dW`` of the GaLU network with ``dL/dU`` of the ReLU network under hinge loss.

    Both networks are normalized and share gates ``U`` and output weights
    ``alpha``; the GaLU network has linear weights ``W``.  Their outputs on the
    data must lie in ``[-1, 1]``.  ``negate_indicator`` flips the GaLU gate to
    ``1[t < 0]``, a deliberate bug used to check that the comparison can fail.
    """
    W = np.asarray(W, dtype=np.float64)
    alpha = np.asarray(alpha, dtype=np.float64)
    U = gates.gates
    if W.shape != U.shape or alpha.shape != (U.shape[1],):
        raise ShapeError(f"W {W.shape}, gates {U.shape}, alpha {alpha.shape} are inconsistent")
    xs, ys = data.xs, data.ys
    mask = gate(xs @ U)
    if negate_indicator:
        mask = 1.0 - mask
    _, dW, _, out_g = galu_loss_and_grads(xs, ys, mask, W, alpha, "hinge")
    _, dU, _, out_r = relu_loss_and_grads(xs, ys, U, alpha, "hinge")
    worst = max(np.max(np.abs(out_g)), np.max(np.abs(out_r)))
    if worst > 1.0:
        raise PreconditionError(
            f"network outputs reach {worst:.3g}, outside [-1, 1]; rescale alpha toward 0"
        )
    return GradEquality(
        galu_grad_norm=float(np.linalg.norm(dW)),
        relu_grad_norm=float(np.linalg.norm(dU)),
        max_abs_diff=float(np.max(np.abs(dW - dU))),
    )


@dataclass(frozen=True)
class PerturbationGap:
    empirical_sup: float
    bound: float


def perturbation_bound(d, epsilon):
    """``sqrt(5 sqrt(3 d) eps / sqrt(2 pi))``."""
    return math.sqrt(5.0 * math.sqrt(3.0 * d) * epsilon / math.sqrt(2.0 * math.pi))


def perturbation_width(d, epsilon, delta=0.01):
    """Smallest ``k >= pi / (sqrt(6) d eps^2) * (log(2/delta) + d log(3/eps))``."""
    v = math.pi / (math.sqrt(6.0) * d * epsilon**2) * (math.log(2.0 / delta) + d * math.log(3.0 / epsilon))
    return max(1, math.ceil(v))


def _unit_rows(rng, n, d):
    z = rng.standard_normal((n, d))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def gate_perturbation_gap(gates: GateBank, epsilon, n_probe, seed, delta=0.01, probes=None):
    """Largest feature-map change over unit probes when every gate moves by ``epsilon``.

    Each gate is shifted by ``epsilon`` times an independent uniform unit
    direction.  For a unit probe ``x`` the normalized maps differ by
    ``sqrt(#flipped gates / k)``.  ``probes`` overrides the random probe set.
    """
    d, k = gates.d, gates.k
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    if d <= math.log(2 * k / delta):
        raise PreconditionError(f"need d > log(2k/delta) = {math.log(2 * k / delta):.3f}, got d={d}")
    rng = make_rng(seed, 0)
    shift = epsilon * _unit_rows(rng, k, d).T
    U = gates.gates
    Wp = U + shift
    xs = _unit_rows(make_rng(seed, 1), n_probe, d) if probes is None else np.asarray(probes, dtype=np.float64)
    flips = gate(xs @ U) != gate(xs @ Wp)
    norms_sq = np.sum(xs * xs, axis=1)
    gaps = np.sqrt(flips.sum(axis=1) / k * norms_sq)
    return PerturbationGap(float(gaps.max()), perturbation_bound(d, epsilon))


def finite_diff_check(data: LabeledSet, gates: GateBank, params: NaturalParams, loss="mse",
                      activation="galu", step=1e-5, seed=0, margin=1e-6, max_resample=10):
    """Max relative error between analytic and central-difference gradients.

    For ``activation="relu"`` the first-layer weights are ``params.W``.  If any
    pre-activation used for switching, ``|u_j . x_i|`` (gates for GaLU, ``W``
    for ReLU), is below ``margin``, the offending matrix is redrawn from
    ``seed`` (at most ``max_resample`` times) so the difference quotient never
    straddles a kink.
    """
    xs, ys = data.xs, data.ys
    W0, alpha0 = params.W.copy(), params.alpha.copy()
    U = gates.gates.copy()
    for attempt in range(max_resample + 1):
        switch = U if activation == "galu" else W0
        if np.min(np.abs(xs @ switch)) >= margin:
            break
        if attempt == max_resample:
            raise DegenerateInstanceError("gate boundary still within margin after resampling")
        fresh = make_rng(derive_seed(seed, attempt)).standard_normal(switch.shape)
        if activation == "galu":
            U = fresh
        else:
            W0 = fresh
    mask = gate(xs @ U)

    def f(W, a):
        if activation == "galu":
            return galu_loss_and_grads(xs, ys, mask, W, a, loss)
        return relu_loss_and_grads(xs, ys, W, a, loss)

    _, gW, ga, _ = f(W0, alpha0)
    analytic = np.concatenate([gW.ravel(), ga])
    theta = np.concatenate([W0.ravel(), alpha0])
    nW = W0.size
    numeric = np.empty_like(theta)
    for i in range(theta.size):
        tp, tm = theta.copy(), theta.copy()
        tp[i] += step
        tm[i] -= step
        fp = f(tp[:nW].reshape(W0.shape), tp[nW:])[0]
        fm = f(tm[:nW].reshape(W0.shape), tm[nW:])[0]
        numeric[i] = (fp - fm) / (2 * step)
    scale = max(np.max(np.abs(analytic)), np.max(np.abs(numeric)))
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs(analytic - numeric)) / scale)
