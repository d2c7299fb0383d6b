"""Experiment harness: resolved configs, seeded tasks, result rows.

Every experiment expands its config into a list of tasks.  Task ``i`` draws
all randomness from ``derive_seed(cfg.seed, i)``, so the rows do not depend on
how many workers ran them or in which order.  Rows are sorted by a canonical
key before they are written.
"""
import csv
import dataclasses
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from . import checks
from ._rng import derive_seed, make_rng
from .datagen import gen_gaussian, gen_linear_margin, gen_parity
from .features import DEFAULT_MEMORY_BUDGET, build_feature_matrix
from .model import GateBank, NaturalParams, galu_predict, relu_predict
from .solver import projected_loss
from .trainer import OptimizerConfig, accuracy, mse, train_natural, train_relu

log = logging.getLogger("galu.experiments")

EXPERIMENTS = ("memorize", "underparam", "clustered", "linsep", "parity", "kernel-check", "theory-check")
ACTIVATIONS = ("galu", "relu", "both")
MODES = ("closed-form", "iterative")
CSV_HEADER = ("experiment", "param_m", "param_d", "param_k", "activation", "metric", "value", "seed", "elapsed_s")
FULL_BUDGET = 100_000

DEFAULTS = {
    "memorize": dict(m=[1000], d=[20, 50, 100], trials=5),
    "underparam": dict(m=[4096], d=[64], trials=50,
                       ratios=[0.0625, 0.125, 0.25, 0.375, 0.5, 0.625, 0.75, 0.875, 1.0]),
    "clustered": dict(m=[200], d=[400], trials=1, n_test=50, delta=0.01),
    "linsep": dict(m=[50000], d=[100], k=[16, 32, 64, 128], trials=1, activation="both",
                   mode="iterative", loss="hinge", n_test=10000),
    "parity": dict(m=[50000], d=[100], k=[16, 32, 64, 128], trials=1, activation="both",
                   mode="iterative", loss="hinge", n_test=10000),
    "kernel-check": dict(),
    "theory-check": dict(),
}


@dataclass
class ExperimentConfig:
    experiment: str
    m: List[int] = field(default_factory=lambda: [1000])
    d: List[int] = field(default_factory=lambda: [20])
    k: Optional[List[int]] = None
    seed: int = 0
    trials: int = 1
    activation: str = "galu"
    mode: str = "closed-form"
    success_mse: float = 0.01
    k_max: Optional[int] = None
    ratios: List[float] = field(default_factory=lambda: [0.25, 0.5, 1.0])
    delta: float = 0.1
    n_clusters: int = 10
    n_test: int = 1000
    margin: float = 0.01
    loss: str = "mse"
    relu_trials: int = 1
    optimizer: dict = field(default_factory=lambda: {"method": "adam", "step_size": 1e-3,
                                                     "batch_size": 128, "iterations": 20000})
    full_budget: bool = False
    workers: int = 1
    memory_budget: int = DEFAULT_MEMORY_BUDGET
    negate_indicator: bool = False
    out: str = "results"

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"experiment must be one of {EXPERIMENTS}, got {self.experiment!r}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}, got {self.activation!r}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not self.success_mse > 0:
            raise ValueError("success_mse must be positive")
        for name in ("m", "d", "ratios") + (("k",) if self.k is not None else ()):
            values = getattr(self, name)
            if not isinstance(values, list) or not values:
                raise ValueError(f"{name} must be a non-empty list")
            if name != "ratios" and any(int(v) != v or v < 1 for v in values):
                raise ValueError(f"{name} entries must be positive integers")
        if any(not r > 0 for r in self.ratios):
            raise ValueError("ratios must be positive")
        if self.trials < 1 or self.relu_trials < 0 or self.workers < 1:
            raise ValueError("trials and workers must be positive")
        if self.k_max is not None and self.k_max < 1:
            raise ValueError("k_max must be positive")
        if self.memory_budget < 1:
            raise ValueError("memory_budget must be a positive number of bytes")
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        self.opt_config(0)

    def opt_config(self, seed):
        opt = dict(self.optimizer)
        if self.full_budget:
            opt["iterations"] = FULL_BUDGET
        return OptimizerConfig(seed=seed, **opt)

    @property
    def activations(self):
        return ("galu", "relu") if self.activation == "both" else (self.activation,)

    def to_dict(self):
        return dataclasses.asdict(self)


def resolve_config(experiment, file_values=None, overrides=None):
    """Defaults, then the config file, then explicit overrides."""
    values = dict(DEFAULTS.get(experiment, {}))
    names = {f.name for f in dataclasses.fields(ExperimentConfig)}
    for source in (file_values or {}, overrides or {}):
        unknown = set(source) - names
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        if "optimizer" in source:
            merged = dict(ExperimentConfig.__dataclass_fields__["optimizer"].default_factory())
            merged.update(values.get("optimizer", {}))
            merged.update(source["optimizer"])
            source = dict(source, optimizer=merged)
        values.update({key: v for key, v in source.items() if v is not None})
    if values.get("experiment", experiment) != experiment:
        raise ValueError(f"config file is for {values['experiment']!r}, not {experiment!r}")
    values["experiment"] = experiment
    return ExperimentConfig(**values)


@dataclass(frozen=True)
class ResultRow:
    experiment: str
    param_m: Optional[int]
    param_d: Optional[int]
    param_k: Optional[int]
    activation: str
    metric: str
    value: float
    seed: int
    elapsed_s: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ValueError(f"metric {self.metric!r} is not finite: {self.value}")

    def sort_key(self):
        def num(v):
            return -1 if v is None else v

        return (self.experiment, num(self.param_m), num(self.param_d), num(self.param_k),
                self.activation, self.metric, self.seed)


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "%.17g" % float(v)


def write_csv(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in rows:
            w.writerow([r.experiment, _fmt(r.param_m), _fmt(r.param_d), _fmt(r.param_k), r.activation,
                        r.metric, _fmt(r.value), _fmt(r.seed), _fmt(r.elapsed_s)])


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def run_tasks(fn, tasks, workers=1):
    """Map ``fn(*task)`` over ``tasks`` on at most ``workers`` processes; output order follows input."""
    if workers <= 1 or len(tasks) <= 1:
        return [fn(*t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
        return list(pool.map(fn, *zip(*tasks)))


def _collect(nested):
    rows = [r for part in nested for r in part]
    return sorted(rows, key=ResultRow.sort_key)


def _row(cfg, m, d, k, act, metric, value, seed, elapsed):
    return ResultRow(cfg.experiment, m, d, k, act, metric, float(value), int(seed), float(elapsed))


# ---------------------------------------------------------------------------
# memorize


def _init_params(d, k, seed):
    """``W ~ N(0, 1/d)`` and ``alpha ~ N(0, 1)``; prefixes are nested in ``k``."""
    rng = make_rng(seed)
    W = rng.standard_normal((d, k)) / math.sqrt(d)
    alpha = rng.standard_normal(k)
    return W, alpha


def _train_mse(data, gates, W0, a0, act, opt):
    if act == "galu":
        params, trace = train_natural(data, gates, NaturalParams(W0, a0), opt)
        pred = galu_predict(data.xs, params, gates)
    else:
        U, alpha, trace = train_relu(data, GateBank(W0), a0, opt)
        pred = relu_predict(data.xs, U, alpha)
    return mse(pred, data.ys), bool(trace.info["plateaued"])


def search_min_k(success, k_max):
    """Smallest ``k`` in ``[1, k_max]`` with ``success(k)``, by binary search.

    Returns ``(k or None, evaluations, non_monotone)``.  ``evaluations`` maps
    every probed ``k`` to its outcome.  Bisection alone never sees a
    contradiction, so the width just above the answer is probed as well.  If
    the probes contradict monotonicity, the search falls back to a linear scan
    for the smallest ``k`` at which both ``k`` and ``k + 1`` succeed.
    """
    evals = {}

    def probe(k):
        if k not in evals:
            evals[k] = bool(success(k))
            log.info("probe k=%d -> %s", k, "success" if evals[k] else "fail")
        return evals[k]

    if not probe(k_max):
        return None, evals, False
    lo, hi = 0, k_max
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if probe(mid):
            hi = mid
        else:
            lo = mid
    if hi < k_max:
        probe(hi + 1)
    ks = sorted(evals)
    non_monotone = any(evals[a] and not evals[b] for i, a in enumerate(ks) for b in ks[i + 1:])
    if non_monotone:
        log.warning("non-monotone success in k; scanning linearly up to %d", k_max)
        for k in range(1, k_max + 1):
            if probe(k) and (k == k_max or probe(k + 1)):
                return k, evals, True
    return hi, evals, non_monotone


def _memorize_task(cfg, m, d, seed):
    t0 = time.perf_counter()
    data = gen_gaussian(m, d, derive_seed(seed, 0))
    k_max = cfg.k_max if cfg.k_max is not None else 2 * math.ceil(m / d) + 10
    gates_full = GateBank.draw(d, k_max, derive_seed(seed, 1))
    W_full, a_full = _init_params(d, k_max, derive_seed(seed, 2))
    opt = cfg.opt_config(derive_seed(seed, 3))
    rows = []
    for act in cfg.activations:
        plateau = []
        closed = act == "galu" and cfg.mode == "closed-form"

        def success(k):
            gates = GateBank(gates_full.gates[:, :k], seed=gates_full.seed)
            if closed:
                fm = build_feature_matrix(data, gates, materialize=False, memory_budget=cfg.memory_budget)
                loss, _ = projected_loss(fm, data.ys)
                return loss < cfg.success_mse
            # ReLU starts from the same W, which doubles as its first layer
            loss, flat = _train_mse(data, gates, W_full[:, :k], a_full[:k], act, opt)
            plateau.append(flat)
            return loss < cfg.success_mse

        k_min, evals, non_mono = search_min_k(success, k_max)
        el = time.perf_counter() - t0
        if k_min is None:
            log.warning("m=%d d=%d %s: k_max=%d is not enough", m, d, act, k_max)
            rows.append(_row(cfg, m, d, k_max, act, "k_max_insufficient", 1, seed, el))
        else:
            rows.append(_row(cfg, m, d, None, act, "min_k", k_min, seed, el))
            rows.append(_row(cfg, m, d, None, act, "ceil_m_over_d", math.ceil(m / d), seed, el))
        rows.append(_row(cfg, m, d, None, act, "evaluations", len(evals), seed, el))
        rows.append(_row(cfg, m, d, None, act, "non_monotone", int(non_mono), seed, el))
        if plateau:
            rows.append(_row(cfg, m, d, None, act, "plateaued", int(all(plateau)), seed, el))
            if not all(plateau):
                log.warning("m=%d d=%d %s: reduced-budget trace has not plateaued", m, d, act)
    return rows


def cmd_memorize(cfg: ExperimentConfig):
    tasks = []
    for m in cfg.m:
        for d in cfg.d:
            for t in range(cfg.trials):
                tasks.append((cfg, m, d, derive_seed(cfg.seed, len(tasks))))
    return _collect(run_tasks(_memorize_task, tasks, cfg.workers))


# ---------------------------------------------------------------------------
# underparam


def width_for_ratio(ratio, m, d):
    return max(1, int(round(ratio * m / d)))


def _underparam_task(cfg, m, d, k, seed, with_relu):
    t0 = time.perf_counter()
    data = gen_gaussian(m, d, derive_seed(seed, 0))
    gates = GateBank.draw(d, k, derive_seed(seed, 1))
    fm = build_feature_matrix(data, gates, materialize=False, memory_budget=cfg.memory_budget)
    loss, rank = projected_loss(fm, data.ys)
    el = time.perf_counter() - t0
    rows = [
        _row(cfg, m, d, k, "galu", "mse", loss, seed, el),
        _row(cfg, m, d, k, "galu", "rank", rank, seed, el),
    ]
    if with_relu:
        W0, a0 = _init_params(d, k, derive_seed(seed, 2))
        relu_mse, flat = _train_mse(data, gates, W0, a0, "relu", cfg.opt_config(derive_seed(seed, 3)))
        el = time.perf_counter() - t0
        rows.append(_row(cfg, m, d, k, "relu", "mse", relu_mse, seed, el))
        rows.append(_row(cfg, m, d, k, "relu", "plateaued", int(flat), seed, el))
    return rows


def summarize_underparam(cfg, rows):
    """Per-width mean and standard error of the trial mse, plus the two reference curves."""
    out = []
    groups = {}
    for r in rows:
        if r.metric == "mse":
            groups.setdefault((r.param_m, r.param_d, r.param_k, r.activation), []).append(r.value)
    for (m, d, k, act), vals in sorted(groups.items()):
        v = np.array(vals)
        se = float(np.std(v, ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0
        ratio = k * d / m
        out += [
            _row(cfg, m, d, k, act, "mse_mean", float(v.mean()), cfg.seed, 0.0),
            _row(cfg, m, d, k, act, "mse_stderr", se, cfg.seed, 0.0),
            _row(cfg, m, d, k, act, "kd_over_m", ratio, cfg.seed, 0.0),
            _row(cfg, m, d, k, act, "ref_1_minus_ratio", 1.0 - ratio, cfg.seed, 0.0),
            _row(cfg, m, d, k, act, "ref_1_minus_2ratio", 1.0 - 2.0 * ratio, cfg.seed, 0.0),
        ]
    return out


def cmd_underparam(cfg: ExperimentConfig):
    relu = "relu" in cfg.activations
    tasks = []
    for m in cfg.m:
        for d in cfg.d:
            ks = cfg.k if cfg.k is not None else [width_for_ratio(r, m, d) for r in cfg.ratios]
            for k in ks:
                for t in range(cfg.trials):
                    tasks.append((cfg, m, d, k, derive_seed(cfg.seed, len(tasks)), relu and t < cfg.relu_trials))
    rows = _collect(run_tasks(_underparam_task, tasks, cfg.workers))
    return sorted(rows + summarize_underparam(cfg, rows), key=ResultRow.sort_key)


# ---------------------------------------------------------------------------
# clustered


def _clustered_task(cfg, m, d, k, seed):
    t0 = time.perf_counter()
    fit = checks.clustered_fit(cfg.n_clusters, d, m, n_test=cfg.n_test, delta=cfg.delta, seed=seed, k=k,
                               memory_budget=cfg.memory_budget)
    el = time.perf_counter() - t0
    metrics = {
        "mu": fit.mu,
        "k_threshold": fit.k_threshold,
        "rank": fit.rank,
        "train_mse": fit.train_mse,
        "test_mse": fit.test_mse,
        "span_max_err": fit.span_max_err,
    }
    return [_row(cfg, m, d, fit.k, "galu", name, v, seed, el) for name, v in metrics.items()]


def cmd_clustered(cfg: ExperimentConfig):
    tasks = []
    for m in cfg.m:
        for d in cfg.d:
            for k in (cfg.k if cfg.k is not None else [None]):
                for t in range(cfg.trials):
                    tasks.append((cfg, m, d, k, derive_seed(cfg.seed, len(tasks))))
    return _collect(run_tasks(_clustered_task, tasks, cfg.workers))


# ---------------------------------------------------------------------------
# linsep / parity


def _classify_task(cfg, m, d, k, act, seed):
    t0 = time.perf_counter()
    n = m + cfg.n_test
    if cfg.experiment == "linsep":
        full = gen_linear_margin(n, d, cfg.margin, derive_seed(seed, 0))
    else:
        full = gen_parity(n, d, derive_seed(seed, 0))
    train = full.subset(np.arange(m))
    test = full.subset(np.arange(m, n))
    gates = GateBank.draw(d, k, derive_seed(seed, 1))
    W0, a0 = _init_params(d, k, derive_seed(seed, 2))
    opt = cfg.opt_config(derive_seed(seed, 3))
    if act == "galu":
        params, trace = train_natural(train, gates, NaturalParams(W0, a0), opt, loss=cfg.loss)
        predict = lambda xs: galu_predict(xs, params, gates)  # noqa: E731
    else:
        U, alpha, trace = train_relu(train, GateBank(W0), a0, opt, loss=cfg.loss)
        predict = lambda xs: relu_predict(xs, U, alpha)  # noqa: E731
    flat = bool(trace.info["plateaued"])
    if not flat:
        log.warning("%s d=%d k=%d %s: trace has not plateaued at %d iterations",
                    cfg.experiment, d, k, act, opt.iterations)
    el = time.perf_counter() - t0
    return [
        _row(cfg, m, d, k, act, "test_accuracy", accuracy(predict(test.xs), test.ys), seed, el),
        _row(cfg, m, d, k, act, "train_accuracy", accuracy(predict(train.xs), train.ys), seed, el),
        _row(cfg, m, d, k, act, "final_objective", trace.final_objective, seed, el),
        _row(cfg, m, d, k, act, "plateaued", int(flat), seed, el),
    ]


def _classify(cfg):
    ks = cfg.k if cfg.k is not None else [32]
    tasks = []
    for m in cfg.m:
        for d in cfg.d:
            for k in ks:
                for t in range(cfg.trials):
                    # both activations share the task seed: same data, gates and init
                    seed = derive_seed(cfg.seed, len(tasks))
                    for act in cfg.activations:
                        tasks.append((cfg, m, d, k, act, seed))
    return _collect(run_tasks(_classify_task, tasks, cfg.workers))


def cmd_linsep(cfg: ExperimentConfig):
    return _classify(cfg)


def cmd_parity(cfg: ExperimentConfig):
    return _classify(cfg)


# ---------------------------------------------------------------------------
# property suites


def _check_rows(cfg, results, elapsed):
    rows = []
    for r in results:
        rows += [
            _row(cfg, None, None, None, "galu", r.name, r.measured, cfg.seed, elapsed),
            _row(cfg, None, None, None, "galu", r.name + ":threshold", r.threshold, cfg.seed, elapsed),
            _row(cfg, None, None, None, "galu", r.name + ":pass", int(r.passed), cfg.seed, elapsed),
        ]
    return rows


def cmd_kernel_check(cfg: ExperimentConfig):
    """Returns ``(rows, check_results)``."""
    t0 = time.perf_counter()
    results = checks.kernel_suite(seed=cfg.seed)
    return sorted(_check_rows(cfg, results, time.perf_counter() - t0), key=ResultRow.sort_key), results


def cmd_theory_check(cfg: ExperimentConfig):
    """Returns ``(rows, check_results)``; ``negate_indicator`` injects the gate bug."""
    t0 = time.perf_counter()
    results = checks.theory_suite(seed=cfg.seed, negate_indicator=cfg.negate_indicator)
    return sorted(_check_rows(cfg, results, time.perf_counter() - t0), key=ResultRow.sort_key), results


COMMANDS = {
    "memorize": cmd_memorize,
    "underparam": cmd_underparam,
    "clustered": cmd_clustered,
    "linsep": cmd_linsep,
    "parity": cmd_parity,
    "kernel-check": cmd_kernel_check,
    "theory-check": cmd_theory_check,
}


def run_experiment(cfg: ExperimentConfig, out_dir=None):
    """Run ``cfg`` and write ``results.csv``, ``config.json`` and (for checks) ``summary.txt``.

    Returns ``(rows, check_results or None)``.
    """
    out_dir = cfg.out if out_dir is None else out_dir
    os.makedirs(out_dir, exist_ok=True)
    if not os.access(out_dir, os.W_OK):
        raise PermissionError(f"output directory {out_dir!r} is not writable")
    with open(os.path.join(out_dir, "config.json"), "w") as fh:
        json.dump(cfg.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    result = COMMANDS[cfg.experiment](cfg)
    rows, results = result if isinstance(result, tuple) else (result, None)
    write_csv(os.path.join(out_dir, "results.csv"), rows)
    if results is not None:
        with open(os.path.join(out_dir, "summary.txt"), "w") as fh:
            for r in results:
                fh.write(r.line() + "\n")
    return rows, results
