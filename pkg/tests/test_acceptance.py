"""Acceptance criteria.  Each test prints one ``PASS``/``FAIL`` line, then asserts it."""
import inspect
import math
import time

import pytest

from galu import checks
from galu.experiments import EXPERIMENTS, resolve_config, run_experiment
from galu.solver import underparam_loss_prediction


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {n}: {detail}")
        assert ok, detail

    return emit


def values(rows, metric, **where):
    out = []
    for r in rows:
        if r.metric == metric and all(getattr(r, key) == v for key, v in where.items()):
            out.append(r.value)
    return out


def test_criterion_01_memorization_width(report, tmp_path):
    t0 = time.perf_counter()
    cfg = resolve_config("memorize", overrides={"m": [1000], "d": [20, 50, 100], "trials": 5})
    rows, _ = run_experiment(cfg, tmp_path)
    elapsed = time.perf_counter() - t0
    parts, ok = [], True
    for d in (20, 50, 100):
        ks = values(rows, "min_k", param_d=d)
        target = math.ceil(1000 / d)
        ok &= len(ks) == 5 and all(target <= k <= target + 2 for k in ks)
        parts.append(f"d={d}: min_k={sorted(set(int(k) for k in ks))} (ceil(m/d)={target})")
    ok &= elapsed <= 120
    report(1, ok, "; ".join(parts) + f"; {elapsed:.1f}s <= 120s")


def test_criterion_02_underparametrized_law(report, tmp_path):
    expected = {0.0625: 0.949, 0.25: 0.7507, 0.5: 0.509, 0.75: 0.2465, 1.0: None}
    t0 = time.perf_counter()
    cfg = resolve_config("underparam", overrides={"m": [4096], "d": [64], "trials": 50,
                                                  "ratios": list(expected), "activation": "galu"})
    rows, _ = run_experiment(cfg, tmp_path)
    elapsed = time.perf_counter() - t0
    parts, ok = [], True
    for ratio, ref in expected.items():
        k = round(ratio * 4096 / 64)
        mean = values(rows, "mse_mean", param_k=k)[0]
        n = len(values(rows, "mse", param_k=k))
        ok &= n >= 50
        if ref is None:
            ok &= mean <= 1e-3
            parts.append(f"{ratio}: {mean:.3g} <= 1e-3")
        else:
            ok &= abs(mean - ref) <= 0.03
            parts.append(f"{ratio}: {mean:.4f} vs {ref}")
    ok &= elapsed <= 300
    report(2, ok, "; ".join(parts) + f"; {elapsed:.1f}s <= 300s")


def test_criterion_03_rank_law_exactness(report):
    res = checks.check_rank_law(n_draws=200, m=100, d=10, seed=0)
    report(3, res.passed and res.threshold == 9, res.line())


def test_criterion_04_gd_bound(report):
    res = checks.check_gd_bound(n_instances=20, m=200, d=20, delta=0.1, seed=0)
    report(4, res.passed and res.measured == 0, res.line())


def test_criterion_05_min_eig_concentration(report):
    res = checks.check_min_eig_concentration(m=50, d=25, delta=0.1, trials=200, seed=0)
    report(5, res.passed and res.measured <= 0.164, res.line())


def test_criterion_06_kernel_identity(report):
    mc = checks.check_mc_kernel(n_pairs=50, n_seeds=10, k=1000, seed=0)
    special = checks.check_kappa_special(tol=1e-12)
    report(6, mc.passed and special.passed, mc.line() + " | " + special.line())


def test_criterion_07_hinge_gradients(report):
    res = checks.check_hinge_gradients(n_instances=100, seed=0)
    canary = checks.check_hinge_gradients(n_instances=100, seed=0, negate_indicator=True)
    report(7, res.passed and not canary.passed, res.line() + " | canary: " + canary.line())


def test_criterion_08_gate_perturbation(report):
    res = checks.check_perturbation(n_repeats=100, d=50, epsilon=0.05, delta=0.01, seed=0)
    report(8, res.passed and res.threshold == 99, res.line())


def test_criterion_09_clustered_model(report):
    mu = checks.check_cluster_mu(n=10, delta=0.01, n_seeds=100, seed=0)
    fit = checks.clustered_fit(n=10, d=400, m=200, delta=0.01, seed=0)
    k_formula = 8 * 10 / fit.mu * math.log(10 / 0.01)
    ok = mu.passed and fit.k >= k_formula and fit.train_mse <= 1e-8 and fit.span_max_err <= 1e-6
    detail = (f"{mu.line()} | k={fit.k} >= {k_formula:.1f}, train_mse={fit.train_mse:.3g} <= 1e-8, "
              f"span_err={fit.span_max_err:.3g} <= 1e-6 over {fit.n_span} probes")
    report(9, ok, detail)


def test_criterion_10_parity_and_linsep(report, tmp_path):
    t0 = time.perf_counter()
    acc = {}
    for exp in ("parity", "linsep"):
        cfg = resolve_config(exp, overrides={"k": [32], "activation": "both", "mode": "iterative"})
        assert cfg.opt_config(0).iterations == 20000 and cfg.optimizer["method"] == "adam"
        rows, _ = run_experiment(cfg, tmp_path / exp)
        for act in ("galu", "relu"):
            acc[exp, act] = values(rows, "test_accuracy", activation=act)[0]
    elapsed = time.perf_counter() - t0
    ok = all(0.45 <= acc["parity", a] <= 0.55 for a in ("galu", "relu"))
    ok &= all(acc["linsep", a] >= 0.97 for a in ("galu", "relu"))
    ok &= elapsed <= 900
    detail = ", ".join(f"{e}/{a}={v:.4f}" for (e, a), v in acc.items()) + f"; {elapsed:.1f}s <= 900s"
    report(10, ok, detail)


def test_criterion_11_exclusions(report):
    # image-data experiments are not offered, and the unspecified constants stay caller-supplied
    no_image_cmd = not any("mnist" in name for name in EXPERIMENTS)
    params = inspect.signature(underparam_loss_prediction).parameters
    constants_required = all(params[c].default is inspect.Parameter.empty for c in ("c1", "c2"))
    ok = no_image_cmd and constants_required
    report(11, ok, "excluded: image-data accuracies, the width bound with unspecified C, and "
                   "absolute constants (c1, c2 are required arguments); covered by criteria 2-5")
