"""Property suites behind ``galu kernel-check`` and ``galu theory-check``.

Each check draws its own seeded instances, measures one number and compares it
with a threshold.  The result records both, so a failing row says by how much.
"""
import math
from dataclasses import dataclass

import numpy as np

from ._linalg import min_eig
from ._rng import derive_seed, make_rng
from .datagen import (
    cluster_dimension,
    cluster_mu,
    cluster_width,
    gen_clustered,
    gen_gaussian,
    gen_sphere,
    make_cluster_model,
)
from .features import DEFAULT_MEMORY_BUDGET, build_feature_matrix, gate_mask, gram
from .kernel import kappa, mc_kernel_estimate
from .model import GateBank, LabeledSet
from .solver import min_norm_solve, predict_dual, projected_loss
from .spectral import chernoff_width, khatri_rao_bound, lambda_exact, lambda_mc, numerical_rank
from .trainer import (
    gate_perturbation_gap,
    gd_convex,
    gd_iterations,
    hinge_grad_equality,
    perturbation_bound,
    perturbation_width,
)


@dataclass(frozen=True)
class CheckResult:
    name: str
    measured: float
    threshold: float
    relation: str
    passed: bool
    detail: str = ""

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name}: measured={self.measured:.6g} {self.relation} threshold={self.threshold:.6g}  {self.detail}".rstrip()


def _result(name, measured, threshold, relation, detail=""):
    if relation == "<=":
        ok = measured <= threshold
    elif relation == ">=":
        ok = measured >= threshold
    else:
        raise ValueError(f"unknown relation {relation!r}")
    return CheckResult(name, float(measured), float(threshold), relation, bool(ok), detail)


def _unit(v):
    return v / np.linalg.norm(v)


# ---------------------------------------------------------------------------
# kernel suite


def check_kappa_special(tol=1e-12):
    """kappa on unit vectors at angles 0, pi/2 and pi/3 is 1/2, 0 and 1/6."""
    e1, e2 = np.eye(2)
    sixty = np.array([0.5, math.sqrt(3.0) / 2.0])
    err = max(abs(kappa(e1, e1) - 0.5), abs(kappa(e1, e2)), abs(kappa(e1, sixty) - 1.0 / 6.0))
    return _result("kappa_special_values", err, tol, "<=")


def check_mc_kernel(n_pairs=50, n_seeds=10, k=1000, d=10, seed=0):
    """Fraction of (pair, seed) MC estimates within ``3/sqrt(k)`` of kappa."""
    rng = make_rng(seed, 0)
    tol = 3.0 / math.sqrt(k)
    hits = 0
    for p in range(n_pairs):
        x = _unit(rng.standard_normal(d))
        y = _unit(rng.standard_normal(d))
        exact = kappa(x, y)
        for s in range(n_seeds):
            hits += abs(mc_kernel_estimate(x, y, k, derive_seed(seed, 1, p, s)) - exact) <= tol
    total = n_pairs * n_seeds
    return _result("mc_kernel_identity", hits / total, 0.98, ">=", f"{hits}/{total} within 3/sqrt({k})")


def check_lambda_mc(m=20, d=5, k=100, trials=100, seed=0, n_se=4.0):
    """MC lambda(X) agrees with the closed-form kernel value within ``n_se`` jackknife errors."""
    data = gen_sphere(m, d, derive_seed(seed, 0))
    exact = lambda_exact(data)
    est, se = lambda_mc(data, k, trials, derive_seed(seed, 1))
    z = abs(est - exact) / max(se, 1e-300)
    return _result("lambda_mc_vs_exact", z, n_se, "<=", f"exact={exact:.6g} mc={est:.6g} se={se:.3g}")


def check_khatri_rao(n_samples=5, m=20, d=8, seed=0):
    """``sigma_min(X * X)^2 / (2 pi) <= lambda(X)``; measured is the worst excess."""
    worst = -math.inf
    for i in range(n_samples):
        data = gen_sphere(m, d, derive_seed(seed, i))
        worst = max(worst, khatri_rao_bound(data) - lambda_exact(data))
    return _result("khatri_rao_lower_bound", worst, 1e-12, "<=", "max of bound - lambda")


def kernel_suite(seed=0):
    return [
        check_kappa_special(),
        check_mc_kernel(seed=seed),
        check_lambda_mc(seed=seed),
        check_khatri_rao(seed=seed),
    ]


# ---------------------------------------------------------------------------
# theory suite


def check_min_eig_concentration(m=50, d=25, delta=0.1, trials=200, seed=0):
    """Fraction of gate draws with ``sigma_min^2(X-bar) < (k/2) lambda(X)`` at the Chernoff width."""
    data = gen_sphere(m, d, derive_seed(seed, 0))
    lam = lambda_exact(data)
    k = chernoff_width(data, delta, lam=lam)
    fails = 0
    for t in range(trials):
        gates = GateBank.draw(d, k, derive_seed(seed, 1, t))
        fm = build_feature_matrix(data, gates, materialize=False)
        fails += min_eig(gram(fm, "raw")) < 0.5 * k * lam
    limit = delta + 3.0 * math.sqrt(delta * (1.0 - delta) / trials)
    return _result("min_eig_concentration", fails / trials, limit, "<=", f"k={k} failures={fails}/{trials}")


def check_gd_bound(n_instances=20, m=200, d=20, delta=0.1, eps=1e-6, seed=0, log_every=1):
    """Count logged iterations where ``F(w_t)`` exceeds the exponential bound.

    Instances are sphere samples with ``k = chernoff_width``; only instances on
    which ``sigma_min^2 >= (k/2) lambda`` holds are counted.
    """
    violations = 0
    used = 0
    for i in range(n_instances):
        data = gen_sphere(m, d, derive_seed(seed, i))
        lam = lambda_exact(data)
        k = chernoff_width(data, delta, lam=lam)
        gates = GateBank.draw(d, k, derive_seed(seed, i, 1))
        fm = build_feature_matrix(data, gates, materialize=False)
        probe = gd_convex(fm, data.ys, 0, delta=delta, lam=lam)
        if not (probe.info["event_holds"] and probe.info["full_rank"]):
            continue
        R = probe.info["R"]
        iters = gd_iterations(lam, R, k, m, probe.info["w_star_norm_sq"], eps)
        trace = gd_convex(fm, data.ys, iters, delta=delta, lam=lam, log_every=log_every)
        obj = trace.objectives
        bound = trace.column("gd_bound")
        violations += int(np.sum(obj > bound))
        used += 1
    if used == 0:
        return _result("gd_bound", math.inf, 0, "<=", "no instance satisfied the event")
    return _result("gd_bound", violations, 0, "<=", f"violations over {used} instances")


def rank_law_cases(m=100, d=10, seed=0):
    """Ten feature matrices of varied rank: ``k = 1..9`` and one with duplicated rows."""
    cases = []
    for k in range(1, 10):
        data = gen_gaussian(m, d, derive_seed(seed, k))
        gates = GateBank.draw(d, k, derive_seed(seed, k, 1))
        cases.append(build_feature_matrix(data, gates))
    half = gen_gaussian(m // 2, d, derive_seed(seed, 10)).xs
    dup = LabeledSet(np.vstack([half, half]), np.zeros(2 * (m // 2)))
    cases.append(build_feature_matrix(dup, GateBank.draw(d, 20, derive_seed(seed, 10, 1))))
    return cases


def check_rank_law(n_draws=200, m=100, d=10, seed=0):
    """Cases where the MC mean of the minimum loss lies within 3 standard errors of ``1 - rank/m``."""
    hits = 0
    cases = rank_law_cases(m, d, seed)
    for c, fm in enumerate(cases):
        Y = make_rng(seed, 2, c).standard_normal((fm.m, n_draws))
        losses, _ = projected_loss(fm, Y)
        law = 1.0 - numerical_rank(fm) / fm.m
        se = float(np.std(losses, ddof=1)) / math.sqrt(n_draws)
        hits += abs(float(np.mean(losses)) - law) <= 3.0 * max(se, 1e-15)
    return _result("rank_loss_law", hits, len(cases) - 1, ">=", f"{hits}/{len(cases)} cases within 3 SE")


def check_hinge_gradients(n_instances=100, m=20, d=5, k=8, seed=0, negate_indicator=False):
    """Max ``|dL/dW (GaLU) - dL/dU (ReLU)|`` under hinge loss with outputs in ``[-1, 1]``."""
    worst = 0.0
    for i in range(n_instances):
        rng = make_rng(seed, i)
        xs = rng.standard_normal((m, d))
        ys = rng.choice(np.array([-1.0, 1.0]), size=m)
        gates = GateBank(rng.standard_normal((d, k)))
        W = rng.standard_normal((d, k))
        alpha = rng.standard_normal(k)
        peak = max(np.max(np.abs((gate_mask(xs, gates) * (xs @ W)) @ alpha)),
                   np.max(np.abs(np.maximum(xs @ gates.gates, 0.0) @ alpha)))
        alpha *= 0.5 * math.sqrt(k) / max(peak, 1e-300)
        res = hinge_grad_equality(LabeledSet(xs, ys), gates, W, alpha, negate_indicator=negate_indicator)
        worst = max(worst, res.max_abs_diff)
    name = "hinge_gradient_equality" + ("[negate_indicator]" if negate_indicator else "")
    return _result(name, worst, 1e-12, "<=", f"{n_instances} instances")


def check_perturbation(n_repeats=100, d=50, epsilon=0.05, delta=0.01, n_probe=1000, seed=0):
    """Repeats whose empirical feature gap stays below the perturbation bound."""
    k = perturbation_width(d, epsilon, delta)
    bound = perturbation_bound(d, epsilon)
    hits = 0
    worst = 0.0
    for r in range(n_repeats):
        gates = GateBank.draw(d, k, derive_seed(seed, r), source="sphere")
        gap = gate_perturbation_gap(gates, epsilon, n_probe, derive_seed(seed, r, 1), delta=delta)
        hits += gap.empirical_sup <= bound
        worst = max(worst, gap.empirical_sup)
    need = math.ceil(0.99 * n_repeats)
    return _result("gate_perturbation", hits, need, ">=", f"k={k} bound={bound:.4g} worst={worst:.4g}")


def check_cluster_mu(n=10, delta=0.01, n_seeds=100, seed=0):
    """Seeds with ``mu >= 1/8`` at the cluster dimension."""
    d = cluster_dimension(n, delta)
    hits = 0
    for s in range(n_seeds):
        hits += cluster_mu(make_cluster_model(n, d, derive_seed(seed, s), delta, 1).centers) >= 0.125
    need = math.ceil(0.99 * n_seeds)
    return _result("cluster_mu_bound", hits, need, ">=", f"n={n} d={d}")


@dataclass(frozen=True)
class ClusteredFit:
    mu: float
    k_threshold: int
    k: int
    rank: int
    train_mse: float
    test_mse: float
    span_max_err: float
    n_span: int


def clustered_fit(n=10, d=400, m=200, n_test=50, delta=0.01, seed=0, k=None, n_span=20,
                  memory_budget=DEFAULT_MEMORY_BUDGET):
    """Closed-form GaLU fit on the clustered model with sphere gates.

    The cap radius uses the threshold width ``(8n/mu) log(n/delta)``; ``k``
    overrides the number of gates actually trained.  Span probes are positive
    combinations of a cluster's training points, projected to the sphere.
    """
    mu = cluster_mu(make_cluster_model(n, d, seed, delta, 1).centers)
    k_thr = cluster_width(n, mu, delta)
    model = make_cluster_model(n, d, seed, delta, k_thr)
    k = k_thr if k is None else int(k)
    train, q = gen_clustered(model, m, derive_seed(seed, 1))
    test, _ = gen_clustered(model, n_test, derive_seed(seed, 2))
    gates = GateBank.draw(d, k, derive_seed(seed, 3), source="sphere")
    fm = build_feature_matrix(train, gates, materialize=False, memory_budget=memory_budget)
    sol = min_norm_solve(fm, train.ys)

    pred_test = predict_dual(fm, sol, test.xs, gate_mask(test.xs, gates))
    test_mse = float(np.mean((pred_test - test.ys) ** 2))

    rng = make_rng(seed, 4)
    probes, labels = [], []
    for _ in range(n_span):
        c = int(rng.integers(model.n))
        idx = np.flatnonzero(q == c)
        if idx.size == 0:
            continue
        x = rng.dirichlet(np.ones(idx.size)) @ train.xs[idx]
        x = x / np.linalg.norm(x)
        probes.append(x)
        labels.append(float(x @ model.directions[c]))
    span_err = 0.0
    if probes:
        P = np.array(probes)
        pred = predict_dual(fm, sol, P, gate_mask(P, gates))
        span_err = float(np.max(np.abs(pred - np.array(labels))))
    return ClusteredFit(mu, k_thr, k, sol.rank, sol.train_mse, test_mse, span_err, len(probes))


def check_clustered(n=10, d=400, m=200, delta=0.01, seed=0):
    fit = clustered_fit(n, d, m, delta=delta, seed=seed)
    detail = f"k={fit.k} mu={fit.mu:.4g}"
    return [
        _result("clustered_train_mse", fit.train_mse, 1e-8, "<=", detail),
        _result("clustered_span_error", fit.span_max_err, 1e-6, "<=", f"{fit.n_span} probes"),
    ]


def theory_suite(seed=0, negate_indicator=False):
    results = [
        check_min_eig_concentration(seed=seed),
        check_gd_bound(seed=seed),
        check_rank_law(seed=seed),
        check_hinge_gradients(seed=seed, negate_indicator=negate_indicator),
        check_perturbation(seed=seed),
        check_cluster_mu(seed=seed),
    ]
    results.extend(check_clustered(seed=seed))
    return results


__all__ = [
    "CheckResult",
    "ClusteredFit",
    "check_cluster_mu",
    "check_clustered",
    "check_kappa_special",
    "check_khatri_rao",
    "check_lambda_mc",
    "check_min_eig_concentration",
    "check_mc_kernel",
    "check_perturbation",
    "check_gd_bound",
    "check_rank_law",
    "check_hinge_gradients",
    "clustered_fit",
    "kernel_suite",
    "rank_law_cases",
    "theory_suite",
]
