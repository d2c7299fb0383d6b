"""Smallest width that memorizes random labels, found by bisection over nested gate sets."""
import math

from galu import GateBank, build_feature_matrix, projected_loss
from galu.datagen import gen_gaussian
from galu.experiments import search_min_k

m = 500
for d in (10, 25, 50):
    data = gen_gaussian(m, d, seed=d)
    k_max = 2 * math.ceil(m / d) + 10
    gates = GateBank.draw(d, k_max, seed=d + 1)

    def fits(k):
        sub = GateBank(gates.gates[:, :k])
        loss, _ = projected_loss(build_feature_matrix(data, sub, materialize=False), data.ys)
        return loss < 0.01

    k, evals, _ = search_min_k(fits, k_max)
    print(f"d={d:>3}: min k={k}  ceil(m/d)={math.ceil(m / d)}  probes={sorted(evals)}")
