"""The infinite-width kernel, its Monte Carlo estimate, and the diversity constant lambda(X)."""
import math

import numpy as np

from galu import GateBank, build_feature_matrix, chernoff_width, kappa, lambda_exact, lambda_mc, sigma_min
from galu.datagen import gen_sphere
from galu.kernel import mc_kernel_estimate

e1, e2 = np.eye(2)
at60 = np.array([0.5, math.sqrt(3) / 2])
print("kappa at 0, 60, 90 degrees:", kappa(e1, e1), kappa(e1, at60), kappa(e1, e2))

# the fraction of random gates open on both points converges to kappa
rng = np.random.default_rng(0)
x, y = rng.standard_normal((2, 5))
x, y = x / np.linalg.norm(x), y / np.linalg.norm(y)
for k in (10, 100, 1000, 10000):
    print(f"k={k:>5}  estimate={mc_kernel_estimate(x, y, k, seed=1):.4f}  exact={kappa(x, y):.4f}")

# lambda(X) is the smallest eigenvalue of the kernel Gram
data = gen_sphere(20, 5, seed=2)
lam = lambda_exact(data)
est, se = lambda_mc(data, k=50, trials=200, seed=3)
print(f"lambda exact={lam:.4f}  mc={est:.4f} +- {se:.4f}")

# at the Chernoff width sigma_min^2 of the features clears (k/2) lambda with high probability
k = chernoff_width(data, delta=0.1, lam=lam)
hits = 0
for t in range(20):
    fm = build_feature_matrix(data, GateBank.draw(5, k, seed=100 + t), materialize=False)
    hits += sigma_min(fm) ** 2 >= 0.5 * k * lam
print(f"chernoff width k={k}: event held in {hits}/20 draws")
