"""Clustered data with a linear label map per cluster: a wide enough GaLU layer fits it exactly."""

from galu.checks import clustered_fit
from galu.datagen import cluster_dimension, cluster_mu, make_cluster_model

n, delta = 10, 0.01
d = cluster_dimension(n, delta)
mus = [cluster_mu(make_cluster_model(n, d, s, delta, 1).centers) for s in range(20)]
print(f"n={n}, d={d}: mu over 20 seeds in [{min(mus):.4f}, {max(mus):.4f}] (need >= 1/8)")

fit = clustered_fit(n=10, d=400, m=200, n_test=50, delta=delta, seed=0)
print(f"k={fit.k} (threshold {fit.k_threshold})  rank={fit.rank}")
print(f"train mse={fit.train_mse:.2e}  test mse={fit.test_mse:.2e}  span error={fit.span_max_err:.2e}")

for k in (1, 5, 20):
    f = clustered_fit(n=10, d=400, m=200, n_test=50, delta=delta, seed=0, k=k)
    print(f"k={k:>3}: train mse={f.train_mse:.3e}  test mse={f.test_mse:.3e}")
