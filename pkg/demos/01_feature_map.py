"""A GaLU layer is linear regression on a gated copy of the data."""
import numpy as np

from galu import GateBank, build_feature_matrix, galu_neuron, gram, min_norm_solve
from galu.datagen import gen_gaussian

# one neuron: the gate u decides, the weight w computes
x = np.array([1.0, -2.0, 0.5])
u = np.array([1.0, 0.0, 0.0])
w = np.array([0.3, 0.1, 2.0])
print("open gate  :", galu_neuron(x, w, u))
print("closed gate:", galu_neuron(x, w, -u))

# m points, k gates: the m x dk feature matrix holds x_i in block j when gate j is open
m, d, k = 8, 3, 4
data = gen_gaussian(m, d, seed=0)
gates = GateBank.draw(d, k, seed=1)
fm = build_feature_matrix(data, gates)
print("feature matrix shape:", fm.shape)
print("open gates per point:", fm.mask.sum(axis=1).astype(int))

# the Gram matrix factors into a data part and a gate part
H = gram(fm)
H_had = (data.xs @ data.xs.T) * (fm.mask @ fm.mask.T)
print("max |H - (XX^T)o(SS^T)|:", np.abs(H - H_had).max())

# with dk >= m and full rank the fit interpolates
res = min_norm_solve(fm, data.ys)
print(f"rank={res.rank}  train mse={res.train_mse:.2e}  ||w*||={np.linalg.norm(res.w_star):.3f}")

# below the threshold it cannot
narrow = build_feature_matrix(data, GateBank.draw(d, 2, seed=1))
res = min_norm_solve(narrow, data.ys)
print(f"k=2: rank={res.rank}  train mse={res.train_mse:.3f}")
