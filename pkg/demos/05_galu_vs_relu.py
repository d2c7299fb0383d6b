"""GaLU and ReLU side by side: equal hinge gradients at W = U, and a small classification run."""
import numpy as np

from galu import GateBank, NaturalParams, galu_predict, relu_predict
from galu.datagen import gen_linear_margin, gen_sphere
from galu.serialization import load_model, save_model
from galu.trainer import OptimizerConfig, accuracy, hinge_grad_equality, train_natural, train_relu

# with W = U and small outputs the two networks have the same hinge gradient
data = gen_sphere(30, 6, seed=0).with_labels(np.sign(np.random.default_rng(1).standard_normal(30)))
gates = GateBank.draw(6, 10, seed=2)
alpha = np.full(10, 0.05)
eq = hinge_grad_equality(data, gates, gates.gates, alpha)
print(f"|grad GaLU|={eq.galu_grad_norm:.4f}  |grad ReLU|={eq.relu_grad_norm:.4f}  max diff={eq.max_abs_diff:.1e}")
bug = hinge_grad_equality(data, gates, gates.gates, alpha, negate_indicator=True)
print(f"with the gate negated the difference is {bug.max_abs_diff:.3f}")

# a linearly separable task, trained with Adam on the hinge loss
full = gen_linear_margin(3000, 20, 0.01, seed=3)
train = full.subset(np.arange(2000))
test = full.subset(np.arange(2000, 3000))
k = 16
gates = GateBank.draw(20, k, seed=4)
rng = np.random.default_rng(5)
W0 = rng.standard_normal((20, k)) / np.sqrt(20)
a0 = rng.standard_normal(k)
cfg = OptimizerConfig(method="adam", step_size=1e-3, batch_size=128, iterations=3000, seed=6)

params, _ = train_natural(train, gates, NaturalParams(W0, a0), cfg, loss="hinge")
U, alpha, _ = train_relu(train, GateBank(W0), a0, cfg, loss="hinge")
print(f"test accuracy  GaLU={accuracy(galu_predict(test.xs, params, gates), test.ys):.3f}"
      f"  ReLU={accuracy(relu_predict(test.xs, U, alpha), test.ys):.3f}")

# the trained GaLU network survives a JSON round trip bit for bit
save_model("galu_linsep.json", params, gates)
p2, g2, _ = load_model("galu_linsep.json")
print("reloaded predictions identical:",
      np.array_equal(galu_predict(test.xs, p2, g2), galu_predict(test.xs, params, gates)))
