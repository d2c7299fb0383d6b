"""Expected best loss on random labels is 1 - rank/m."""
import numpy as np

from galu import GateBank, build_feature_matrix, projected_loss
from galu.datagen import gen_gaussian

m, d, trials = 512, 16, 20
print(" kd/m   mean mse   1 - kd/m")
for ratio in (0.125, 0.25, 0.5, 0.75, 1.0):
    k = int(ratio * m / d)
    losses = []
    for t in range(trials):
        data = gen_gaussian(m, d, seed=t)
        fm = build_feature_matrix(data, GateBank.draw(d, k, seed=1000 + t), materialize=False)
        loss, rank = projected_loss(fm, data.ys)
        losses.append(loss)
    print(f"{ratio:5.3f}   {np.mean(losses):.4f}     {1 - ratio:.4f}")

# many label vectors at once share one factorization
data = gen_gaussian(m, d, seed=0)
fm = build_feature_matrix(data, GateBank.draw(d, 8, seed=1), materialize=False)
Y = np.random.default_rng(5).standard_normal((m, 500))
losses, rank = projected_loss(fm, Y)
print(f"500 label draws: mean={losses.mean():.4f}  law={1 - rank / m:.4f}  rank={rank}")
