"""
When does the weight-sum condition give a non-negative supply rate?
===================================================================

For a constant increment ``delta`` on every input, a layer's incremental
supply rate is ``delta * sum(dy) - n_in * nu * delta**2``.  The weight-sum
condition makes it non-negative when every row of ``W`` sums to a
non-negative number.  Without that extra structure it can fail.  This
script samples both cases.
"""

import numpy as np

from iifpnet import LayerParams
from iifpnet.passivity import supply_rate

a, nu = 0.5, 1.0
rng = np.random.default_rng(3)


def sample_layer(nonnegative_rows):
    n_in, n_out = rng.integers(1, 9, size=2)
    w = rng.normal(size=(n_out, n_in))
    if nonnegative_rows:
        w -= np.minimum(w.sum(axis=1, keepdims=True), 0.0) / n_in
    deficit = n_in * nu / a - w.sum()
    if deficit >= 0:
        w += (deficit + rng.uniform(0.01, 1.0)) / w.size
    return LayerParams(w, rng.normal(size=n_out))


for nonneg in (True, False):
    rates = []
    for _ in range(1000):
        layer = sample_layer(nonneg)
        u = rng.normal(size=layer.n_in)
        rates.append(supply_rate(layer, a, nu, u, rng.uniform(-1, 1)))
    rates = np.array(rates)
    kind = "non-negative row sums" if nonneg else "general rows          "
    print(f"{kind}: min rate {rates.min():8.4f}, negative in {np.sum(rates < -1e-10)} of 1000")

# A two-unit counterexample: the weights sum to 10 > 4, but the row with a
# negative sum sits in its linear regime while the positive row sits in
# the shallow regime, so the output change points against the increment.
layer = LayerParams([[10.0, 10.0], [-5.0, -5.0]], [-100.0, 100.0])
print("counterexample rate:", supply_rate(layer, a, nu, np.array([1.0, 1.0]), 0.1))
