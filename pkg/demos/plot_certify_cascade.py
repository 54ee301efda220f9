"""
Certifying a Leaky-ReLU cascade
===============================

Build a small network by hand, read off each layer's passivity index from
its weight sum, and turn the indices into a perturbation bound.  The
stability step behind the bound is checked twice: by the closed-form secant
criterion and by a numerical search for a diagonal Lyapunov matrix.
"""

import numpy as np

from iifpnet import LayerParams, MlpModel, certify
from iifpnet.passivity import build_cascade_matrix, check_diagonal, diagonal_stability_oracle, rho_min

# Two hidden layers plus the output layer: the cascade has N = 3 elements.
# With slope a = 0.5 a layer is certified at index nu when its weights sum
# to more than n_in * nu / a.
rng = np.random.default_rng(0)
layers = []
for n_in, n_out in [(4, 4), (4, 4), (4, 1)]:
    w = rng.normal(scale=0.3, size=(n_out, n_in))
    w += (n_in * 1.0 / 0.5 - w.sum() + 0.5) / w.size  # push the sum just past the boundary
    layers.append(LayerParams(w, np.zeros(n_out)))
model = MlpModel(layers, slope_a=0.5)

cert = certify(model, nu_target=1.0)
for c in cert.layers:
    print(f"layer {c.layer_index}: weight sum {c.weight_sum:7.3f}  extracted nu {c.nu_extracted:.3f}")
print(f"rho = {cert.rho:.6f}   bound on ||dy||^2/||du||^2 = {cert.bound_ratio:.4f}")

# The output index rho must exceed cos(pi/(N+1))**(N+1) / prod(nu).  Just
# above that value the cascade matrix is diagonally stable; just below it
# is not.  The oracle finds a certifying diagonal only in the first case.
r = rho_min(cert.nus)
for label, rho in [("above", 1.02 * r), ("below", 0.98 * r)]:
    a = build_cascade_matrix(cert.nus, rho)
    res = diagonal_stability_oracle(a)
    msg = f"max eig of sym(DA) = {check_diagonal(a, res.diagonal):.3g}" if res.found else "no D found"
    print(f"rho {label} threshold: {msg}")

# The bound as a function of depth, for indices pinned at 1: deeper
# cascades have a larger rho and therefore a smaller default bound.
for n in (3, 7, 13):
    print(f"N = {n:2d}: rho_min = {rho_min([1.0] * n):.4f}")
