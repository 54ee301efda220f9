"""
A constant-entry attack against a trained network
=================================================

Train a two-hidden-layer network on synthetic data with the weight-sum
penalty, certify it, and push every test point with the worst perturbation
that adds the same value to every input.  The resulting deviation ratios are
drawn as a box plot next to the certified bound.
"""

import numpy as np

from iifpnet import data
from iifpnet.attack import AttackConfig, evaluate_dataset
from iifpnet.model import build_widths, init_model
from iifpnet.passivity import certify
from iifpnet.report import box_plot_svg
from iifpnet.training import TrainConfig, train

# Synthetic regression problem, split 60/20/20 and reduced to 10 principal
# components fitted on the training rows only.
ds = data.synthetic_regression(2000, 10, seed=1)
tr, va, te = data.split(ds, seed=1)
prep = data.fit_preprocessor(tr)
tr, va, te = prep.apply(tr), prep.apply(va), prep.apply(te)

# Train; the penalty keeps every layer's weight sum above its boundary.
model = init_model(build_widths(10, 2), seed=1)
model, log = train(model, tr, va, TrainConfig(seed=1))
print(f"best epoch {log.best_epoch}, validation MSE {log.rows[log.best_epoch]['val_mse']:.4f}")

cert = certify(model)
print("per-layer nu:", np.round([c.nu_extracted for c in cert.layers], 3))

# One-dimensional search per point: a 201-point grid over the admissible
# delta, then golden-section refinement around the best cell.
table = evaluate_dataset(model, cert, te.features[:100], AttackConfig(epsilon_attack=0.5))
s = table.summary()
print(f"median ratio {s['median']:.4g}, max {s['max_ratio']:.4g}, bound {s['bound_ratio']:.4g}")
print(f"ratio above bound at {s['violations']} of {s['points']} points")
print(f"all-layer inequality fails at {s['tight_bound_violations']} of {s['points']} points")

with open("constant_attack_box.svg", "w") as fh:
    fh.write(box_plot_svg(table.ratios, cert.bound_ratio, title="2 hidden layers"))
