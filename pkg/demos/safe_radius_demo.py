"""
Maximum safe radius and the adversarial example at its boundary
===============================================================

Binary-searches the largest perturbation radius that provably cannot change
a classification, then extracts the minimally-distorted input that flips it
just past that boundary.
"""

import numpy as np

import reachlip as rl

# a two-logit toy model c(x) = (1 - x, x): the argmax flips exactly at x = 0.5
layer = rl.Layer(
    "dense",
    activation="identity",
    params={"W": np.array([[-1.0], [1.0]]), "b": np.array([1.0, 0.0])},
)
model = rl.Model(1, 1, ("below", "above"), (layer,))

spec = rl.PerturbationSpec(anchor=[0.2], dims=[0], theta=0.1, clamp=(0, 1))
cfg = rl.SolverConfig(eps=1e-4, max_evals=20000)

report = rl.max_safe_radius(model, spec, cfg=cfg, max_iters=30, radius_tol=1e-4)
print(f"maximum safe radius: {report.radius:.4f}  (true boundary at 0.3)")
print("bisection history:")
for probe in report.history:
    print(f"  theta={probe.theta:.4f}  ->  {probe.verdict}  (margin {probe.margin:+.4f})")

# the ground-truth adversarial example sits just past the boundary
witness, meta = rl.ground_truth_adversarial(model, report)
print(f"adversarial input: {witness}  distortion {meta['radius']:.4f}")
print(
    f"label flips {model.labels[meta['original_label']]} -> "
    f"{model.labels[meta['flipped_label']]}"
)

# cross-check against the exhaustive grid oracle
oracle = rl.grid_flip_radius(model, spec, rl.GridSpec(step=1e-5), theta_step=1e-4)
print(f"grid-oracle flip radius: {oracle[0]:.4f}")
