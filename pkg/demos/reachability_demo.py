"""
Reachability intervals for a small trained classifier
=====================================================

Loads a miniature digit classifier from its weight file, perturbs two pixels
of an anchor image, and computes certified output ranges for each label.
"""

import numpy as np

import reachlip as rl

# the anchor: a blurry "one" from the training distribution
anchor = np.array([
    0.1, 0.9, 0.1, 0.1,
    0.1, 0.9, 0.1, 0.1,
    0.1, 0.9, 0.1, 0.1,
    0.1, 0.9, 0.1, 0.1,
])

model = rl.load_model("tests/data/fnn/model.json")
print("labels:", model.labels)
print("anchor logits:", np.round(rl.forward(model, anchor), 3))

# perturb the two brightest pixels by up to 0.15 in sup norm
spec = rl.PerturbationSpec(anchor, dims=[1, 5], theta=0.15, clamp=(0, 1))
cfg = rl.SolverConfig(eps=1e-2, max_evals=100000)

# one certified interval per label: how far can each logit move?
for idx, label in enumerate(model.labels):
    objective = rl.Objective("confidence", (idx,))
    interval, _ = rl.reach(model, spec, objective, cfg)
    print(
        f"  {label:>6}: [{interval.lower:+.4f}, {interval.upper:+.4f}]"
        f"  (tolerance {interval.tolerance:.4f}, {interval.evals} evals)"
    )

# a safety verdict from the same machinery: does the argmax ever flip?
verdict = rl.check_safety(model, spec, cfg)
print("verdict over the ball:", verdict.verdict, f"(margin {verdict.margin:+.4f})")
