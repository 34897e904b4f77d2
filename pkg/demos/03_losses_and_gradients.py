"""
Training losses and their gradients
===================================

Three terms supervise a segmenter from image tags and pseudo masks: a
classification loss on pooled scores, a class-balanced pixel loss, and a
region loss that pulls same-label neighbors together and pushes differently
labeled neighbors at least a margin apart. All gradients are analytic.
"""

# %%

import numpy as np

from shapeseed import IGNORE, LossParams, lambda_schedule, total_loss

rng = np.random.default_rng(0)
scores = rng.normal(size=(8, 8, 3))
labels = np.array([1.0, 0.0])  # class 1 tagged, class 2 absent
pseudo = rng.integers(0, 3, size=(8, 8)).astype(np.uint8)
pseudo[rng.random((8, 8)) < 0.2] = IGNORE
valid = pseudo != IGNORE

# %%
# The region weight ramps linearly from 0 to 1 over training.

for step in (0, 250, 500, 1000):
    rep = total_loss(scores, labels, pseudo, valid, lambda_schedule(step, 1000), LossParams())
    print(step, {k: round(v, 4) for k, v in rep.to_dict().items()})

# %%
# Spot-check the analytic gradient against a central difference.

rep = total_loss(scores, labels, pseudo, valid, 0.5, LossParams(margin=1.0))
i = (3, 4, 1)
bumped = scores.copy()
bumped[i] += 1e-5
up = total_loss(bumped, labels, pseudo, valid, 0.5, LossParams(margin=1.0)).total
bumped[i] -= 2e-5
down = total_loss(bumped, labels, pseudo, valid, 0.5, LossParams(margin=1.0)).total
print("analytic %.8f  numeric %.8f" % (rep.grad_scores[i], (up - down) / 2e-5))
