"""
Patch self-information and texture dropping
===========================================

Repetitive texture looks like its neighbors, so a kernel density estimate
over nearby patches rates it as *likely* (low self-information). A lone
edge looks like nothing around it and scores high. Turning that map into
drop probabilities removes texture preferentially.
"""

# %%
# A striped texture on the left, a single bright square on the right.

import math

import numpy as np

from shapeseed import ScmParams, apply_drop, drop_probability, sample_drop_mask, self_information

grid = np.zeros((48, 48, 1))
grid[:, :24, 0] = (np.arange(48)[:, None] % 2) * 0.8
grid[18:30, 32:40, 0] = 1.0

params = ScmParams(seed=3)
info = self_information(grid, params)
print("floor log(sqrt(2 pi) h):", round(math.log(math.sqrt(2 * math.pi) * params.bandwidth), 4))
print("mean info, texture  :", round(float(info[6:42, 6:18].mean()), 4))
print("mean info, square rim:", round(float(info[17:31, 31:41].mean()), 4))

# %%
# Boltzmann weighting: lower information means a higher drop probability,
# rescaled so the average matches the target rate (before clamping).

p = drop_probability(info, params)
print("mean drop probability:", round(float(p.mean()), 4))
print("texture vs square    :", round(float(p[6:42, 6:18].mean()), 3), round(float(p[17:31, 31:41].mean()), 3))

# %%
# One Bernoulli draw per pixel, keyed by (seed, pixel), zeroes all channels.

mask = sample_drop_mask(p, seed=params.seed)
dropped = apply_drop(grid, mask)
print("dropped fraction:", round(float(mask.mean()), 4))
print("drop rate, texture:", round(float(mask[6:42, 6:18].mean()), 3),
      " square rim:", round(float(mask[17:31, 31:41].mean()), 3))
