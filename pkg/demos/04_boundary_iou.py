"""
Boundary IoU versus region IoU
==============================

Region IoU barely notices a one-pixel shift of a large object. Restricting
the comparison to a thin band along each contour makes the same error
obvious.
"""

# %%

import numpy as np

from shapeseed import BoundaryParams, ConfusionMatrix, accumulate, boundary_iou, miou

gt = np.zeros((96, 96), np.uint8)
gt[16:80, 16:80] = 1

for shift in (0, 1, 2, 4):
    pred = np.roll(gt, shift, axis=1)
    _, region = miou(accumulate(ConfusionMatrix(2), pred, gt))
    _, band = boundary_iou(pred, gt, BoundaryParams(d_frac=0.02))
    print(f"shift {shift}: mIoU {region:.3f}  boundary IoU {band:.3f}")

# %%
# With a band wider than the image diagonal the two measures agree.

pred = np.roll(gt, 3, axis=0)
print(miou(accumulate(ConfusionMatrix(2), pred, gt))[1] == boundary_iou(pred, gt, BoundaryParams(d_frac=1.0))[1])
