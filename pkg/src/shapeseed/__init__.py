"""Numerical core for shape-cue weakly supervised segmentation.

Self-information texture-drop masks, semantics-augmented pixel refinement,
the weak-supervision loss stack with analytic gradients, and mIoU / boundary
IoU evaluation, all on plain numpy arrays.
"""

from .errors import ContractError, DimensionError, FormatError, ParameterError, ShapeSeedError
from .grid import (BACKGROUND, IGNORE, append_background_plane, argmax_mask, normalize_scores,
                   strip_background_plane)
from .losses import (LossParams, LossReport, classification_loss, gwp_class_scores, lambda_schedule,
                     pixel_loss, region_loss, total_loss)
from .metrics import BoundaryParams, ConfusionMatrix, accumulate, boundary_iou, miou
from .shape_cues import (ScmParams, apply_drop, concat_channels, drop_probability, sample_drop_mask,
                         self_information)
from .spr import AffinityField, SprParams, compute_affinities, local_sigma, pseudo_mask, refine, spr
from .synth import SyntheticScene, synth

__version__ = "0.1.0"
