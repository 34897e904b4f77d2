"""Confusion-matrix mIoU and boundary IoU."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import distance_transform_edt

from .errors import DimensionError, ParameterError, ShapeSeedError
from .grid import BACKGROUND, IGNORE


class UndefinedMeanError(ShapeSeedError):
    """Every class has an empty union, so the mean IoU is undefined."""


@dataclass
class ConfusionMatrix:
    """Pixel counts, rows = ground truth, columns = prediction."""

    n_classes: int
    counts: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.n_classes < 1:
            raise ParameterError("n_classes must be >= 1")
        if self.counts is None:
            self.counts = np.zeros((self.n_classes, self.n_classes), dtype=np.int64)
        elif self.counts.shape != (self.n_classes, self.n_classes):
            raise DimensionError("counts must be n_classes x n_classes")

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        if other.n_classes != self.n_classes:
            raise DimensionError("cannot add confusion matrices of different sizes")
        return ConfusionMatrix(self.n_classes, self.counts + other.counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True)
class BoundaryParams:
    d_frac: float = 0.05

    def __post_init__(self):
        if not self.d_frac > 0:
            raise ParameterError("d_frac must be > 0")


def _pair(pred, gt, n_classes: int):
    p = np.asarray(pred)
    g = np.asarray(gt)
    if p.shape != g.shape or p.ndim != 2:
        raise DimensionError(f"pred {p.shape} and gt {g.shape} must be equal 2-D shapes")
    p = np.where(p == IGNORE, BACKGROUND, p).astype(np.int64)
    g = g.astype(np.int64)
    keep = g != IGNORE
    for name, a in (("pred", p), ("gt", g[keep])):
        if a.size and a.max() >= n_classes:
            raise ParameterError(f"{name} label {int(a.max())} >= {n_classes} classes")
    return p, g, keep


def accumulate(conf: ConfusionMatrix, pred, gt) -> ConfusionMatrix:
    """New matrix with the pixel counts of one (pred, gt) pair added.

    Pixels whose ground truth is IGNORE are skipped; IGNORE predictions count
    as background.
    """
    n = conf.n_classes
    p, g, keep = _pair(pred, gt, n)
    idx = g[keep] * n + p[keep]
    add = np.bincount(idx, minlength=n * n).reshape(n, n)
    return ConfusionMatrix(n, conf.counts + add)


def miou(conf: ConfusionMatrix) -> tuple[np.ndarray, float]:
    """Per-class IoU (NaN where the union is empty) and their mean."""
    c = conf.counts
    tp = np.diag(c)
    return iou_from_counts(tp, c.sum(axis=0) + c.sum(axis=1) - tp)


def boundary_distance(d_frac: float, height: int, width: int) -> int:
    return int(math.ceil(d_frac * math.hypot(height, width)))


def boundary_region(mask: np.ndarray, d: int) -> np.ndarray:
    """Pixels of `mask` within Euclidean distance `d` of its contour.

    Equivalent to ``mask & ~erode(mask, disk(d))``; the image border counts as
    contour.
    """
    m = np.pad(np.asarray(mask, dtype=bool), 1, constant_values=False)
    dist = distance_transform_edt(m)[1:-1, 1:-1]
    return np.asarray(mask, dtype=bool) & (dist <= d)


def boundary_iou(pred, gt, params: BoundaryParams = BoundaryParams(), *,
                 n_classes: int | None = None, d: int | None = None) -> tuple[np.ndarray, float]:
    """Per-class boundary IoU and its mean over classes present in either mask.

    ``d`` defaults to ``ceil(d_frac * image diagonal)``. Ground-truth IGNORE
    pixels are excluded from the counts; IGNORE predictions count as
    background.
    """
    g_raw = np.asarray(gt)
    if g_raw.ndim != 2:
        raise DimensionError(f"gt must be 2-D, got shape {g_raw.shape}")
    if n_classes is None:
        labels = np.concatenate([np.asarray(pred).ravel(), g_raw.ravel()])
        labels = labels[labels != IGNORE]
        n_classes = int(labels.max()) + 1 if labels.size else 1
    inter, union = boundary_counts(pred, gt, n_classes, d if d is not None
                                   else boundary_distance(params.d_frac, *g_raw.shape))
    return iou_from_counts(inter, union)


def boundary_counts(pred, gt, n_classes: int, d: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-class intersection and union pixel counts of the boundary regions."""
    p, g, keep = _pair(pred, gt, n_classes)
    inter = np.zeros(n_classes, np.int64)
    union = np.zeros(n_classes, np.int64)
    for c in range(n_classes):
        gb = boundary_region((g == c) & keep, d) & keep
        pb = boundary_region(p == c, d) & keep
        inter[c] = np.count_nonzero(gb & pb)
        union[c] = np.count_nonzero(gb | pb)
    return inter, union


def iou_from_counts(inter, union) -> tuple[np.ndarray, float]:
    inter = np.asarray(inter, np.float64)
    union = np.asarray(union, np.float64)
    iou = np.full(len(union), np.nan)
    np.divide(inter, union, out=iou, where=union > 0)
    if not np.any(union > 0):
        raise UndefinedMeanError("no class present in either mask")
    return iou, float(np.nanmean(iou))


def class_table_csv(per_class, class_names=None, mean=None) -> str:
    """One header row of class names and one row of percentages, mean last."""
    per_class = list(per_class)
    names = list(class_names) if class_names else [str(i) for i in range(len(per_class))]
    cells = ["-" if (v is None or np.isnan(v)) else f"{100.0 * v:.1f}" for v in per_class]
    header, row = names[:len(per_class)], cells
    if mean is not None:
        header = header + ["mIoU"]
        row = row + [f"{100.0 * mean:.1f}"]
    return ",".join(header) + "\n" + ",".join(row) + "\n"
