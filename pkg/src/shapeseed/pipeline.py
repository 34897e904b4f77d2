"""Batch orchestration over directories, plus the alpha sweep.

Input directory layout, one item per ``<name>.dtf``::

    <name>.dtf      raw score map S, K + 1 channels, background first
    <name>.png      RGB image
    <name>.json     image labels, ``{"present": [1, 3]}`` or ``[1, 3]``
    <name>_gt.png   optional ground-truth mask

Per item the pipeline writes ``<out>/<name>/`` with ``info.dtf``,
``drop.png``, ``refined.dtf``, ``pseudo.png``, ``loss.json`` and, when ground
truth exists, ``metrics.json``. ``<out>/summary.json`` aggregates everything.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import math
import os
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io
from .errors import ParameterError, ShapeSeedError
from .grid import IGNORE, normalize_scores
from .losses import LossParams, labels_from_classes, total_loss
from .metrics import (BoundaryParams, ConfusionMatrix, accumulate, boundary_counts,
                      boundary_distance, iou_from_counts, miou)
from .shape_cues import ScmParams, drop_probability, sample_drop_mask, self_information
from .spr import SprParams, pseudo_mask, spr
from .synth import SyntheticScene, degraded_scores

log = logging.getLogger(__name__)

THREADS_ENV = "SHAPESEED_THREADS"


@dataclass
class PipelineConfig:
    input_dir: Path
    output_dir: Path
    scm: ScmParams = field(default_factory=ScmParams)
    spr: SprParams = field(default_factory=SprParams)
    loss: LossParams = field(default_factory=LossParams)
    boundary: BoundaryParams = field(default_factory=BoundaryParams)
    class_names: list[str] | None = None
    seed: int = 0
    workers: int = 1
    lam: float = 1.0

    def __post_init__(self):
        self.input_dir = Path(self.input_dir)
        self.output_dir = Path(self.output_dir)
        if self.workers < 1:
            raise ParameterError("workers must be >= 1")

    @classmethod
    def from_dict(cls, d: dict, base: Path | None = None) -> "PipelineConfig":
        d = dict(d)
        base = Path(base) if base is not None else Path(".")
        for key in ("input_dir", "output_dir"):
            if key not in d:
                raise ParameterError(f"config is missing {key!r}")
            d[key] = base / d[key]
        nested = {"scm": ScmParams, "spr": SprParams, "loss": LossParams, "boundary": BoundaryParams}
        for key, kind in nested.items():
            if key in d:
                d[key] = kind(**d[key])
        if "lambda" in d:
            d["lam"] = d.pop("lambda")
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ParameterError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        path = Path(path)
        return cls.from_dict(json.loads(path.read_text()), base=path.parent)


def resolve_workers(configured: int) -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ParameterError(f"{THREADS_ENV}={env!r} is not an integer") from None
        if n >= 1:
            return n
    return configured


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (float, np.floating)):
        return None if math.isnan(x) else float(x)
    if isinstance(x, np.integer):
        return int(x)
    return x


def dump_json(path, obj) -> None:
    Path(path).write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


def item_seed(seed: int, name: str) -> int:
    """Per-item seed that depends only on the item name, not on scheduling."""
    return (int(seed) * 1_000_003 + zlib.crc32(name.encode())) & 0xFFFFFFFF


def write_item(input_dir, name: str, scene: SyntheticScene, scores, with_gt: bool = True) -> None:
    """Write one pipeline input item (image, raw scores, labels, optional GT)."""
    d = Path(input_dir)
    d.mkdir(parents=True, exist_ok=True)
    io.write_image_png(d / f"{name}.png", scene.image)
    io.write_dtf(d / f"{name}.dtf", scores)
    (d / f"{name}.json").write_text(json.dumps({"present": list(scene.present)}) + "\n")
    if with_gt:
        io.write_mask_png(d / f"{name}_gt.png", scene.gt)


def discover(input_dir: Path) -> list[str]:
    return sorted(p.stem for p in Path(input_dir).glob("*.dtf"))


def process_item(name: str, cfg: PipelineConfig) -> dict:
    src = cfg.input_dir
    out = cfg.output_dir / name
    scores = io.read_dtf(src / f"{name}.dtf")
    image = io.read_image_png(src / f"{name}.png")
    present = io.read_present_json(src / f"{name}.json")
    n_classes = scores.shape[2]
    if image.shape[:2] != scores.shape[:2]:
        raise ShapeSeedError(f"image {image.shape[:2]} and scores {scores.shape[:2]} differ in size")
    gt_path = src / f"{name}_gt.png"
    gt = io.read_mask_png(gt_path) if gt_path.exists() else None

    seed = item_seed(cfg.seed, name)
    scm = dataclasses.replace(cfg.scm, seed=seed)
    info = self_information(image, scm)
    drop = sample_drop_mask(drop_probability(info, scm), seed + 1)

    probs = normalize_scores(scores)
    refined = spr(image, probs, present, cfg.spr)
    pseudo, valid = pseudo_mask(refined, present, cfg.spr)
    labels = labels_from_classes(present, n_classes - 1)
    report = total_loss(scores, labels, pseudo, valid, cfg.lam, cfg.loss)

    out.mkdir(parents=True, exist_ok=True)
    io.write_dtf(out / "info.dtf", info)
    io.write_mask_png(out / "drop.png", drop)
    io.write_dtf(out / "refined.dtf", refined)
    io.write_mask_png(out / "pseudo.png", pseudo)
    dump_json(out / "loss.json", report.to_dict())

    result = {"name": name, "status": "ok", "loss": report.to_dict(),
              "valid_fraction": float(valid.mean()), "drop_fraction": float(drop.mean())}
    if gt is not None:
        conf = accumulate(ConfusionMatrix(n_classes), pseudo, gt)
        d = boundary_distance(cfg.boundary.d_frac, *gt.shape)
        inter, union = boundary_counts(pseudo, gt, n_classes, d)
        metrics = {"per_class": miou(conf)[0], "miou": miou(conf)[1],
                   "biou": iou_from_counts(inter, union)[1], "d": d}
        dump_json(out / "metrics.json", metrics)
        result.update(miou=metrics["miou"], biou=metrics["biou"])
        result["_conf"] = conf
        result["_bcounts"] = (inter, union)
    return result


def _safe_process(name: str, cfg: PipelineConfig) -> dict:
    try:
        return process_item(name, cfg)
    except (ShapeSeedError, OSError, ValueError) as exc:
        log.warning("item %s failed: %s", name, exc)
        return {"name": name, "status": "error", "error": str(exc)}


def run_pipeline(cfg: PipelineConfig) -> dict:
    """Process every item in the input directory and write ``summary.json``.

    A failing item is recorded in the summary and does not stop the batch.
    Results are merged in input order, so the output tree does not depend on
    the worker count.
    """
    names = discover(cfg.input_dir)
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    workers = resolve_workers(cfg.workers)
    if workers > 1 and len(names) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda n: _safe_process(n, cfg), names))
    else:
        results = [_safe_process(n, cfg) for n in names]

    conf = None
    b_inter = b_union = None
    for r in results:
        c = r.pop("_conf", None)
        b = r.pop("_bcounts", None)
        if c is not None:
            conf = c if conf is None else conf + c
            b_inter = b[0] if b_inter is None else b_inter + b[0]
            b_union = b[1] if b_union is None else b_union + b[1]
    summary = {"n_items": len(results),
               "n_failed": sum(r["status"] != "ok" for r in results),
               "items": results}
    if conf is not None:
        per_class, mean = miou(conf)
        summary["aggregate"] = {"per_class": per_class, "miou": mean,
                                "biou": iou_from_counts(b_inter, b_union)[1]}
        if cfg.class_names:
            summary["aggregate"]["class_names"] = list(cfg.class_names)
    dump_json(cfg.output_dir / "summary.json", summary)
    return _jsonable(summary)


def alpha_sweep(scenes: list[SyntheticScene], alphas, params: SprParams = SprParams(),
                seed_kwargs: dict | None = None, seed: int = 0) -> dict:
    """Pseudo-mask mIoU against synthetic ground truth for each alpha.

    Every scene gets a degraded score seed (see :func:`degraded_scores`); the
    confusion matrix is accumulated over all scenes per alpha.
    """
    alphas = [float(a) for a in alphas]
    if not scenes:
        raise ParameterError("alpha_sweep needs at least one scene")
    if len(alphas) < 1:
        raise ParameterError("alpha_sweep needs at least one alpha")
    seed_kwargs = dict(seed_kwargs or {})
    seeds = []
    for k, sc in enumerate(scenes):
        s = degraded_scores(sc.gt, sc.n_classes, seed + k, present=sc.present, **seed_kwargs)
        seeds.append(normalize_scores(s))
    values = []
    for a in alphas:
        p = dataclasses.replace(params, alpha=a)
        conf = ConfusionMatrix(scenes[0].n_classes)
        for sc, m in zip(scenes, seeds):
            pseudo, _ = pseudo_mask(spr(sc.image, m, sc.present, p), sc.present, p)
            conf = accumulate(conf, pseudo, sc.gt)
        values.append(miou(conf)[1])
    return {"alpha": alphas, "miou": values}


def sweep_table_csv(table: dict) -> str:
    """Two rows, alpha then mIoU (percent), like a hyper-parameter table."""
    head = ["alpha"] + [f"{a:g}" for a in table["alpha"]]
    row = ["mIoU"] + [f"{100.0 * v:.1f}" for v in table["miou"]]
    return ",".join(head) + "\n" + ",".join(row) + "\n"
