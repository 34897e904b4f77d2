"""Command-line entry point: ``shapeseed <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .errors import ShapeSeedError
from .grid import normalize_scores
from .losses import LossParams, labels_from_classes, total_loss
from .metrics import (BoundaryParams, ConfusionMatrix, accumulate, boundary_distance,
                      boundary_iou, class_table_csv, miou)
from .pipeline import PipelineConfig, _jsonable, alpha_sweep, run_pipeline, sweep_table_csv
from .shape_cues import ScmParams, drop_probability, sample_drop_mask, self_information
from .spr import SprParams, pseudo_mask, spr
from .synth import SCENE_KINDS, degraded_scores, synth


def _floats(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t.strip()]


def _present(args) -> list[int]:
    if getattr(args, "present_json", None):
        return io.read_present_json(args.present_json)
    return io.parse_class_list(args.present)


def cmd_selfinfo(args):
    grid = io.read_image_png(args.input)
    params = ScmParams(patch_side=args.patch, neighbor_radius=args.radius, n_samples=args.samples,
                       bandwidth=args.bandwidth, seed=args.seed)
    io.write_dtf(args.out, self_information(grid, params))


def cmd_dropmask(args):
    info = io.read_dtf(args.info)[..., 0]
    params = ScmParams(temperature=args.tau, target_rate=args.rate, seed=args.seed)
    probs = drop_probability(info, params)
    if args.probs_out:
        io.write_dtf(args.probs_out, probs)
    io.write_mask_png(args.out, sample_drop_mask(probs, args.seed))


def cmd_refine(args):
    image = io.read_image_png(args.image)
    scores = io.read_dtf(args.scores)
    probs = scores if args.normalized else normalize_scores(scores)
    params = SprParams(alpha=args.alpha, iterations=args.iters, radii=tuple(int(r) for r in _floats(args.radii)),
                       recompute=args.recompute, sigma_support=args.sigma_support)
    io.write_dtf(args.out, spr(image, probs, _present(args), params))


def cmd_pseudomask(args):
    refined = io.read_dtf(args.scores)
    params = SprParams(theta_frac=args.theta, floor=args.floor)
    pseudo, _ = pseudo_mask(refined, _present(args), params)
    io.write_mask_png(args.out, pseudo)


def cmd_loss(args):
    scores = io.read_dtf(args.scores)
    pseudo = io.read_mask_png(args.pseudo)
    labels = labels_from_classes(io.parse_class_list(args.labels), scores.shape[2] - 1)
    params = LossParams(margin=args.gamma, region_radius=args.r3, epsilon=args.epsilon)
    report = total_loss(scores.astype(np.float64), labels, pseudo, pseudo != 255, args.lam, params)
    if args.grad_out:
        io.write_dtf(args.grad_out, report.grad_scores)
    print(json.dumps(report.to_dict(), indent=2, sort_keys=True))


def cmd_eval(args):
    pred = io.read_mask_png(args.pred)
    gt = io.read_mask_png(args.gt)
    labels = np.concatenate([pred.ravel(), gt.ravel()])
    n = args.num_classes or int(labels[labels != 255].max(initial=0)) + 1
    per_class, mean = miou(accumulate(ConfusionMatrix(n), pred, gt))
    result = {"per_class": per_class, "miou": mean}
    if args.boundary:
        bp = BoundaryParams(d_frac=args.d_frac)
        _, result["biou"] = boundary_iou(pred, gt, bp, n_classes=n)
        result["d"] = boundary_distance(bp.d_frac, *gt.shape)
    if args.csv:
        names = args.class_names.split(",") if args.class_names else None
        Path(args.csv).write_text(class_table_csv(per_class, names, mean))
    print(json.dumps(_jsonable(result), indent=2, sort_keys=True))


def cmd_synth(args):
    scene = synth(args.kind, args.h, args.w, args.seed, n_classes=args.classes)
    io.write_image_png(args.out_img, scene.image)
    io.write_mask_png(args.out_gt, scene.gt)
    if args.out_present:
        Path(args.out_present).write_text(json.dumps({"present": list(scene.present)}) + "\n")
    if args.out_scores:
        io.write_dtf(args.out_scores, degraded_scores(scene.gt, scene.n_classes, args.seed,
                                                      blur=args.blur, noise=args.noise,
                                                      present=scene.present))


def cmd_sweep_alpha(args):
    scenes = [synth(args.kind, args.h, args.w, args.seed + k, n_classes=args.classes)
              for k in range(args.n_scenes)]
    table = alpha_sweep(scenes, _floats(args.alphas), SprParams(iterations=args.iters),
                        seed_kwargs={"blur": args.blur, "noise": args.noise}, seed=args.seed)
    if args.out:
        Path(args.out).write_text(sweep_table_csv(table))
    print(json.dumps(table, indent=2))


def cmd_pipeline(args):
    summary = run_pipeline(PipelineConfig.load(args.config))
    print(json.dumps({"n_items": summary["n_items"], "n_failed": summary["n_failed"]}))
    return 1 if summary["n_failed"] else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="shapeseed", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("selfinfo", help="patch self-information map of an image")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--radius", type=int, default=7)
    p.add_argument("--samples", type=int, default=9)
    p.add_argument("--bandwidth", type=float, default=1.0)
    p.add_argument("--patch", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_selfinfo)

    p = sub.add_parser("dropmask", help="sample a texture-drop mask from a self-information map")
    p.add_argument("--info", required=True)
    p.add_argument("--tau", type=float, default=0.5)
    p.add_argument("--rate", type=float, default=0.25)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--probs-out")
    p.set_defaults(func=cmd_dropmask)

    p = sub.add_parser("refine", help="semantics-augmented pixel refinement of a score map")
    p.add_argument("--image", required=True)
    p.add_argument("--scores", required=True, help="raw score map S (.dtf)")
    p.add_argument("--normalized", action="store_true", help="--scores is already softmax-normalized")
    p.add_argument("--alpha", type=float, default=0.8)
    p.add_argument("--iters", type=int, default=10)
    p.add_argument("--radii", default="1,2,4,8,12,24")
    p.add_argument("--recompute", action="store_true", help="rebuild affinities every iteration")
    p.add_argument("--sigma-support", choices=("local", "global"), default="local",
                   help="kernel scales per neighborhood or per image")
    p.add_argument("--present", default="")
    p.add_argument("--present-json")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_refine)

    p = sub.add_parser("pseudomask", help="threshold a refined map into a pseudo mask")
    p.add_argument("--scores", required=True)
    p.add_argument("--present", default="")
    p.add_argument("--present-json")
    p.add_argument("--theta", type=float, default=0.6)
    p.add_argument("--floor", type=float, default=0.2)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_pseudomask)

    p = sub.add_parser("loss", help="evaluate the loss stack on a score map")
    p.add_argument("--scores", required=True)
    p.add_argument("--pseudo", required=True)
    p.add_argument("--labels", required=True, help="image-level classes, e.g. 1,3")
    p.add_argument("--gamma", type=float, default=3.0)
    p.add_argument("--r3", type=int, default=3)
    p.add_argument("--epsilon", type=float, default=1e-5)
    p.add_argument("--lambda", dest="lam", type=float, default=0.5)
    p.add_argument("--grad-out")
    p.set_defaults(func=cmd_loss)

    p = sub.add_parser("eval", help="mIoU and boundary IoU of a predicted mask")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--boundary", action="store_true")
    p.add_argument("--d-frac", type=float, default=0.05)
    p.add_argument("--num-classes", type=int)
    p.add_argument("--csv")
    p.add_argument("--class-names")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="generate a synthetic scene")
    p.add_argument("--kind", choices=SCENE_KINDS, default="shapes")
    p.add_argument("--h", type=int, default=64)
    p.add_argument("--w", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--classes", type=int, default=5)
    p.add_argument("--out-img", required=True)
    p.add_argument("--out-gt", required=True)
    p.add_argument("--out-present")
    p.add_argument("--out-scores", help="also write a degraded score seed (.dtf)")
    p.add_argument("--blur", type=float, default=3.0)
    p.add_argument("--noise", type=float, default=0.15)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("sweep-alpha", help="pseudo-mask mIoU as a function of alpha")
    p.add_argument("--kind", choices=SCENE_KINDS, default="two-tone-object")
    p.add_argument("--n-scenes", type=int, default=20)
    p.add_argument("--h", type=int, default=64)
    p.add_argument("--w", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--classes", type=int, default=5)
    p.add_argument("--alphas", default="0,0.5,0.6,0.7,0.8,0.9,1.0")
    p.add_argument("--iters", type=int, default=10)
    p.add_argument("--blur", type=float, default=3.0)
    p.add_argument("--noise", type=float, default=0.15)
    p.add_argument("--out", help="CSV table path")
    p.set_defaults(func=cmd_sweep_alpha)

    p = sub.add_parser("pipeline", help="batch refine / pseudo-mask / loss / eval over a directory")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_pipeline)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args) or 0
    except (ShapeSeedError, OSError) as exc:
        print(f"shapeseed {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
