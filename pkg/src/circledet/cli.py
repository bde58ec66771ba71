"""Command-line surface: synth, eval, rotate-check, displace, loss-check."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .circleann import (
    AnnotationRecord,
    CircleAnnDocument,
    CircleAnnError,
    DetectionRecord,
    ImageInfo,
)
from .decode import decode_circles
from .evalkit import Detection, GroundTruth, coco_summary, displacement_study, rotation_consistency
from .geometry import BoxAA, Circle, circle_to_bbox, rotate90
from .gridio import GridFormatError, read_grid, write_grid
from .synth import JitterConfig, SceneConfig, generate_scene, simulate_detections
from .targets import (
    CenterTarget,
    PredictionMaps,
    TargetConfig,
    TargetMaps,
    fit_prediction_maps,
    gradient_check,
    render_targets,
    targets_to_predictions,
    total_loss,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2

GRAD_CHECK_TOLERANCE = 1e-4


class _Parser(argparse.ArgumentParser):
    # Usage errors exit with code 1; data errors are reported as 2 by main().
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _report_skeleton(command: str, args: argparse.Namespace) -> dict:
    config = {k: v for k, v in vars(args).items() if k != "func"}
    return {"tool": "circledet", "version": __version__, "command": command,
            "config": config}


def _write_json(path: str, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="ascii")


def _load_json_config(path: str | None) -> dict:
    if path is None:
        return {}
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(doc, dict):
        raise ValueError(f"{path}: expected a JSON object")
    return doc


def _scene_config(overrides: dict) -> SceneConfig:
    kwargs = dict(overrides)
    for key in ("objects_per_image", "radius_range"):
        if key in kwargs:
            kwargs[key] = tuple(kwargs[key])
    return SceneConfig(**kwargs)


def _grid_paths(grids_dir: Path, image_id: int) -> dict[str, Path]:
    stem = f"img{image_id:06d}"
    return {name: grids_dir / f"{stem}_{name}.grid"
            for name in ("heatmap", "offset", "radius")}


def cmd_synth(args: argparse.Namespace) -> int:
    scene_cfg = _scene_config(_load_json_config(args.config))
    jitter_cfg = None
    if args.jitter is not None:
        jitter_cfg = JitterConfig(**_load_json_config(args.jitter))

    images: list[ImageInfo] = []
    annotations: list[AnnotationRecord] = []
    detections: list[DetectionRecord] | None = [] if jitter_cfg else None
    grids_dir = Path(args.grids) if args.grids else None
    if grids_dir:
        grids_dir.mkdir(parents=True, exist_ok=True)
    target_cfg = TargetConfig(image_w=scene_cfg.image_w, image_h=scene_cfg.image_h,
                              downsample_r=args.downsample_r)

    for image_id in range(args.images):
        scene_rng = np.random.default_rng([args.seed, image_id])
        scene = generate_scene(scene_cfg, scene_rng)
        images.append(ImageInfo(id=image_id, width=scene_cfg.image_w,
                                height=scene_cfg.image_h))
        for circle, class_id in scene:
            annotations.append(AnnotationRecord(image_id=image_id, category=class_id,
                                                shape=circle))
        if jitter_cfg is not None:
            det_rng = np.random.default_rng([args.seed, image_id, 1])
            for det in simulate_detections(scene, jitter_cfg, scene_cfg.image_w,
                                           scene_cfg.image_h, det_rng):
                detections.append(DetectionRecord(
                    image_id=image_id, category=det.class_id, shape=det.circle,
                    score=det.score))
        if grids_dir:
            target = render_targets(scene, target_cfg)
            ideal = targets_to_predictions(target)
            paths = _grid_paths(grids_dir, image_id)
            write_grid(paths["heatmap"], target.heatmap, target_cfg.downsample_r)
            write_grid(paths["offset"], ideal.offset, target_cfg.downsample_r)
            write_grid(paths["radius"], ideal.radius, target_cfg.downsample_r)

    doc = CircleAnnDocument(images=images, annotations=annotations,
                            detections=detections)
    doc.save(args.out)
    print(f"wrote {len(images)} images, {len(annotations)} annotations"
          + (f", {len(detections)} detections" if detections is not None else "")
          + f" to {args.out}")
    return EXIT_OK


def _truths_from_doc(doc: CircleAnnDocument, metric: str) -> list[GroundTruth]:
    truths = []
    for i, ann in enumerate(doc.annotations):
        shape = _shape_for_metric(ann.shape, metric, f"annotations[{i}].shape")
        truths.append(GroundTruth(shape=shape, class_id=ann.category,
                                  image_id=ann.image_id))
    return truths


def _dets_from_doc(doc: CircleAnnDocument, metric: str) -> list[Detection]:
    dets = []
    for i, det in enumerate(doc.detections or []):
        shape = _shape_for_metric(det.shape, metric, f"detections[{i}].shape")
        dets.append(Detection(shape=shape, score=det.score, class_id=det.category,
                              image_id=det.image_id))
    return dets


def _shape_for_metric(shape, metric: str, where: str):
    # The box metric evaluates circles through their tight boxes; the circle
    # metric has no meaningful box conversion and rejects boxes.
    if metric == "box":
        return circle_to_bbox(shape) if isinstance(shape, Circle) else shape
    if isinstance(shape, BoxAA):
        raise CircleAnnError(f"{where}: box shapes cannot be evaluated under the ciou metric")
    return shape


def _check_image_ids(gt: CircleAnnDocument, other: CircleAnnDocument, label: str) -> None:
    known = {img.id for img in gt.images}
    for source in (other.annotations, other.detections or []):
        for record in source:
            if record.image_id not in known:
                raise CircleAnnError(
                    f"{label} references image id {record.image_id} not present in --gt")


def cmd_eval(args: argparse.Namespace) -> int:
    gt_doc = CircleAnnDocument.load(args.gt)
    det_doc = CircleAnnDocument.load(args.det)
    _check_image_ids(gt_doc, det_doc, "--det")
    truths = _truths_from_doc(gt_doc, args.metric)
    dets = _dets_from_doc(det_doc, args.metric)
    report = coco_summary(dets, truths, args.metric)
    if args.report:
        payload = _report_skeleton("eval", args)
        payload["result"] = report.to_dict()
        _write_json(args.report, payload)
    ap_s = "n/a" if report.ap_small is None else f"{report.ap_small:.4f}"
    ap_m = "n/a" if report.ap_medium is None else f"{report.ap_medium:.4f}"
    print(f"AP {report.ap:.4f}  AP50 {report.ap50:.4f}  AP75 {report.ap75:.4f}  "
          f"AP_S {ap_s}  AP_M {ap_m}")
    return EXIT_OK


def cmd_rotate_check(args: argparse.Namespace) -> int:
    gt_doc = CircleAnnDocument.load(args.gt)
    before_doc = CircleAnnDocument.load(args.det_before)
    after_doc = CircleAnnDocument.load(args.det_after)
    _check_image_ids(gt_doc, before_doc, "--det-before")
    _check_image_ids(gt_doc, after_doc, "--det-after")
    dims = {img.id: (img.width, img.height) for img in gt_doc.images}

    before = _dets_from_doc(before_doc, args.metric)
    after = []
    turns = args.turns % 4
    for i, det in enumerate(after_doc.detections or []):
        w, h = dims[det.image_id]
        rot_w, rot_h = (h, w) if turns % 2 else (w, h)
        shape = rotate90(det.shape, rot_w, rot_h, (4 - turns) % 4)
        shape = _shape_for_metric(shape, args.metric, f"detections[{i}].shape")
        after.append(Detection(shape=shape, score=det.score, class_id=det.category,
                               image_id=det.image_id))
    ratio = rotation_consistency(before, after, threshold=args.threshold,
                                 metric=args.metric)
    if args.report:
        payload = _report_skeleton("rotate-check", args)
        payload["result"] = {
            "rotation_consistency": ratio,
            "detections_before": len(before),
            "detections_after": len(after),
        }
        _write_json(args.report, payload)
    print(f"rotation consistency {ratio:.4f} "
          f"({len(before)} before, {len(after)} after)")
    return EXIT_OK


def cmd_displace(args: argparse.Namespace) -> int:
    gt_doc = CircleAnnDocument.load(args.gt)
    truths = []
    for i, ann in enumerate(gt_doc.annotations):
        if not isinstance(ann.shape, Circle):
            raise CircleAnnError(
                f"annotations[{i}].shape: displacement study requires circles")
        truths.append(ann.shape)
    if args.step <= 0:
        raise ValueError(f"--step must be > 0, got {args.step}")
    displacements = [i * args.step for i in range(int(args.max / args.step) + 1)]
    rows = displacement_study(truths, displacements, args.seed)
    with open(args.out, "w", newline="", encoding="ascii") as f:
        writer = csv.writer(f)
        writer.writerow(["displacement", "mean_iou", "mean_ciou", "mean_abs_diff"])
        for row in rows:
            writer.writerow([format(v, ".12g") for v in
                             (row.displacement, row.mean_iou, row.mean_ciou,
                              row.mean_abs_diff)])
    overall = float(np.mean([row.mean_abs_diff for row in rows]))
    print(f"wrote {len(rows)} rows to {args.out}; mean |IOU - cIOU| = {overall:.6f}")
    return EXIT_OK


def _load_target_grids(grids_dir: Path) -> dict[int, tuple[TargetMaps, TargetConfig]]:
    heatmap_files = sorted(grids_dir.glob("img*_heatmap.grid"))
    if not heatmap_files:
        raise FileNotFoundError(f"no *_heatmap.grid files found in {grids_dir}")
    loaded = {}
    for hm_path in heatmap_files:
        image_id = int(hm_path.name[len("img"):len("img") + 6])
        paths = _grid_paths(grids_dir, image_id)
        for name, path in paths.items():
            if not path.exists():
                raise FileNotFoundError(f"missing grid file {path}")
        heatmap, scale = read_grid(paths["heatmap"])
        offset, scale_off = read_grid(paths["offset"])
        radius, scale_rad = read_grid(paths["radius"])
        if not scale == scale_off == scale_rad:
            raise GridFormatError(
                f"image {image_id}: grid scales disagree "
                f"({scale}, {scale_off}, {scale_rad})")
        gh, gw, channels = heatmap.shape
        cfg = TargetConfig(image_w=gw * scale, image_h=gh * scale,
                           downsample_r=scale, num_classes=channels)
        centers = []
        for class_id in range(channels):
            for gy, gx in np.argwhere(heatmap[:, :, class_id] == 1.0):
                centers.append(CenterTarget(
                    grid_x=int(gx), grid_y=int(gy), class_id=class_id,
                    offset_x=float(offset[gy, gx, 0]),
                    offset_y=float(offset[gy, gx, 1]),
                    radius=float(radius[gy, gx, 0])))
        loaded[image_id] = (TargetMaps(heatmap=heatmap, centers=centers), cfg)
    return loaded


def _run_grad_check(seed: int, instances: int = 100, size: int = 8) -> float:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(instances):
        heatmap = rng.uniform(0.0, 0.9, size=(size, size, 1))
        centers = []
        for _ in range(int(rng.integers(1, 4))):
            gy, gx = int(rng.integers(size)), int(rng.integers(size))
            heatmap[gy, gx, 0] = 1.0
            centers.append(CenterTarget(grid_x=gx, grid_y=gy, class_id=0,
                                        offset_x=float(rng.uniform()),
                                        offset_y=float(rng.uniform()),
                                        radius=float(rng.uniform(1, 10))))
        target = TargetMaps(heatmap=heatmap, centers=centers)
        pred = rng.uniform(0.05, 0.95, size=(size, size, 1))
        worst = max(worst, gradient_check(pred, target))
    return worst


def cmd_loss_check(args: argparse.Namespace) -> int:
    payload = _report_skeleton("loss-check", args)
    results: dict = {}

    if args.grad_check:
        if args.seed is None:
            print("circledet loss-check: error: --grad-check requires --seed",
                  file=sys.stderr)
            return EXIT_USAGE
        worst = _run_grad_check(args.seed)
        results["grad_check_max_relative_error"] = worst
        print(f"gradient check: max relative error {worst:.3e} "
              f"(tolerance {GRAD_CHECK_TOLERANCE:.0e})")
        if worst > GRAD_CHECK_TOLERANCE:
            print("gradient check FAILED", file=sys.stderr)
            return EXIT_DATA

    if args.grids is not None:
        loaded = _load_target_grids(Path(args.grids))
        per_image = {}
        truths = []
        fitted_dets = []
        for image_id, (target, cfg) in sorted(loaded.items()):
            ideal = targets_to_predictions(target)
            # the focal minimizer is 1 at centers and 0 elsewhere, not the
            # rendered kernel values
            minimizer = PredictionMaps(
                heatmap=np.where(target.heatmap == 1.0, 1.0, 0.0),
                offset=ideal.offset, radius=ideal.radius)
            base_loss, parts = total_loss(minimizer, target, cfg)
            entry = {"ideal_loss": base_loss, "components": parts,
                     "num_centers": target.num_centers}
            if args.fit:
                fitted, history = fit_prediction_maps(target, cfg, steps=args.fit)
                entry["fit_initial_loss"] = history[0]
                entry["fit_final_loss"] = history[-1]
                for det in decode_circles(fitted, cfg, score_threshold=0.5):
                    fitted_dets.append(Detection.from_circle(det, image_id=image_id))
            per_image[image_id] = entry
            print(f"image {image_id}: ideal L_det {base_loss:.3e}"
                  + (f", fit {entry['fit_initial_loss']:.4f} -> "
                     f"{entry['fit_final_loss']:.6f}" if args.fit else ""))
        results["images"] = per_image
        if args.fit and args.gt:
            gt_doc = CircleAnnDocument.load(args.gt)
            gt = _truths_from_doc(gt_doc, "ciou")
            report = coco_summary(fitted_dets, gt, "ciou")
            results["fit_ap50"] = report.ap50
            print(f"fitted detections: AP50 {report.ap50:.4f}")
    elif not args.grad_check:
        raise ValueError("loss-check needs --grids and/or --grad-check")

    if args.report:
        payload["result"] = results
        _write_json(args.report, payload)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="circledet",
                     description="Circle-representation detection toolkit")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate synthetic scenes", parents=[])
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--images", type=int, default=1)
    p.add_argument("--out", required=True, help="CircleAnn JSON output path")
    p.add_argument("--config", help="JSON file with scene config overrides")
    p.add_argument("--jitter", help="JSON jitter config; adds simulated detections")
    p.add_argument("--grids", help="directory for target .grid files")
    p.add_argument("--downsample-r", type=int, default=4)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("eval", help="AP suite on a detection file")
    p.add_argument("--gt", required=True)
    p.add_argument("--det", required=True)
    p.add_argument("--metric", choices=("ciou", "box"), default="ciou")
    p.add_argument("--report", help="JSON report output path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("rotate-check", help="rotation-consistency protocol")
    p.add_argument("--gt", required=True, help="original-frame document (for image sizes)")
    p.add_argument("--det-before", required=True)
    p.add_argument("--det-after", required=True,
                   help="detections in the rotated frame")
    p.add_argument("--turns", type=int, default=1,
                   help="counter-clockwise quarter turns applied to the image")
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--metric", choices=("ciou", "box"), default="ciou")
    p.add_argument("--report", help="JSON report output path")
    p.set_defaults(func=cmd_rotate_check)

    p = sub.add_parser("displace", help="IOU/cIOU displacement study")
    p.add_argument("--gt", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--max", type=float, default=100.0)
    p.add_argument("--step", type=float, default=5.0)
    p.add_argument("--out", required=True, help="CSV output path")
    p.set_defaults(func=cmd_displace)

    p = sub.add_parser("loss-check", help="loss values, gradient check, map fitting")
    p.add_argument("--grids", help="directory of target .grid files")
    p.add_argument("--grad-check", action="store_true")
    p.add_argument("--seed", type=int, help="required with --grad-check")
    p.add_argument("--fit", type=int, default=0, metavar="STEPS")
    p.add_argument("--gt", help="CircleAnn file for AP of fitted maps")
    p.add_argument("--report", help="JSON report output path")
    p.set_defaults(func=cmd_loss_check)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (CircleAnnError, GridFormatError, ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
