"""Detection evaluation: greedy matching, AP suite, rotation consistency,
mask detection ratio, and the displacement study."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .geometry import BoxAA, Circle, Shape, box_iou, ciou, circle_to_bbox, shift

METRICS = ("ciou", "box")

# Ground-truth area (circle area or box area) separating the small and
# medium evaluation buckets, in square pixels.
SMALL_AREA_LIMIT = 1000.0


@dataclass(frozen=True)
class GroundTruth:
    shape: Shape
    class_id: int = 0
    image_id: int = 0


@dataclass(frozen=True)
class Detection:
    shape: Shape
    score: float
    class_id: int = 0
    image_id: int = 0

    @classmethod
    def from_circle(cls, det, image_id: int = 0) -> "Detection":
        """Adapt a decoded circle detection (circle/score/class_id fields)."""
        return cls(shape=det.circle, score=det.score, class_id=det.class_id,
                   image_id=image_id)


@dataclass
class MatchResult:
    """Greedy matching outcome: (detection index, truth index, overlap)
    pairs plus the leftovers on both sides."""

    pairs: list[tuple[int, int, float]]
    unmatched_detections: list[int]
    unmatched_truths: list[int]


@dataclass
class DisplacementPoint:
    """One row of the displacement study."""

    displacement: float
    mean_iou: float
    mean_ciou: float
    mean_abs_diff: float


@dataclass
class EvalReport:
    """AP suite over overlap thresholds 0.50:0.05:0.95 plus size buckets.

    ap_small / ap_medium are None when the corresponding bucket has no
    ground truth.
    """

    ap: float
    ap50: float
    ap75: float
    ap_small: float | None
    ap_medium: float | None
    thresholds: list[float]
    ap_by_threshold: dict[float, float]
    pr_curves: dict[float, dict[str, list[float]]] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "ap": self.ap,
            "ap50": self.ap50,
            "ap75": self.ap75,
            "ap_small": self.ap_small,
            "ap_medium": self.ap_medium,
            "thresholds": self.thresholds,
            "ap_by_threshold": {f"{t:.2f}": v for t, v in self.ap_by_threshold.items()},
            "pr_curves": {f"{t:.2f}": curve for t, curve in self.pr_curves.items()},
        }


def overlap(metric: str, a: Shape, b: Shape) -> float:
    """Overlap under the named metric; shapes must match the metric."""
    if metric == "ciou":
        if not (isinstance(a, Circle) and isinstance(b, Circle)):
            raise TypeError(f"ciou metric requires circles, got {type(a).__name__}/{type(b).__name__}")
        return ciou(a, b)
    if metric == "box":
        if not (isinstance(a, BoxAA) and isinstance(b, BoxAA)):
            raise TypeError(f"box metric requires boxes, got {type(a).__name__}/{type(b).__name__}")
        return box_iou(a, b)
    raise ValueError(f"unknown metric {metric!r}, expected one of {METRICS}")


def shape_area(shape: Shape) -> float:
    if isinstance(shape, Circle):
        return float(np.pi) * shape.r * shape.r
    return shape.w * shape.h


def _score_order(dets: Sequence[Detection]) -> list[int]:
    # Descending score; equal scores keep input order.
    return sorted(range(len(dets)), key=lambda i: (-dets[i].score, i))


def match_greedy(dets: Sequence[Detection], truths: Sequence[GroundTruth],
                 threshold: float, metric: str = "ciou") -> MatchResult:
    """Greedy score-order matching.

    Detections are processed by descending score (input order on ties); each
    takes the highest-overlap unmatched truth of its class and image with
    overlap >= threshold, lower truth index winning overlap ties.
    """
    matched_truths: set[int] = set()
    pairs: list[tuple[int, int, float]] = []
    matched_dets: set[int] = set()
    for di in _score_order(dets):
        det = dets[di]
        best_ti = -1
        best_ov = -1.0
        for ti, truth in enumerate(truths):
            if ti in matched_truths:
                continue
            if truth.image_id != det.image_id or truth.class_id != det.class_id:
                continue
            ov = overlap(metric, det.shape, truth.shape)
            if ov >= threshold and ov > best_ov:
                best_ti, best_ov = ti, ov
        if best_ti >= 0:
            pairs.append((di, best_ti, best_ov))
            matched_truths.add(best_ti)
            matched_dets.add(di)
    return MatchResult(
        pairs=pairs,
        unmatched_detections=[i for i in range(len(dets)) if i not in matched_dets],
        unmatched_truths=[i for i in range(len(truths)) if i not in matched_truths],
    )


def _ap_from_flags(tp_flags: np.ndarray, num_truths: int) -> float:
    # 101-point interpolated AP: precision envelope sampled at recalls
    # 0.00, 0.01, ..., 1.00.
    if num_truths == 0:
        raise ValueError("average precision is undefined with zero ground truths")
    if tp_flags.size == 0:
        return 0.0
    tp_cum = np.cumsum(tp_flags)
    fp_cum = np.cumsum(1 - tp_flags)
    precision = tp_cum / (tp_cum + fp_cum)
    recall = tp_cum / num_truths
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    sample_recalls = np.linspace(0.0, 1.0, 101)
    idx = np.searchsorted(recall, sample_recalls, side="left")
    interp = np.where(idx < len(recall), envelope[np.minimum(idx, len(recall) - 1)], 0.0)
    return float(interp.mean())


def _tp_flags(dets: Sequence[Detection], match: MatchResult) -> np.ndarray:
    matched = {di for di, _, _ in match.pairs}
    order = _score_order(dets)
    return np.array([1 if di in matched else 0 for di in order], dtype=np.int64)


def average_precision(dets: Sequence[Detection], truths: Sequence[GroundTruth],
                      threshold: float, metric: str = "ciou") -> float:
    """101-point interpolated AP at one overlap threshold, all images pooled."""
    if not truths:
        raise ValueError("average precision is undefined with zero ground truths")
    match = match_greedy(dets, truths, threshold, metric)
    return _ap_from_flags(_tp_flags(dets, match), len(truths))


def _bucket_ap(dets: Sequence[Detection], truths: Sequence[GroundTruth],
               match: MatchResult, in_bucket: np.ndarray) -> float | None:
    # Restrict truths to the bucket; detections matched to out-of-bucket
    # truths are ignored (neither TP nor FP); unmatched detections stay FPs.
    num_bucket = int(in_bucket.sum())
    if num_bucket == 0:
        return None
    det_truth = {di: ti for di, ti, _ in match.pairs}
    flags = []
    for di in _score_order(dets):
        ti = det_truth.get(di)
        if ti is None:
            flags.append(0)
        elif in_bucket[ti]:
            flags.append(1)
        # matched to an out-of-bucket truth: ignored
    return _ap_from_flags(np.array(flags, dtype=np.int64), num_bucket)


def coco_summary(dets: Sequence[Detection], truths: Sequence[GroundTruth],
                 metric: str = "ciou") -> EvalReport:
    """AP suite: mean AP over thresholds 0.50:0.05:0.95, AP50, AP75, and
    size-bucketed AP by ground-truth area (small < 1000 px^2 < medium)."""
    if not truths:
        raise ValueError("evaluation is undefined with zero ground truths")
    thresholds = [(50 + 5 * i) / 100 for i in range(10)]
    areas = np.array([shape_area(t.shape) for t in truths])
    small = areas < SMALL_AREA_LIMIT
    medium = areas > SMALL_AREA_LIMIT

    order = _score_order(dets)
    scores_sorted = [dets[i].score for i in order]
    num_truths = len(truths)

    ap_by_threshold: dict[float, float] = {}
    pr_curves: dict[float, dict[str, list[float]]] = {}
    small_aps: list[float | None] = []
    medium_aps: list[float | None] = []
    for t in thresholds:
        match = match_greedy(dets, truths, t, metric)
        flags = _tp_flags(dets, match)
        ap_by_threshold[t] = _ap_from_flags(flags, num_truths)
        small_aps.append(_bucket_ap(dets, truths, match, small))
        medium_aps.append(_bucket_ap(dets, truths, match, medium))
        tp_cum = np.cumsum(flags)
        fp_cum = np.cumsum(1 - flags)
        with np.errstate(invalid="ignore"):
            precision = np.where(tp_cum + fp_cum > 0, tp_cum / np.maximum(tp_cum + fp_cum, 1), 0.0)
        recall = tp_cum / num_truths
        pr_curves[t] = {
            "scores": scores_sorted,
            "precision": precision.tolist(),
            "recall": recall.tolist(),
        }

    def _mean(values: list[float | None]) -> float | None:
        if any(v is None for v in values):
            return None
        return float(np.mean(values))

    return EvalReport(
        ap=float(np.mean(list(ap_by_threshold.values()))),
        ap50=ap_by_threshold[0.5],
        ap75=ap_by_threshold[0.75],
        ap_small=_mean(small_aps),
        ap_medium=_mean(medium_aps),
        thresholds=thresholds,
        ap_by_threshold=ap_by_threshold,
        pr_curves=pr_curves,
    )


def rotation_consistency(dets_before: Sequence[Detection],
                         dets_after: Sequence[Detection],
                         threshold: float = 0.5, metric: str = "ciou") -> float:
    """Fraction of detections that persist across a rotate-and-map-back pass.

    Pairs are selected greedily by descending overlap among same-image,
    same-class candidates with overlap strictly above the threshold, which
    keeps the ratio symmetric in (before, after). The ratio divides the pair
    count by the average of the two set sizes; it is an error when both sets
    are empty and 0 when exactly one is.
    """
    if not dets_before and not dets_after:
        raise ValueError("rotation consistency is undefined when both sets are empty")
    if not dets_before or not dets_after:
        return 0.0
    candidates = []
    for i, b in enumerate(dets_before):
        for j, a in enumerate(dets_after):
            if b.image_id != a.image_id or b.class_id != a.class_id:
                continue
            ov = overlap(metric, b.shape, a.shape)
            if ov > threshold:
                candidates.append((ov, i, j))
    candidates.sort(key=lambda c: (-c[0], c[1], c[2]))
    used_before: set[int] = set()
    used_after: set[int] = set()
    pairs = 0
    for ov, i, j in candidates:
        if i in used_before or j in used_after:
            continue
        used_before.add(i)
        used_after.add(j)
        pairs += 1
    return pairs / ((len(dets_before) + len(dets_after)) / 2.0)


def mask_detection_ratio(mask_area: float, shape: Shape) -> float:
    """Segmentation-mask area divided by the detection shape's area."""
    if mask_area < 0:
        raise ValueError(f"mask_area must be >= 0, got {mask_area}")
    area = shape_area(shape)
    if area <= 0:
        raise ValueError("mask detection ratio needs a shape with positive area")
    return mask_area / area


def displacement_study(truths: Sequence[Circle], displacements: Sequence[float],
                       rng_seed: int) -> list[DisplacementPoint]:
    """Mean box IOU and circle IOU between each object and a shifted copy.

    One direction is drawn per object and reused across the whole
    displacement grid, which makes both curves non-increasing. Boxes are the
    tight boxes of the circles, shifted the same way.
    """
    if not truths:
        raise ValueError("displacement study needs at least one object")
    for d in displacements:
        if d < 0:
            raise ValueError(f"displacements must be >= 0, got {d}")
    rng = np.random.default_rng(rng_seed)
    angles = rng.uniform(0.0, 2.0 * np.pi, size=len(truths))
    rows = []
    for d in displacements:
        ious = []
        cious = []
        for circle, angle in zip(truths, angles):
            box = circle_to_bbox(circle)
            ious.append(box_iou(box, shift(box, d, angle)))
            cious.append(ciou(circle, shift(circle, d, angle)))
        ious_arr = np.array(ious)
        cious_arr = np.array(cious)
        rows.append(DisplacementPoint(
            displacement=float(d),
            mean_iou=float(ious_arr.mean()),
            mean_ciou=float(cious_arr.mean()),
            mean_abs_diff=float(np.abs(ious_arr - cious_arr).mean()),
        ))
    return rows
