"""Prediction maps to scored circle detections: peaks, top-k, circle formation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Circle, ciou
from .targets import PredictionMaps, TargetConfig


@dataclass(frozen=True)
class Peak:
    """A heatmap cell whose value is >= all of its 8-connected neighbors."""

    grid_x: int
    grid_y: int
    class_id: int
    score: float


@dataclass(frozen=True)
class CircleDetection:
    """A decoded detection in input-image pixels."""

    circle: Circle
    score: float
    class_id: int


def local_peaks(heatmap: np.ndarray, class_id: int = 0) -> list[Peak]:
    """All cells >= their existing 8-connected neighbors, row-major order.

    Accepts a (h, w, C) heatmap with class_id selecting the channel, or a
    plain (h, w) grid. Border cells compare only against in-bounds neighbors;
    plateau cells all qualify.
    """
    heatmap = np.asarray(heatmap, dtype=np.float64)
    grid = heatmap[:, :, class_id] if heatmap.ndim == 3 else heatmap
    padded = np.full((grid.shape[0] + 2, grid.shape[1] + 2), -np.inf)
    padded[1:-1, 1:-1] = grid
    is_peak = np.ones_like(grid, dtype=bool)
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            if dy == 0 and dx == 0:
                continue
            neighbor = padded[1 + dy:padded.shape[0] - 1 + dy,
                              1 + dx:padded.shape[1] - 1 + dx]
            is_peak &= grid >= neighbor
    return [
        Peak(grid_x=int(x), grid_y=int(y), class_id=class_id, score=float(grid[y, x]))
        for y, x in np.argwhere(is_peak)
    ]


def topk_peaks(peaks: list[Peak], n: int, score_threshold: float = 0.0) -> list[Peak]:
    """Highest-scoring peaks at or above the threshold, at most n.

    Ordering is deterministic: score descending, ties by (class, row, column).
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    kept = [p for p in peaks if p.score >= score_threshold]
    kept.sort(key=lambda p: (-p.score, p.class_id, p.grid_y, p.grid_x))
    return kept[:n]


def decode_circles(maps: PredictionMaps, cfg: TargetConfig,
                   n: int = 100, score_threshold: float = 0.0) -> list[CircleDetection]:
    """Decode prediction maps into circle detections in input pixels.

    Peak centers are refined by the offset at the peak cell and scaled by the
    downsampling factor; the radius is read at the integer peak cell.
    Detections whose decoded radius is not positive are dropped.
    """
    if maps.heatmap.shape[:2] != (cfg.grid_h, cfg.grid_w):
        raise ValueError(
            f"maps grid {maps.heatmap.shape[:2]} does not match config grid "
            f"{(cfg.grid_h, cfg.grid_w)}"
        )
    peaks: list[Peak] = []
    for class_id in range(maps.heatmap.shape[2]):
        peaks.extend(local_peaks(maps.heatmap, class_id))
    scale = float(cfg.downsample_r)
    detections = []
    for p in topk_peaks(peaks, n, score_threshold):
        r = float(maps.radius[p.grid_y, p.grid_x, 0]) * scale
        if r <= 0:
            continue
        cx = (p.grid_x + float(maps.offset[p.grid_y, p.grid_x, 0])) * scale
        cy = (p.grid_y + float(maps.offset[p.grid_y, p.grid_x, 1])) * scale
        detections.append(
            CircleDetection(circle=Circle(cx=cx, cy=cy, r=r), score=p.score,
                            class_id=p.class_id)
        )
    return detections


def nms_circles(detections: list[CircleDetection],
                ciou_threshold: float = 0.5) -> list[CircleDetection]:
    """Greedy overlap suppression for circle detections (off by default in
    decoding; intended for noisy simulated detections).

    Keeps detections in score order, dropping any whose overlap with an
    already kept same-class detection reaches the threshold.
    """
    order = sorted(range(len(detections)),
                   key=lambda i: (-detections[i].score, i))
    kept: list[CircleDetection] = []
    for i in order:
        d = detections[i]
        if all(k.class_id != d.class_id or ciou(k.circle, d.circle) < ciou_threshold
               for k in kept):
            kept.append(d)
    return kept
