"""Synthetic ball-shaped-object scenes, detector jitter, and mask rasterization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .decode import CircleDetection
from .evalkit import Detection
from .geometry import BoxAA, Circle, box_iou, circle_to_bbox, ciou

# Per-object retry budget for rejection sampling; infeasible packings fail
# loudly instead of degrading.
PLACEMENT_RETRIES = 1000

SCORE_EPS = 1e-6


@dataclass(frozen=True)
class SceneConfig:
    """Scene generation parameters: 512x512 patches with at least one object,
    radii at ball-shaped-organ scale."""

    image_w: int = 512
    image_h: int = 512
    objects_per_image: tuple[int, int] = (1, 8)
    radius_range: tuple[float, float] = (12.0, 44.0)
    min_separation: float = 4.0
    rng_seed: int = 0

    def __post_init__(self):
        lo, hi = self.objects_per_image
        if not 1 <= lo <= hi:
            raise ValueError(f"objects_per_image must satisfy 1 <= lo <= hi, got {self.objects_per_image}")
        rlo, rhi = self.radius_range
        if not 0 < rlo <= rhi:
            raise ValueError(f"radius_range must be positive and ordered, got {self.radius_range}")
        if 2 * rhi > min(self.image_w, self.image_h):
            raise ValueError("largest radius does not fit inside the image")


@dataclass(frozen=True)
class JitterConfig:
    """Simulated detector error model.

    Center noise is Gaussian (x-noise scaled by `anisotropy` to mimic an
    orientation-sensitive detector), radius noise log-normal and relative.
    False positives arrive as a Poisson count placed uniformly with radii
    from fp_radius_range. Scores are the overlap with the source truth minus
    Gaussian noise, clamped into (0, 1).
    """

    center_sigma: float = 0.0
    radius_rel_sigma: float = 0.0
    drop_prob: float = 0.0
    false_positive_rate: float = 0.0
    score_noise_sigma: float = 0.0
    anisotropy: float = 1.0
    fp_radius_range: tuple[float, float] = (12.0, 44.0)
    rng_seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.drop_prob <= 1.0:
            raise ValueError(f"drop_prob must be in [0,1], got {self.drop_prob}")
        for name in ("center_sigma", "radius_rel_sigma", "false_positive_rate",
                     "score_noise_sigma"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.anisotropy <= 0:
            raise ValueError(f"anisotropy must be > 0, got {self.anisotropy}")


def generate_scene(cfg: SceneConfig, rng: np.random.Generator | None = None) -> list[tuple[Circle, int]]:
    """One scene of non-overlapping circles fully inside the image.

    Pairwise center distances respect r_i + r_j + min_separation. Rejection
    sampling with a bounded retry budget; deterministic given the seed.
    """
    if rng is None:
        rng = np.random.default_rng(cfg.rng_seed)
    lo, hi = cfg.objects_per_image
    count = int(rng.integers(lo, hi + 1))
    placed: list[Circle] = []
    for _ in range(count):
        for _attempt in range(PLACEMENT_RETRIES):
            r = float(rng.uniform(*cfg.radius_range))
            cx = float(rng.uniform(r, cfg.image_w - r))
            cy = float(rng.uniform(r, cfg.image_h - r))
            if all(np.hypot(cx - p.cx, cy - p.cy) >= r + p.r + cfg.min_separation
                   for p in placed):
                placed.append(Circle(cx=cx, cy=cy, r=r))
                break
        else:
            raise RuntimeError(
                f"could not place object {len(placed) + 1}/{count} after "
                f"{PLACEMENT_RETRIES} attempts; packing is infeasible"
            )
    return [(c, 0) for c in placed]


def _jitter_center(rng: np.random.Generator, jitter: JitterConfig) -> tuple[float, float]:
    dx = float(rng.normal(0.0, jitter.center_sigma * jitter.anisotropy))
    dy = float(rng.normal(0.0, jitter.center_sigma))
    return dx, dy


def _score(rng: np.random.Generator, jitter: JitterConfig, overlap_value: float) -> float:
    noise = float(rng.normal(0.0, jitter.score_noise_sigma))
    return float(np.clip(overlap_value - noise, SCORE_EPS, 1.0 - SCORE_EPS))


def simulate_detections(truths: list[tuple[Circle, int]], jitter: JitterConfig,
                        image_w: float, image_h: float,
                        rng: np.random.Generator | None = None) -> list[CircleDetection]:
    """Jittered circle detections for a scene, plus uniform false positives."""
    if rng is None:
        rng = np.random.default_rng(jitter.rng_seed)
    detections: list[CircleDetection] = []
    for circle, class_id in truths:
        dropped = float(rng.uniform()) < jitter.drop_prob
        dx, dy = _jitter_center(rng, jitter)
        r = circle.r * float(np.exp(rng.normal(0.0, jitter.radius_rel_sigma)))
        if dropped:
            continue
        noisy = Circle(cx=circle.cx + dx, cy=circle.cy + dy, r=r)
        detections.append(CircleDetection(
            circle=noisy, score=_score(rng, jitter, ciou(noisy, circle)),
            class_id=class_id))
    for _ in range(int(rng.poisson(jitter.false_positive_rate))):
        r = float(rng.uniform(*jitter.fp_radius_range))
        cx = float(rng.uniform(r, image_w - r))
        cy = float(rng.uniform(r, image_h - r))
        detections.append(CircleDetection(
            circle=Circle(cx=cx, cy=cy, r=r),
            score=float(rng.uniform(0.05, 0.5)), class_id=0))
    return detections


def simulate_box_detections(truths: list[tuple[Circle, int]], jitter: JitterConfig,
                            image_w: float, image_h: float,
                            rng: np.random.Generator | None = None,
                            image_id: int = 0) -> list[Detection]:
    """Box variant: truths become tight boxes first, then receive center noise
    and independent per-axis log-normal size noise."""
    if rng is None:
        rng = np.random.default_rng(jitter.rng_seed)
    detections: list[Detection] = []
    for circle, class_id in truths:
        box = circle_to_bbox(circle)
        dropped = float(rng.uniform()) < jitter.drop_prob
        dx, dy = _jitter_center(rng, jitter)
        sw = float(np.exp(rng.normal(0.0, jitter.radius_rel_sigma)))
        sh = float(np.exp(rng.normal(0.0, jitter.radius_rel_sigma)))
        if dropped:
            continue
        w = box.w * sw
        h = box.h * sh
        noisy = BoxAA(x=box.x + dx + (box.w - w) / 2, y=box.y + dy + (box.h - h) / 2,
                      w=w, h=h)
        detections.append(Detection(
            shape=noisy, score=_score(rng, jitter, box_iou(noisy, box)),
            class_id=class_id, image_id=image_id))
    for _ in range(int(rng.poisson(jitter.false_positive_rate))):
        r = float(rng.uniform(*jitter.fp_radius_range))
        cx = float(rng.uniform(r, image_w - r))
        cy = float(rng.uniform(r, image_h - r))
        detections.append(Detection(
            shape=BoxAA(x=cx - r, y=cy - r, w=2 * r, h=2 * r),
            score=float(rng.uniform(0.05, 0.5)), class_id=0, image_id=image_id))
    return detections


def rasterize_mask(c: Circle, image_w: int, image_h: int) -> tuple[np.ndarray, int]:
    """Binary mask of a circle on the pixel grid and its pixel-count area.

    A pixel is set when its center lies inside the circle. The circle must
    intersect the image.
    """
    nearest_x = min(max(c.cx, 0.0), float(image_w))
    nearest_y = min(max(c.cy, 0.0), float(image_h))
    if np.hypot(nearest_x - c.cx, nearest_y - c.cy) > c.r:
        raise ValueError(
            f"circle at ({c.cx}, {c.cy}) r={c.r} lies entirely outside the "
            f"{image_w}x{image_h} image"
        )
    xs = np.arange(image_w, dtype=np.float64) + 0.5
    ys = np.arange(image_h, dtype=np.float64) + 0.5
    mask = (xs[None, :] - c.cx) ** 2 + (ys[:, None] - c.cy) ** 2 <= c.r * c.r
    return mask, int(mask.sum())
