"""Ground-truth target maps and the detection loss stack with analytic gradients."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Circle

# Predictions are clamped to [HEATMAP_EPS, 1 - HEATMAP_EPS] before any log.
HEATMAP_EPS = 1e-7

# Lower bound on the Gaussian kernel standard deviation (output-grid units),
# so tiny objects still get a usable neighborhood.
SIGMA_FLOOR = 2.0 / 3.0


@dataclass(frozen=True)
class TargetConfig:
    """Rendering and loss configuration.

    downsample_r is the input-to-output resolution ratio; image dimensions
    must be divisible by it. lambda_radius / lambda_off weight the radius and
    offset terms of the total loss.
    """

    image_w: int = 512
    image_h: int = 512
    downsample_r: int = 4
    num_classes: int = 1
    focal_alpha: float = 2.0
    focal_beta: float = 4.0
    lambda_radius: float = 0.1
    lambda_off: float = 1.0
    min_gaussian_overlap: float = 0.7

    def __post_init__(self):
        if self.downsample_r < 1:
            raise ValueError(f"downsample_r must be a positive integer, got {self.downsample_r}")
        if self.image_w % self.downsample_r or self.image_h % self.downsample_r:
            raise ValueError(
                f"image size {self.image_w}x{self.image_h} not divisible by "
                f"downsample_r={self.downsample_r}"
            )
        if self.num_classes < 1:
            raise ValueError(f"num_classes must be >= 1, got {self.num_classes}")
        if not 0.0 < self.min_gaussian_overlap < 1.0:
            raise ValueError(f"min_gaussian_overlap must be in (0,1), got {self.min_gaussian_overlap}")

    @property
    def grid_w(self) -> int:
        return self.image_w // self.downsample_r

    @property
    def grid_h(self) -> int:
        return self.image_h // self.downsample_r


@dataclass(frozen=True)
class CenterTarget:
    """One annotated object on the output grid: integer cell, sub-cell offset,
    and radius in output-grid units."""

    grid_x: int
    grid_y: int
    class_id: int
    offset_x: float
    offset_y: float
    radius: float


@dataclass
class TargetMaps:
    """Rendered ground truth: heatmap (grid_h, grid_w, C) plus per-object
    center records."""

    heatmap: np.ndarray
    centers: list[CenterTarget] = field(default_factory=list)

    @property
    def num_centers(self) -> int:
        return len(self.centers)


@dataclass
class PredictionMaps:
    """The three prediction heads at output resolution.

    heatmap (grid_h, grid_w, C) is clamped into [HEATMAP_EPS, 1-HEATMAP_EPS]
    at construction; offset is (grid_h, grid_w, 2) as (dx, dy); radius is
    (grid_h, grid_w, 1) in output-grid units.
    """

    heatmap: np.ndarray
    offset: np.ndarray
    radius: np.ndarray

    def __post_init__(self):
        self.heatmap = clamp_heatmap(np.asarray(self.heatmap, dtype=np.float64))
        self.offset = np.asarray(self.offset, dtype=np.float64)
        self.radius = np.asarray(self.radius, dtype=np.float64)
        if self.radius.ndim == 2:
            self.radius = self.radius[:, :, None]
        if self.heatmap.ndim != 3:
            raise ValueError(f"heatmap must be (h, w, c), got shape {self.heatmap.shape}")
        hw = self.heatmap.shape[:2]
        if self.offset.shape != (*hw, 2):
            raise ValueError(f"offset shape {self.offset.shape} does not match heatmap grid {hw}")
        if self.radius.shape != (*hw, 1):
            raise ValueError(f"radius shape {self.radius.shape} does not match heatmap grid {hw}")
        for name, arr in (("offset", self.offset), ("radius", self.radius)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} map contains non-finite values")


def clamp_heatmap(values: np.ndarray) -> np.ndarray:
    """Clamp heatmap scores into the open unit interval used by the losses."""
    values = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(values)):
        raise ValueError("heatmap contains non-finite values")
    return np.clip(values, HEATMAP_EPS, 1.0 - HEATMAP_EPS)


def _corner_radius(height: float, width: float, min_overlap: float) -> float:
    # Largest corner displacement that keeps a height x width box at IOU >=
    # min_overlap with its shifted copy: minimum of the three quadratic roots
    # covering the inward/outward/mixed displacement cases.
    a1 = 1.0
    b1 = height + width
    c1 = width * height * (1 - min_overlap) / (1 + min_overlap)
    r1 = (b1 - math.sqrt(b1 * b1 - 4 * a1 * c1)) / (2 * a1)

    a2 = 4.0
    b2 = 2 * (height + width)
    c2 = (1 - min_overlap) * width * height
    r2 = (b2 - math.sqrt(b2 * b2 - 4 * a2 * c2)) / (2 * a2)

    a3 = 4.0 * min_overlap
    b3 = -2 * min_overlap * (height + width)
    c3 = (min_overlap - 1) * width * height
    r3 = (b3 + math.sqrt(b3 * b3 - 4 * a3 * c3)) / (2 * a3)
    return min(r1, r2, r3)


def gaussian_sigma(c: Circle, cfg: TargetConfig) -> float:
    """Kernel standard deviation for one object, in output-grid units."""
    if c.r <= 0:
        raise ValueError(f"gaussian_sigma needs r > 0, got {c.r}")
    side = 2.0 * c.r / cfg.downsample_r
    rho = _corner_radius(side, side, cfg.min_gaussian_overlap)
    return max(rho / 3.0, SIGMA_FLOOR)


def render_targets(annotations: list[tuple[Circle, int]], cfg: TargetConfig) -> TargetMaps:
    """Render the center heatmap and per-object center records.

    Each object contributes a full-grid Gaussian kernel centered on its
    integer (floor-downsampled) grid cell; overlapping same-class kernels
    combine by per-cell maximum, so the center cell is exactly 1.
    """
    gh, gw = cfg.grid_h, cfg.grid_w
    heatmap = np.zeros((gh, gw, cfg.num_classes), dtype=np.float64)
    gx = np.arange(gw, dtype=np.float64)[None, :]
    gy = np.arange(gh, dtype=np.float64)[:, None]

    centers: list[CenterTarget] = []
    for circle, class_id in annotations:
        if not 0 <= class_id < cfg.num_classes:
            raise ValueError(f"class id {class_id} out of range for {cfg.num_classes} classes")
        px = circle.cx / cfg.downsample_r
        py = circle.cy / cfg.downsample_r
        cell_x = math.floor(px)
        cell_y = math.floor(py)
        if not (0 <= cell_x < gw and 0 <= cell_y < gh):
            raise ValueError(
                f"center ({circle.cx}, {circle.cy}) falls outside the "
                f"{gw}x{gh} output grid after downsampling"
            )
        sigma = gaussian_sigma(circle, cfg)
        kernel = np.exp(-((gx - cell_x) ** 2 + (gy - cell_y) ** 2) / (2.0 * sigma * sigma))
        np.maximum(heatmap[:, :, class_id], kernel, out=heatmap[:, :, class_id])
        centers.append(
            CenterTarget(
                grid_x=cell_x,
                grid_y=cell_y,
                class_id=class_id,
                offset_x=px - cell_x,
                offset_y=py - cell_y,
                radius=circle.r / cfg.downsample_r,
            )
        )
    return TargetMaps(heatmap=heatmap, centers=centers)


def _check_heatmap_shapes(pred: np.ndarray, target: TargetMaps) -> np.ndarray:
    pred = clamp_heatmap(pred)
    if pred.shape != target.heatmap.shape:
        raise ValueError(
            f"prediction shape {pred.shape} does not match target shape {target.heatmap.shape}"
        )
    return pred


def focal_loss(pred_heatmap: np.ndarray, target: TargetMaps,
               alpha: float = 2.0, beta: float = 4.0) -> float:
    """Penalty-reduced focal loss over the center heatmap.

    Cells where the target is exactly 1 use the positive branch; all others
    are negatives down-weighted by (1 - target)^beta. Normalized by the
    number of centers (or 1 for empty scenes).
    """
    pred = _check_heatmap_shapes(pred_heatmap, target)
    y = target.heatmap
    n = max(target.num_centers, 1)
    pos = y == 1.0
    pos_term = (1.0 - pred) ** alpha * np.log(pred)
    neg_term = (1.0 - y) ** beta * pred ** alpha * np.log(1.0 - pred)
    total = np.where(pos, pos_term, neg_term).sum()
    return float(-total / n)


def focal_loss_grad(pred_heatmap: np.ndarray, target: TargetMaps,
                    alpha: float = 2.0, beta: float = 4.0) -> np.ndarray:
    """d(focal_loss)/d(prediction), evaluated at the clamped prediction."""
    pred = _check_heatmap_shapes(pred_heatmap, target)
    y = target.heatmap
    n = max(target.num_centers, 1)
    pos = y == 1.0
    one_m = 1.0 - pred
    pos_grad = alpha * one_m ** (alpha - 1) * np.log(pred) - one_m ** alpha / pred
    neg_grad = (1.0 - y) ** beta * (
        pred ** alpha / one_m - alpha * pred ** (alpha - 1) * np.log(one_m)
    )
    return np.where(pos, pos_grad, neg_grad) / n


def _require_centers(target: TargetMaps, what: str) -> None:
    if target.num_centers == 0:
        raise ValueError(f"{what} is undefined for a scene with no centers")


def offset_loss(pred_offset: np.ndarray, target: TargetMaps) -> float:
    """Mean L1 error of the sub-cell offsets at the center cells only."""
    _require_centers(target, "offset_loss")
    pred = np.asarray(pred_offset, dtype=np.float64)
    total = 0.0
    for c in target.centers:
        total += abs(pred[c.grid_y, c.grid_x, 0] - c.offset_x)
        total += abs(pred[c.grid_y, c.grid_x, 1] - c.offset_y)
    return total / target.num_centers


def radius_loss(pred_radius: np.ndarray, target: TargetMaps) -> float:
    """Mean absolute radius error at the center cells, output-grid units."""
    _require_centers(target, "radius_loss")
    pred = np.asarray(pred_radius, dtype=np.float64)
    if pred.ndim == 3:
        pred = pred[:, :, 0]
    total = 0.0
    for c in target.centers:
        total += abs(pred[c.grid_y, c.grid_x] - c.radius)
    return total / target.num_centers


def total_loss(pred: PredictionMaps, target: TargetMaps,
               cfg: TargetConfig) -> tuple[float, dict[str, float]]:
    """Weighted detection loss and its per-term breakdown.

    Offset and radius terms are skipped (reported as 0) for scenes with no
    centers, where they are undefined.
    """
    lk = focal_loss(pred.heatmap, target, cfg.focal_alpha, cfg.focal_beta)
    if target.num_centers > 0:
        lr = radius_loss(pred.radius, target)
        lo = offset_loss(pred.offset, target)
    else:
        lr = 0.0
        lo = 0.0
    total = lk + cfg.lambda_radius * lr + cfg.lambda_off * lo
    return total, {"focal": lk, "radius": lr, "offset": lo}


def targets_to_predictions(target: TargetMaps) -> PredictionMaps:
    """Build the ideal prediction for a rendered target: the target heatmap,
    with true offsets and radii written at the center cells."""
    gh, gw = target.heatmap.shape[:2]
    offset = np.zeros((gh, gw, 2), dtype=np.float64)
    radius = np.zeros((gh, gw, 1), dtype=np.float64)
    for c in target.centers:
        offset[c.grid_y, c.grid_x, 0] = c.offset_x
        offset[c.grid_y, c.grid_x, 1] = c.offset_y
        radius[c.grid_y, c.grid_x, 0] = c.radius
    return PredictionMaps(heatmap=target.heatmap.copy(), offset=offset, radius=radius)


def fit_prediction_maps(target: TargetMaps, cfg: TargetConfig, steps: int = 500,
                        lr_heatmap: float = 0.3, lr_offset: float = 0.5,
                        lr_radius: float = 2.0, lr_decay: float = 0.99,
                        init_heatmap: float = 0.1) -> tuple[PredictionMaps, list[float]]:
    """Fit prediction maps to a target by projected (sub)gradient descent.

    The heatmap follows the analytic focal gradient; offset and radius maps
    follow the L1 subgradient at the center cells. Step sizes decay
    geometrically so the L1 terms settle instead of oscillating. Returns the
    fitted maps and the total-loss history (initial value first).
    """
    gh, gw = target.heatmap.shape[:2]
    heatmap = np.full_like(target.heatmap, init_heatmap)
    offset = np.zeros((gh, gw, 2), dtype=np.float64)
    radius = np.zeros((gh, gw, 1), dtype=np.float64)

    def current() -> PredictionMaps:
        return PredictionMaps(heatmap=heatmap.copy(), offset=offset.copy(), radius=radius.copy())

    history = [total_loss(current(), target, cfg)[0]]
    n = max(target.num_centers, 1)
    for step in range(steps):
        decay = lr_decay ** step
        grad_hm = focal_loss_grad(heatmap, target, cfg.focal_alpha, cfg.focal_beta)
        heatmap = np.clip(heatmap - lr_heatmap * decay * grad_hm,
                          HEATMAP_EPS, 1.0 - HEATMAP_EPS)
        for c in target.centers:
            step_off = lr_offset * decay * cfg.lambda_off / n
            offset[c.grid_y, c.grid_x, 0] -= step_off * np.sign(
                offset[c.grid_y, c.grid_x, 0] - c.offset_x)
            offset[c.grid_y, c.grid_x, 1] -= step_off * np.sign(
                offset[c.grid_y, c.grid_x, 1] - c.offset_y)
            step_rad = lr_radius * decay * cfg.lambda_radius / n
            radius[c.grid_y, c.grid_x, 0] -= step_rad * np.sign(
                radius[c.grid_y, c.grid_x, 0] - c.radius)
        history.append(total_loss(current(), target, cfg)[0])
    return current(), history


def gradient_check(pred_heatmap: np.ndarray, target: TargetMaps,
                   alpha: float = 2.0, beta: float = 4.0,
                   step: float = 1e-6) -> float:
    """Max mismatch between the analytic focal gradient and central finite
    differences, relative to the gradient magnitude (floored at 1e-3 to keep
    near-zero cells from amplifying finite-difference noise)."""
    pred = np.array(pred_heatmap, dtype=np.float64)
    analytic = focal_loss_grad(pred, target, alpha, beta)
    worst = 0.0
    it = np.nditer(pred, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        orig = pred[idx]
        pred[idx] = orig + step
        f_plus = focal_loss(pred, target, alpha, beta)
        pred[idx] = orig - step
        f_minus = focal_loss(pred, target, alpha, beta)
        pred[idx] = orig
        numeric = (f_plus - f_minus) / (2 * step)
        err = abs(analytic[idx] - numeric) / max(abs(numeric), 1e-3)
        worst = max(worst, err)
    return worst
