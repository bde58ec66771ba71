"""Circle-representation detection toolkit.

Exact circle IOU geometry, Gaussian heatmap targets with the detection loss
stack and analytic gradients, heatmap-to-circle decoding, detection
evaluation protocols (AP suite, rotation consistency, mask detection ratio,
displacement study), and a synthetic scene harness tying them together.
"""

from .geometry import (
    BoxAA,
    Circle,
    LensGeometry,
    box_iou,
    ciou,
    circle_area,
    circle_intersection_area,
    circle_to_bbox,
    lens_geometry,
    rotate90,
    shift,
)
from .targets import (
    PredictionMaps,
    TargetConfig,
    TargetMaps,
    fit_prediction_maps,
    focal_loss,
    focal_loss_grad,
    gaussian_sigma,
    offset_loss,
    radius_loss,
    render_targets,
    targets_to_predictions,
    total_loss,
)
from .decode import CircleDetection, Peak, decode_circles, local_peaks, nms_circles, topk_peaks
from .evalkit import (
    Detection,
    EvalReport,
    GroundTruth,
    MatchResult,
    average_precision,
    coco_summary,
    displacement_study,
    mask_detection_ratio,
    match_greedy,
    rotation_consistency,
)
from .synth import JitterConfig, SceneConfig, generate_scene, rasterize_mask, simulate_detections

__version__ = "0.1.0"

__all__ = [
    "BoxAA",
    "Circle",
    "CircleDetection",
    "Detection",
    "EvalReport",
    "GroundTruth",
    "JitterConfig",
    "LensGeometry",
    "MatchResult",
    "Peak",
    "PredictionMaps",
    "SceneConfig",
    "TargetConfig",
    "TargetMaps",
    "average_precision",
    "box_iou",
    "ciou",
    "circle_area",
    "circle_intersection_area",
    "circle_to_bbox",
    "coco_summary",
    "decode_circles",
    "displacement_study",
    "fit_prediction_maps",
    "focal_loss",
    "focal_loss_grad",
    "gaussian_sigma",
    "generate_scene",
    "lens_geometry",
    "local_peaks",
    "mask_detection_ratio",
    "match_greedy",
    "nms_circles",
    "offset_loss",
    "radius_loss",
    "rasterize_mask",
    "render_targets",
    "rotate90",
    "rotation_consistency",
    "shift",
    "simulate_detections",
    "targets_to_predictions",
    "topk_peaks",
    "total_loss",
    "__version__",
]
