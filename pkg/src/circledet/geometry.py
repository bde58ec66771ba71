"""Exact circle and axis-aligned box geometry: areas, overlaps, transforms."""

from __future__ import annotations

import math
from dataclasses import dataclass

# Distances within this of a containment/tangency boundary resolve to the
# boundary case, keeping the intersection continuous under rounding.
BOUNDARY_SNAP = 1e-12


def _require_finite(kind: str, *values: float) -> None:
    for v in values:
        if not math.isfinite(v):
            raise ValueError(f"{kind} coordinates must be finite, got {values}")


@dataclass(frozen=True)
class Circle:
    """A circle in pixel coordinates: center (cx, cy) and radius r.

    r = 0 is allowed as a degenerate input; operations that cannot handle
    it reject it individually.
    """

    cx: float
    cy: float
    r: float

    def __post_init__(self):
        _require_finite("Circle", self.cx, self.cy, self.r)
        if self.r < 0:
            raise ValueError(f"Circle radius must be >= 0, got {self.r}")


@dataclass(frozen=True)
class BoxAA:
    """Axis-aligned box: top-left corner (x, y), width w > 0, height h > 0."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        _require_finite("BoxAA", self.x, self.y, self.w, self.h)
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"BoxAA needs w > 0 and h > 0, got w={self.w}, h={self.h}")


@dataclass(frozen=True)
class LensGeometry:
    """Partial-overlap quantities for a circle pair.

    d is the center distance, lx the distance from the first center to the
    foot of the radical chord, ly the half-chord length. Only defined when
    |r_a - r_b| < d < r_a + r_b.
    """

    d: float
    lx: float
    ly: float


Shape = Circle | BoxAA


def circle_area(c: Circle) -> float:
    """Area of a circle; 0 for the degenerate r = 0 case."""
    return math.pi * c.r * c.r


def _ordered(a: Circle, b: Circle) -> tuple[Circle, Circle]:
    # Canonical argument order makes the symmetric operations bit-identical
    # under argument swap.
    if (a.r, a.cx, a.cy) <= (b.r, b.cx, b.cy):
        return a, b
    return b, a


def lens_geometry(a: Circle, b: Circle) -> LensGeometry:
    """Chord geometry of two partially overlapping circles.

    Raises ValueError outside the partial-overlap regime, where the chord
    does not exist.
    """
    d = math.hypot(b.cx - a.cx, b.cy - a.cy)
    if not abs(a.r - b.r) < d < a.r + b.r:
        raise ValueError(
            f"lens geometry requires partial overlap: |r_a-r_b| < d < r_a+r_b, "
            f"got d={d}, r_a={a.r}, r_b={b.r}"
        )
    lx = (a.r * a.r - b.r * b.r + d * d) / (2 * d)
    ly = math.sqrt(max(a.r * a.r - lx * lx, 0.0))
    return LensGeometry(d=d, lx=lx, ly=ly)


def _lens_area(ra: float, rb: float, d: float) -> float:
    # Two circular segments joined at the radical chord. Unlike the arcsin
    # form, each arccos term stays valid on both sides of the chord. The
    # result is clamped into its analytic range [0, pi*rmin^2], which
    # cancellation near the tangency/containment boundaries can leave by
    # rounding dust.
    ca = (d * d + ra * ra - rb * rb) / (2 * d * ra)
    cb = (d * d + rb * rb - ra * ra) / (2 * d * rb)
    ca = min(1.0, max(-1.0, ca))
    cb = min(1.0, max(-1.0, cb))
    t = (-d + ra + rb) * (d + ra - rb) * (d - ra + rb) * (d + ra + rb)
    area = ra * ra * math.acos(ca) + rb * rb * math.acos(cb) - 0.5 * math.sqrt(max(t, 0.0))
    rmin = min(ra, rb)
    return min(max(area, 0.0), math.pi * rmin * rmin)


def circle_intersection_area(a: Circle, b: Circle) -> float:
    """Exact lens area of two circles.

    Returns 0 when disjoint (d >= r_a + r_b) and the smaller circle's area
    at containment (d <= |r_a - r_b|); continuous and symmetric.
    """
    a, b = _ordered(a, b)
    d = math.hypot(b.cx - a.cx, b.cy - a.cy)
    if d >= a.r + b.r - BOUNDARY_SNAP:
        return 0.0
    if d <= abs(a.r - b.r) + BOUNDARY_SNAP:
        rmin = min(a.r, b.r)
        return math.pi * rmin * rmin
    return _lens_area(a.r, b.r, d)


def ciou(a: Circle, b: Circle) -> float:
    """Circle intersection-over-union in [0, 1].

    Symmetric; 1.0 exactly for identical circles; 0.0 for disjoint ones.
    Undefined (ValueError) when both radii are zero.
    """
    if a.r == 0 and b.r == 0:
        raise ValueError("ciou is undefined for two zero-radius circles (0/0)")
    a, b = _ordered(a, b)
    d = math.hypot(b.cx - a.cx, b.cy - a.cy)
    if d >= a.r + b.r - BOUNDARY_SNAP:
        return 0.0
    if d <= abs(a.r - b.r) + BOUNDARY_SNAP:
        # Containment reduces to the radius ratio; computing it directly
        # keeps the identity ciou = rmin^2/rmax^2 exact.
        rmin = min(a.r, b.r)
        rmax = max(a.r, b.r)
        return (rmin * rmin) / (rmax * rmax)
    inter = _lens_area(a.r, b.r, d)
    union = math.pi * a.r * a.r + math.pi * b.r * b.r - inter
    return inter / union


def box_iou(a: BoxAA, b: BoxAA) -> float:
    """Standard axis-aligned box intersection-over-union in [0, 1].

    Identical boxes score exactly 1.0; computing the shared right edge as
    (x + w) - x would otherwise leave rounding dust.
    """
    if a == b:
        return 1.0
    iw = min(a.x + a.w, b.x + b.w) - max(a.x, b.x)
    ih = min(a.y + a.h, b.y + b.h) - max(a.y, b.y)
    if iw <= 0 or ih <= 0:
        return 0.0
    # clamp into the analytic range so rounding cannot push the ratio past 1
    inter = min(iw * ih, a.w * a.h, b.w * b.h)
    union = a.w * a.h + b.w * b.h - inter
    return inter / union


def circle_to_bbox(c: Circle) -> BoxAA:
    """Tight square around a circle."""
    if c.r <= 0:
        raise ValueError(f"circle_to_bbox needs r > 0, got {c.r}")
    return BoxAA(x=c.cx - c.r, y=c.cy - c.r, w=2 * c.r, h=2 * c.r)


def _rotate_once(shape: Shape, width: float) -> Shape:
    # One counter-clockwise quarter turn of the image content, continuous
    # coordinates: (x, y) -> (y, width - x). The pixel-index variant for
    # raster grids is (x, y) -> (y, width - 1 - x), i.e. numpy rot90.
    if isinstance(shape, Circle):
        return Circle(cx=shape.cy, cy=width - shape.cx, r=shape.r)
    return BoxAA(x=shape.y, y=width - shape.x - shape.w, w=shape.h, h=shape.w)


def rotate90(shape: Shape, image_w: float, image_h: float, quarter_turns: int) -> Shape:
    """Map a shape into the frame of the image rotated counter-clockwise.

    quarter_turns counts 90-degree counter-clockwise rotations of the image
    content (reduced mod 4). The rotated frame has swapped dimensions on odd
    turns; circles keep their radius, boxes swap w/h.
    """
    k = quarter_turns % 4
    w, h = image_w, image_h
    for _ in range(k):
        shape = _rotate_once(shape, w)
        w, h = h, w
    return shape


def shift(shape: Shape, distance: float, angle: float) -> Shape:
    """Translate a shape by `distance` pixels in direction `angle` (radians)."""
    if distance < 0:
        raise ValueError(f"shift distance must be >= 0, got {distance}")
    dx = distance * math.cos(angle)
    dy = distance * math.sin(angle)
    if isinstance(shape, Circle):
        return Circle(cx=shape.cx + dx, cy=shape.cy + dy, r=shape.r)
    return BoxAA(x=shape.x + dx, y=shape.y + dy, w=shape.w, h=shape.h)
