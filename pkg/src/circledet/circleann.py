"""CircleAnn JSON documents: images, circle/box annotations, optional detections."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .geometry import BoxAA, Circle, Shape

FORMAT_VERSION = "circleann-v1"


class CircleAnnError(ValueError):
    """Schema violation; the message names the offending field."""


@dataclass(frozen=True)
class ImageInfo:
    id: int
    width: int
    height: int


@dataclass(frozen=True)
class AnnotationRecord:
    image_id: int
    category: int
    shape: Shape


@dataclass(frozen=True)
class DetectionRecord:
    image_id: int
    category: int
    shape: Shape
    score: float


@dataclass
class CircleAnnDocument:
    images: list[ImageInfo] = field(default_factory=list)
    annotations: list[AnnotationRecord] = field(default_factory=list)
    detections: list[DetectionRecord] | None = None

    def validate(self) -> None:
        seen: set[int] = set()
        for i, img in enumerate(self.images):
            if img.id in seen:
                raise CircleAnnError(f"images[{i}].id: duplicate image id {img.id}")
            seen.add(img.id)
            if img.width <= 0 or img.height <= 0:
                raise CircleAnnError(f"images[{i}]: width and height must be > 0")
        for i, ann in enumerate(self.annotations):
            if ann.image_id not in seen:
                raise CircleAnnError(f"annotations[{i}].image_id: unknown image id {ann.image_id}")
        for i, det in enumerate(self.detections or []):
            if det.image_id not in seen:
                raise CircleAnnError(f"detections[{i}].image_id: unknown image id {det.image_id}")
            if not (math.isfinite(det.score) and 0.0 < det.score < 1.0):
                raise CircleAnnError(f"detections[{i}].score: must be in (0, 1), got {det.score}")

    def to_dict(self) -> dict:
        doc = {
            "version": FORMAT_VERSION,
            "images": [{"id": im.id, "width": im.width, "height": im.height}
                       for im in self.images],
            "annotations": [
                {"image_id": a.image_id, "category": a.category, "shape": _shape_to_dict(a.shape)}
                for a in self.annotations
            ],
        }
        if self.detections is not None:
            doc["detections"] = [
                {"image_id": d.image_id, "category": d.category,
                 "shape": _shape_to_dict(d.shape), "score": d.score}
                for d in self.detections
            ]
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "CircleAnnDocument":
        if not isinstance(doc, dict):
            raise CircleAnnError("document: expected a JSON object at the top level")
        version = doc.get("version")
        if version != FORMAT_VERSION:
            raise CircleAnnError(f"version: expected {FORMAT_VERSION!r}, got {version!r}")
        images = [
            ImageInfo(id=_get_int(img, "id", f"images[{i}]"),
                      width=_get_int(img, "width", f"images[{i}]"),
                      height=_get_int(img, "height", f"images[{i}]"))
            for i, img in enumerate(_get_list(doc, "images"))
        ]
        annotations = [
            AnnotationRecord(
                image_id=_get_int(ann, "image_id", f"annotations[{i}]"),
                category=_get_int(ann, "category", f"annotations[{i}]"),
                shape=_shape_from_dict(ann.get("shape"), f"annotations[{i}].shape"),
            )
            for i, ann in enumerate(_get_list(doc, "annotations"))
        ]
        detections = None
        if "detections" in doc:
            detections = [
                DetectionRecord(
                    image_id=_get_int(det, "image_id", f"detections[{i}]"),
                    category=_get_int(det, "category", f"detections[{i}]"),
                    shape=_shape_from_dict(det.get("shape"), f"detections[{i}].shape"),
                    score=_get_number(det, "score", f"detections[{i}]"),
                )
                for i, det in enumerate(_get_list(doc, "detections"))
            ]
        out = cls(images=images, annotations=annotations, detections=detections)
        out.validate()
        return out

    def save(self, path: str | Path) -> None:
        self.validate()
        text = json.dumps(self.to_dict(), indent=2) + "\n"
        Path(path).write_text(text, encoding="ascii")

    @classmethod
    def load(cls, path: str | Path) -> "CircleAnnDocument":
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise CircleAnnError(f"{path}: not valid JSON: {exc}") from exc
        return cls.from_dict(doc)


def _shape_to_dict(shape: Shape) -> dict:
    if isinstance(shape, Circle):
        return {"kind": "circle", "cx": shape.cx, "cy": shape.cy, "r": shape.r}
    return {"kind": "box", "x": shape.x, "y": shape.y, "w": shape.w, "h": shape.h}


def _shape_from_dict(data, where: str) -> Shape:
    if not isinstance(data, dict):
        raise CircleAnnError(f"{where}: expected an object")
    kind = data.get("kind")
    try:
        if kind == "circle":
            shape = Circle(cx=_get_number(data, "cx", where),
                           cy=_get_number(data, "cy", where),
                           r=_get_number(data, "r", where))
            if shape.r <= 0:
                raise ValueError("radius must be > 0")
            return shape
        if kind == "box":
            return BoxAA(x=_get_number(data, "x", where),
                         y=_get_number(data, "y", where),
                         w=_get_number(data, "w", where),
                         h=_get_number(data, "h", where))
    except ValueError as exc:
        raise CircleAnnError(f"{where}: {exc}") from exc
    raise CircleAnnError(f"{where}.kind: expected 'circle' or 'box', got {kind!r}")


def _get_list(doc: dict, key: str) -> list:
    value = doc.get(key)
    if not isinstance(value, list):
        raise CircleAnnError(f"{key}: expected a list")
    return value


def _get_int(data, key: str, where: str) -> int:
    if not isinstance(data, dict) or key not in data:
        raise CircleAnnError(f"{where}.{key}: missing")
    value = data[key]
    if not isinstance(value, int) or isinstance(value, bool):
        raise CircleAnnError(f"{where}.{key}: expected an integer, got {value!r}")
    return value


def _get_number(data, key: str, where: str) -> float:
    if not isinstance(data, dict) or key not in data:
        raise CircleAnnError(f"{where}.{key}: missing")
    value = data[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise CircleAnnError(f"{where}.{key}: expected a number, got {value!r}")
    if not math.isfinite(float(value)):
        raise CircleAnnError(f"{where}.{key}: must be finite, got {value!r}")
    return float(value)
