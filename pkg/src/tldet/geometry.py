"""Axis-aligned bounding boxes, IoU and the 1-IoU distance.

Boxes live in two representations: normalized center form (fractions of
the image) and pixel corner form.  Corner coordinates are treated as
continuous real intervals, so areas are (x2-x1)*(y2-y1) with no
pixel-grid off-by-one.  All functions are pure and thread-safe.
"""

from __future__ import annotations

from dataclasses import dataclass

from tldet.errors import ValidationError


@dataclass(frozen=True)
class BBoxNorm:
    """Center-form box in image fractions: 0<=cx,cy<=1, 0<w,h<=1."""

    cx: float
    cy: float
    w: float
    h: float

    def __post_init__(self):
        if not (0.0 <= self.cx <= 1.0 and 0.0 <= self.cy <= 1.0):
            raise ValidationError(f"center out of range: ({self.cx}, {self.cy})")
        if not (0.0 < self.w <= 1.0 and 0.0 < self.h <= 1.0):
            raise ValidationError(f"size out of range: ({self.w}, {self.h})")


@dataclass(frozen=True)
class BBoxPix:
    """Corner-form box in pixels: x1 < x2, y1 < y2."""

    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self):
        if not (self.x1 < self.x2 and self.y1 < self.y2):
            raise ValidationError(
                f"degenerate box ({self.x1}, {self.y1}, {self.x2}, {self.y2})"
            )

    @property
    def area(self) -> float:
        return (self.x2 - self.x1) * (self.y2 - self.y1)


@dataclass(frozen=True)
class WH:
    """A box shape: strictly positive width and height in pixels."""

    w: float
    h: float

    def __post_init__(self):
        if not (self.w > 0 and self.h > 0):
            raise ValidationError(f"non-positive shape ({self.w}, {self.h})")

    @property
    def area(self) -> float:
        return self.w * self.h


def iou(a: BBoxPix, b: BBoxPix) -> float:
    """Intersection over union of two corner boxes; 0 when disjoint."""
    iw = min(a.x2, b.x2) - max(a.x1, b.x1)
    ih = min(a.y2, b.y2) - max(a.y1, b.y1)
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    inter = iw * ih
    return inter / (a.area + b.area - inter)


def iou_distance(a: BBoxPix, b: BBoxPix) -> float:
    """Shape-aware dissimilarity 1 - iou(a, b), in [0, 1]."""
    return 1.0 - iou(a, b)


def wh_iou(a: WH, b: WH) -> float:
    """IoU of two shapes placed co-centered (positions ignored)."""
    inter = min(a.w, b.w) * min(a.h, b.h)
    return inter / (a.area + b.area - inter)


def to_pixels(b: BBoxNorm, img_w: float, img_h: float) -> BBoxPix:
    """Convert a normalized center-form box to pixel corners."""
    if img_w <= 0 or img_h <= 0:
        raise ValidationError(f"non-positive image size ({img_w}, {img_h})")
    return BBoxPix(
        (b.cx - b.w / 2.0) * img_w,
        (b.cy - b.h / 2.0) * img_h,
        (b.cx + b.w / 2.0) * img_w,
        (b.cy + b.h / 2.0) * img_h,
    )


def to_normalized(b: BBoxPix, img_w: float, img_h: float) -> BBoxNorm:
    """Convert pixel corners back to the normalized center form."""
    if img_w <= 0 or img_h <= 0:
        raise ValidationError(f"non-positive image size ({img_w}, {img_h})")
    return BBoxNorm(
        (b.x1 + b.x2) / 2.0 / img_w,
        (b.y1 + b.y2) / 2.0 / img_h,
        (b.x2 - b.x1) / img_w,
        (b.y2 - b.y1) / img_h,
    )
