"""Bounding-box-aware image augmentation.

Geometric ops (flips, affine) move pixels and map each box by
transforming its four corners and taking the axis-aligned hull, clamped
to the image; boxes shrunk below 1e-3 normalized extent are dropped.
Photometric ops (blur, invert, brightness, contrast) never touch boxes.

Every op is fully parameterized, so augmentation is deterministic; the
seed argument is accepted for interface stability but unused by the
current op set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from tldet.dataset.core import AnnotatedImage, Annotation, Dataset
from tldet.errors import ValidationError
from tldet.geometry import BBoxNorm

MIN_BOX_EXTENT = 1e-3


@dataclass(frozen=True)
class HFlip:
    tag = "hflip"
    geometric = True


@dataclass(frozen=True)
class VFlip:
    tag = "vflip"
    geometric = True


@dataclass(frozen=True)
class Affine:
    """Rotation (degrees, screen-clockwise with y down), uniform scale and
    translation (fractions of image size), all about the image center."""

    rotation_deg: float = 0.0
    scale: float = 1.0
    translate_x: float = 0.0
    translate_y: float = 0.0
    tag = "affine"
    geometric = True

    def __post_init__(self):
        if self.scale <= 0:
            raise ValidationError(f"affine scale must be positive, got {self.scale}")


@dataclass(frozen=True)
class GaussianBlur:
    sigma: float = 1.0
    tag = "blur"
    geometric = False

    def __post_init__(self):
        if self.sigma < 0:
            raise ValidationError(f"blur sigma must be >= 0, got {self.sigma}")


@dataclass(frozen=True)
class Invert:
    tag = "invert"
    geometric = False


@dataclass(frozen=True)
class Brightness:
    """Additive shift as a fraction of full scale, in [-1, 1]."""

    delta: float = 0.0
    tag = "brightness"
    geometric = False

    def __post_init__(self):
        if not -1.0 <= self.delta <= 1.0:
            raise ValidationError(f"brightness delta must be in [-1, 1], got {self.delta}")


@dataclass(frozen=True)
class Contrast:
    factor: float = 1.0
    tag = "contrast"
    geometric = False

    def __post_init__(self):
        if self.factor <= 0:
            raise ValidationError(f"contrast factor must be positive, got {self.factor}")


AugmentOp = HFlip | VFlip | Affine | GaussianBlur | Invert | Brightness | Contrast


def parse_op(spec: str) -> AugmentOp:
    """Build an op from CLI syntax `name` or `name:key=val,key=val`."""
    name, _, rest = spec.partition(":")
    kwargs = {}
    if rest:
        for item in rest.split(","):
            key, eq, val = item.partition("=")
            if not eq:
                raise ValidationError(f"bad op parameter {item!r} in {spec!r}")
            try:
                kwargs[key.strip()] = float(val)
            except ValueError as exc:
                raise ValidationError(f"bad op parameter {item!r} in {spec!r}") from exc
    aliases = {"rot": "rotation_deg", "tx": "translate_x", "ty": "translate_y"}
    kwargs = {aliases.get(k, k): v for k, v in kwargs.items()}
    table = {
        "hflip": HFlip,
        "vflip": VFlip,
        "affine": Affine,
        "blur": GaussianBlur,
        "invert": Invert,
        "brightness": Brightness,
        "contrast": Contrast,
    }
    if name not in table:
        raise ValidationError(f"unknown augmentation op {name!r}")
    try:
        return table[name](**kwargs)
    except TypeError as exc:
        raise ValidationError(f"bad parameters for {name!r}: {exc}") from exc


def _affine_forward(op: Affine, img_w: float, img_h: float):
    """2x2 matrix and center/translation for the pixel-space forward map
    p' = M (p - c) + c + t."""
    theta = math.radians(op.rotation_deg)
    s = op.scale
    m = np.array(
        [[s * math.cos(theta), -s * math.sin(theta)],
         [s * math.sin(theta), s * math.cos(theta)]]
    )
    c = np.array([img_w / 2.0, img_h / 2.0])
    t = np.array([op.translate_x * img_w, op.translate_y * img_h])
    return m, c, t


def transform_box(box: BBoxNorm, op: AugmentOp, img_w: int, img_h: int) -> BBoxNorm | None:
    """Map one box through a geometric op; None when it is dropped.

    Photometric ops return the box unchanged.  Flips mirror the center
    directly (no hull needed); affine maps the four corners and takes
    the clamped axis-aligned hull.
    """
    if not op.geometric:
        return box
    if isinstance(op, HFlip):
        return BBoxNorm(1.0 - box.cx, box.cy, box.w, box.h)
    if isinstance(op, VFlip):
        return BBoxNorm(box.cx, 1.0 - box.cy, box.w, box.h)

    m, c, t = _affine_forward(op, img_w, img_h)
    x1 = (box.cx - box.w / 2.0) * img_w
    x2 = (box.cx + box.w / 2.0) * img_w
    y1 = (box.cy - box.h / 2.0) * img_h
    y2 = (box.cy + box.h / 2.0) * img_h
    corners = np.array([[x1, y1], [x2, y1], [x2, y2], [x1, y2]])
    mapped = corners @ m.T + (c + t - m @ c)
    lo = mapped.min(axis=0)
    hi = mapped.max(axis=0)
    nx1 = min(max(lo[0] / img_w, 0.0), 1.0)
    nx2 = min(max(hi[0] / img_w, 0.0), 1.0)
    ny1 = min(max(lo[1] / img_h, 0.0), 1.0)
    ny2 = min(max(hi[1] / img_h, 0.0), 1.0)
    if nx2 - nx1 < MIN_BOX_EXTENT or ny2 - ny1 < MIN_BOX_EXTENT:
        return None
    return BBoxNorm((nx1 + nx2) / 2.0, (ny1 + ny2) / 2.0, nx2 - nx1, ny2 - ny1)


def _warp_affine(img: np.ndarray, op: Affine) -> np.ndarray:
    h, w = img.shape[:2]
    m, c, t = _affine_forward(op, w, h)
    inv = np.linalg.inv(m)
    # scipy maps output index -> input index in (row, col); our map lives in
    # continuous (x, y) with pixel centers at index + 0.5.
    half = np.array([0.5, 0.5])
    off_xy = inv @ (half - c - t) + c - half
    matrix_rc = np.array([[inv[1, 1], inv[1, 0]], [inv[0, 1], inv[0, 0]]])
    offset_rc = np.array([off_xy[1], off_xy[0]])

    def warp_plane(plane):
        return ndimage.affine_transform(
            plane.astype(np.float64), matrix_rc, offset=offset_rc, order=1,
            mode="constant", cval=0.0,
        )

    if img.ndim == 2:
        out = warp_plane(img)
    else:
        out = np.stack([warp_plane(img[:, :, ch]) for ch in range(img.shape[2])], axis=2)
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def transform_image(img: np.ndarray, op: AugmentOp) -> np.ndarray:
    if img.dtype != np.uint8 or img.ndim not in (2, 3):
        raise ValidationError(f"expected uint8 (h, w[, 3]) image, got {img.dtype} {img.shape}")
    if isinstance(op, HFlip):
        return img[:, ::-1].copy()
    if isinstance(op, VFlip):
        return img[::-1].copy()
    if isinstance(op, Affine):
        return _warp_affine(img, op)
    if isinstance(op, GaussianBlur):
        if op.sigma == 0:
            return img.copy()
        sigma = (op.sigma, op.sigma) if img.ndim == 2 else (op.sigma, op.sigma, 0.0)
        out = ndimage.gaussian_filter(img.astype(np.float64), sigma=sigma)
        return np.clip(np.rint(out), 0, 255).astype(np.uint8)
    if isinstance(op, Invert):
        return (255 - img.astype(np.int16)).astype(np.uint8)
    if isinstance(op, Brightness):
        return np.clip(np.rint(img.astype(np.float64) + op.delta * 255.0), 0, 255).astype(np.uint8)
    if isinstance(op, Contrast):
        out = (img.astype(np.float64) - 128.0) * op.factor + 128.0
        return np.clip(np.rint(out), 0, 255).astype(np.uint8)
    raise ValidationError(f"unknown op {op!r}")


def augment(
    img: np.ndarray, anns, op: AugmentOp, seed: int = 0
) -> tuple[np.ndarray, list[Annotation]]:
    """Apply one op to pixels and annotations together."""
    del seed  # current ops are fully parameterized
    h, w = img.shape[:2]
    out_img = transform_image(img, op)
    out_anns = []
    for ann in anns:
        box = transform_box(ann.box, op, w, h)
        if box is not None:
            out_anns.append(Annotation(ann.class_id, box))
    return out_img, out_anns


def augmented_name(path, op_index: int, op: AugmentOp) -> Path:
    path = Path(path)
    return path.with_name(f"{path.stem}__aug{op_index}-{op.tag}{path.suffix}")


def augment_dataset(d: Dataset, ops, seed: int = 0) -> Dataset:
    """Originals plus one annotation-level augmented copy per (image, op).

    Pixel buffers are not touched here; pair with `augment` (as the CLI
    does) to materialize the transformed images on disk.
    """
    del seed  # see module docstring
    images = list(d.images)
    for img in d.images:
        for op_index, op in enumerate(ops):
            anns = []
            for ann in img.annotations:
                box = transform_box(ann.box, op, img.width, img.height)
                if box is not None:
                    anns.append(Annotation(ann.class_id, box))
            images.append(
                AnnotatedImage(
                    augmented_name(img.image_path, op_index, op),
                    img.width, img.height, tuple(anns),
                )
            )
    return Dataset(d.class_names, tuple(images))
