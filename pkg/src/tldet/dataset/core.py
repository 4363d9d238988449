"""Annotated-image datasets: ingestion, statistics and the three-way split.

Annotations follow the one-text-file-per-image convention: each line is
`class_id cx cy w h` with box values normalized to the image size.
Dataset values are immutable after construction, so they can be shared
freely across threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from tldet.dataset.images import IMAGE_SUFFIXES, read_image_size
from tldet.errors import ParseError, ValidationError
from tldet.geometry import BBoxNorm


@dataclass(frozen=True)
class Annotation:
    class_id: int
    box: BBoxNorm

    def __post_init__(self):
        if self.class_id < 0:
            raise ValidationError(f"negative class id {self.class_id}")


@dataclass(frozen=True)
class AnnotatedImage:
    image_path: Path
    width: int
    height: int
    annotations: tuple[Annotation, ...]

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValidationError(
                f"{self.image_path}: non-positive size {self.width}x{self.height}"
            )


@dataclass(frozen=True)
class Dataset:
    class_names: tuple[str, ...]
    images: tuple[AnnotatedImage, ...]

    def __post_init__(self):
        if not self.class_names:
            raise ValidationError("class_names must be non-empty")
        if len(set(self.class_names)) != len(self.class_names):
            raise ValidationError("class_names must be unique")
        n = len(self.class_names)
        for img in self.images:
            for ann in img.annotations:
                if ann.class_id >= n:
                    raise ValidationError(
                        f"{img.image_path}: class id {ann.class_id} out of range "
                        f"for {n} classes"
                    )

    @property
    def n_annotations(self) -> int:
        return sum(len(img.annotations) for img in self.images)


def parse_label_line(line: str, n_classes: int, path=None, lineno=None) -> Annotation:
    parts = line.split()
    if len(parts) != 5:
        raise ParseError(f"expected 5 fields, got {len(parts)}", path, lineno)
    try:
        class_id = int(parts[0])
        cx, cy, w, h = (float(v) for v in parts[1:])
    except ValueError as exc:
        raise ParseError(str(exc), path, lineno) from exc
    if not 0 <= class_id < n_classes:
        raise ValidationError(
            f"{path or '<line>'}:{lineno or '?'}: class id {class_id} out of range "
            f"for {n_classes} classes"
        )
    try:
        box = BBoxNorm(cx, cy, w, h)
    except ValidationError as exc:
        raise ParseError(str(exc), path, lineno) from exc
    return Annotation(class_id, box)


def parse_label_file(path, n_classes: int) -> tuple[Annotation, ...]:
    path = Path(path)
    anns = []
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        anns.append(parse_label_line(line, n_classes, path, lineno))
    return tuple(anns)


def format_label_lines(annotations) -> str:
    return "".join(
        f"{a.class_id} {a.box.cx!r} {a.box.cy!r} {a.box.w!r} {a.box.h!r}\n"
        for a in annotations
    )


def read_class_names(path) -> tuple[str, ...]:
    names = tuple(
        line.strip()
        for line in Path(path).read_text(encoding="utf-8").splitlines()
        if line.strip()
    )
    if not names:
        raise ValidationError(f"{path}: no class names")
    return names


def load_dataset(root_dir, class_names) -> Dataset:
    """Scan a directory for images and sibling `.txt` annotation files.

    Images without an annotation file load with an empty annotation list.
    """
    root = Path(root_dir)
    if not root.is_dir():
        raise ValidationError(f"not a directory: {root}")
    class_names = tuple(class_names)
    images = []
    paths = sorted(p for p in root.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
    for img_path in paths:
        w, h = read_image_size(img_path)
        label_path = img_path.with_suffix(".txt")
        anns = parse_label_file(label_path, len(class_names)) if label_path.exists() else ()
        images.append(AnnotatedImage(img_path, w, h, anns))
    return Dataset(class_names, tuple(images))


@dataclass
class StatsReport:
    """Per-class instance counts and mean normalized sizes, plus a 2-D
    histogram of normalized (w, h); counts sum to the annotation total."""

    class_names: tuple[str, ...]
    counts: list[int]
    mean_w: list[float]
    mean_h: list[float]
    histogram: np.ndarray  # (bins, bins) ints; [i, j] = w-bin i, h-bin j
    bins: int

    def as_json_dict(self) -> dict:
        return {
            "classes": list(self.class_names),
            "counts": self.counts,
            "mean_w": self.mean_w,
            "mean_h": self.mean_h,
            "histogram_bins": self.bins,
            "histogram": self.histogram.tolist(),
        }

    def to_csv(self) -> str:
        rows = ["class,count,mean_w,mean_h"]
        for name, n, mw, mh in zip(self.class_names, self.counts, self.mean_w, self.mean_h):
            rows.append(f"{name},{n},{mw!r},{mh!r}")
        return "\n".join(rows) + "\n"

    def histogram_csv(self) -> str:
        return "\n".join(",".join(str(v) for v in row) for row in self.histogram) + "\n"


def dataset_stats(d: Dataset, bins: int = 16) -> StatsReport:
    """Deterministic per-class counts, mean sizes and (w, h) histogram."""
    if bins < 1:
        raise ValidationError(f"bins must be >= 1, got {bins}")
    n_classes = len(d.class_names)
    counts = [0] * n_classes
    sum_w = [0.0] * n_classes
    sum_h = [0.0] * n_classes
    ws: list[float] = []
    hs: list[float] = []
    for img in d.images:
        for ann in img.annotations:
            counts[ann.class_id] += 1
            sum_w[ann.class_id] += ann.box.w
            sum_h[ann.class_id] += ann.box.h
            ws.append(ann.box.w)
            hs.append(ann.box.h)
    mean_w = [s / c if c else 0.0 for s, c in zip(sum_w, counts)]
    mean_h = [s / c if c else 0.0 for s, c in zip(sum_h, counts)]
    hist, _, _ = np.histogram2d(ws, hs, bins=bins, range=[[0.0, 1.0], [0.0, 1.0]])
    return StatsReport(d.class_names, counts, mean_w, mean_h, hist.astype(np.int64), bins)


def split_dataset(
    d: Dataset, ratios: tuple[float, float, float], seed: int
) -> tuple[Dataset, Dataset, Dataset]:
    """Seeded shuffle then contiguous slicing into train/val/test.

    Ratios are normalized internally.  Validation and test sizes round to
    the nearest integer (half away from zero); training takes the rest,
    so the three parts always partition the input exactly.
    """
    n = len(d.images)
    if n < 3:
        raise ValidationError(f"cannot split {n} images three ways")
    r = np.asarray(ratios, dtype=np.float64)
    if r.shape != (3,) or np.any(r <= 0):
        raise ValidationError(f"ratios must be three positive numbers, got {ratios}")
    r = r / r.sum()
    n_val = int(np.floor(n * r[1] + 0.5))
    n_test = int(np.floor(n * r[2] + 0.5))
    n_train = n - n_val - n_test
    if n_train < 0:
        raise ValidationError(f"ratios {ratios} leave no training items for n={n}")

    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    shuffled = [d.images[i] for i in perm]
    parts = (
        shuffled[:n_train],
        shuffled[n_train : n_train + n_val],
        shuffled[n_train + n_val :],
    )
    return tuple(Dataset(d.class_names, tuple(p)) for p in parts)


def write_labels(d: Dataset, out_dir) -> None:
    """Write one annotation file per image plus classes.txt."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "classes.txt").write_text("\n".join(d.class_names) + "\n", encoding="utf-8")
    for img in d.images:
        stem = Path(img.image_path).stem
        (out / f"{stem}.txt").write_text(format_label_lines(img.annotations), encoding="utf-8")


def write_size_manifest(d: Dataset, path) -> None:
    lines = [
        f"{Path(img.image_path).stem} {img.width} {img.height}" for img in d.images
    ]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def split_manifest_json(parts: tuple[Dataset, Dataset, Dataset]) -> str:
    names = ("train", "val", "test")
    payload = {
        name: [str(img.image_path) for img in part.images]
        for name, part in zip(names, parts)
    }
    payload["sizes"] = {name: len(part.images) for name, part in zip(names, parts)}
    return json.dumps(payload, indent=2)
