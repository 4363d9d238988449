"""Synthetic annotated images for tests, demos and the bundled corpus.

The generated shape mix is deliberately hostile to Euclidean shape
clustering: most boxes are small with strongly distinct aspect-ratio
families (near-square, tall-thin, wide-thin) while a handful of huge
boxes dominate the (w, h) plane.  Euclidean k-means spends centroids on
the large boxes and lumps the small families together; the 1-IoU metric
is scale-balanced and resolves them, so its anchors cover the shapes
better.
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path

import numpy as np

from tldet.dataset.core import AnnotatedImage, Annotation, Dataset, format_label_lines
from tldet.dataset.images import save_image
from tldet.geometry import BBoxNorm

CLASS_NAMES = ("screw", "pole", "insulator", "tower", "vehicle")

# per-class (count weight, w range, h range): aspect families described above
_FAMILIES = (
    (6, (0.02, 0.05), (0.02, 0.05)),     # small near-square, many
    (4, (0.015, 0.03), (0.30, 0.50)),    # tall thin
    (4, (0.25, 0.40), (0.03, 0.06)),     # wide thin
    (1, (0.35, 0.60), (0.30, 0.55)),     # huge, few
    (2, (0.08, 0.14), (0.07, 0.13)),     # medium near-square
)

_COLORS = (
    (220, 60, 60), (60, 200, 80), (70, 110, 230), (230, 180, 40), (180, 70, 200),
)


def _sample_box(rng: np.random.Generator, w_range, h_range) -> BBoxNorm:
    w = float(rng.uniform(*w_range))
    h = float(rng.uniform(*h_range))
    cx = float(rng.uniform(w / 2.0, 1.0 - w / 2.0))
    cy = float(rng.uniform(h / 2.0, 1.0 - h / 2.0))
    return BBoxNorm(cx, cy, w, h)


def synth_annotations(rng: np.random.Generator, per_image: int = 9) -> list[Annotation]:
    weights = np.array([f[0] for f in _FAMILIES], dtype=np.float64)
    probs = weights / weights.sum()
    anns = []
    for _ in range(per_image):
        cid = int(rng.choice(len(_FAMILIES), p=probs))
        _, w_range, h_range = _FAMILIES[cid]
        anns.append(Annotation(cid, _sample_box(rng, w_range, h_range)))
    return anns


def render_image(width: int, height: int, anns, rng: np.random.Generator) -> np.ndarray:
    """Flat sky-like background with one filled rectangle per annotation."""
    base = int(rng.integers(90, 150))
    img = np.full((height, width, 3), base, dtype=np.uint8)
    img[height // 2 :] = max(base - 40, 0)
    for ann in anns:
        color = _COLORS[ann.class_id % len(_COLORS)]
        x1 = int((ann.box.cx - ann.box.w / 2) * width)
        x2 = max(x1 + 1, int((ann.box.cx + ann.box.w / 2) * width))
        y1 = int((ann.box.cy - ann.box.h / 2) * height)
        y2 = max(y1 + 1, int((ann.box.cy + ann.box.h / 2) * height))
        img[y1:y2, x1:x2] = color
    return img


def make_synthetic_dataset(
    out_dir,
    n_images: int = 20,
    seed: int = 41,
    image_size: tuple[int, int] = (96, 96),
    per_image: int = 9,
) -> Dataset:
    """Write images + labels + classes.txt and return the loaded view."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    width, height = image_size
    rng = np.random.default_rng(seed)
    images = []
    (out / "classes.txt").write_text("\n".join(CLASS_NAMES) + "\n", encoding="utf-8")
    for i in range(n_images):
        anns = synth_annotations(rng, per_image)
        img = render_image(width, height, anns, rng)
        img_path = out / f"synth_{i:03d}.png"
        save_image(img_path, img)
        (out / f"synth_{i:03d}.txt").write_text(format_label_lines(anns), encoding="utf-8")
        images.append(AnnotatedImage(img_path, width, height, tuple(anns)))
    return Dataset(CLASS_NAMES, tuple(images))


def smoke_dataset_dir() -> Path:
    """Directory of the 20-image corpus bundled with the package."""
    return Path(resources.files("tldet") / "data" / "smoke20")
