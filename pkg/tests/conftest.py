import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))  # for oracles.py

from tldet.dataset import (
    AnnotatedImage,
    Annotation,
    Dataset,
    format_label_lines,
    save_image,
)
from tldet.geometry import BBoxNorm


def make_metadata_dataset(n_images: int, seed: int = 3, class_names=("a", "b")) -> Dataset:
    """Images that exist only as metadata; enough for split/anchor tests."""
    rng = np.random.default_rng(seed)
    images = []
    for i in range(n_images):
        anns = []
        for _ in range(int(rng.integers(1, 4))):
            w = float(rng.uniform(0.02, 0.4))
            h = float(rng.uniform(0.02, 0.4))
            cx = float(rng.uniform(w / 2, 1 - w / 2))
            cy = float(rng.uniform(h / 2, 1 - h / 2))
            anns.append(Annotation(int(rng.integers(len(class_names))), BBoxNorm(cx, cy, w, h)))
        images.append(AnnotatedImage(Path(f"mem_{i:05d}.png"), 640, 480, tuple(anns)))
    return Dataset(tuple(class_names), tuple(images))


def write_image_with_labels(dirpath: Path, stem: str, img: np.ndarray, annotations, fmt="ppm"):
    path = dirpath / f"{stem}.{fmt}"
    save_image(path, img)
    (dirpath / f"{stem}.txt").write_text(format_label_lines(annotations), encoding="utf-8")
    return path


@pytest.fixture
def tiny_dataset_dir(tmp_path):
    """Three small PPM images with hand-written labels, plus classes.txt."""
    rng = np.random.default_rng(11)
    (tmp_path / "classes.txt").write_text("screw\npole\n", encoding="utf-8")
    boxes = [
        [Annotation(0, BBoxNorm(0.5, 0.5, 0.25, 0.25)),
         Annotation(1, BBoxNorm(0.25, 0.5, 0.0625, 0.5))],
        [Annotation(0, BBoxNorm(0.375, 0.25, 0.125, 0.125))],
        [],
    ]
    for i, anns in enumerate(boxes):
        img = rng.integers(0, 255, size=(32, 48, 3), dtype=np.uint8)
        write_image_with_labels(tmp_path, f"img_{i}", img, anns)
    return tmp_path
