"""Pixel I/O: 8-bit PNG (via Pillow) and raw PPM/PGM (parsed here).

Images are numpy uint8 arrays, (h, w) for grayscale or (h, w, 3) for RGB.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from tldet.errors import FormatError

IMAGE_SUFFIXES = (".png", ".ppm", ".pgm")


def _read_pnm(path: Path) -> np.ndarray:
    data = path.read_bytes()
    if data[:2] not in (b"P5", b"P6"):
        raise FormatError(f"{path}: not a binary PGM/PPM file")
    fields: list[bytes] = []
    pos = 2
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        fields.append(data[start:pos])
    pos += 1  # single whitespace after maxval
    try:
        w, h, maxval = (int(f) for f in fields)
    except ValueError as exc:
        raise FormatError(f"{path}: bad PNM header") from exc
    if maxval != 255:
        raise FormatError(f"{path}: only 8-bit PNM supported (maxval {maxval})")
    channels = 3 if data[:2] == b"P6" else 1
    raw = np.frombuffer(data, dtype=np.uint8, offset=pos)
    if raw.size < w * h * channels:
        raise FormatError(f"{path}: truncated PNM data")
    raw = raw[: w * h * channels]
    return raw.reshape((h, w, 3)) if channels == 3 else raw.reshape((h, w))


def _write_pnm(path: Path, img: np.ndarray) -> None:
    if img.ndim == 2:
        magic = b"P5"
    elif img.ndim == 3 and img.shape[2] == 3:
        magic = b"P6"
    else:
        raise FormatError(f"cannot write shape {img.shape} as PNM")
    h, w = img.shape[:2]
    with open(path, "wb") as fh:
        fh.write(magic + b"\n%d %d\n255\n" % (w, h))
        fh.write(np.ascontiguousarray(img, dtype=np.uint8).tobytes())


def load_image(path) -> np.ndarray:
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix in (".ppm", ".pgm"):
        return _read_pnm(path)
    if suffix == ".png":
        with Image.open(path) as im:
            if im.mode in ("L", "I;16"):
                return np.asarray(im.convert("L"))
            return np.asarray(im.convert("RGB"))
    raise FormatError(f"unsupported image format: {path}")


def save_image(path, img: np.ndarray) -> None:
    path = Path(path)
    img = np.asarray(img, dtype=np.uint8)
    suffix = path.suffix.lower()
    if suffix in (".ppm", ".pgm"):
        _write_pnm(path, img)
    elif suffix == ".png":
        Image.fromarray(img).save(path)
    else:
        raise FormatError(f"unsupported image format: {path}")


def read_image_size(path) -> tuple[int, int]:
    """(width, height) from the header, without decoding pixel data."""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix in (".ppm", ".pgm"):
        img = _read_pnm(path)
        return img.shape[1], img.shape[0]
    if suffix == ".png":
        with Image.open(path) as im:
            return im.size
    raise FormatError(f"unsupported image format: {path}")
