"""Pure-numpy implementations of the hot kernels.

Mirrors the compiled backend (`tldet.backends._core`) function for
function.  Accumulation orders are chosen to match the compiled loops
(per-output-element sums run in the same tap order), so the two backends
agree to within a few ulps; each backend is bit-deterministic on its own.
"""

from __future__ import annotations

import numpy as np

NAME = "numpy"


def conv2d_single_out(u: np.ndarray, k: np.ndarray) -> np.ndarray:
    """Correlate (n, cin, h, w) with one (cin, kh, kw) filter, stride 1.

    Zero padding of (kh//2, kw//2) keeps the spatial size; kernel sizes
    must be odd.  Returns (n, h, w).
    """
    n, cin, h, w = u.shape
    kh, kw = k.shape[1], k.shape[2]
    ph, pw = kh // 2, kw // 2
    up = np.pad(u, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    out = np.zeros((n, h, w), dtype=np.float64)
    for ci in range(cin):
        for dy in range(kh):
            for dx in range(kw):
                out += k[ci, dy, dx] * up[:, ci, dy : dy + h, dx : dx + w]
    return out


def conv2d_single_out_backward(
    u: np.ndarray, k: np.ndarray, gout: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of conv2d_single_out w.r.t. input and kernel.

    Returns (grad_u, grad_k) for upstream gradient gout of shape (n, h, w).
    """
    n, cin, h, w = u.shape
    kh, kw = k.shape[1], k.shape[2]
    ph, pw = kh // 2, kw // 2
    up = np.pad(u, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    gup = np.zeros_like(up)
    gk = np.zeros_like(k)
    for ci in range(cin):
        for dy in range(kh):
            for dx in range(kw):
                gup[:, ci, dy : dy + h, dx : dx + w] += k[ci, dy, dx] * gout
                gk[ci, dy, dx] = np.sum(gout * up[:, ci, dy : dy + h, dx : dx + w])
    gu = gup[:, :, ph : ph + h, pw : pw + w]
    return np.ascontiguousarray(gu), gk


def channel_pool(x: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Mean, max and argmax over the channel axis of (n, c, h, w)."""
    mean = x.mean(axis=1)
    amax = x.argmax(axis=1)
    mx = np.take_along_axis(x, amax[:, None], axis=1)[:, 0]
    return mean, mx, amax.astype(np.int64)


def global_pool(x: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Mean, max and flat-hw argmax over the spatial axes of (n, c, h, w)."""
    n, c, h, w = x.shape
    flat = x.reshape(n, c, h * w)
    mean = flat.mean(axis=2)
    amax = flat.argmax(axis=2)
    mx = np.take_along_axis(flat, amax[:, :, None], axis=2)[:, :, 0]
    return mean, mx, amax.astype(np.int64)


def wh_iou_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise co-centered IoU of (N, 2) and (M, 2) width/height arrays."""
    inter = np.minimum(a[:, None, 0], b[None, :, 0]) * np.minimum(
        a[:, None, 1], b[None, :, 1]
    )
    area_a = (a[:, 0] * a[:, 1])[:, None]
    area_b = (b[:, 0] * b[:, 1])[None, :]
    return inter / (area_a + area_b - inter)


def iou_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise IoU of (N, 4) and (M, 4) corner boxes (x1, y1, x2, y2)."""
    ix1 = np.maximum(a[:, None, 0], b[None, :, 0])
    iy1 = np.maximum(a[:, None, 1], b[None, :, 1])
    ix2 = np.minimum(a[:, None, 2], b[None, :, 2])
    iy2 = np.minimum(a[:, None, 3], b[None, :, 3])
    inter = np.maximum(ix2 - ix1, 0.0) * np.maximum(iy2 - iy1, 0.0)
    area_a = ((a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1]))[:, None]
    area_b = ((b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1]))[None, :]
    union = area_a + area_b - inter
    out = np.zeros_like(inter)
    np.divide(inter, union, out=out, where=union > 0)
    return out
