"""Independent brute-force oracles, kept free of the package's own
vectorized code paths: plain-Python math only."""

from __future__ import annotations

import math
from itertools import product


def euclid_dist(p, c) -> float:
    return math.hypot(p[0] - c[0], p[1] - c[1])


def one_minus_iou_dist(p, c) -> float:
    inter = min(p[0], c[0]) * min(p[1], c[1])
    return 1.0 - inter / (p[0] * p[1] + c[0] * c[1] - inter)


def _restricted_growth_strings(n: int, max_blocks: int):
    """All set partitions of n items into at most max_blocks blocks."""
    assign = [0] * n

    def rec(i: int, used: int):
        if i == n:
            yield list(assign)
            return
        for b in range(min(used + 1, max_blocks)):
            assign[i] = b
            yield from rec(i + 1, max(used, b + 1))

    yield from rec(1, 1)  # item 0 is always block 0


def best_partition_inertia(points, k: int, dist) -> float:
    """Exhaustive lower bound over all partitions into at most k blocks.

    Every centroid Lloyd can ever hold is the mean of SOME subset of the
    points (seeding picks data points, i.e. singleton means; updates take
    member means; the monotonic fallback keeps an earlier such value), so
    each block is costed against its best subset-mean centroid.  The
    returned value is therefore a true floor for the algorithm's inertia.
    """
    import numpy as np

    pts = np.asarray(points, dtype=float)
    n = len(pts)
    masks = np.arange(1, 1 << n)
    incidence = (masks[:, None] >> np.arange(n)[None, :]) & 1  # (masks, n)
    sizes = incidence.sum(axis=1)
    candidates = (incidence @ pts) / sizes[:, None]  # subset means
    dist_matrix = np.array([[dist(p, c) for c in candidates] for p in pts])
    block_cost = (incidence @ dist_matrix).min(axis=1)  # best centroid per block

    best = math.inf
    for assign in _restricted_growth_strings(n, k):
        block_masks: dict[int, int] = {}
        for i, b in enumerate(assign):
            block_masks[b] = block_masks.get(b, 0) | (1 << i)
        best = min(best, sum(block_cost[m - 1] for m in block_masks.values()))
    return best


def best_mean_partition(points, k: int, dist):
    """Argmin partition with plain member-mean centroids (for assignment
    comparisons); returns (assignment, inertia)."""
    best_cost, best_assign = math.inf, None
    for assign in _restricted_growth_strings(len(points), k):
        blocks: dict[int, list] = {}
        for i, b in enumerate(assign):
            blocks.setdefault(b, []).append(points[i])
        total = 0.0
        for members in blocks.values():
            mw = sum(p[0] for p in members) / len(members)
            mh = sum(p[1] for p in members) / len(members)
            total += sum(dist(p, (mw, mh)) for p in members)
        if total < best_cost:
            best_cost, best_assign = total, list(assign)
    return best_assign, best_cost


def iou_corners(a, b) -> float:
    iw = min(a[2], b[2]) - max(a[0], b[0])
    ih = min(a[3], b[3]) - max(a[1], b[1])
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    area_a = (a[2] - a[0]) * (a[3] - a[1])
    area_b = (b[2] - b[0]) * (b[3] - b[1])
    return inter / (area_a + area_b - inter)


def greedy_flags(dets, gts, thr: float):
    """Replay greedy matching with explicit loops.

    dets: (image_id, confidence, (x1, y1, x2, y2)) tuples;
    gts: (image_id, (x1, y1, x2, y2)) tuples.  Returns TP flags in
    confidence-descending order (ties keep input order).
    """
    order = sorted(range(len(dets)), key=lambda i: (-dets[i][1], i))
    matched = set()
    flags = []
    for i in order:
        image_id, _, box = dets[i]
        best_j, best_iou = None, -1.0
        for j, (g_img, g_box) in enumerate(gts):
            if j in matched or g_img != image_id:
                continue
            v = iou_corners(box, g_box)
            if v > best_iou:
                best_iou, best_j = v, j
        if best_j is not None and best_iou >= thr:
            matched.add(best_j)
            flags.append(True)
        else:
            flags.append(False)
    return flags


def envelope_ap(flags, n_gt: int) -> float:
    """Exact area under the precision envelope by per-segment scanning."""
    if n_gt == 0 or not flags:
        return 0.0
    points = []
    tp = 0
    for rank, f in enumerate(flags, 1):
        tp += int(f)
        points.append((tp / n_gt, tp / rank))
    breakpoints = sorted({0.0} | {r for r, _ in points})
    area = 0.0
    for r0, r1 in zip(breakpoints, breakpoints[1:]):
        env = max((p for r, p in points if r >= r1), default=0.0)
        area += (r1 - r0) * env
    return area


def oracle_ap(dets, gts, thr: float) -> float:
    return envelope_ap(greedy_flags(dets, gts, thr), len(gts))


def oracle_map(dets_by_class, gts_by_class, thr: float) -> float:
    """Mean AP over classes that have ground truth."""
    aps = []
    for cid, gts in gts_by_class.items():
        if not gts:
            continue
        aps.append(oracle_ap(dets_by_class.get(cid, []), gts, thr))
    return sum(aps) / len(aps)


def dense_conv2d(planes, kernel):
    """Direct zero-padded correlation; planes (c, h, w), kernel (c, kh, kw)."""
    c = len(planes)
    h, w = len(planes[0]), len(planes[0][0])
    kh, kw = len(kernel[0]), len(kernel[0][0])
    ph, pw = kh // 2, kw // 2
    out = [[0.0] * w for _ in range(h)]
    for y, x in product(range(h), range(w)):
        acc = 0.0
        for ci, dy, dx in product(range(c), range(kh), range(kw)):
            sy, sx = y + dy - ph, x + dx - pw
            if 0 <= sy < h and 0 <= sx < w:
                acc += kernel[ci][dy][dx] * planes[ci][sy][sx]
        out[y][x] = acc
    return out
