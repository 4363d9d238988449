"""Detection-quality metrics: matching, PR curves, AP, mAP and FPS.

Matching is greedy in descending confidence (stable on ties), per class
and per image: a detection claims the unmatched ground truth with the
highest IoU when that IoU clears the threshold, otherwise it counts as a
false positive; each ground truth matches at most once.  AP integrates
the monotone precision envelope over recall (all-point interpolation).
All functions are pure; per-class and per-threshold work is independent.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from tldet import backends
from tldet.errors import ContractError, NumericError, ParseError, ValidationError
from tldet.geometry import BBoxPix

DEFAULT_THRESHOLDS: tuple[float, ...] = tuple(round(0.50 + 0.05 * i, 2) for i in range(10))


@dataclass(frozen=True)
class Detection:
    image_id: str
    class_id: int
    box: BBoxPix
    confidence: float

    def __post_init__(self):
        if not (0.0 <= self.confidence <= 1.0):
            raise ValidationError(f"confidence out of [0, 1]: {self.confidence}")


@dataclass(frozen=True)
class GroundTruth:
    image_id: str
    class_id: int
    box: BBoxPix


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int


@dataclass
class MatchResult:
    """Flags aligned to `order`, the confidence-descending detection order."""

    order: np.ndarray  # indices into the input detection list
    flags: np.ndarray  # bool, True = TP
    counts: ConfusionCounts


@dataclass
class PRCurve:
    points: list[tuple[float, float]]  # (recall, precision) after each rank
    n_gt: int


def _confidence_order(dets: Sequence[Detection]) -> np.ndarray:
    conf = np.array([d.confidence for d in dets], dtype=np.float64)
    return np.argsort(-conf, kind="stable")


def match_detections(
    dets: Sequence[Detection], gts: Sequence[GroundTruth], iou_thr: float
) -> MatchResult:
    """Greedy TP/FP assignment for one class; no cross-image matching."""
    if not (0.0 < iou_thr < 1.0):
        raise ValidationError(f"iou threshold must be in (0, 1), got {iou_thr}")
    classes = {d.class_id for d in dets} | {g.class_id for g in gts}
    if len(classes) > 1:
        raise ValidationError(f"matching is per-class; got classes {sorted(classes)}")

    order = _confidence_order(dets)
    flags = np.zeros(len(dets), dtype=bool)

    gt_by_image: dict[str, list[int]] = {}
    for j, g in enumerate(gts):
        gt_by_image.setdefault(g.image_id, []).append(j)
    gt_boxes = {
        img: np.array([[gts[j].box.x1, gts[j].box.y1, gts[j].box.x2, gts[j].box.y2]
                       for j in idxs], dtype=np.float64)
        for img, idxs in gt_by_image.items()
    }
    matched = np.zeros(len(gts), dtype=bool)

    for rank, i in enumerate(order):
        det = dets[int(i)]
        idxs = gt_by_image.get(det.image_id)
        if not idxs:
            continue
        box = np.array([[det.box.x1, det.box.y1, det.box.x2, det.box.y2]], dtype=np.float64)
        ious = backends.ops.iou_matrix(box, gt_boxes[det.image_id])[0]
        free = np.array([not matched[j] for j in idxs])
        if not free.any():
            continue
        masked = np.where(free, ious, -1.0)
        best = int(np.argmax(masked))  # ties -> lowest ground-truth index
        if masked[best] >= iou_thr:
            matched[idxs[best]] = True
            flags[rank] = True

    tp = int(flags.sum())
    return MatchResult(order, flags, ConfusionCounts(tp, len(dets) - tp, len(gts) - tp))


def pr_curve(flags: Sequence[bool], n_gt: int) -> PRCurve:
    """Cumulative precision/recall after each rank of confidence-ordered flags."""
    if n_gt < 0:
        raise ValidationError(f"n_gt must be >= 0, got {n_gt}")
    flags = np.asarray(flags, dtype=bool)
    if n_gt == 0 and flags.any():
        raise ContractError("true positives reported with zero ground truths")
    tp = np.cumsum(flags)
    ranks = np.arange(1, flags.size + 1)
    recall = tp / n_gt if n_gt > 0 else np.zeros_like(tp, dtype=np.float64)
    precision = tp / ranks
    return PRCurve(list(zip(recall.tolist(), precision.tolist())), n_gt)


def average_precision(curve: PRCurve) -> float:
    """Area under the monotone precision envelope across recall."""
    if not curve.points or curve.n_gt == 0:
        return 0.0
    rec = np.array([r for r, _ in curve.points])
    pre = np.array([p for _, p in curve.points])
    mrec = np.concatenate([[0.0], rec, [1.0]])
    mpre = np.concatenate([[0.0], pre, [0.0]])
    for i in range(mpre.size - 2, -1, -1):
        mpre[i] = max(mpre[i], mpre[i + 1])
    return float(np.sum((mrec[1:] - mrec[:-1]) * mpre[1:]))


def mean_ap(per_class_aps: Sequence[float]) -> float:
    """Arithmetic mean of per-class AP values."""
    if len(per_class_aps) == 0:
        raise ValidationError("mean over no classes")
    return float(np.mean(np.asarray(per_class_aps, dtype=np.float64)))


@dataclass
class EvalReport:
    class_ids: list[int]
    thresholds: list[float]
    per_class_ap: dict[int, list[float] | None]  # None: class has no ground truth
    map_primary: float  # mAP at thresholds[0]
    map_averaged: float  # mean mAP over all thresholds
    counts: dict[int, ConfusionCounts]  # at thresholds[0] and the operating confidence
    operating_confidence: float

    @property
    def n_classes(self) -> int:
        return len(self.class_ids)

    def as_json_dict(self) -> dict:
        return {
            "classes": self.class_ids,
            "iou_thresholds": self.thresholds,
            "ap": {
                str(cid): aps for cid, aps in self.per_class_ap.items()
            },
            "map_at_primary": self.map_primary,
            "map_over_range": self.map_averaged,
            "operating_confidence": self.operating_confidence,
            "counts": {
                str(cid): {"tp": c.tp, "fp": c.fp, "fn": c.fn}
                for cid, c in self.counts.items()
            },
        }

    def ap_table_csv(self) -> str:
        header = "class," + ",".join(f"ap@{t:.2f}" for t in self.thresholds)
        rows = [header]
        for cid in self.class_ids:
            aps = self.per_class_ap[cid]
            cells = ["" for _ in self.thresholds] if aps is None else [repr(a) for a in aps]
            rows.append(f"{cid}," + ",".join(cells))
        return "\n".join(rows) + "\n"


def _partition_by_class(items, class_ids):
    by_class = {cid: [] for cid in class_ids}
    for it in items:
        by_class[it.class_id].append(it)
    return by_class


def map_range(
    dets: Sequence[Detection],
    gts: Sequence[GroundTruth],
    thresholds: Sequence[float] = DEFAULT_THRESHOLDS,
    class_ids: Sequence[int] | None = None,
    conf_threshold: float = 0.0,
    operating_iou: float | None = None,
) -> EvalReport:
    """Per-class AP at every IoU threshold plus the two headline means.

    Confusion counts use operating_iou (default thresholds[0]) and keep
    only detections at or above conf_threshold.  Classes without any
    ground truth contribute no AP row value and are excluded from the
    means; a detection class outside the class list is a validation
    error.
    """
    if not thresholds:
        raise ValidationError("no IoU thresholds")
    if operating_iou is None:
        operating_iou = thresholds[0]
    if class_ids is None:
        class_ids = sorted({g.class_id for g in gts})
    class_ids = list(class_ids)
    known = set(class_ids)
    for d in dets:
        if d.class_id not in known:
            raise ValidationError(f"detection class {d.class_id} not in class list")
    for g in gts:
        if g.class_id not in known:
            raise ValidationError(f"ground-truth class {g.class_id} not in class list")

    dets_by_class = _partition_by_class(dets, class_ids)
    gts_by_class = _partition_by_class(gts, class_ids)

    per_class_ap: dict[int, list[float] | None] = {}
    counts: dict[int, ConfusionCounts] = {}
    for cid in class_ids:
        c_dets, c_gts = dets_by_class[cid], gts_by_class[cid]
        operating = [d for d in c_dets if d.confidence >= conf_threshold]
        counts[cid] = match_detections(operating, c_gts, operating_iou).counts
        if not c_gts:
            per_class_ap[cid] = None
            continue
        aps = []
        for thr in thresholds:
            match = match_detections(c_dets, c_gts, thr)
            aps.append(average_precision(pr_curve(match.flags, len(c_gts))))
        per_class_ap[cid] = aps

    scored = [aps for aps in per_class_ap.values() if aps is not None]
    if not scored:
        raise ValidationError("no class has ground truth; nothing to score")
    map_primary = mean_ap([aps[0] for aps in scored])
    map_averaged = mean_ap([float(np.mean(aps)) for aps in scored])
    return EvalReport(
        class_ids, list(thresholds), per_class_ap, map_primary, map_averaged,
        counts, conf_threshold,
    )


@dataclass
class BenchResult:
    mean_ms_per_item: float
    fps: float
    warmup_iters: int
    timed_iters: int

    def as_json_dict(self) -> dict:
        return {
            "mean_ms_per_item": self.mean_ms_per_item,
            "fps": self.fps,
            "warmup_iters": self.warmup_iters,
            "timed_iters": self.timed_iters,
        }


def fps_benchmark(
    workload: Callable[[], object], warmup_iters: int, timed_iters: int
) -> BenchResult:
    """Time a per-item workload on the monotonic clock; fps = 1000/mean_ms."""
    if timed_iters < 1:
        raise ValidationError(f"timed_iters must be >= 1, got {timed_iters}")
    if warmup_iters < 0:
        raise ValidationError(f"warmup_iters must be >= 0, got {warmup_iters}")
    for _ in range(warmup_iters):
        workload()
    t0 = time.perf_counter()
    for _ in range(timed_iters):
        workload()
    elapsed = time.perf_counter() - t0
    if elapsed <= 0.0:
        raise NumericError("elapsed time below timer resolution")
    mean_ms = elapsed * 1000.0 / timed_iters
    return BenchResult(mean_ms, 1000.0 / mean_ms, warmup_iters, timed_iters)


def load_detections(path) -> list[Detection]:
    """Parse text lines `image_id class_id confidence x1 y1 x2 y2`."""
    out: list[Detection] = []
    path = Path(path)
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 7:
            raise ParseError(f"expected 7 fields, got {len(parts)}", path, lineno)
        try:
            cid = int(parts[1])
            conf = float(parts[2])
            coords = [float(v) for v in parts[3:7]]
        except ValueError as exc:
            raise ParseError(str(exc), path, lineno) from exc
        try:
            out.append(Detection(parts[0], cid, BBoxPix(*coords), conf))
        except ValidationError as exc:
            raise ParseError(str(exc), path, lineno) from exc
    return out


def load_size_manifest(path) -> dict[str, tuple[int, int]]:
    """Parse `image_id width height` lines into an id -> size map."""
    sizes: dict[str, tuple[int, int]] = {}
    path = Path(path)
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ParseError(f"expected 3 fields, got {len(parts)}", path, lineno)
        try:
            sizes[parts[0]] = (int(parts[1]), int(parts[2]))
        except ValueError as exc:
            raise ParseError(str(exc), path, lineno) from exc
    return sizes


def load_eval_ground_truth(
    gt_dir, class_names: Sequence[str], sizes_path=None
) -> list[GroundTruth]:
    """Read normalized annotation files plus image sizes into pixel boxes.

    Sizes come from a manifest (`image_id width height` lines; default
    <gt_dir>/sizes.txt) or, failing that, from sibling image headers.
    """
    from tldet.dataset.core import parse_label_file
    from tldet.dataset.images import IMAGE_SUFFIXES, read_image_size
    from tldet.geometry import to_pixels

    gt_dir = Path(gt_dir)
    if not gt_dir.is_dir():
        raise ValidationError(f"not a directory: {gt_dir}")
    sizes: dict[str, tuple[int, int]] = {}
    if sizes_path is not None:
        sizes = load_size_manifest(sizes_path)
    elif (gt_dir / "sizes.txt").exists():
        sizes = load_size_manifest(gt_dir / "sizes.txt")

    gts: list[GroundTruth] = []
    for txt in sorted(gt_dir.glob("*.txt")):
        if txt.name in ("classes.txt", "sizes.txt"):
            continue
        stem = txt.stem
        if stem in sizes:
            w, h = sizes[stem]
        else:
            for suffix in IMAGE_SUFFIXES:
                img = gt_dir / f"{stem}{suffix}"
                if img.exists():
                    w, h = read_image_size(img)
                    break
            else:
                raise ValidationError(f"no image size known for {stem!r}")
        for ann in parse_label_file(txt, len(class_names)):
            gts.append(GroundTruth(stem, ann.class_id, to_pixels(ann.box, w, h)))
    return gts


def pr_curves_csv(
    dets: Sequence[Detection],
    gts: Sequence[GroundTruth],
    iou_thr: float,
    class_ids: Iterable[int],
) -> str:
    """Per-class PR points at one IoU threshold as CSV for plotting."""
    rows = ["class,rank,recall,precision"]
    for cid in class_ids:
        c_dets = [d for d in dets if d.class_id == cid]
        c_gts = [g for g in gts if g.class_id == cid]
        match = match_detections(c_dets, c_gts, iou_thr)
        curve = pr_curve(match.flags, len(c_gts))
        for rank, (rec, pre) in enumerate(curve.points, 1):
            rows.append(f"{cid},{rank},{rec!r},{pre!r}")
    return "\n".join(rows) + "\n"
