"""Anchor-shape clustering and fitness reporting.

K-means over annotation shapes (width, height) under either plain
Euclidean distance or the shape-aware 1-IoU distance, with shapes
compared co-centered.  Nine centroids are grouped by area into the three
detection scales (80x80 / 40x40 / 20x20 feature maps for a 640 input).

Determinism: all randomness flows from the config seed through one
generator; weighted seeding draws are done by an explicit cumulative-sum
walk so results do not depend on numpy's internal choice algorithm.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from tldet import backends
from tldet.errors import ValidationError
from tldet.geometry import WH, wh_iou


class DistanceMetric(enum.Enum):
    EUCLIDEAN = "euclidean"
    ONE_MINUS_IOU = "one-minus-iou"


@dataclass(frozen=True)
class KMeansConfig:
    k: int = 9
    metric: DistanceMetric = DistanceMetric.ONE_MINUS_IOU
    max_iters: int = 300
    seed: int = 41
    input_size: int = 640

    def __post_init__(self):
        if self.k < 1:
            raise ValidationError(f"k must be >= 1, got {self.k}")
        if self.max_iters < 1:
            raise ValidationError(f"max_iters must be >= 1, got {self.max_iters}")


@dataclass(frozen=True)
class AnchorSet:
    """Nine anchors grouped into the three detection scales.

    Within small+medium+large concatenation, areas are non-decreasing.
    """

    small: tuple[WH, WH, WH]
    medium: tuple[WH, WH, WH]
    large: tuple[WH, WH, WH]
    feature_map_sizes: tuple[int, int, int] = (80, 40, 20)

    def __post_init__(self):
        anchors = self.flat()
        if len(anchors) != 9:
            raise ValidationError(f"expected 9 anchors, got {len(anchors)}")
        areas = [a.area for a in anchors]
        if any(lo > hi for lo, hi in zip(areas, areas[1:])):
            raise ValidationError("anchor areas must be non-decreasing across scales")

    def flat(self) -> list[WH]:
        return list(self.small) + list(self.medium) + list(self.large)

    def as_json_dict(self) -> dict:
        return {
            "small": [[a.w, a.h] for a in self.small],
            "medium": [[a.w, a.h] for a in self.medium],
            "large": [[a.w, a.h] for a in self.large],
        }

    def flat_rounded(self) -> list[int]:
        """YOLO-style flat view: 18 integers, nearest-rounded."""
        out: list[int] = []
        for a in self.flat():
            out.append(round(a.w))
            out.append(round(a.h))
        return out


@dataclass
class KMeansResult:
    centroids: np.ndarray  # (k, 2) float64
    assignment: np.ndarray  # (n,) int64
    inertia: float
    inertia_history: list[float]
    n_iters: int

    def centroid_shapes(self) -> list[WH]:
        return [WH(float(w), float(h)) for w, h in self.centroids]


def _distance_matrix(points: np.ndarray, centers: np.ndarray, metric: DistanceMetric) -> np.ndarray:
    if metric is DistanceMetric.ONE_MINUS_IOU:
        return 1.0 - backends.ops.wh_iou_matrix(points, centers)
    diff = points[:, None, :] - centers[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=2))


def _weighted_pick(rng: np.random.Generator, weights: np.ndarray) -> int:
    """Index drawn with probability proportional to weights (cumsum walk)."""
    total = float(weights.sum())
    if total <= 0.0:
        return int(rng.integers(len(weights)))
    r = rng.random() * total
    acc = 0.0
    for i, w in enumerate(weights):
        acc += float(w)
        if r < acc:
            return i
    return len(weights) - 1


def _plus_plus_init(points: np.ndarray, k: int, metric: DistanceMetric, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    first = int(rng.integers(n))
    centers = [points[first].copy()]
    dmin = _distance_matrix(points, points[first][None, :], metric)[:, 0]
    for _ in range(1, k):
        idx = _weighted_pick(rng, dmin * dmin)
        centers.append(points[idx].copy())
        d_new = _distance_matrix(points, points[idx][None, :], metric)[:, 0]
        dmin = np.minimum(dmin, d_new)
    return np.stack(centers)


def kmeans_shapes(shapes: list[WH] | np.ndarray, cfg: KMeansConfig) -> KMeansResult:
    """Cluster shapes with seeded k-means++ and Lloyd iterations.

    Centroids update to the component-wise member mean; if that would
    increase the cluster's member cost under the configured metric, the
    previous centroid is kept, which makes the recorded inertia sequence
    non-increasing.  Empty clusters are reseeded with the point farthest
    from their current centroid.  Stops at an assignment fixed point or
    after cfg.max_iters.
    """
    if isinstance(shapes, np.ndarray):
        points = np.asarray(shapes, dtype=np.float64)
    else:
        points = np.array([[s.w, s.h] for s in shapes], dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != 2:
        raise ValidationError(f"expected (n, 2) shapes, got {points.shape}")
    n = points.shape[0]
    if n == 0:
        raise ValidationError("no shapes to cluster")
    if np.unique(points, axis=0).shape[0] < cfg.k:
        raise ValidationError(
            f"k={cfg.k} exceeds the number of distinct shapes "
            f"({np.unique(points, axis=0).shape[0]})"
        )

    rng = np.random.default_rng(cfg.seed)
    centroids = _plus_plus_init(points, cfg.k, cfg.metric, rng)

    assignment = np.full(n, -1, dtype=np.int64)
    history: list[float] = []
    idx = np.arange(n)
    iters = 0
    for _ in range(cfg.max_iters):
        iters += 1
        dists = _distance_matrix(points, centroids, cfg.metric)
        new_assignment = np.argmin(dists, axis=1)  # ties -> lowest index
        history.append(float(dists[idx, new_assignment].sum()))
        if np.array_equal(new_assignment, assignment):
            break
        assignment = new_assignment
        for j in range(cfg.k):
            members = points[assignment == j]
            if members.shape[0] == 0:
                centroids[j] = points[int(np.argmax(dists[:, j]))]
                continue
            cand = members.mean(axis=0)
            old_cost = _distance_matrix(members, centroids[j][None, :], cfg.metric).sum()
            new_cost = _distance_matrix(members, cand[None, :], cfg.metric).sum()
            if new_cost <= old_cost:
                centroids[j] = cand

    return KMeansResult(centroids, assignment, history[-1], history, iters)


def group_anchors(centroids: list[WH]) -> AnchorSet:
    """Sort nine centroids by area and split into the three scales."""
    if len(centroids) != 9:
        raise ValidationError(f"expected exactly 9 centroids, got {len(centroids)}")
    ordered = sorted(centroids, key=lambda a: a.area)  # stable on ties
    return AnchorSet(tuple(ordered[0:3]), tuple(ordered[3:6]), tuple(ordered[6:9]))


def dataset_shapes(dataset, input_size: int) -> np.ndarray:
    """Annotation shapes in pixels after aspect-preserving resize.

    Each image is scaled so its longest side equals input_size
    (letterboxing changes neither box widths nor heights).
    Returns an (n, 2) float64 array.
    """
    rows: list[tuple[float, float]] = []
    for img in dataset.images:
        f = input_size / max(img.width, img.height)
        for ann in img.annotations:
            rows.append((ann.box.w * img.width * f, ann.box.h * img.height * f))
    if not rows:
        raise ValidationError("dataset has no annotations")
    return np.array(rows, dtype=np.float64)


@dataclass
class FitnessReport:
    mean_best_iou: float
    best_possible_recall: float
    iou_threshold: float


def anchor_fitness(anchor_set: AnchorSet, dataset, input_size: int, recall_iou: float = 0.25) -> FitnessReport:
    """How well nine anchors cover a dataset's annotation shapes.

    mean_best_iou averages, over annotations scaled to the network input,
    the best co-centered IoU against the anchors; best_possible_recall is
    the fraction whose best IoU clears recall_iou.
    """
    shapes = dataset_shapes(dataset, input_size)
    anchors = np.array([[a.w, a.h] for a in anchor_set.flat()], dtype=np.float64)
    best = backends.ops.wh_iou_matrix(shapes, anchors).max(axis=1)
    return FitnessReport(
        mean_best_iou=float(best.mean()),
        best_possible_recall=float((best >= recall_iou).mean()),
        iou_threshold=recall_iou,
    )


@dataclass
class MetricRun:
    metric: DistanceMetric
    anchor_set: AnchorSet
    inertia: float
    fitness: FitnessReport

    def as_json_dict(self) -> dict:
        return {
            "metric": self.metric.value,
            "anchors": self.anchor_set.as_json_dict(),
            "anchors_rounded": self.anchor_set.flat_rounded(),
            "inertia": self.inertia,
            "mean_best_iou": self.fitness.mean_best_iou,
            "best_possible_recall": self.fitness.best_possible_recall,
        }


@dataclass
class MetricComparison:
    euclidean: MetricRun
    one_minus_iou: MetricRun

    def as_json_dict(self) -> dict:
        return {
            "euclidean": self.euclidean.as_json_dict(),
            "one_minus_iou": self.one_minus_iou.as_json_dict(),
        }


def compare_metrics(dataset, cfg: KMeansConfig) -> MetricComparison:
    """Run the clustering under both metrics and report anchors + fitness."""
    if cfg.k != 9:
        raise ValidationError("metric comparison requires k=9 (three scales of three)")
    shapes = dataset_shapes(dataset, cfg.input_size)
    runs = {}
    for metric in (DistanceMetric.EUCLIDEAN, DistanceMetric.ONE_MINUS_IOU):
        run_cfg = KMeansConfig(cfg.k, metric, cfg.max_iters, cfg.seed, cfg.input_size)
        result = kmeans_shapes(shapes, run_cfg)
        anchor_set = group_anchors(result.centroid_shapes())
        fitness = anchor_fitness(anchor_set, dataset, cfg.input_size)
        runs[metric] = MetricRun(metric, anchor_set, result.inertia, fitness)
    return MetricComparison(
        euclidean=runs[DistanceMetric.EUCLIDEAN],
        one_minus_iou=runs[DistanceMetric.ONE_MINUS_IOU],
    )


def best_shape_iou(shape: WH, anchor_set: AnchorSet) -> float:
    """Best co-centered IoU of one shape against the nine anchors."""
    return max(wh_iou(shape, a) for a in anchor_set.flat())
