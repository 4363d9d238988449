import time

import numpy as np
import pytest

from oracles import envelope_ap, oracle_ap

from tldet.errors import ContractError, ParseError, ValidationError
from tldet.evaluation import (
    ConfusionCounts,
    Detection,
    GroundTruth,
    PRCurve,
    average_precision,
    fps_benchmark,
    load_detections,
    load_eval_ground_truth,
    load_size_manifest,
    map_range,
    match_detections,
    mean_ap,
    pr_curve,
    pr_curves_csv,
)
from tldet.geometry import BBoxPix


def det(img, conf, x1, y1, x2, y2, cid=0):
    return Detection(img, cid, BBoxPix(x1, y1, x2, y2), conf)


def gt(img, x1, y1, x2, y2, cid=0):
    return GroundTruth(img, cid, BBoxPix(x1, y1, x2, y2))


def random_instance(rng):
    """Small random eval problem plus the oracle's raw-tuple view."""
    n_images = int(rng.integers(1, 6))
    images = [f"im{i}" for i in range(n_images)]
    n_classes = int(rng.integers(1, 3))
    dets, gts = [], []
    for _ in range(int(rng.integers(0, 7))):
        img = images[int(rng.integers(n_images))]
        cid = int(rng.integers(n_classes))
        x1, y1 = rng.uniform(0, 60, 2)
        w, h = rng.uniform(4, 40, 2)
        dets.append(det(img, float(np.round(rng.uniform(), 3)), x1, y1, x1 + w, y1 + h, cid))
    for _ in range(int(rng.integers(1, 5))):
        img = images[int(rng.integers(n_images))]
        cid = int(rng.integers(n_classes))
        x1, y1 = rng.uniform(0, 60, 2)
        w, h = rng.uniform(4, 40, 2)
        gts.append(gt(img, x1, y1, x1 + w, y1 + h, cid))
    return dets, gts, n_classes


def as_tuples(dets, gts, cid):
    d = [(x.image_id, x.confidence, (x.box.x1, x.box.y1, x.box.x2, x.box.y2))
         for x in dets if x.class_id == cid]
    g = [(x.image_id, (x.box.x1, x.box.y1, x.box.x2, x.box.y2))
         for x in gts if x.class_id == cid]
    return d, g


class TestMatching:
    def test_perfect_single_match(self):
        m = match_detections([det("a", 0.9, 0, 0, 10, 10)], [gt("a", 0, 0, 10, 10)], 0.5)
        assert m.counts == ConfusionCounts(1, 0, 0)

    def test_duplicate_detection_is_fp(self):
        dets = [det("a", 0.9, 0, 0, 10, 10), det("a", 0.8, 1, 1, 11, 11)]
        m = match_detections(dets, [gt("a", 0, 0, 10, 10)], 0.5)
        assert m.flags.tolist() == [True, False]
        assert m.counts == ConfusionCounts(1, 1, 0)

    def test_no_cross_image_matching(self):
        m = match_detections([det("a", 0.9, 0, 0, 10, 10)], [gt("b", 0, 0, 10, 10)], 0.5)
        assert m.counts == ConfusionCounts(0, 1, 1)

    def test_greedy_prefers_higher_iou_ground_truth(self):
        dets = [det("a", 0.9, 0, 0, 10, 10)]
        gts = [gt("a", 4, 4, 14, 14), gt("a", 1, 1, 11, 11)]
        m = match_detections(dets, gts, 0.3)
        assert m.counts.tp == 1
        # the second (closer) ground truth was taken: a perfect second
        # detection on the first one can still match
        dets2 = dets + [det("a", 0.8, 4, 4, 14, 14)]
        m2 = match_detections(dets2, gts, 0.3)
        assert m2.counts == ConfusionCounts(2, 0, 0)

    def test_ties_keep_input_order(self):
        dets = [det("a", 0.5, 0, 0, 10, 10), det("a", 0.5, 100, 100, 110, 110)]
        m = match_detections(dets, [gt("a", 0, 0, 10, 10)], 0.5)
        assert m.order.tolist() == [0, 1]
        assert m.flags.tolist() == [True, False]

    def test_mixed_classes_rejected(self):
        with pytest.raises(ValidationError):
            match_detections([det("a", 0.9, 0, 0, 1, 1, cid=0)],
                             [gt("a", 0, 0, 1, 1, cid=1)], 0.5)

    def test_threshold_domain(self):
        with pytest.raises(ValidationError):
            match_detections([], [], 0.0)


class TestPRCurve:
    def test_single_true_positive(self):
        curve = pr_curve([True], 1)
        assert curve.points == [(1.0, 1.0)]

    def test_mixed_flags(self):
        curve = pr_curve([False, True, True], 2)
        assert curve.points == [(0.0, 0.0), (0.5, 0.5), (1.0, 2 / 3)]

    def test_empty(self):
        assert pr_curve([], 0).points == []

    def test_tp_without_ground_truth_is_contract_error(self):
        with pytest.raises(ContractError):
            pr_curve([True], 0)

    def test_recall_non_decreasing(self):
        rng = np.random.default_rng(0)
        flags = rng.random(30) < 0.4
        curve = pr_curve(flags, int(flags.sum()) + 2)
        recalls = [r for r, _ in curve.points]
        assert recalls == sorted(recalls)


class TestAveragePrecision:
    def test_perfect_detector(self):
        assert average_precision(pr_curve([True, True, True], 3)) == 1.0

    def test_no_detections(self):
        assert average_precision(PRCurve([], 4)) == 0.0

    def test_envelope_case(self):
        # FP at rank 1, then two TPs: envelope is 2/3 over all of (0, 1]
        ap = average_precision(pr_curve([False, True, True], 2))
        assert ap == pytest.approx(2 / 3, abs=1e-12)

    def test_matches_envelope_oracle_on_random_flag_vectors(self):
        rng = np.random.default_rng(1)
        for _ in range(60):
            n = int(rng.integers(1, 12))
            flags = (rng.random(n) < 0.5).tolist()
            n_gt = int(sum(flags)) + int(rng.integers(0, 4))
            if n_gt == 0:
                continue
            ap = average_precision(pr_curve(flags, n_gt))
            assert ap == pytest.approx(envelope_ap(flags, n_gt), abs=1e-12)


class TestMeanAp:
    def test_mean(self):
        assert mean_ap([1.0, 0.5]) == 0.75

    def test_single(self):
        assert mean_ap([0.37]) == 0.37

    def test_zeros(self):
        assert mean_ap([0.0, 0.0, 0.0]) == 0.0

    def test_empty_rejected(self):
        with pytest.raises(ValidationError):
            mean_ap([])


class TestMapRange:
    def test_perfect_detector_everywhere(self):
        dets = [det("a", 0.9, 0, 0, 10, 10), det("b", 0.8, 5, 5, 9, 9, cid=1)]
        gts = [gt("a", 0, 0, 10, 10), gt("b", 5, 5, 9, 9, cid=1)]
        report = map_range(dets, gts)
        assert report.map_primary == 1.0
        assert report.map_averaged == 1.0

    def test_iou_point_six_threshold_sweep(self):
        # detection box covers exactly 60% of its ground truth
        dets = [det("a", 0.9, 0, 0, 6, 10)]
        gts = [gt("a", 0, 0, 10, 10)]
        report = map_range(dets, gts)
        assert report.per_class_ap[0] == [1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]
        assert report.map_averaged == 0.3

    def test_empty_detections(self):
        report = map_range([], [gt("a", 0, 0, 10, 10)])
        assert report.map_primary == 0.0
        assert report.map_averaged == 0.0

    def test_unknown_detection_class(self):
        with pytest.raises(ValidationError):
            map_range([det("a", 0.9, 0, 0, 10, 10, cid=3)],
                      [gt("a", 0, 0, 10, 10)], class_ids=[0])

    def test_counts_partition_ground_truth(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            dets, gts, n_classes = random_instance(rng)
            report = map_range(dets, gts, class_ids=range(n_classes))
            for cid in range(n_classes):
                n_gt = sum(1 for g in gts if g.class_id == cid)
                c = report.counts[cid]
                assert c.tp + c.fn == n_gt

    def test_rank_only_dependence_on_confidence(self):
        rng = np.random.default_rng(8)
        dets, gts, n_classes = random_instance(rng)
        base = map_range(dets, gts, class_ids=range(n_classes))
        squeezed = [
            Detection(d.image_id, d.class_id, d.box, d.confidence**3 * 0.5 + 0.1)
            for d in dets
        ]
        after = map_range(squeezed, gts, class_ids=range(n_classes))
        assert base.map_primary == after.map_primary
        assert base.map_averaged == after.map_averaged

    def test_trailing_fp_never_raises_ap_and_removal_never_lowers_it(self):
        dets = [det("a", 0.9, 0, 0, 10, 10), det("a", 0.5, 50, 50, 60, 60)]
        gts = [gt("a", 0, 0, 10, 10)]
        with_fp = map_range(dets, gts).map_primary
        without = map_range(dets[:1], gts).map_primary
        assert with_fp <= without

    def test_range_map_never_exceeds_primary_map(self):
        rng = np.random.default_rng(9)
        for _ in range(25):
            dets, gts, n_classes = random_instance(rng)
            report = map_range(dets, gts, class_ids=range(n_classes))
            assert report.map_averaged <= report.map_primary + 1e-12

    def test_matches_brute_force_oracle(self):
        rng = np.random.default_rng(10)
        for _ in range(80):
            dets, gts, n_classes = random_instance(rng)
            report = map_range(dets, gts, class_ids=range(n_classes))
            for thr_idx, thr in enumerate(report.thresholds):
                for cid in range(n_classes):
                    aps = report.per_class_ap[cid]
                    if aps is None:
                        continue
                    d, g = as_tuples(dets, gts, cid)
                    assert aps[thr_idx] == pytest.approx(oracle_ap(d, g, thr), abs=1e-9)

    def test_class_without_ground_truth_excluded_from_mean(self):
        dets = [det("a", 0.9, 0, 0, 10, 10), det("a", 0.8, 0, 0, 10, 10, cid=1)]
        gts = [gt("a", 0, 0, 10, 10)]
        report = map_range(dets, gts, class_ids=[0, 1])
        assert report.per_class_ap[1] is None
        assert report.map_primary == 1.0


class TestFpsBenchmark:
    def test_reciprocal_identity(self):
        result = fps_benchmark(lambda: None, warmup_iters=0, timed_iters=50)
        assert result.fps * result.mean_ms_per_item == pytest.approx(1000.0, rel=1e-12)

    def test_sleep_workload(self):
        result = fps_benchmark(lambda: time.sleep(0.005), 1, 10)
        assert result.fps == pytest.approx(200.0, rel=0.25)

    def test_validation(self):
        with pytest.raises(ValidationError):
            fps_benchmark(lambda: None, 0, 0)
        with pytest.raises(ValidationError):
            fps_benchmark(lambda: None, -1, 1)


class TestLoaders:
    def test_detections_round_trip(self, tmp_path):
        path = tmp_path / "dets.txt"
        path.write_text("im0 0 0.9 0 0 10 10\nim1 1 0.25 5 5 8 9\n\n", encoding="utf-8")
        dets = load_detections(path)
        assert len(dets) == 2
        assert dets[0].image_id == "im0"
        assert dets[1].confidence == 0.25

    def test_detections_field_count(self, tmp_path):
        path = tmp_path / "dets.txt"
        path.write_text("im0 0 0.9 0 0 10\n", encoding="utf-8")
        with pytest.raises(ParseError):
            load_detections(path)

    def test_detections_bad_confidence(self, tmp_path):
        path = tmp_path / "dets.txt"
        path.write_text("im0 0 1.5 0 0 10 10\n", encoding="utf-8")
        with pytest.raises(ParseError):
            load_detections(path)

    def test_size_manifest(self, tmp_path):
        path = tmp_path / "sizes.txt"
        path.write_text("im0 640 480\nim1 100 200\n", encoding="utf-8")
        assert load_size_manifest(path) == {"im0": (640, 480), "im1": (100, 200)}

    def test_ground_truth_from_labels_and_manifest(self, tmp_path):
        (tmp_path / "im0.txt").write_text("0 0.5 0.5 0.5 0.5\n", encoding="utf-8")
        (tmp_path / "sizes.txt").write_text("im0 100 100\n", encoding="utf-8")
        gts = load_eval_ground_truth(tmp_path, ["screw"])
        assert len(gts) == 1
        box = gts[0].box
        assert (box.x1, box.y1, box.x2, box.y2) == (25.0, 25.0, 75.0, 75.0)

    def test_ground_truth_sizes_from_sibling_images(self, tmp_path):
        from tldet.dataset import save_image

        save_image(tmp_path / "im0.ppm", np.zeros((40, 60, 3), dtype=np.uint8))
        (tmp_path / "im0.txt").write_text("0 0.5 0.5 1 1\n", encoding="utf-8")
        gts = load_eval_ground_truth(tmp_path, ["screw"])
        assert gts[0].box.x2 == 60.0
        assert gts[0].box.y2 == 40.0

    def test_missing_size_is_validation_error(self, tmp_path):
        (tmp_path / "im0.txt").write_text("0 0.5 0.5 1 1\n", encoding="utf-8")
        with pytest.raises(ValidationError):
            load_eval_ground_truth(tmp_path, ["screw"])

    def test_pr_curves_csv(self):
        dets = [det("a", 0.9, 0, 0, 10, 10), det("a", 0.8, 50, 50, 60, 60)]
        gts = [gt("a", 0, 0, 10, 10)]
        text = pr_curves_csv(dets, gts, 0.5, [0])
        lines = text.strip().splitlines()
        assert lines[0] == "class,rank,recall,precision"
        assert len(lines) == 3
