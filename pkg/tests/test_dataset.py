import numpy as np
import pytest

from conftest import make_metadata_dataset

from tldet.dataset import (
    AnnotatedImage,
    Annotation,
    Dataset,
    dataset_stats,
    load_dataset,
    load_image,
    parse_label_line,
    read_class_names,
    read_image_size,
    save_image,
    split_dataset,
)
from tldet.errors import FormatError, ParseError, ValidationError
from tldet.geometry import BBoxNorm


class TestParsing:
    def test_direct_field_mapping(self):
        ann = parse_label_line("0 0.5 0.5 0.1 0.2", n_classes=5)
        assert ann.class_id == 0
        assert (ann.box.cx, ann.box.cy, ann.box.w, ann.box.h) == (0.5, 0.5, 0.1, 0.2)

    def test_class_out_of_range(self):
        with pytest.raises(ValidationError):
            parse_label_line("7 0.5 0.5 0.1 0.2", n_classes=5)

    def test_malformed_line_reports_location(self, tmp_path):
        label = tmp_path / "img.txt"
        label.write_text("0 0.5 0.5 0.1 0.2\n0 nope 0.5 0.1 0.2\n", encoding="utf-8")
        from tldet.dataset import parse_label_file

        with pytest.raises(ParseError) as err:
            parse_label_file(label, 5)
        assert "img.txt" in str(err.value)
        assert ":2:" in str(err.value)

    def test_box_invariants_enforced(self):
        with pytest.raises(ParseError):
            parse_label_line("0 0.5 0.5 0.0 0.2", n_classes=5)


class TestLoadDataset:
    def test_loads_images_with_and_without_labels(self, tiny_dataset_dir):
        ds = load_dataset(tiny_dataset_dir, read_class_names(tiny_dataset_dir / "classes.txt"))
        assert len(ds.images) == 3
        assert [len(i.annotations) for i in ds.images] == [2, 1, 0]
        assert ds.images[0].width == 48
        assert ds.images[0].height == 32

    def test_image_without_label_file(self, tmp_path):
        save_image(tmp_path / "lonely.ppm", np.zeros((8, 8), dtype=np.uint8))
        ds = load_dataset(tmp_path, ("a",))
        assert len(ds.images) == 1
        assert ds.images[0].annotations == ()

    def test_not_a_directory(self, tmp_path):
        with pytest.raises(ValidationError):
            load_dataset(tmp_path / "missing", ("a",))

    def test_dataset_invariants(self):
        with pytest.raises(ValidationError):
            Dataset((), ())
        with pytest.raises(ValidationError):
            Dataset(("a", "a"), ())
        with pytest.raises(ValidationError):
            Dataset(("a",), (AnnotatedImage("x.png", 4, 4,
                     (Annotation(1, BBoxNorm(0.5, 0.5, 0.1, 0.1)),)),))


class TestStats:
    def test_counts(self):
        images = (
            AnnotatedImage("a.png", 10, 10, tuple(
                Annotation(0, BBoxNorm(0.5, 0.5, 0.1, 0.1)) for _ in range(3))),
            AnnotatedImage("b.png", 10, 10,
                           (Annotation(1, BBoxNorm(0.5, 0.5, 0.2, 0.3)),)),
        )
        report = dataset_stats(Dataset(("a", "b"), images))
        assert report.counts == [3, 1]
        assert sum(report.counts) == 4
        assert report.mean_w == [pytest.approx(0.1), pytest.approx(0.2)]
        assert report.mean_h == [pytest.approx(0.1), pytest.approx(0.3)]

    def test_uniform_small_boxes_land_in_one_bin(self):
        images = tuple(
            AnnotatedImage(f"{i}.png", 10, 10,
                           (Annotation(0, BBoxNorm(0.5, 0.5, 0.05, 0.05)),))
            for i in range(7)
        )
        report = dataset_stats(Dataset(("a",), images), bins=16)
        assert report.histogram.sum() == 7
        assert report.histogram.max() == 7
        # every box is under 10% of the image, i.e. in the first bin row/col
        assert report.histogram[0, 0] == 7

    def test_empty_dataset(self):
        report = dataset_stats(Dataset(("a", "b"), ()))
        assert report.counts == [0, 0]
        assert report.mean_w == [0.0, 0.0]
        assert report.histogram.sum() == 0

    def test_csv_shape(self):
        report = dataset_stats(make_metadata_dataset(4))
        lines = report.to_csv().strip().splitlines()
        assert lines[0] == "class,count,mean_w,mean_h"
        assert len(lines) == 3
        hist_lines = report.histogram_csv().strip().splitlines()
        assert len(hist_lines) == report.bins


class TestSplit:
    def test_ten_images_eight_one_one(self):
        ds = make_metadata_dataset(10)
        train, val, test = split_dataset(ds, (8, 1, 1), seed=41)
        assert (len(train.images), len(val.images), len(test.images)) == (8, 1, 1)

    def test_published_total_reproduces_published_sizes(self):
        ds = make_metadata_dataset(11_335, seed=1)
        train, val, test = split_dataset(ds, (8, 1, 1), seed=41)
        assert (len(train.images), len(val.images), len(test.images)) == (9067, 1134, 1134)

    def test_deterministic(self):
        ds = make_metadata_dataset(50)
        a = split_dataset(ds, (8, 1, 1), seed=99)
        b = split_dataset(ds, (8, 1, 1), seed=99)
        for pa, pb in zip(a, b):
            assert [i.image_path for i in pa.images] == [i.image_path for i in pb.images]

    def test_partition_exact_and_disjoint(self):
        ds = make_metadata_dataset(23)
        parts = split_dataset(ds, (3, 2, 1), seed=5)
        seen = [i.image_path for p in parts for i in p.images]
        assert len(seen) == 23
        assert len(set(seen)) == 23
        assert set(seen) == {i.image_path for i in ds.images}

    def test_too_few_images(self):
        with pytest.raises(ValidationError):
            split_dataset(make_metadata_dataset(2), (8, 1, 1), seed=0)

    def test_bad_ratios(self):
        ds = make_metadata_dataset(10)
        with pytest.raises(ValidationError):
            split_dataset(ds, (1, -1, 1), seed=0)


class TestImages:
    def test_ppm_round_trip(self, tmp_path):
        img = np.random.default_rng(0).integers(0, 255, (9, 7, 3), dtype=np.uint8)
        path = tmp_path / "x.ppm"
        save_image(path, img)
        assert np.array_equal(load_image(path), img)
        assert read_image_size(path) == (7, 9)

    def test_pgm_round_trip(self, tmp_path):
        img = np.random.default_rng(1).integers(0, 255, (5, 6), dtype=np.uint8)
        path = tmp_path / "x.pgm"
        save_image(path, img)
        assert np.array_equal(load_image(path), img)

    def test_png_round_trip(self, tmp_path):
        img = np.random.default_rng(2).integers(0, 255, (12, 10, 3), dtype=np.uint8)
        path = tmp_path / "x.png"
        save_image(path, img)
        assert np.array_equal(load_image(path), img)
        assert read_image_size(path) == (10, 12)

    def test_unsupported_format(self, tmp_path):
        (tmp_path / "x.bmp").write_bytes(b"BM")
        with pytest.raises(FormatError):
            load_image(tmp_path / "x.bmp")
        with pytest.raises(FormatError):
            save_image(tmp_path / "y.gif", np.zeros((2, 2), dtype=np.uint8))

    def test_truncated_ppm(self, tmp_path):
        (tmp_path / "bad.ppm").write_bytes(b"P6\n4 4\n255\nxx")
        with pytest.raises(FormatError):
            load_image(tmp_path / "bad.ppm")
