"""Dataset ingestion, statistics, splitting and augmentation."""

from tldet.dataset.augment import (
    Affine,
    AugmentOp,
    Brightness,
    Contrast,
    GaussianBlur,
    HFlip,
    Invert,
    VFlip,
    augment,
    augment_dataset,
    augmented_name,
    parse_op,
    transform_box,
    transform_image,
)
from tldet.dataset.core import (
    AnnotatedImage,
    Annotation,
    Dataset,
    StatsReport,
    dataset_stats,
    format_label_lines,
    load_dataset,
    parse_label_file,
    parse_label_line,
    read_class_names,
    split_dataset,
    split_manifest_json,
    write_labels,
    write_size_manifest,
)
from tldet.dataset.images import load_image, read_image_size, save_image
from tldet.dataset.synth import (
    CLASS_NAMES,
    make_synthetic_dataset,
    smoke_dataset_dir,
)

__all__ = [
    "Affine",
    "AnnotatedImage",
    "Annotation",
    "AugmentOp",
    "Brightness",
    "CLASS_NAMES",
    "Contrast",
    "Dataset",
    "GaussianBlur",
    "HFlip",
    "Invert",
    "StatsReport",
    "VFlip",
    "augment",
    "augment_dataset",
    "augmented_name",
    "dataset_stats",
    "format_label_lines",
    "load_dataset",
    "load_image",
    "make_synthetic_dataset",
    "parse_label_file",
    "parse_label_line",
    "parse_op",
    "read_class_names",
    "read_image_size",
    "save_image",
    "smoke_dataset_dir",
    "split_dataset",
    "split_manifest_json",
    "transform_box",
    "transform_image",
    "write_labels",
    "write_size_manifest",
]
