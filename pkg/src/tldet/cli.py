"""Command-line front end; one subcommand per library operation.

Exit codes: 0 success, 1 validation error, 2 numeric/tolerance failure,
64 usage error.  Reports go to stdout (or --out), diagnostics to stderr.
All randomness flows from --seed (default 41).  An optional key=value
config file supplies flag defaults; explicit flags override it.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from tldet import backends
from tldet.anchors import (
    DistanceMetric,
    KMeansConfig,
    compare_metrics,
    dataset_shapes,
    group_anchors,
    kmeans_shapes,
)
from tldet.dataset import (
    augment,
    augmented_name,
    dataset_stats,
    format_label_lines,
    load_dataset,
    load_image,
    parse_op,
    read_class_names,
    save_image,
    split_dataset,
    split_manifest_json,
)
from tldet.errors import ContractError, NumericError, TldetError, ValidationError
from tldet.evaluation import (
    fps_benchmark,
    load_detections,
    load_eval_ground_truth,
    map_range,
    pr_curves_csv,
)
from tldet.nn import (
    FocalClampWarning,
    FocalParams,
    cbam_backward,
    cbam_forward,
    cbam_grad_report,
    focal_loss,
    focal_loss_batch,
    focal_loss_grad,
)
from tldet.nn.cbam import CbamParams

DEFAULT_SEED = 41
USAGE_EXIT = 64


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(USAGE_EXIT, f"{self.prog}: error: {message}\n")


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _emit_json(payload: dict, out: str | None) -> None:
    _emit(json.dumps(payload, indent=2), out)


def _class_names(args) -> tuple[str, ...]:
    if args.classes:
        return tuple(name.strip() for name in args.classes.split(",") if name.strip())
    candidate = Path(args.data if hasattr(args, "data") else args.gt) / "classes.txt"
    if candidate.exists():
        return read_class_names(candidate)
    raise ValidationError("no class names: pass --classes or provide classes.txt")


def _add_common(sub, data=True):
    if data:
        sub.add_argument("--data", required=True, help="dataset directory")
    sub.add_argument("--classes", help="comma-separated class names (default: classes.txt)")
    sub.add_argument("--seed", type=int, default=DEFAULT_SEED)
    sub.add_argument("--out", help="write the report here instead of stdout")
    sub.add_argument("--config", help="key=value file with flag defaults")


def build_parser() -> _Parser:
    parser = _Parser(prog="tldet", description=__doc__)
    subs = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = subs.add_parser("stats", help="per-class counts, mean sizes, size histogram")
    _add_common(p)
    p.add_argument("--bins", type=int, default=16)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--hist-out", help="write the histogram CSV grid here")

    p = subs.add_parser("split", help="seeded train/val/test split")
    _add_common(p)
    p.add_argument("--ratios", default="8,1,1", help="three positive numbers, e.g. 8,1,1")

    p = subs.add_parser("augment", help="materialize augmented copies of a dataset")
    _add_common(p)
    p.add_argument(
        "--op", action="append", required=True,
        help="op spec, repeatable: hflip | vflip | affine:rot=90,scale=1,tx=0,ty=0 | "
             "blur:sigma=2 | invert | brightness:delta=0.2 | contrast:factor=1.5",
    )
    p.add_argument("--out-dir", required=True, help="directory for images and labels")

    p = subs.add_parser("anchors", help="cluster annotation shapes into anchors")
    _add_common(p)
    p.add_argument("--metric", choices=[m.value for m in DistanceMetric],
                   default=DistanceMetric.ONE_MINUS_IOU.value)
    p.add_argument("--k", type=int, default=9)
    p.add_argument("--input-size", type=int, default=640)
    p.add_argument("--max-iters", type=int, default=300)
    p.add_argument("--format", choices=("json", "yolo"), default="json")

    p = subs.add_parser("compare-metrics", help="anchors + fitness under both distances")
    _add_common(p)
    p.add_argument("--k", type=int, default=9)
    p.add_argument("--input-size", type=int, default=640)
    p.add_argument("--max-iters", type=int, default=300)

    p = subs.add_parser("eval", help="precision/recall/AP/mAP for a detections file")
    p.add_argument("--gt", required=True, help="ground-truth annotation directory")
    p.add_argument("--dets", required=True, help="detections file")
    p.add_argument("--sizes", help="image size manifest (default <gt>/sizes.txt)")
    p.add_argument("--iou", type=float, default=0.5, help="operating IoU for counts")
    p.add_argument("--conf", type=float, default=0.0, help="operating confidence")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--curves", help="write PR curves CSV here")
    _add_common(p, data=False)

    p = subs.add_parser("focal", help="focal loss and gradient for one prediction")
    p.add_argument("--p", type=float, help="predicted probability")
    p.add_argument("--y", type=int, choices=(0, 1), help="label")
    p.add_argument("--batch", help="file of `p y` lines (mean loss)")
    p.add_argument("--gamma", type=float, default=2.0)
    p.add_argument("--alpha", type=float, default=0.25)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out")
    p.add_argument("--config")

    p = subs.add_parser("cbam-check", help="finite-difference check of the CBAM backward")
    p.add_argument("--shape", default="2,8,5,5", help="input dims n,c,h,w")
    p.add_argument("--reduction", type=int, default=4)
    p.add_argument("--kernel-size", type=int, default=7)
    p.add_argument("--step", type=float, default=1e-6)
    p.add_argument("--tol", type=float, default=1e-5)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out")
    p.add_argument("--config")

    p = subs.add_parser("bench", help="time a workload; compare kernel backends")
    p.add_argument("--workload", choices=("cbam-forward", "cbam-backward", "kmeans", "wh-iou"),
                   default="cbam-forward")
    p.add_argument("--backend", choices=("auto", "compiled", "numpy", "both"), default="both")
    p.add_argument("--shape", default="4,32,40,40", help="cbam workload dims n,c,h,w")
    p.add_argument("--reduction", type=int, default=4)
    p.add_argument("--n", type=int, default=4000, help="shape count for kmeans/wh-iou")
    p.add_argument("--warmup", type=int, default=2)
    p.add_argument("--iters", type=int, default=10)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out")
    p.add_argument("--config")

    return parser


def _parse_shape(text: str) -> tuple[int, int, int, int]:
    try:
        dims = tuple(int(v) for v in text.split(","))
    except ValueError as exc:
        raise ValidationError(f"bad shape {text!r}") from exc
    if len(dims) != 4 or any(d < 1 for d in dims):
        raise ValidationError(f"shape must be four positive ints, got {text!r}")
    return dims


def _cmd_stats(args) -> int:
    ds = load_dataset(args.data, _class_names(args))
    report = dataset_stats(ds, bins=args.bins)
    if args.hist_out:
        Path(args.hist_out).write_text(report.histogram_csv(), encoding="utf-8")
    if args.format == "csv":
        _emit(report.to_csv(), args.out)
    else:
        _emit_json(report.as_json_dict(), args.out)
    return 0


def _cmd_split(args) -> int:
    ds = load_dataset(args.data, _class_names(args))
    try:
        ratios = tuple(float(v) for v in args.ratios.split(","))
    except ValueError as exc:
        raise ValidationError(f"bad ratios {args.ratios!r}") from exc
    if len(ratios) != 3:
        raise ValidationError(f"need three ratios, got {args.ratios!r}")
    parts = split_dataset(ds, ratios, args.seed)
    _emit(split_manifest_json(parts), args.out)
    return 0


def _cmd_augment(args) -> int:
    ds = load_dataset(args.data, _class_names(args))
    ops_list = [parse_op(spec) for spec in args.op]
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "classes.txt").write_text("\n".join(ds.class_names) + "\n", encoding="utf-8")
    written = 0
    for img in ds.images:
        pixels = load_image(img.image_path)
        name = Path(img.image_path).name
        save_image(out_dir / name, pixels)
        (out_dir / Path(name).with_suffix(".txt").name).write_text(
            format_label_lines(img.annotations), encoding="utf-8")
        written += 1
        for op_index, op in enumerate(ops_list):
            aug_pixels, aug_anns = augment(pixels, img.annotations, op, args.seed)
            aug_path = out_dir / augmented_name(name, op_index, op).name
            save_image(aug_path, aug_pixels)
            aug_path.with_suffix(".txt").write_text(
                format_label_lines(aug_anns), encoding="utf-8")
            written += 1
    _emit_json(
        {"images_in": len(ds.images), "images_out": written,
         "ops": [spec for spec in args.op], "out_dir": str(out_dir)},
        args.out,
    )
    return 0


def _cmd_anchors(args) -> int:
    ds = load_dataset(args.data, _class_names(args))
    cfg = KMeansConfig(args.k, DistanceMetric(args.metric), args.max_iters,
                       args.seed, args.input_size)
    result = kmeans_shapes(dataset_shapes(ds, cfg.input_size), cfg)
    if args.k == 9:
        anchor_set = group_anchors(result.centroid_shapes())
        if args.format == "yolo":
            _emit(" ".join(str(v) for v in anchor_set.flat_rounded()), args.out)
            return 0
        payload = {
            "metric": cfg.metric.value,
            "inertia": result.inertia,
            "iterations": result.n_iters,
            "anchors": anchor_set.as_json_dict(),
            "anchors_rounded": anchor_set.flat_rounded(),
        }
    else:
        ordered = sorted(result.centroid_shapes(), key=lambda a: a.area)
        payload = {
            "metric": cfg.metric.value,
            "inertia": result.inertia,
            "iterations": result.n_iters,
            "centroids": [[a.w, a.h] for a in ordered],
        }
    _emit_json(payload, args.out)
    return 0


def _cmd_compare_metrics(args) -> int:
    ds = load_dataset(args.data, _class_names(args))
    cfg = KMeansConfig(args.k, DistanceMetric.ONE_MINUS_IOU, args.max_iters,
                       args.seed, args.input_size)
    _emit_json(compare_metrics(ds, cfg).as_json_dict(), args.out)
    return 0


def _cmd_eval(args) -> int:
    names = _class_names(args)
    gts = load_eval_ground_truth(args.gt, names, args.sizes)
    dets = load_detections(args.dets)
    report = map_range(
        dets, gts,
        class_ids=range(len(names)),
        conf_threshold=args.conf,
        operating_iou=args.iou,
    )
    if args.curves:
        Path(args.curves).write_text(
            pr_curves_csv(dets, gts, args.iou, report.class_ids), encoding="utf-8")
    if args.format == "csv":
        _emit(report.ap_table_csv(), args.out)
    else:
        payload = report.as_json_dict()
        payload["class_names"] = list(names)
        _emit_json(payload, args.out)
    return 0


def _cmd_focal(args) -> int:
    fp = FocalParams(alpha=args.alpha, gamma=args.gamma)
    if args.batch:
        rows = []
        for lineno, raw in enumerate(Path(args.batch).read_text().splitlines(), 1):
            line = raw.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValidationError(f"{args.batch}:{lineno}: expected `p y`")
            rows.append((float(parts[0]), int(parts[1])))
        ps = np.array([r[0] for r in rows])
        ys = np.array([r[1] for r in rows])
        batch = focal_loss_batch(ps, ys, fp)
        _emit_json(
            {"mean_loss": batch.mean_loss, "n_clamped": batch.n_clamped,
             "n_items": len(rows), "alpha": fp.alpha, "gamma": fp.gamma},
            args.out,
        )
        return 0
    if args.p is None or args.y is None:
        raise ValidationError("pass --p and --y, or --batch")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", FocalClampWarning)
        loss = focal_loss(args.p, args.y, fp)
        grad = focal_loss_grad(args.p, args.y, fp)
    clamped = any(issubclass(w.category, FocalClampWarning) for w in caught)
    _emit_json(
        {"loss": loss, "grad": grad, "clamped": clamped,
         "p": args.p, "y": args.y, "alpha": fp.alpha, "gamma": fp.gamma},
        args.out,
    )
    return 0


def _cmd_cbam_check(args) -> int:
    report = cbam_grad_report(
        _parse_shape(args.shape), reduction=args.reduction, seed=args.seed,
        step=args.step, kernel_size=args.kernel_size,
    )
    passed = report.max_rel_err <= args.tol
    payload = report.as_json_dict()
    payload.update({"tolerance": args.tol, "passed": passed,
                    "backend": backends.ACTIVE_BACKEND})
    _emit_json(payload, args.out)
    return 0 if passed else 2


def _bench_workload(args):
    rng = np.random.default_rng(args.seed)
    if args.workload in ("cbam-forward", "cbam-backward"):
        n, c, h, w = _parse_shape(args.shape)
        x = rng.standard_normal((n, c, h, w))
        params = CbamParams.seeded_uniform(c, args.reduction, seed=args.seed)
        g = rng.standard_normal((n, c, h, w))
        if args.workload == "cbam-forward":
            return lambda: cbam_forward(x, params)

        def forward_backward():
            _, cache = cbam_forward(x, params)
            cbam_backward(g, cache)

        return forward_backward
    if args.workload == "kmeans":
        shapes = rng.uniform(2.0, 300.0, size=(args.n, 2))
        cfg = KMeansConfig(seed=args.seed)
        return lambda: kmeans_shapes(shapes, cfg)
    a = rng.uniform(2.0, 300.0, size=(args.n, 2))
    b = rng.uniform(2.0, 300.0, size=(9, 2))
    return lambda: backends.ops.wh_iou_matrix(a, b)


def _cmd_bench(args) -> int:
    if args.backend == "both":
        names = backends.available_backends()
    else:
        names = (args.backend,)
    runs = []
    for name in names:
        with backends.use_backend(name) as active:
            workload = _bench_workload(args)
            result = fps_benchmark(workload, args.warmup, args.iters)
        entry = result.as_json_dict()
        entry["backend"] = active.NAME
        runs.append(entry)
    payload = {
        "workload": args.workload,
        "params": {"shape": args.shape, "reduction": args.reduction, "n": args.n,
                   "seed": args.seed},
        "runs": runs,
    }
    if len(runs) == 2:
        payload["speedup_compiled_over_numpy"] = (
            runs[1]["mean_ms_per_item"] / runs[0]["mean_ms_per_item"]
            if runs[0]["backend"] == "compiled"
            else runs[0]["mean_ms_per_item"] / runs[1]["mean_ms_per_item"]
        )
    _emit_json(payload, args.out)
    return 0


_HANDLERS = {
    "stats": _cmd_stats,
    "split": _cmd_split,
    "augment": _cmd_augment,
    "anchors": _cmd_anchors,
    "compare-metrics": _cmd_compare_metrics,
    "eval": _cmd_eval,
    "focal": _cmd_focal,
    "cbam-check": _cmd_cbam_check,
    "bench": _cmd_bench,
}


def _inject_config(argv: list[str]) -> list[str]:
    """Expand --config key=value pairs into flags ahead of explicit ones."""
    if not argv:
        return argv
    path = None
    rest = [argv[0]]
    i = 1
    while i < len(argv):
        tok = argv[i]
        if tok == "--config":
            if i + 1 >= len(argv):
                rest.append(tok)  # let argparse report the missing value
                i += 1
                continue
            path = argv[i + 1]
            i += 2
        elif tok.startswith("--config="):
            path = tok.split("=", 1)[1]
            i += 1
        else:
            rest.append(tok)
            i += 1
    if path is None:
        return argv
    derived: list[str] = []
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, eq, value = line.partition("=")
        if not eq:
            raise ValidationError(f"{path}:{lineno}: expected key=value, got {line!r}")
        derived.append(f"--{key.strip().replace('_', '-')}")
        derived.append(value.strip())
    return [rest[0]] + derived + rest[1:]


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _inject_config(argv)
        args = parser.parse_args(argv)
        return _HANDLERS[args.command](args)
    except SystemExit as exc:  # argparse --help (0) and usage errors (64)
        return int(exc.code or 0)
    except ValidationError as exc:
        print(f"tldet: error: {exc}", file=sys.stderr)
        return 1
    except (NumericError, ContractError) as exc:
        print(f"tldet: numeric error: {exc}", file=sys.stderr)
        return 2
    except TldetError as exc:
        print(f"tldet: error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"tldet: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
