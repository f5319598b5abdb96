"""Command-line interface exposing the full pipeline as subcommands.

Exit codes: 0 success, 1 usage error, 2 data error, 3 I/O error. Every
stochastic subcommand requires an explicit --seed; there is no wall-clock
default. Results go to stdout (TSV/JSON) or to files under --out, warnings
to stderr. A JSON config file passed with --config supplies flag defaults;
explicit flags win.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import report as report_mod
from .augment import (
    AugmentationSchedule,
    JitterConfig,
    build_location_bank,
    build_patch_bank,
    derive_image_seed,
    synthesize,
)
from .dataset import (
    ALL_COUNTRIES,
    BoundingBox,
    Dataset,
    DatasetLayout,
    load_dataset,
    parse_voc_annotation,
    record_to_voc_xml,
    write_warning_log,
)
from .errors import DataError
from .evaluator import evaluate, sweep_thresholds
from .formats import build_submission, merge_pseudo_labels, read_predictions
from .images import load_rgb, save_image
from .split import save_split, stratified_split
from .stats import (
    aspect_ratio_histogram,
    box_area_histogram,
    channel_pixel_means,
    class_distribution,
    recommend_anchors,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_IO = 3

TSV_HEADER = "# threshold\tCd\tPd\tAd\tp\tr\tF1"

_SUBPARSERS: dict[str, argparse.ArgumentParser] = {}


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # argparse would exit with code 2
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_dataset_args(parser: argparse.ArgumentParser, *, gt_alias: bool = False) -> None:
    flags = ["--root", "--gt"] if gt_alias else ["--root"]
    parser.add_argument(*flags, dest="root", required=True, type=Path,
                        help="dataset root directory")
    parser.add_argument(
        "--layout",
        choices=[layout.value for layout in DatasetLayout],
        default=DatasetLayout.TRAIN_WITH_XML.value,
    )
    parser.add_argument("--jobs", type=int, default=1, help="parallel parse workers")
    parser.add_argument("--strict", action="store_true", help="reject files with anomalies")


def _load(args: argparse.Namespace) -> Dataset:
    ds, warnings = load_dataset(
        args.root,
        DatasetLayout(args.layout),
        strict=args.strict,
        jobs=args.jobs,
    )
    for w in warnings:
        print(w.as_line(), file=sys.stderr)
    out = getattr(args, "out", None)
    if warnings and out is not None:
        Path(out).mkdir(parents=True, exist_ok=True)
        write_warning_log(warnings, Path(out) / "warnings.tsv")
    return ds


def _write_xml_tree(ds: Dataset, out_dir: Path) -> Path:
    xml_dir = out_dir / "annotations" / "xmls"
    xml_dir.mkdir(parents=True, exist_ok=True)
    for record in ds:
        (xml_dir / f"{record.image_id}.xml").write_text(
            record_to_voc_xml(record), encoding="utf-8", newline="\n"
        )
    return xml_dir


def _cmd_stats(args: argparse.Namespace) -> int:
    ds = _load(args)
    dist = class_distribution(ds)
    summary: dict = {
        "images": len(ds),
        "images_per_country": {c.value: len(ds.by_country(c)) for c in ALL_COUNTRIES},
        "labels": dist.total,
        "labels_per_country": {c.value: dist.country_total(c) for c in ALL_COUNTRIES},
    }
    area_hist = ratio_hist = None
    if dist.total:
        area_hist = box_area_histogram(ds, args.bins_area, use_sqrt=args.sqrt_area)
        ratio_hist = aspect_ratio_histogram(ds, args.bins_ratio)
    if args.anchors:
        rec = recommend_anchors(ds)
        summary["anchor_sizes"] = list(rec.sizes)
        summary["anchor_ratios"] = list(rec.ratios)
    if args.pixel_means:
        b, g, r = channel_pixel_means(ds)
        summary["pixel_means_bgr"] = [b, g, r]
    if args.out is not None:
        written = report_mod.emit_charts(
            args.out,
            class_dist=dist,
            area_hist=area_hist,
            ratio_hist=ratio_hist,
        )
        summary["charts"] = [str(p) for p in written]
    print(json.dumps(summary, indent=2, sort_keys=True))
    return EXIT_OK


def _cmd_split(args: argparse.Namespace) -> int:
    ds = _load(args)
    result = stratified_split(ds, args.fraction, seed=args.seed)
    paths = save_split(result, args.out)
    print(
        json.dumps(
            {
                "train": len(result.train_ids),
                "eval": len(result.eval_ids),
                "files": [str(p) for p in paths],
            },
            indent=2,
            sort_keys=True,
        )
    )
    return EXIT_OK


def _cmd_eval(args: argparse.Namespace) -> int:
    ds = _load(args)
    preds = read_predictions(args.preds)
    report = evaluate(
        preds,
        ds,
        args.threshold,
        args.iou,
        apply_nms=not args.no_nms,
        strict=not args.lenient,
    )
    for warning in report.warnings:
        print(warning, file=sys.stderr)
    print(TSV_HEADER)
    print(report.tsv_line())
    if args.json is not None:
        Path(args.json).write_text(report.to_json(), encoding="utf-8", newline="\n")
    return EXIT_OK


def _cmd_sweep(args: argparse.Namespace) -> int:
    ds = _load(args)
    preds = read_predictions(args.preds)
    best, results = sweep_thresholds(
        preds, ds, apply_nms=not args.no_nms, strict=not args.lenient
    )
    print(TSV_HEADER)
    lines = [report.tsv_line() for _, report in results]
    for line in lines:
        print(line)
    best_report = dict(results)[best]
    print(f"best\t{best_report.tsv_line()}")
    if args.out is not None:
        Path(args.out).write_text(
            TSV_HEADER + "\n" + "\n".join(lines) + f"\nbest\t{best_report.tsv_line()}\n",
            encoding="utf-8",
            newline="\n",
        )
    return EXIT_OK


def _load_schedule(path: Path | None) -> AugmentationSchedule:
    if path is None:
        return AugmentationSchedule.default()
    text = Path(path).read_text(encoding="utf-8")
    if Path(path).suffix.lower() == ".csv":
        return AugmentationSchedule.from_csv(text)
    return AugmentationSchedule.from_json(text)


def _cmd_augment(args: argparse.Namespace) -> int:
    ds = _load(args)
    schedule = _load_schedule(args.schedule)
    jitter = JitterConfig(
        hflip_prob=args.hflip_prob,
        rotation_deg=args.rotation,
        scale_min=args.scale_min,
        scale_max=args.scale_max,
    )
    patches = build_patch_bank(ds)
    locations = build_location_bank(ds)
    schedule.validate_against(patches, locations)

    out_dir = Path(args.out)
    image_dir = out_dir / "images"
    image_dir.mkdir(parents=True, exist_ok=True)
    added = 0
    new_records = []
    for record in ds:
        pixels = load_rgb(record.image_path)
        out_pixels, out_record = synthesize(
            record,
            pixels,
            patches,
            locations,
            schedule,
            jitter,
            rng_seed=derive_image_seed(args.seed, record.image_id),
        )
        added += len(out_record.annotations) - len(record.annotations)
        save_image(out_pixels, image_dir / f"{record.image_id}.png")
        new_records.append(out_record)
    _write_xml_tree(Dataset(new_records), out_dir)
    print(json.dumps({"images": len(ds), "synthetic_annotations": added}, sort_keys=True))
    return EXIT_OK


def _cmd_submit(args: argparse.Namespace) -> int:
    preds = read_predictions(args.preds)
    image_ids = None
    if args.image_list is not None:
        image_ids = [
            line.strip()
            for line in Path(args.image_list).read_text(encoding="utf-8").splitlines()
            if line.strip()
        ]
    submission = build_submission(
        preds, args.threshold, args.max_dets, image_ids=image_ids
    )
    submission.write(args.out)
    print(json.dumps({"images": len(submission.entries), "file": str(args.out)}))
    return EXIT_OK


def _cmd_merge_labels(args: argparse.Namespace) -> int:
    ds = _load(args)
    preds = read_predictions(args.preds)
    merged = merge_pseudo_labels(
        ds, preds, args.confidence, strict=not args.lenient
    )
    xml_dir = _write_xml_tree(merged, Path(args.out))
    print(
        json.dumps(
            {
                "images": len(merged),
                "annotations_before": ds.total_annotations(),
                "annotations_after": merged.total_annotations(),
                "xml_dir": str(xml_dir),
            },
            indent=2,
            sort_keys=True,
        )
    )
    return EXIT_OK


def _parse_box(text: str) -> BoundingBox:
    parts = text.split(",")
    if len(parts) != 4:
        raise DataError(f"box must be xmin,ymin,xmax,ymax, got {text!r}")
    try:
        return BoundingBox(*(int(p) for p in parts))
    except ValueError:
        raise DataError(f"box coordinates must be integers: {text!r}") from None


def _cmd_report_overlay(args: argparse.Namespace) -> int:
    pixels = load_rgb(args.image)
    gts = []
    if args.xml is not None:
        record, _ = parse_voc_annotation(
            Path(args.xml).read_bytes(), Path(args.image).stem
        )
        gts = list(record.annotations)
    preds = []
    if args.preds is not None:
        pred_set = read_predictions(args.preds)
        preds = list(pred_set.by_image.get(Path(args.image).stem, ()))
    out = report_mod.render_overlay(pixels, gts, preds)
    save_image(out, args.out)
    print(json.dumps({"gts": len(gts), "preds": len(preds), "file": str(args.out)}))
    return EXIT_OK


def _cmd_report_probe(args: argparse.Namespace) -> int:
    pixels = load_rgb(args.image)
    out = report_mod.render_brightness_probe(
        pixels, _parse_box(args.box), args.brightness, args.zoom
    )
    save_image(out, args.out)
    print(json.dumps({"size": [out.shape[1], out.shape[0]], "file": str(args.out)}))
    return EXIT_OK


def _cmd_report_charts(args: argparse.Namespace) -> int:
    ds = _load(args)
    dist = class_distribution(ds)
    area_hist = ratio_hist = None
    if dist.total:
        area_hist = box_area_histogram(ds, args.bins_area, use_sqrt=args.sqrt_area)
        ratio_hist = aspect_ratio_histogram(ds, args.bins_ratio)
    written = report_mod.emit_charts(
        args.out, class_dist=dist, area_hist=area_hist, ratio_hist=ratio_hist
    )
    print(json.dumps({"charts": [str(p) for p in written]}, indent=2, sort_keys=True))
    return EXIT_OK


def _add_hist_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--bins-area", type=int, default=20)
    parser.add_argument("--bins-ratio", type=int, default=30)
    parser.add_argument(
        "--sqrt-area", action="store_true", help="histogram sqrt(area) instead of area"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="roadbench", description=__doc__)
    parser.add_argument("--config", type=Path, help="JSON file with flag defaults")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    _SUBPARSERS.clear()

    def subparser(name: str, **kwargs) -> argparse.ArgumentParser:
        p = sub.add_parser(name, **kwargs)
        p.add_argument("--config", type=Path, help="JSON file with flag defaults")
        _SUBPARSERS[name] = p
        return p

    p = subparser("stats", help="class distribution, histograms, pixel means, anchors")
    _add_dataset_args(p)
    _add_hist_args(p)
    p.add_argument("--out", type=Path, help="directory for CSV/SVG charts")
    p.add_argument("--pixel-means", action="store_true")
    p.add_argument("--anchors", action="store_true")
    p.set_defaults(func=_cmd_stats)

    p = subparser("split", help="stratified train/eval split")
    _add_dataset_args(p)
    p.add_argument("--fraction", type=float, default=0.10)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=_cmd_split)

    p = subparser("eval", help="score a prediction file")
    _add_dataset_args(p, gt_alias=True)
    p.add_argument("--preds", type=Path, required=True)
    p.add_argument("--threshold", type=float, required=True)
    p.add_argument("--iou", type=float, default=0.5)
    p.add_argument("--no-nms", action="store_true")
    p.add_argument("--lenient", action="store_true", help="skip unknown image ids")
    p.add_argument("--json", type=Path, help="write the full report as JSON")
    p.set_defaults(func=_cmd_eval)

    p = subparser("sweep", help="evaluate over a threshold grid")
    _add_dataset_args(p, gt_alias=True)
    p.add_argument("--preds", type=Path, required=True)
    p.add_argument("--no-nms", action="store_true")
    p.add_argument("--lenient", action="store_true")
    p.add_argument("--out", type=Path, help="write the sweep TSV here")
    p.set_defaults(func=_cmd_sweep)

    p = subparser("augment", help="copy-paste augmentation over a dataset")
    _add_dataset_args(p)
    p.add_argument("--schedule", type=Path, help="JSON or CSV schedule (default table)")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--hflip-prob", type=float, default=0.5)
    p.add_argument("--rotation", type=float, default=10.0)
    p.add_argument("--scale-min", type=float, default=0.9)
    p.add_argument("--scale-max", type=float, default=1.1)
    p.set_defaults(func=_cmd_augment)

    p = subparser("submit", help="write a challenge-style submission file")
    p.add_argument("--preds", type=Path, required=True)
    p.add_argument("--threshold", type=float, required=True)
    p.add_argument("--max-dets", type=int, default=5)
    p.add_argument("--image-list", type=Path, help="ids that must appear, one per line")
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=_cmd_submit)

    p = subparser("merge-labels", help="merge confident predictions as pseudo labels")
    _add_dataset_args(p, gt_alias=True)
    p.add_argument("--preds", type=Path, required=True)
    p.add_argument("--confidence", type=float, required=True)
    p.add_argument("--lenient", action="store_true")
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=_cmd_merge_labels)

    p = subparser("report", help="overlays, probes, and charts")
    report_sub = p.add_subparsers(dest="report_command", required=True, parser_class=_Parser)

    q = report_sub.add_parser("overlay")
    q.add_argument("--image", type=Path, required=True)
    q.add_argument("--xml", type=Path, help="ground-truth XML for the image")
    q.add_argument("--preds", type=Path, help="prediction file")
    q.add_argument("--out", type=Path, required=True)
    q.set_defaults(func=_cmd_report_overlay)

    q = report_sub.add_parser("probe")
    q.add_argument("--image", type=Path, required=True)
    q.add_argument("--box", required=True, help="xmin,ymin,xmax,ymax")
    q.add_argument("--brightness", type=float, default=1.5)
    q.add_argument("--zoom", type=float, default=2.0)
    q.add_argument("--out", type=Path, required=True)
    q.set_defaults(func=_cmd_report_probe)

    q = report_sub.add_parser("charts")
    _add_dataset_args(q)
    _add_hist_args(q)
    q.add_argument("--out", type=Path, required=True)
    q.set_defaults(func=_cmd_report_charts)

    return parser


def _apply_config(argv: list[str], parser: argparse.ArgumentParser) -> None:
    """Install config-file values as subparser defaults before parsing."""
    config_path: str | None = None
    for i, token in enumerate(argv):
        if token == "--config" and i + 1 < len(argv):
            config_path = argv[i + 1]
        elif token.startswith("--config="):
            config_path = token.split("=", 1)[1]
    if config_path is None:
        return
    try:
        raw = json.loads(Path(config_path).read_text(encoding="utf-8"))
    except OSError as exc:
        parser.error(f"cannot read config file: {exc}")
        return
    except json.JSONDecodeError as exc:
        parser.error(f"config file is not valid JSON: {exc}")
        return
    if not isinstance(raw, dict):
        parser.error("config file must hold a JSON object")
        return
    defaults = {key.replace("-", "_"): value for key, value in raw.items()}
    for sub in _SUBPARSERS.values():
        known = {action.dest for action in sub._actions}
        sub.set_defaults(**{k: v for k, v in defaults.items() if k in known})
        for action in sub._actions:
            if action.dest in defaults and action.required:
                action.required = False


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser = build_parser()
    _apply_config(argv, parser)
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    raise SystemExit(main())
