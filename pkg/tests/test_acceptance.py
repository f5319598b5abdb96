"""Acceptance gates for the whole toolkit.

Each test implements one release criterion end to end at its stated
tolerance and prints one PASS line (visible with ``pytest -s``) when it
holds. The dataset-backed gates skip, not fail, when GRDDC_TRAIN_ROOT is
not set.
"""

import math
import os
import time
from pathlib import Path

import numpy as np
import pytest

from roadbench.augment import (
    AugmentationSchedule,
    LocationBank,
    Patch,
    PatchBank,
    PlacementSite,
    synthesize,
)
from roadbench.cli import main
from roadbench.color import color_transfer, rgb_to_lab
from roadbench.dataset import (
    Annotation,
    BoundingBox,
    Country,
    DamageClass,
    Dataset,
    DatasetLayout,
    ImageRecord,
    load_dataset,
)
from roadbench.evaluator import (
    Detection,
    PredictionSet,
    evaluate,
    iou,
    match_detections,
    sweep_thresholds,
)
from roadbench.formats import (
    SubmissionFile,
    build_submission,
    merge_pseudo_labels,
    read_predictions,
    write_predictions,
)
from roadbench.rng import SplitMix64
from roadbench.split import save_split, stratified_split
from roadbench.stats import channel_pixel_means, class_distribution, recommend_anchors

from conftest import ann, record, write_dataset_dir

GRDDC_TRAIN_ROOT = os.environ.get("GRDDC_TRAIN_ROOT")


def _pass(name: str) -> None:
    print(f"\nACCEPTANCE PASS: {name}")


def random_box(rng: SplitMix64, extent: int = 64) -> BoundingBox:
    xmin = rng.randrange(extent - 1)
    ymin = rng.randrange(extent - 1)
    xmax = rng.randint(xmin + 1, extent)
    ymax = rng.randint(ymin + 1, extent)
    return BoundingBox(xmin, ymin, xmax, ymax)


def grid_iou(a: BoundingBox, b: BoundingBox, extent: int = 64) -> float:
    ga = np.zeros((extent, extent), dtype=bool)
    gb = np.zeros((extent, extent), dtype=bool)
    ga[a.ymin : a.ymax, a.xmin : a.xmax] = True
    gb[b.ymin : b.ymax, b.xmin : b.xmax] = True
    return np.count_nonzero(ga & gb) / np.count_nonzero(ga | gb)


def test_iou_oracle_equivalence():
    """1,000 seeded random box pairs: analytic IoU equals grid counting."""
    rng = SplitMix64(20260808)
    started = time.monotonic()
    for _ in range(1000):
        a, b = random_box(rng), random_box(rng)
        assert abs(iou(a, b) - grid_iou(a, b)) <= 1e-12
    elapsed = time.monotonic() - started
    assert elapsed < 5.0, f"oracle comparison took {elapsed:.2f}s"
    _pass(f"IoU oracle equivalence (1000 pairs in {elapsed:.2f}s)")


def scoring_fixture():
    gt = Dataset(
        [
            record(
                "Japan_000001",
                annotations=(
                    ann("D00", 0, 0, 10, 10),
                    ann("D00", 20, 20, 30, 30),
                    ann("D20", 40, 40, 50, 50),
                ),
            )
        ]
    )
    preds = PredictionSet.from_detections(
        [
            Detection("Japan_000001", DamageClass.D00, BoundingBox(0, 0, 10, 10), 0.9),
            Detection("Japan_000001", DamageClass.D00, BoundingBox(0, 50, 20, 60), 0.8),
        ]
    )
    return preds, gt


def test_scoring_fixture_table():
    """Hand-derived precision/recall/F1 cases pass exactly."""
    preds, gt = scoring_fixture()
    report = evaluate(preds, gt, 0.5)
    assert (report.total.cd, report.total.pd, report.total.ad) == (1, 2, 3)
    assert report.total.precision == 0.5
    assert report.total.recall == 1 / 3
    assert report.total.f1 == 0.4

    empty = evaluate(PredictionSet.from_detections([]), gt, 0.5)
    assert (empty.total.cd, empty.total.pd, empty.total.ad) == (0, 0, 3)
    assert empty.total.precision == 0.0
    assert empty.total.recall == 0.0
    assert empty.total.f1 == 0.0

    perfect_dets = [
        Detection(rec.image_id, a.cls, a.box, 0.9) for rec in gt for a in rec.annotations
    ]
    perfect = evaluate(PredictionSet.from_detections(perfect_dets), gt, 0.5)
    assert perfect.total.precision == perfect.total.recall == perfect.total.f1 == 1.0

    # IoU threshold boundary: 0.49 misses, 0.50 matches
    boundary_gt = [ann("D00", 0, 0, 100, 10)]
    below = Detection("Japan_000001", DamageClass.D00, BoundingBox(0, 0, 49, 10), 0.9)
    exact = Detection("Japan_000001", DamageClass.D00, BoundingBox(0, 0, 50, 10), 0.9)
    assert iou(below.box, boundary_gt[0].box) == 0.49
    assert iou(exact.box, boundary_gt[0].box) == 0.50
    assert match_detections([below], boundary_gt) == []
    assert match_detections([exact], boundary_gt) == [(0, 0)]
    _pass("scoring fixture table (0.4 case, zeros, ones, 0.49/0.50 boundary)")


def random_instance(rng: SplitMix64):
    classes = list(DamageClass)
    preds = [
        Detection(
            "Japan_000001",
            rng.choice(classes),
            random_box(rng),
            (rng.randrange(9998) + 1) / 10000,
        )
        for _ in range(rng.randrange(7))
    ]
    gts = [Annotation(rng.choice(classes), random_box(rng)) for _ in range(rng.randrange(7))]
    return preds, gts


def test_matching_properties():
    """10,000 random instances: one-to-one, class-consistent, IoU >= 0.5."""
    rng = SplitMix64(777)
    for _ in range(10_000):
        preds, gts = random_instance(rng)
        pairs = match_detections(preds, gts)
        pred_indices = [i for i, _ in pairs]
        gt_indices = [j for _, j in pairs]
        assert len(set(pred_indices)) == len(pairs)
        assert len(set(gt_indices)) == len(pairs)
        for i, j in pairs:
            assert preds[i].cls is gts[j].cls
            assert iou(preds[i].box, gts[j].box) >= 0.5
        assert len(pairs) <= min(len(preds), len(gts))
    _pass("matching properties (10,000 instances)")


def test_threshold_monotonicity_99_point_sweep():
    """Pd and Cd are non-increasing across the 0.01..0.99 grid."""
    rng = SplitMix64(13579)
    records, dets = [], []
    for i in range(150):
        image_id = f"Japan_{i:06d}"
        _, gts = random_instance(rng)
        records.append(ImageRecord(image_id, Country.JAPAN, 64, 64, tuple(gts)))
        preds, _ = random_instance(rng)
        dets.extend(
            Detection(image_id, d.cls, d.box, d.score) for d in preds
        )
    gt = Dataset(records)
    preds_set = PredictionSet.from_detections(dets)
    _, results = sweep_thresholds(preds_set, gt)
    assert len(results) == 99
    previous = None
    for threshold, report in results:
        if previous is not None:
            assert report.total.pd <= previous.pd
            assert report.total.cd <= previous.cd
        previous = report.total
    _pass("threshold monotonicity (99-point sweep)")


def test_split_determinism_and_stratification(tmp_path):
    """Byte-identical id files for a fixed seed; counts within 1 over fuzz."""
    ds = Dataset(
        [record(f"{c}_{i:06d}") for c in ("Czech", "India", "Japan") for i in range(37)]
    )
    for attempt in ("first", "second"):
        save_split(stratified_split(ds, 0.1, seed=42), tmp_path / attempt)
    for name in ("train_ids.txt", "eval_ids.txt", "split.json"):
        assert (tmp_path / "first" / name).read_bytes() == (
            tmp_path / "second" / name
        ).read_bytes()

    fuzz = SplitMix64(2024)
    for seed in range(100):
        sizes = {c: fuzz.randint(1, 60) for c in ("Czech", "India", "Japan")}
        fuzzed = Dataset(
            [record(f"{c}_{i:06d}") for c, n in sizes.items() for i in range(n)]
        )
        fraction = (fuzz.randrange(89) + 5) / 100  # 0.05 .. 0.93
        result = stratified_split(fuzzed, fraction, seed=seed)
        counts = result.per_country_counts()
        for country in Country:
            n = sizes[country.value]
            assert abs(counts[country]["eval"] - fraction * n) <= 1
    _pass("split determinism and stratification (100 fuzz seeds)")


def paste_fixture():
    rng = np.random.default_rng(99)
    patch_pixels = rng.integers(30, 220, size=(6, 8, 3), dtype=np.uint8)
    patches = PatchBank(
        {(Country.JAPAN, DamageClass.D40): [
            Patch("Japan_000000", BoundingBox(0, 0, 8, 6), patch_pixels)
        ]}
    )
    locations = LocationBank(
        {(Country.JAPAN, DamageClass.D40): [PlacementSite(0.5, 0.5, 8, 6)]}
    )
    target = record("Japan_000001", width=64, height=64)
    pixels = rng.integers(60, 180, size=(64, 64, 3), dtype=np.uint8)
    return target, pixels, patches, locations


def test_augmentation_identity_and_statistics():
    """Zero schedule is pixel-exact identity; paste rates stay within 3 sigma;
    colour transfer hits target means to 1e-6."""
    target, pixels, patches, locations = paste_fixture()

    out_pixels, out_record = synthesize(
        target, pixels, patches, locations, AugmentationSchedule.zero(), rng_seed=5
    )
    assert np.array_equal(out_pixels, pixels)
    assert out_record == target

    trials = 2000
    for p in (0.2, 0.5, 1.0):
        schedule = AugmentationSchedule({(Country.JAPAN, DamageClass.D40): p})
        hits = 0
        for i in range(trials):
            _, rec = synthesize(
                target, pixels, patches, locations, schedule, rng_seed=1_000_000 * int(p * 10) + i
            )
            hits += len(rec.annotations)
        rate = hits / trials
        sigma = math.sqrt(p * (1.0 - p) / trials)
        assert abs(rate - p) <= 3.0 * sigma, f"rate {rate} vs p {p}"

    rng = np.random.default_rng(3)
    patch = rng.integers(80, 170, size=(16, 16, 3)).astype(np.float64)
    region = rng.integers(60, 190, size=(12, 18, 3)).astype(np.float64)
    out = color_transfer(patch, region)
    assert np.min(out) > 0.0 and np.max(out) < 255.0  # clipping inactive
    out_means = rgb_to_lab(out).reshape(-1, 3).mean(axis=0)
    target_means = rgb_to_lab(region).reshape(-1, 3).mean(axis=0)
    assert np.max(np.abs(out_means - target_means)) < 1e-6
    _pass("augmentation identity, 3-sigma paste rates, colour transfer means")


def test_format_round_trips(tmp_path):
    """Prediction and submission files re-serialize byte-identically; the
    pseudo-label merge is idempotent."""
    preds = PredictionSet.from_detections(
        [
            Detection("Japan_000001", DamageClass.D20, BoundingBox(10, 20, 110, 220), 0.875),
            Detection("Japan_000001", DamageClass.D00, BoundingBox(5, 5, 50, 50), 0.125),
            Detection("Czech_000001", DamageClass.D40, BoundingBox(1, 2, 30, 40), 0.51),
        ]
    )
    pred_path = tmp_path / "preds.txt"
    write_predictions(preds, pred_path)
    original = pred_path.read_bytes()
    write_predictions(read_predictions(pred_path), pred_path)
    assert pred_path.read_bytes() == original

    submission = build_submission(preds, 0.5, image_ids=["Japan_000001", "Japan_000002"])
    sub_path = tmp_path / "submission.txt"
    submission.write(sub_path)
    assert SubmissionFile.read(sub_path).to_text() == sub_path.read_text()

    gt = Dataset(
        [
            record("Japan_000001", annotations=(ann("D20", 10, 10, 60, 60),)),
            record("Japan_000002"),
        ]
    )
    new_labels = PredictionSet.from_detections(
        [Detection("Japan_000002", DamageClass.D40, BoundingBox(5, 5, 40, 40), 0.95)]
    )
    once = merge_pseudo_labels(gt, new_labels, 0.9)
    twice = merge_pseudo_labels(once, new_labels, 0.9)
    assert once.total_annotations() == gt.total_annotations() + 1
    assert once == twice
    _pass("format round trips and pseudo-label merge idempotence")


def test_end_to_end_smoke(tmp_path, capsys):
    """CLI smoke: a perfect detector scores F1 1.0, the half detector 0.4."""
    images = {
        "Japan_000001": [
            ("D00", 0, 0, 10, 10),
            ("D00", 20, 20, 30, 30),
            ("D20", 40, 40, 50, 50),
        ],
        "Czech_000001": [("D40", 5, 5, 30, 30)],
    }
    root = write_dataset_dir(tmp_path / "gt", images)

    perfect = tmp_path / "perfect.txt"
    lines = [
        f"{image_id} {cls} 0.9 {x0} {y0} {x1} {y1}"
        for image_id, objs in images.items()
        for cls, x0, y0, x1, y1 in objs
    ]
    perfect.write_text("\n".join(lines) + "\n")
    code = main(["eval", "--root", str(root), "--preds", str(perfect), "--threshold", "0.5"])
    out = capsys.readouterr().out
    assert code == 0
    assert [l for l in out.splitlines() if not l.startswith("#")][0].endswith("1.000000")

    half = tmp_path / "half.txt"
    half.write_text(
        "Japan_000001 D00 0.9 0 0 10 10\n"
        "Japan_000001 D00 0.9 0 50 20 60\n"
        "Czech_000001 D40 0.9 5 5 30 30\n"
    )
    code = main(["eval", "--root", str(root), "--preds", str(half), "--threshold", "0.5"])
    out = capsys.readouterr().out
    assert code == 0
    line = [l for l in out.splitlines() if not l.startswith("#")][0]
    # 2 correct of 3 predictions over 4 ground truths: p=2/3, r=1/2, F1=4/7
    assert line.split("\t")[-1] == f"{4 / 7:.6f}"
    _pass("end-to-end smoke (perfect and half detectors through the CLI)")


needs_grddc = pytest.mark.skipif(
    GRDDC_TRAIN_ROOT is None, reason="GRDDC_TRAIN_ROOT not set"
)


@needs_grddc
def test_grddc_train_counts_and_statistics():
    """Real-dataset gates: image counts, label counts, pixel means, anchors."""
    ds, _ = load_dataset(Path(GRDDC_TRAIN_ROOT), DatasetLayout.TRAIN_WITH_XML, jobs=8)
    assert len(ds) == 21_041
    assert len(ds.by_country(Country.CZECH)) == 2_829
    assert len(ds.by_country(Country.INDIA)) == 7_706
    assert len(ds.by_country(Country.JAPAN)) == 10_506

    dist = class_distribution(ds)
    assert dist.total == 34_702
    assert dist.country_total(Country.CZECH) == 1_745

    anchors = recommend_anchors(ds)
    assert {32, 64, 128}.issubset(set(anchors.sizes))

    b, g, r = channel_pixel_means(ds)
    assert abs(b - 122.190) <= 0.5
    assert abs(g - 122.639) <= 0.5
    assert abs(r - 117.788) <= 0.5
    _pass("GRDDC train counts, labels, pixel means, anchors")
