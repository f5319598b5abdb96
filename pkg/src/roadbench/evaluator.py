"""Challenge scoring protocol.

Pipeline: drop detections below a score threshold, optionally apply per-class
non-maximum suppression, then greedily match predictions to ground truths one
to one. A prediction counts as correct when its label matches and its IoU
with the assigned ground-truth box is at least the match threshold. From the
counts Cd (correct), Pd (predicted), Ad (ground truth):

    precision = Cd / Pd    recall = Cd / Ad    F1 = 2pr / (p + r)

with every zero denominator mapping to 0 so empty inputs stay total.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence

from .dataset import (
    ALL_CLASSES,
    ALL_COUNTRIES,
    Annotation,
    BoundingBox,
    Country,
    DamageClass,
    Dataset,
)
from .errors import DataError

DEFAULT_IOU_THRESH = 0.5


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union of two half-open integer boxes.

    Both areas are exact integers, so the result is the correctly rounded
    value of an exact rational and agrees bit for bit with a grid-counting
    oracle.
    """
    inter = a.intersection_area(b)
    if inter == 0:
        return 0.0
    return inter / (a.area + b.area - inter)


@dataclass(frozen=True)
class Detection:
    image_id: str
    cls: DamageClass
    box: BoundingBox
    score: float

    def __post_init__(self) -> None:
        if not 0.0 < self.score < 1.0:
            raise DataError(
                f"{self.image_id}: score {self.score} must lie strictly "
                f"between 0 and 1"
            )


def _det_sort_key(d: Detection) -> tuple:
    return (d.image_id, -d.score, d.cls.value, d.box)


@dataclass(frozen=True)
class PredictionSet:
    """Per-image scored detections from any external detector."""

    by_image: Mapping[str, tuple[Detection, ...]]
    model_name: str = ""
    notes: str = ""

    @classmethod
    def from_detections(
        cls, detections: Iterable[Detection], model_name: str = "", notes: str = ""
    ) -> "PredictionSet":
        groups: dict[str, list[Detection]] = {}
        for det in sorted(detections, key=_det_sort_key):
            groups.setdefault(det.image_id, []).append(det)
        return cls({k: tuple(v) for k, v in groups.items()}, model_name, notes)

    def detections(self) -> Iterator[Detection]:
        for image_id in sorted(self.by_image):
            yield from self.by_image[image_id]

    def __len__(self) -> int:
        return sum(len(v) for v in self.by_image.values())

    @property
    def image_ids(self) -> tuple[str, ...]:
        return tuple(sorted(self.by_image))


def nms_per_class(
    detections: Sequence[Detection], iou_thresh: float = DEFAULT_IOU_THRESH
) -> list[Detection]:
    """Greedy class-wise non-maximum suppression for one image.

    Within each class, walk detections in descending score (ties: smaller
    xmin, then ymin, then the remaining box coordinates) and keep a detection
    iff its IoU with every already kept same-class detection is below
    iou_thresh. Output order and content are independent of input order.
    """
    image_ids = {d.image_id for d in detections}
    if len(image_ids) > 1:
        raise DataError(f"nms_per_class: detections span several images {sorted(image_ids)}")
    kept: list[Detection] = []
    for cls in ALL_CLASSES:
        group = sorted(
            (d for d in detections if d.cls is cls), key=lambda d: (-d.score, d.box)
        )
        chosen: list[Detection] = []
        for det in group:
            if all(iou(det.box, k.box) < iou_thresh for k in chosen):
                chosen.append(det)
        kept.extend(chosen)
    kept.sort(key=lambda d: (-d.score, d.cls.value, d.box))
    return kept


def match_detections(
    preds: Sequence[Detection],
    gts: Sequence[Annotation],
    iou_thresh: float = DEFAULT_IOU_THRESH,
) -> list[tuple[int, int]]:
    """One-to-one greedy matching for a single image.

    Predictions are processed in descending score (ties: smaller xmin, then
    ymin, then input order). Each prediction takes the still unmatched
    ground truth of the same class with the highest IoU, provided that IoU
    is at least iou_thresh; IoU ties go to the lower ground-truth index.
    Returns (pred_index, gt_index) pairs in processing order.
    """
    order = sorted(
        range(len(preds)),
        key=lambda i: (-preds[i].score, preds[i].box.xmin, preds[i].box.ymin, i),
    )
    taken: set[int] = set()
    pairs: list[tuple[int, int]] = []
    for i in order:
        best_j = -1
        best_iou = 0.0
        for j, gt in enumerate(gts):
            if j in taken or gt.cls is not preds[i].cls:
                continue
            value = iou(preds[i].box, gt.box)
            if value >= iou_thresh and value > best_iou:
                best_iou = value
                best_j = j
        if best_j >= 0:
            taken.add(best_j)
            pairs.append((i, best_j))
    return pairs


@dataclass(frozen=True)
class Counts:
    """Correct / predicted / ground-truth damage counts with derived metrics."""

    cd: int = 0
    pd: int = 0
    ad: int = 0

    def __post_init__(self) -> None:
        if min(self.cd, self.pd, self.ad) < 0 or self.cd > min(self.pd, self.ad):
            raise ValueError(f"inconsistent counts cd={self.cd} pd={self.pd} ad={self.ad}")

    def __add__(self, other: "Counts") -> "Counts":
        return Counts(self.cd + other.cd, self.pd + other.pd, self.ad + other.ad)

    @property
    def precision(self) -> float:
        return self.cd / self.pd if self.pd else 0.0

    @property
    def recall(self) -> float:
        return self.cd / self.ad if self.ad else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2.0 * p * r / (p + r) if p + r else 0.0

    def as_dict(self) -> dict:
        return {
            "cd": self.cd,
            "pd": self.pd,
            "ad": self.ad,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
        }


@dataclass(frozen=True)
class EvalReport:
    threshold: float
    iou_thresh: float
    nms_applied: bool
    total: Counts
    per_class: Mapping[DamageClass, Counts]
    per_country: Mapping[Country, Counts]
    warnings: tuple[str, ...] = field(default=(), compare=False)

    def to_json_dict(self) -> dict:
        return {
            "threshold": self.threshold,
            "iou_thresh": self.iou_thresh,
            "nms_applied": self.nms_applied,
            **self.total.as_dict(),
            "per_class": {c.value: k.as_dict() for c, k in self.per_class.items()},
            "per_country": {c.value: k.as_dict() for c, k in self.per_country.items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2, sort_keys=True) + "\n"

    def tsv_line(self) -> str:
        t = self.total
        return (
            f"{self.threshold!r}\t{t.cd}\t{t.pd}\t{t.ad}"
            f"\t{t.precision:.6f}\t{t.recall:.6f}\t{t.f1:.6f}"
        )


def _score_image(
    detections: Sequence[Detection],
    gts: Sequence[Annotation],
    score_threshold: float,
    iou_thresh: float,
    apply_nms: bool,
    nms_iou_thresh: float,
) -> dict[DamageClass, Counts]:
    survivors = [d for d in detections if d.score >= score_threshold]
    if apply_nms:
        survivors = nms_per_class(survivors, nms_iou_thresh)
    pairs = match_detections(survivors, gts, iou_thresh)
    matched_classes = [survivors[i].cls for i, _ in pairs]
    return {
        cls: Counts(
            cd=sum(1 for c in matched_classes if c is cls),
            pd=sum(1 for d in survivors if d.cls is cls),
            ad=sum(1 for g in gts if g.cls is cls),
        )
        for cls in ALL_CLASSES
    }


def evaluate(
    preds: PredictionSet,
    gt: Dataset,
    score_threshold: float,
    iou_thresh: float = DEFAULT_IOU_THRESH,
    apply_nms: bool = True,
    *,
    nms_iou_thresh: float = DEFAULT_IOU_THRESH,
    strict: bool = True,
) -> EvalReport:
    """Score a prediction set against ground truth.

    Per-image scoring is independent, and the per-class count reduction is
    associative and commutative, so the report is identical however images
    are batched. Prediction image ids absent from the ground truth raise in
    strict mode and are otherwise skipped with a warning.
    """
    unknown = sorted(i for i in preds.by_image if i not in gt)
    if unknown and strict:
        raise DataError(f"predictions reference unknown image ids: {unknown[:5]}")
    warnings = tuple(f"ignored predictions for unknown image id {i}" for i in unknown)

    per_class = {cls: Counts() for cls in ALL_CLASSES}
    per_country = {c: Counts() for c in ALL_COUNTRIES}
    for record in gt.records:
        image_counts = _score_image(
            preds.by_image.get(record.image_id, ()),
            record.annotations,
            score_threshold,
            iou_thresh,
            apply_nms,
            nms_iou_thresh,
        )
        for cls, counts in image_counts.items():
            per_class[cls] += counts
            per_country[record.country] += counts
    total = Counts()
    for counts in per_class.values():
        total += counts
    return EvalReport(
        threshold=score_threshold,
        iou_thresh=iou_thresh,
        nms_applied=apply_nms,
        total=total,
        per_class=per_class,
        per_country=per_country,
        warnings=warnings,
    )


def default_grid() -> tuple[float, ...]:
    return tuple(i / 100 for i in range(1, 100))


def sweep_thresholds(
    preds: PredictionSet,
    gt: Dataset,
    grid: Sequence[float] | None = None,
    iou_thresh: float = DEFAULT_IOU_THRESH,
    apply_nms: bool = True,
    *,
    strict: bool = True,
) -> tuple[float, list[tuple[float, EvalReport]]]:
    """Evaluate on every grid threshold; best F1 wins, ties take the larger."""
    thresholds = sorted(grid) if grid is not None else list(default_grid())
    if not thresholds:
        raise ValueError("sweep grid must be non-empty")
    results: list[tuple[float, EvalReport]] = []
    best_threshold = thresholds[0]
    best_f1 = -1.0
    for t in thresholds:
        report = evaluate(
            preds, gt, t, iou_thresh, apply_nms, strict=strict
        )
        results.append((t, report))
        if report.total.f1 >= best_f1:
            best_f1 = report.total.f1
            best_threshold = t
    return best_threshold, results
