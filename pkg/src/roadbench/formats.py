"""Bit-exact prediction and submission file formats plus pseudo-label merge.

Prediction files, one detection per line:

    <image_id> <class> <score> <xmin> <ymin> <xmax> <ymax>

sorted by (image_id, descending score). Scores are written with Python's
shortest round-trip float repr and must lie strictly between 0 and 1.

Submission files, one line per image:

    <image_id>,<cls> <xmin> <ymin> <xmax> <ymax>[ <cls> <xmin> ...]

with classes encoded as integers (D00=1, D10=2, D20=3, D40=4), no scores,
and a bare ``<image_id>,`` line for images without detections. Both formats
are UTF-8 with LF endings and allow ``#`` comment header lines.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Mapping

from .dataset import (
    Annotation,
    BoundingBox,
    DamageClass,
    Dataset,
    ImageRecord,
)
from .errors import DataError
from .evaluator import (
    DEFAULT_IOU_THRESH,
    Detection,
    PredictionSet,
    iou,
    nms_per_class,
)

logger = logging.getLogger(__name__)

CLASS_TO_INDEX: dict[DamageClass, int] = {
    DamageClass.D00: 1,
    DamageClass.D10: 2,
    DamageClass.D20: 3,
    DamageClass.D40: 4,
}
INDEX_TO_CLASS: dict[int, DamageClass] = {v: k for k, v in CLASS_TO_INDEX.items()}

PREDICTIONS_HEADER = "# roadbench predictions v1: image_id class score xmin ymin xmax ymax"
SUBMISSION_HEADER = (
    "# roadbench submission v1: classes D00=1 D10=2 D20=3 D40=4; "
    "one line per image: image_id,cls xmin ymin xmax ymax ..."
)


def predictions_to_text(preds: PredictionSet) -> str:
    lines = [PREDICTIONS_HEADER]
    for det in preds.detections():
        b = det.box
        lines.append(
            f"{det.image_id} {det.cls.value} {det.score!r} "
            f"{b.xmin} {b.ymin} {b.xmax} {b.ymax}"
        )
    return "\n".join(lines) + "\n"


def write_predictions(preds: PredictionSet, path: Path) -> None:
    Path(path).write_text(predictions_to_text(preds), encoding="utf-8", newline="\n")


def parse_predictions(text: str, model_name: str = "") -> PredictionSet:
    detections = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 7:
            raise DataError(f"line {lineno}: expected 7 fields, got {len(parts)}")
        image_id, class_name, score_text, *coord_text = parts
        try:
            cls = DamageClass.parse(class_name)
            score = float(score_text)
            coords = [int(c) for c in coord_text]
        except (DataError, ValueError) as exc:
            raise DataError(f"line {lineno}: {exc}") from None
        if not 0.0 < score < 1.0:
            raise DataError(
                f"line {lineno}: score {score_text} outside the exclusive "
                f"range (0, 1)"
            )
        try:
            box = BoundingBox(*coords)
        except DataError as exc:
            raise DataError(f"line {lineno}: {exc}") from None
        detections.append(Detection(image_id, cls, box, score))
    return PredictionSet.from_detections(detections, model_name=model_name)


def read_predictions(path: Path) -> PredictionSet:
    path = Path(path)
    try:
        return parse_predictions(path.read_text(encoding="utf-8"), model_name=path.stem)
    except DataError as exc:
        raise DataError(f"{path}: {exc}") from None


@dataclass(frozen=True)
class SubmissionFile:
    """Parsed submission: per-image class/box entries plus verbatim header."""

    entries: Mapping[str, tuple[tuple[DamageClass, BoundingBox], ...]]
    header: tuple[str, ...] = (SUBMISSION_HEADER,)

    def to_text(self) -> str:
        lines = list(self.header)
        for image_id in sorted(self.entries):
            tokens: list[str] = []
            for cls, box in self.entries[image_id]:
                tokens += [
                    str(CLASS_TO_INDEX[cls]),
                    str(box.xmin),
                    str(box.ymin),
                    str(box.xmax),
                    str(box.ymax),
                ]
            lines.append(f"{image_id}," + " ".join(tokens))
        return "\n".join(lines) + "\n"

    def write(self, path: Path) -> None:
        Path(path).write_text(self.to_text(), encoding="utf-8", newline="\n")

    @classmethod
    def parse(cls, text: str) -> "SubmissionFile":
        header: list[str] = []
        entries: dict[str, tuple[tuple[DamageClass, BoundingBox], ...]] = {}
        body_started = False
        for lineno, raw in enumerate(text.splitlines(), start=1):
            if raw.startswith("#") and not body_started:
                header.append(raw)
                continue
            if not raw.strip():
                continue
            body_started = True
            if "," not in raw:
                raise DataError(f"line {lineno}: missing ',' separator")
            image_id, _, payload = raw.partition(",")
            tokens = payload.split()
            if len(tokens) % 5 != 0:
                raise DataError(f"line {lineno}: detection fields not a multiple of 5")
            dets = []
            for i in range(0, len(tokens), 5):
                try:
                    index = int(tokens[i])
                    coords = [int(t) for t in tokens[i + 1 : i + 5]]
                except ValueError as exc:
                    raise DataError(f"line {lineno}: {exc}") from None
                if index not in INDEX_TO_CLASS:
                    raise DataError(f"line {lineno}: unknown class index {index}")
                dets.append((INDEX_TO_CLASS[index], BoundingBox(*coords)))
            if image_id in entries:
                raise DataError(f"line {lineno}: duplicate image id {image_id!r}")
            entries[image_id] = tuple(dets)
        return cls(entries, tuple(header))

    @classmethod
    def read(cls, path: Path) -> "SubmissionFile":
        return cls.parse(Path(path).read_text(encoding="utf-8"))


def build_submission(
    preds: PredictionSet,
    score_threshold: float,
    max_dets_per_image: int = 5,
    image_ids: Iterable[str] | None = None,
    *,
    nms_iou_thresh: float = DEFAULT_IOU_THRESH,
) -> SubmissionFile:
    """Threshold, class-wise NMS, cap at max_dets_per_image by score.

    image_ids controls which images get a line (defaults to the ids present
    in the prediction set); images whose detections are all filtered out
    still emit their bare line.
    """
    ids = sorted(set(image_ids)) if image_ids is not None else list(preds.image_ids)
    entries = {}
    for image_id in ids:
        dets = [
            d
            for d in preds.by_image.get(image_id, ())
            if d.score >= score_threshold
        ]
        survivors = nms_per_class(dets, nms_iou_thresh)[:max_dets_per_image]
        entries[image_id] = tuple((d.cls, d.box) for d in survivors)
    return SubmissionFile(entries)


def merge_pseudo_labels(
    ds: Dataset,
    preds: PredictionSet,
    confidence_threshold: float,
    *,
    iou_dedup_thresh: float = DEFAULT_IOU_THRESH,
    strict: bool = True,
) -> Dataset:
    """Promote confident detections to pseudo ground-truth annotations.

    A detection with score >= confidence_threshold is appended to its image
    unless it overlaps an existing same-class annotation (including ones
    appended earlier in this merge) at IoU >= iou_dedup_thresh. Merging the
    same predictions twice is a no-op the second time.
    """
    unknown = sorted(i for i in preds.by_image if i not in ds)
    if unknown and strict:
        raise DataError(f"predictions reference unknown image ids: {unknown[:5]}")
    for image_id in unknown:
        logger.warning("merge: skipped predictions for unknown image id %s", image_id)

    new_records: list[ImageRecord] = []
    for record in ds.records:
        dets = preds.by_image.get(record.image_id, ())
        annotations = list(record.annotations)
        changed = False
        for det in dets:
            if det.score < confidence_threshold:
                continue
            box = _clamp_box(det.box, record.width, record.height)
            if box is None:
                logger.warning(
                    "merge: dropped out-of-image detection on %s", record.image_id
                )
                continue
            duplicate = any(
                ann.cls is det.cls and iou(box, ann.box) >= iou_dedup_thresh
                for ann in annotations
            )
            if duplicate:
                continue
            annotations.append(Annotation(det.cls, box, pseudo=True))
            changed = True
        new_records.append(
            replace(record, annotations=tuple(annotations)) if changed else record
        )
    return Dataset(new_records)


def _clamp_box(box: BoundingBox, width: int, height: int) -> BoundingBox | None:
    xmin = max(0, box.xmin)
    ymin = max(0, box.ymin)
    xmax = min(width, box.xmax)
    ymax = min(height, box.ymax)
    if xmin >= xmax or ymin >= ymax:
        return None
    return BoundingBox(xmin, ymin, xmax, ymax)
