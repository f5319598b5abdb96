"""Inference loop, TTA view generation, exact back-mapping, and file output.

All view-to-original coordinate math runs on ``Fraction`` values: flip
back-mapping is an exact involution and resize back-mapping is exact
rational scaling, so a scale-equivariant model produces identical detections
from every view.
"""

from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass, replace
from fractions import Fraction
from pathlib import Path

import numpy as np
from PIL import Image

from .config import BridgeConfig, BridgeError
from .models import ImageView, Model, RawDetection, load_model

IMAGE_SUFFIXES = (".jpg", ".jpeg", ".png")

PREDICTIONS_HEADER = "# detector-bridge predictions v1: image_id class score xmin ymin xmax ymax"


@dataclass(frozen=True)
class BridgeDetection:
    """Detection in original-image coordinates, exact rational box."""

    image_id: str
    cls: str
    score: float
    xmin: Fraction
    ymin: Fraction
    xmax: Fraction
    ymax: Fraction

    @property
    def box(self) -> tuple[Fraction, Fraction, Fraction, Fraction]:
        return (self.xmin, self.ymin, self.xmax, self.ymax)


def unflip_box(
    xmin: Fraction, ymin: Fraction, xmax: Fraction, ymax: Fraction, width: int | Fraction
) -> tuple[Fraction, Fraction, Fraction, Fraction]:
    """Mirror a horizontally flipped box back: x maps to width - x on both edges."""
    return (width - xmax, ymin, width - xmin, ymax)


def unscale_box(
    xmin: Fraction,
    ymin: Fraction,
    xmax: Fraction,
    ymax: Fraction,
    scale_x: Fraction,
    scale_y: Fraction,
) -> tuple[Fraction, Fraction, Fraction, Fraction]:
    return (xmin / scale_x, ymin / scale_y, xmax / scale_x, ymax / scale_y)


def _to_original_frame(det: RawDetection, view: ImageView, cls: str) -> BridgeDetection:
    box = (det.xmin, det.ymin, det.xmax, det.ymax)
    if view.flipped:
        box = unflip_box(*box, width=view.width)
    box = unscale_box(*box, scale_x=view.scale_x, scale_y=view.scale_y)
    return BridgeDetection(view.image_id, cls, det.score, *box)


def _box_iou(a: BridgeDetection, b: BridgeDetection) -> Fraction:
    iw = min(a.xmax, b.xmax) - max(a.xmin, b.xmin)
    ih = min(a.ymax, b.ymax) - max(a.ymin, b.ymin)
    if iw <= 0 or ih <= 0:
        return Fraction(0)
    inter = iw * ih
    area_a = (a.xmax - a.xmin) * (a.ymax - a.ymin)
    area_b = (b.xmax - b.xmin) * (b.ymax - b.ymin)
    return inter / (area_a + area_b - inter)


def tta_merge(
    detections: list[BridgeDetection], iou_thresh: float = 0.5
) -> list[BridgeDetection]:
    """Class-wise greedy NMS over the union of back-mapped views.

    Duplicates of one physical box collapse to the highest-scoring copy.
    Deterministic ordering: descending score, then box coordinates.
    """
    kept: list[BridgeDetection] = []
    for cls in sorted({d.cls for d in detections}):
        group = sorted(
            (d for d in detections if d.cls == cls),
            key=lambda d: (-d.score, d.xmin, d.ymin, d.xmax, d.ymax),
        )
        chosen: list[BridgeDetection] = []
        for det in group:
            if all(_box_iou(det, k) < iou_thresh for k in chosen):
                chosen.append(det)
        kept.extend(chosen)
    kept.sort(key=lambda d: (-d.score, d.cls, d.xmin, d.ymin, d.xmax, d.ymax))
    return kept


def _find_images(images_dir: Path) -> list[Path]:
    images = sorted(
        p for p in Path(images_dir).rglob("*") if p.suffix.lower() in IMAGE_SUFFIXES
    )
    if not images:
        raise BridgeError(f"no images found under {images_dir}")
    return images


def _make_views(image_path: Path, config: BridgeConfig) -> list[ImageView]:
    image_id = image_path.stem
    with Image.open(image_path) as im:
        rgb = im.convert("RGB")
        width, height = rgb.size
        base = ImageView(
            image_id=image_id,
            pixels=np.asarray(rgb),
            width=width,
            height=height,
            orig_width=width,
            orig_height=height,
            scale_x=Fraction(1),
            scale_y=Fraction(1),
            flipped=False,
        )
        views = [base]
        if config.tta:
            for size in config.tta_sizes:
                # resize the shorter edge to `size`, preserving aspect exactly
                scale = Fraction(size, min(width, height))
                new_w = int(round(width * scale))
                new_h = int(round(height * scale))
                resized = rgb.resize((new_w, new_h), Image.BILINEAR)
                views.append(
                    ImageView(
                        image_id=image_id,
                        pixels=np.asarray(resized),
                        width=new_w,
                        height=new_h,
                        orig_width=width,
                        orig_height=height,
                        scale_x=Fraction(new_w, width),
                        scale_y=Fraction(new_h, height),
                        flipped=False,
                    )
                )
            if config.hflip:
                flipped = rgb.transpose(Image.FLIP_LEFT_RIGHT)
                views.append(
                    replace(base, pixels=np.asarray(flipped), flipped=True)
                )
    return views


def _predict_image(image_path: Path, model: Model, config: BridgeConfig) -> list[BridgeDetection]:
    merged: list[BridgeDetection] = []
    views = _make_views(image_path, config)
    for view in views:
        for raw in model.predict(view):
            cls = config.map_class(raw.class_name)
            merged.append(_to_original_frame(raw, view, cls))
    if len(views) > 1:
        merged = tta_merge(merged)
    return [d for d in merged if d.score >= config.score_floor]


def _format_line(det: BridgeDetection) -> str | None:
    coords = [int(round(v)) for v in det.box]
    if coords[0] >= coords[2] or coords[1] >= coords[3]:
        return None  # collapsed after rounding, nothing scoreable remains
    return (
        f"{det.image_id} {det.cls} {det.score!r} "
        f"{coords[0]} {coords[1]} {coords[2]} {coords[3]}"
    )


def detections_to_text(detections: list[BridgeDetection]) -> str:
    ordered = sorted(
        detections, key=lambda d: (d.image_id, -d.score, d.cls, d.xmin, d.ymin, d.xmax, d.ymax)
    )
    lines = [PREDICTIONS_HEADER]
    for det in ordered:
        line = _format_line(det)
        if line is not None:
            lines.append(line)
    return "\n".join(lines) + "\n"


def _atomic_write(text: str, out_path: Path) -> None:
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=out_path.parent, prefix=".bridge-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(text)
        os.replace(tmp_name, out_path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise


def run_inference(images_dir: Path, config: BridgeConfig, out_path: Path) -> Path:
    """Run the configured model over every image and write a prediction file.

    The file conforms to the roadbench prediction grammar and is written
    atomically (temp file plus rename).
    """
    model = load_model(config.model_path)
    detections: list[BridgeDetection] = []
    for image_path in _find_images(images_dir):
        detections.extend(_predict_image(image_path, model, config))
    _atomic_write(detections_to_text(detections), out_path)
    return Path(out_path)
