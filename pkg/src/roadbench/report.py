"""Static visual outputs: annotation/prediction overlays, brightness probes,
and CSV/SVG charts.

Everything here is deterministic: label text uses an embedded 5x7 bitmap
font and charts are emitted as hand-built SVG, so golden-file and hash
comparisons are valid tests on any platform.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

from .dataset import (
    ALL_CLASSES,
    ALL_COUNTRIES,
    Annotation,
    BoundingBox,
)
from .errors import DataError
from .evaluator import Detection
from .images import resize_nearest
from .stats import ClassDistribution, Histogram

Color = tuple[int, int, int]

# 5x7 glyphs for the characters overlay labels need ('#' = set pixel).
_FONT: dict[str, tuple[str, ...]] = {
    "0": (".###.", "#...#", "#..##", "#.#.#", "##..#", "#...#", ".###."),
    "1": ("..#..", ".##..", "..#..", "..#..", "..#..", "..#..", ".###."),
    "2": (".###.", "#...#", "....#", "...#.", "..#..", ".#...", "#####"),
    "3": (".###.", "#...#", "....#", "..##.", "....#", "#...#", ".###."),
    "4": ("...#.", "..##.", ".#.#.", "#..#.", "#####", "...#.", "...#."),
    "5": ("#####", "#....", "####.", "....#", "....#", "#...#", ".###."),
    "6": (".###.", "#....", "#....", "####.", "#...#", "#...#", ".###."),
    "7": ("#####", "....#", "...#.", "..#..", ".#...", ".#...", ".#..."),
    "8": (".###.", "#...#", "#...#", ".###.", "#...#", "#...#", ".###."),
    "9": (".###.", "#...#", "#...#", ".####", "....#", "....#", ".###."),
    "D": ("####.", "#...#", "#...#", "#...#", "#...#", "#...#", "####."),
    ".": (".....", ".....", ".....", ".....", ".....", ".##..", ".##.."),
    " ": (".....", ".....", ".....", ".....", ".....", ".....", "....."),
}
GLYPH_WIDTH = 5
GLYPH_HEIGHT = 7
GLYPH_ADVANCE = 6


def text_pixel_offsets(text: str) -> set[tuple[int, int]]:
    """(dx, dy) offsets of lit pixels when rendering text at an anchor."""
    offsets: set[tuple[int, int]] = set()
    for index, char in enumerate(text):
        glyph = _FONT.get(char)
        if glyph is None:
            raise ValueError(f"no glyph for character {char!r}")
        for dy, row in enumerate(glyph):
            for dx, bit in enumerate(row):
                if bit == "#":
                    offsets.add((index * GLYPH_ADVANCE + dx, dy))
    return offsets


def _draw_text(pixels: np.ndarray, text: str, x: int, y: int, color: Color) -> None:
    h, w = pixels.shape[:2]
    for dx, dy in text_pixel_offsets(text):
        px, py = x + dx, y + dy
        if 0 <= px < w and 0 <= py < h:
            pixels[py, px] = color


def _draw_box(pixels: np.ndarray, box: BoundingBox, color: Color, thickness: int) -> None:
    t = thickness
    pixels[box.ymin : min(box.ymin + t, box.ymax), box.xmin : box.xmax] = color
    pixels[max(box.ymax - t, box.ymin) : box.ymax, box.xmin : box.xmax] = color
    pixels[box.ymin : box.ymax, box.xmin : min(box.xmin + t, box.xmax)] = color
    pixels[box.ymin : box.ymax, max(box.xmax - t, box.xmin) : box.xmax] = color


@dataclass(frozen=True)
class OverlaySpec:
    gt_color: Color = (255, 0, 0)
    pred_color: Color = (0, 0, 255)
    thickness: int = 2

    def __post_init__(self) -> None:
        if self.gt_color == self.pred_color:
            raise ValueError("ground-truth and prediction colors must differ")
        if self.thickness < 1:
            raise ValueError("thickness must be at least 1")


def label_anchor(box: BoundingBox, spec: OverlaySpec) -> tuple[int, int]:
    return box.xmin + spec.thickness + 1, box.ymin + spec.thickness + 1


def render_overlay(
    pixels: np.ndarray,
    gts: Sequence[Annotation],
    preds: Sequence[Detection],
    spec: OverlaySpec = OverlaySpec(),
) -> np.ndarray:
    """Draw ground-truth boxes, then prediction boxes with ``CLS score``
    labels. Pixels outside strokes and label glyphs are left untouched."""
    out = np.array(pixels, copy=True)
    for ann in gts:
        _draw_box(out, ann.box, spec.gt_color, spec.thickness)
    for det in preds:
        _draw_box(out, det.box, spec.pred_color, spec.thickness)
        x, y = label_anchor(det.box, spec)
        _draw_text(out, f"{det.cls.value} {det.score:.2f}", x, y, spec.pred_color)
    return out


def render_brightness_probe(
    pixels: np.ndarray,
    box: BoundingBox,
    brightness_factor: float,
    zoom: float = 2.0,
) -> np.ndarray:
    """Crop a region, scale its brightness, and enlarge it for inspection."""
    h, w = pixels.shape[:2]
    if box.xmax > w or box.ymax > h:
        raise DataError(f"probe box {box} outside image {w}x{h}")
    crop = pixels[box.ymin : box.ymax, box.xmin : box.xmax]
    bright = np.clip(
        np.rint(crop.astype(np.float64) * brightness_factor), 0, 255
    ).astype(np.uint8)
    out_h = max(1, int(round(crop.shape[0] * zoom)))
    out_w = max(1, int(round(crop.shape[1] * zoom)))
    return resize_nearest(bright, out_h, out_w)


# ---------------------------------------------------------------------------
# Charts

_CLASS_FILL = {
    "D00": "#4477aa",
    "D10": "#ee6677",
    "D20": "#228833",
    "D40": "#ccbb44",
}
_SUBSET_FILL = {"train": "#4477aa", "eval": "#ee6677"}

_CHART_W = 800
_CHART_H = 420
_MARGIN_L = 60
_MARGIN_R = 20
_MARGIN_T = 40
_MARGIN_B = 40


def _svg_open(title: str) -> list[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_CHART_W}" '
        f'height="{_CHART_H}" viewBox="0 0 {_CHART_W} {_CHART_H}">',
        f'<rect x="0" y="0" width="{_CHART_W}" height="{_CHART_H}" fill="#ffffff"/>',
        f'<text x="{_CHART_W / 2:.2f}" y="24" text-anchor="middle" '
        f'font-family="monospace" font-size="16">{escape(title)}</text>',
    ]


def _svg_close(lines: list[str]) -> str:
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def _svg_axes(lines: list[str], max_value: int) -> None:
    x0, y0 = _MARGIN_L, _CHART_H - _MARGIN_B
    x1, y1 = _CHART_W - _MARGIN_R, _MARGIN_T
    lines.append(
        f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="#000000"/>'
    )
    lines.append(
        f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="#000000"/>'
    )
    lines.append(
        f'<text x="{x0 - 6}" y="{y1 + 4}" text-anchor="end" '
        f'font-family="monospace" font-size="11">{max_value}</text>'
    )
    lines.append(
        f'<text x="{x0 - 6}" y="{y0 + 4}" text-anchor="end" '
        f'font-family="monospace" font-size="11">0</text>'
    )


def _bars(
    lines: list[str],
    values: Sequence[tuple[str, int, str]],
    max_value: int,
) -> None:
    """Append one <rect class="bar"> per (label, value, fill) triple."""
    plot_w = _CHART_W - _MARGIN_L - _MARGIN_R
    plot_h = _CHART_H - _MARGIN_T - _MARGIN_B
    n = len(values)
    slot = plot_w / n
    bar_w = slot * 0.8
    for i, (label, value, fill) in enumerate(values):
        height = 0.0 if max_value == 0 else value / max_value * plot_h
        x = _MARGIN_L + i * slot + slot * 0.1
        y = _CHART_H - _MARGIN_B - height
        lines.append(
            f'<rect class="bar" x="{x:.2f}" y="{y:.2f}" width="{bar_w:.2f}" '
            f'height="{height:.2f}" fill="{fill}"/>'
        )
        if label:
            lines.append(
                f'<text x="{x + bar_w / 2:.2f}" y="{_CHART_H - _MARGIN_B + 14}" '
                f'text-anchor="middle" font-family="monospace" font-size="10">'
                f"{escape(label)}</text>"
            )


def histogram_csv(hist: Histogram) -> str:
    lines = ["bin_lo,bin_hi,count"]
    for lo, hi, count in zip(hist.bin_edges, hist.bin_edges[1:], hist.counts):
        lines.append(f"{lo!r},{hi!r},{count}")
    return "\n".join(lines) + "\n"


def histogram_svg(hist: Histogram, title: str) -> str:
    lines = _svg_open(title)
    max_count = max(hist.counts)
    _svg_axes(lines, max_count)
    n = len(hist.counts)
    step = max(1, n // 8)
    values = []
    for i, count in enumerate(hist.counts):
        label = f"{hist.bin_edges[i]:.3g}" if i % step == 0 else ""
        values.append((label, count, "#4477aa"))
    _bars(lines, values, max_count)
    return _svg_close(lines)


def class_distribution_csv(dist: ClassDistribution) -> str:
    lines = ["country,class,count"]
    for country in ALL_COUNTRIES:
        for cls in ALL_CLASSES:
            lines.append(f"{country.value},{cls.value},{dist.count(country, cls)}")
    return "\n".join(lines) + "\n"


def class_distribution_svg(dist: ClassDistribution, title: str) -> str:
    lines = _svg_open(title)
    max_count = max(dist.counts.values())
    _svg_axes(lines, max_count)
    values = []
    for country in ALL_COUNTRIES:
        for cls in ALL_CLASSES:
            label = f"{country.value[:2]}:{cls.value}"
            values.append((label, dist.count(country, cls), _CLASS_FILL[cls.value]))
    _bars(lines, values, max_count)
    return _svg_close(lines)


def split_distribution_csv(
    train_dist: ClassDistribution, eval_dist: ClassDistribution
) -> str:
    lines = ["subset,country,class,count"]
    for subset, dist in (("train", train_dist), ("eval", eval_dist)):
        for country in ALL_COUNTRIES:
            for cls in ALL_CLASSES:
                lines.append(
                    f"{subset},{country.value},{cls.value},{dist.count(country, cls)}"
                )
    return "\n".join(lines) + "\n"


def split_distribution_svg(
    train_dist: ClassDistribution, eval_dist: ClassDistribution, title: str
) -> str:
    lines = _svg_open(title)
    per_class = {
        cls: {"train": train_dist.class_total(cls), "eval": eval_dist.class_total(cls)}
        for cls in ALL_CLASSES
    }
    max_count = max(max(v.values()) for v in per_class.values())
    _svg_axes(lines, max_count)
    values = []
    for cls in ALL_CLASSES:
        for subset in ("train", "eval"):
            values.append(
                (f"{cls.value}:{subset}", per_class[cls][subset], _SUBSET_FILL[subset])
            )
    _bars(lines, values, max_count)
    return _svg_close(lines)


def emit_charts(
    out_dir: Path,
    *,
    class_dist: ClassDistribution | None = None,
    area_hist: Histogram | None = None,
    ratio_hist: Histogram | None = None,
    split_dists: tuple[ClassDistribution, ClassDistribution] | None = None,
) -> list[Path]:
    """Write one CSV and one SVG per supplied chart; bytes depend only on
    the inputs. Returns the written paths, sorted."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    def emit(stem: str, csv_text: str, svg_text: str) -> None:
        csv_path = out / f"{stem}.csv"
        svg_path = out / f"{stem}.svg"
        csv_path.write_text(csv_text, encoding="utf-8", newline="\n")
        svg_path.write_text(svg_text, encoding="utf-8", newline="\n")
        written.extend([csv_path, svg_path])

    if class_dist is not None:
        emit(
            "class_distribution",
            class_distribution_csv(class_dist),
            class_distribution_svg(class_dist, "Damage type distribution by country"),
        )
    if area_hist is not None:
        emit(
            "box_area_histogram",
            histogram_csv(area_hist),
            histogram_svg(area_hist, "Ground-truth box areas"),
        )
    if ratio_hist is not None:
        emit(
            "aspect_ratio_histogram",
            histogram_csv(ratio_hist),
            histogram_svg(ratio_hist, "Ground-truth box height/width ratios"),
        )
    if split_dists is not None:
        emit(
            "split_distribution",
            split_distribution_csv(*split_dists),
            split_distribution_svg(*split_dists, "Train vs eval damage distribution"),
        )
    return sorted(written)
