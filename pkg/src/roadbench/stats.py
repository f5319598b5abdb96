"""Dataset exploration: class distributions, box histograms, pixel means,
and anchor size/ratio recommendations derived from ground-truth boxes."""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .dataset import ALL_CLASSES, ALL_COUNTRIES, Country, DamageClass, Dataset
from .errors import DataError
from .images import load_rgb

_SQRT2 = math.sqrt(2.0)
_POWERS_OF_TWO = tuple(2**k for k in range(3, 11))  # 8 .. 1024


@dataclass(frozen=True)
class Histogram:
    """Equal-width histogram; bins are left-closed right-open, the final bin
    is closed on both sides, and a degenerate value range collapses to a
    single bin of width 1 centred on the value."""

    bin_edges: tuple[float, ...]
    counts: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.bin_edges) != len(self.counts) + 1:
            raise ValueError("bin_edges must have len(counts) + 1 entries")
        if any(b <= a for a, b in zip(self.bin_edges, self.bin_edges[1:])):
            raise ValueError("bin_edges must be strictly increasing")
        if any(c < 0 for c in self.counts):
            raise ValueError("counts must be non-negative")

    @property
    def total(self) -> int:
        return sum(self.counts)


def build_histogram(samples: Sequence[float], n_bins: int) -> Histogram:
    if n_bins < 1:
        raise ValueError("n_bins must be at least 1")
    if not samples:
        raise DataError("cannot build a histogram from zero samples")
    lo = float(min(samples))
    hi = float(max(samples))
    if lo == hi:
        return Histogram((lo - 0.5, lo + 0.5), (len(samples),))
    edges = [lo + (hi - lo) * i / n_bins for i in range(n_bins + 1)]
    edges[-1] = hi
    counts = [0] * n_bins
    for s in samples:
        idx = bisect_right(edges, s) - 1
        if idx == n_bins:  # s == hi falls into the final closed bin
            idx -= 1
        counts[idx] += 1
    return Histogram(tuple(edges), tuple(counts))


@dataclass(frozen=True)
class ClassDistribution:
    """Label counts per (country, class) with marginals."""

    counts: Mapping[tuple[Country, DamageClass], int]

    def __post_init__(self) -> None:
        expected = {(c, k) for c in ALL_COUNTRIES for k in ALL_CLASSES}
        if set(self.counts) != expected:
            raise ValueError("counts must cover exactly the 3x4 country/class grid")

    def count(self, country: Country, cls: DamageClass) -> int:
        return self.counts[(country, cls)]

    def country_total(self, country: Country) -> int:
        return sum(self.counts[(country, cls)] for cls in ALL_CLASSES)

    def class_total(self, cls: DamageClass) -> int:
        return sum(self.counts[(country, cls)] for country in ALL_COUNTRIES)

    @property
    def total(self) -> int:
        return sum(self.counts.values())


def class_distribution(ds: Dataset) -> ClassDistribution:
    counts = {(c, k): 0 for c in ALL_COUNTRIES for k in ALL_CLASSES}
    for record in ds:
        for ann in record.annotations:
            counts[(record.country, ann.cls)] += 1
    return ClassDistribution(counts)


def box_area_histogram(
    ds: Dataset, n_bins: int = 20, *, use_sqrt: bool = False
) -> Histogram:
    """Histogram of ground-truth box areas (or side lengths with use_sqrt)."""
    samples = [
        math.sqrt(ann.box.area) if use_sqrt else float(ann.box.area)
        for record in ds
        for ann in record.annotations
    ]
    return build_histogram(samples, n_bins)


def aspect_ratio_histogram(ds: Dataset, n_bins: int = 30) -> Histogram:
    """Histogram of ground-truth height/width ratios."""
    samples = [
        ann.box.height / ann.box.width for record in ds for ann in record.annotations
    ]
    return build_histogram(samples, n_bins)


def channel_pixel_means(ds: Dataset) -> tuple[float, float, float]:
    """Mean pixel value per channel over every pixel of every image.

    Channel order of the returned triple is (blue, green, red). Sums are
    accumulated as exact integers, so the result is independent of image
    order and of how the work would be partitioned across workers.
    """
    sum_r = sum_g = sum_b = 0
    n_pixels = 0
    for record in ds:
        if record.image_path is None:
            raise DataError(f"{record.image_id}: no image file attached to record")
        rgb = load_rgb(record.image_path)
        channel_sums = rgb.reshape(-1, 3).sum(axis=0, dtype=np.int64)
        sum_r += int(channel_sums[0])
        sum_g += int(channel_sums[1])
        sum_b += int(channel_sums[2])
        n_pixels += rgb.shape[0] * rgb.shape[1]
    if n_pixels == 0:
        raise DataError("dataset has no pixels")
    return (sum_b / n_pixels, sum_g / n_pixels, sum_r / n_pixels)


@dataclass(frozen=True)
class AnchorRecommendation:
    sizes: tuple[int, ...]
    ratios: tuple[float, ...]

    def __post_init__(self) -> None:
        if not self.sizes or not self.ratios:
            raise ValueError("sizes and ratios must be non-empty")
        if list(self.sizes) != sorted(self.sizes) or list(self.ratios) != sorted(self.ratios):
            raise ValueError("sizes and ratios must be sorted ascending")


def _quantile(sorted_samples: Sequence[float], q: float) -> float:
    """Linear interpolation between order statistics (numpy default)."""
    n = len(sorted_samples)
    if n == 1:
        return sorted_samples[0]
    pos = q * (n - 1)
    i = int(math.floor(pos))
    frac = pos - i
    if i + 1 >= n:
        return sorted_samples[-1]
    return sorted_samples[i] + (sorted_samples[i + 1] - sorted_samples[i]) * frac


def recommend_anchors(
    ds: Dataset, low_q: float = 0.05, high_q: float = 0.95
) -> AnchorRecommendation:
    """Anchor sizes and aspect ratios covering the bulk of ground-truth boxes.

    Sizes: every power of two s in {8..1024} whose sqrt(2) coverage band
    [s/sqrt2, s*sqrt2] reaches into the [q_low, q_high] quantile range of
    sqrt(box area); consecutive bands tile the axis, so the selected sizes
    always cover the whole range. Ratios: the q_low/q25/median/q75 quantiles
    of height/width, snapped to one decimal and deduplicated.
    """
    boxes = [ann.box for record in ds for ann in record.annotations]
    if not boxes:
        raise DataError("cannot recommend anchors without ground-truth boxes")
    sqrt_areas = sorted(math.sqrt(b.area) for b in boxes)
    ratios = sorted(b.height / b.width for b in boxes)

    lo = _quantile(sqrt_areas, low_q)
    hi = _quantile(sqrt_areas, high_q)
    sizes = tuple(
        s for s in _POWERS_OF_TWO if lo <= s * _SQRT2 and s / _SQRT2 <= hi
    )
    if not sizes:  # quantile range outside the 8..1024 bands, take the nearest
        target = math.sqrt(lo * hi)
        sizes = (min(_POWERS_OF_TWO, key=lambda s: abs(math.log(s / target))),)

    quantiles = [_quantile(ratios, q) for q in (low_q, 0.25, 0.50, 0.75)]
    snapped = tuple(sorted({round(q, 1) for q in quantiles}))
    return AnchorRecommendation(sizes, snapped)
