"""Copy-paste damage augmentation and photometric augmentations.

Real damage patches are cropped from ground-truth boxes into a per
(country, class) patch bank; placement positions are sampled from where
damages of the same type already occur. A pasted patch is jittered (flip,
slight rotation, scaling), blended into its destination rectangle by
L*a*b* statistics transfer, and appended to the image's annotations.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .color import color_transfer
from .dataset import (
    ALL_CLASSES,
    ALL_COUNTRIES,
    Annotation,
    BoundingBox,
    Country,
    DamageClass,
    Dataset,
    ImageRecord,
)
from .errors import DataError
from .evaluator import iou
from .images import load_rgb, resize_nearest
from .rng import SplitMix64, stable_hash64

logger = logging.getLogger(__name__)

BankKey = tuple[Country, DamageClass]

# Default paste probabilities per (country, class).
DEFAULT_SCHEDULE_PROBS: dict[BankKey, float] = {
    (Country.CZECH, DamageClass.D00): 0.2,
    (Country.CZECH, DamageClass.D10): 0.2,
    (Country.CZECH, DamageClass.D20): 0.0,
    (Country.CZECH, DamageClass.D40): 0.4,
    (Country.INDIA, DamageClass.D00): 0.3,
    (Country.INDIA, DamageClass.D10): 0.5,
    (Country.INDIA, DamageClass.D20): 0.2,
    (Country.INDIA, DamageClass.D40): 0.0,
    (Country.JAPAN, DamageClass.D00): 0.0,
    (Country.JAPAN, DamageClass.D10): 0.6,
    (Country.JAPAN, DamageClass.D20): 0.3,
    (Country.JAPAN, DamageClass.D40): 0.5,
}

MAX_PLACEMENT_IOU = 0.3
PLACEMENT_RETRIES = 10


@dataclass(frozen=True)
class Patch:
    source_image_id: str
    box: BoundingBox
    pixels: np.ndarray = field(compare=False)


class PatchBank:
    """Damage crops indexed by (country, class), one per ground-truth box."""

    def __init__(self, entries: Mapping[BankKey, Sequence[Patch]]):
        self._entries: dict[BankKey, tuple[Patch, ...]] = {
            key: tuple(value) for key, value in entries.items()
        }

    def get(self, country: Country, cls: DamageClass) -> tuple[Patch, ...]:
        return self._entries.get((country, cls), ())

    def count(self, country: Country, cls: DamageClass) -> int:
        return len(self.get(country, cls))

    def total(self) -> int:
        return sum(len(v) for v in self._entries.values())


@dataclass(frozen=True)
class PlacementSite:
    """Where a damage of some type occurred: fractional centre plus size."""

    cx_frac: float
    cy_frac: float
    width_px: int
    height_px: int

    def __post_init__(self) -> None:
        if not (0.0 <= self.cx_frac <= 1.0 and 0.0 <= self.cy_frac <= 1.0):
            raise ValueError("centre fractions must lie in [0, 1]")


class LocationBank:
    """Candidate placements indexed by (country, class)."""

    def __init__(self, sites: Mapping[BankKey, Sequence[PlacementSite]]):
        self._sites: dict[BankKey, tuple[PlacementSite, ...]] = {
            key: tuple(value) for key, value in sites.items()
        }

    def get(self, country: Country, cls: DamageClass) -> tuple[PlacementSite, ...]:
        return self._sites.get((country, cls), ())


def build_patch_bank(ds: Dataset) -> PatchBank:
    """Crop every ground-truth box of every image into the bank."""
    entries: dict[BankKey, list[Patch]] = {}
    for record in ds:
        if not record.annotations:
            continue
        if record.image_path is None:
            raise DataError(f"{record.image_id}: no image file attached to record")
        rgb = load_rgb(record.image_path)
        for ann in record.annotations:
            b = ann.box
            crop = rgb[b.ymin : b.ymax, b.xmin : b.xmax].copy()
            entries.setdefault((record.country, ann.cls), []).append(
                Patch(record.image_id, b, crop)
            )
    return PatchBank(entries)


def build_location_bank(ds: Dataset) -> LocationBank:
    sites: dict[BankKey, list[PlacementSite]] = {}
    for record in ds:
        for ann in record.annotations:
            b = ann.box
            sites.setdefault((record.country, ann.cls), []).append(
                PlacementSite(
                    cx_frac=(b.xmin + b.xmax) / 2 / record.width,
                    cy_frac=(b.ymin + b.ymax) / 2 / record.height,
                    width_px=b.width,
                    height_px=b.height,
                )
            )
    return LocationBank(sites)


@dataclass(frozen=True)
class AugmentationSchedule:
    """Paste probability per (country, class); missing keys default to 0."""

    probs: Mapping[BankKey, float]

    def __post_init__(self) -> None:
        full = {key: 0.0 for key in DEFAULT_SCHEDULE_PROBS}
        for key, p in self.probs.items():
            if key not in full:
                raise ValueError(f"unknown schedule key {key}")
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"probability {p} for {key} out of [0, 1]")
            full[key] = float(p)
        object.__setattr__(self, "probs", full)

    @classmethod
    def default(cls) -> "AugmentationSchedule":
        return cls(dict(DEFAULT_SCHEDULE_PROBS))

    @classmethod
    def zero(cls) -> "AugmentationSchedule":
        return cls({})

    @classmethod
    def from_json(cls, text: str) -> "AugmentationSchedule":
        raw = json.loads(text)
        probs = {}
        for country_name, row in raw.items():
            country = Country(country_name)
            for class_name, p in row.items():
                probs[(country, DamageClass.parse(class_name))] = float(p)
        return cls(probs)

    @classmethod
    def from_csv(cls, text: str) -> "AugmentationSchedule":
        """Rows ``country,D00,D10,D20,D40`` mirroring the schedule table."""
        reader = csv.DictReader(io.StringIO(text))
        probs = {}
        for row in reader:
            country = Country(row["country"])
            for cls_ in ALL_CLASSES:
                probs[(country, cls_)] = float(row[cls_.value])
        return cls(probs)

    def to_json(self) -> str:
        nested = {
            country.value: {
                cls.value: self.probs[(country, cls)] for cls in ALL_CLASSES
            }
            for country in ALL_COUNTRIES
        }
        return json.dumps(nested, indent=2, sort_keys=True) + "\n"

    def validate_against(self, patches: PatchBank, locations: LocationBank) -> None:
        """Reject schedules that would ask for patches no bank can supply."""
        for (country, cls), p in sorted(
            self.probs.items(), key=lambda kv: (kv[0][0].value, kv[0][1].value)
        ):
            if p > 0.0 and (
                not patches.get(country, cls) or not locations.get(country, cls)
            ):
                raise DataError(
                    f"schedule needs ({country.value}, {cls.value}) patches "
                    f"but the banks hold none"
                )


@dataclass(frozen=True)
class JitterConfig:
    hflip_prob: float = 0.5
    rotation_deg: float = 10.0
    scale_min: float = 0.9
    scale_max: float = 1.1

    def __post_init__(self) -> None:
        if not 0.0 <= self.hflip_prob <= 1.0:
            raise ValueError("hflip_prob out of [0, 1]")
        if not 0.0 <= self.rotation_deg <= 90.0:
            raise ValueError("rotation_deg must stay within [0, 90]")
        if not 0.0 < self.scale_min <= self.scale_max:
            raise ValueError("scale bounds must be positive and ordered")


def _affine_resample(pixels: np.ndarray, angle_deg: float, scale: float) -> np.ndarray:
    """Rotate and scale a patch, expanding the canvas to fit.

    Inverse-maps each output pixel centre and samples nearest neighbour with
    edge clamping, so results are bit-reproducible and corner fill reuses
    the patch's own border texture.
    """
    h, w = pixels.shape[:2]
    theta = math.radians(angle_deg)
    cos_t, sin_t = math.cos(theta), math.sin(theta)
    out_w = max(1, math.ceil(scale * (w * abs(cos_t) + h * abs(sin_t))))
    out_h = max(1, math.ceil(scale * (w * abs(sin_t) + h * abs(cos_t))))

    ys, xs = np.mgrid[0:out_h, 0:out_w]
    dx = xs + 0.5 - out_w / 2.0
    dy = ys + 0.5 - out_h / 2.0
    src_x = (cos_t * dx + sin_t * dy) / scale + w / 2.0
    src_y = (-sin_t * dx + cos_t * dy) / scale + h / 2.0
    col = np.clip(np.floor(src_x).astype(np.int64), 0, w - 1)
    row = np.clip(np.floor(src_y).astype(np.int64), 0, h - 1)
    return pixels[row, col]


def _jitter_patch(pixels: np.ndarray, jitter: JitterConfig, rng: SplitMix64) -> np.ndarray:
    if rng.random() < jitter.hflip_prob:
        pixels = pixels[:, ::-1]
    angle = rng.uniform(-jitter.rotation_deg, jitter.rotation_deg)
    scale = rng.uniform(jitter.scale_min, jitter.scale_max)
    return _affine_resample(pixels, angle, scale)


def derive_image_seed(seed: int, image_id: str) -> int:
    """Per-image seed; keeps batch synthesis order-independent."""
    return (seed ^ stable_hash64(image_id)) & (2**64 - 1)


def synthesize(
    record: ImageRecord,
    pixels: np.ndarray,
    patch_bank: PatchBank,
    location_bank: LocationBank,
    schedule: AugmentationSchedule,
    jitter: JitterConfig = JitterConfig(),
    *,
    rng_seed: int,
) -> tuple[np.ndarray, ImageRecord]:
    """Paste sampled damage patches into one image.

    For each class, with its scheduled probability: draw a patch, jitter it,
    draw a placement site of the same (country, class), reject placements
    overlapping any existing or newly added annotation at IoU above
    MAX_PLACEMENT_IOU (up to PLACEMENT_RETRIES draws), blend by colour
    transfer against the destination region, and append the new annotation.
    Original pixels and annotations outside pasted rectangles are untouched.
    """
    out = np.array(pixels, copy=True)
    rng = SplitMix64(rng_seed)
    annotations = list(record.annotations)

    for cls in ALL_CLASSES:
        p = schedule.probs[(record.country, cls)]
        if p <= 0.0 or rng.random() >= p:
            continue
        patches = patch_bank.get(record.country, cls)
        sites = location_bank.get(record.country, cls)
        if not patches or not sites:
            raise DataError(
                f"empty bank for scheduled ({record.country.value}, {cls.value})"
            )
        patch = rng.choice(patches)
        jittered = _jitter_patch(patch.pixels, jitter, rng)
        ph, pw = jittered.shape[:2]
        if pw > record.width or ph > record.height:
            logger.warning(
                "%s: %s patch %dx%d larger than image, skipped",
                record.image_id, cls.value, pw, ph,
            )
            continue

        placed: BoundingBox | None = None
        for _ in range(PLACEMENT_RETRIES):
            site = rng.choice(sites)
            cx = site.cx_frac * record.width
            cy = site.cy_frac * record.height
            xmin = int(round(cx - pw / 2.0))
            ymin = int(round(cy - ph / 2.0))
            xmin = min(max(xmin, 0), record.width - pw)
            ymin = min(max(ymin, 0), record.height - ph)
            candidate = BoundingBox(xmin, ymin, xmin + pw, ymin + ph)
            if all(iou(candidate, ann.box) <= MAX_PLACEMENT_IOU for ann in annotations):
                placed = candidate
                break
        if placed is None:
            continue

        region = out[placed.ymin : placed.ymax, placed.xmin : placed.xmax]
        blended = color_transfer(jittered, region)
        out[placed.ymin : placed.ymax, placed.xmin : placed.xmax] = np.clip(
            np.rint(blended), 0, 255
        ).astype(np.uint8)
        annotations.append(Annotation(cls, placed))

    return out, replace(record, annotations=tuple(annotations))


@dataclass(frozen=True)
class PhotometricConfig:
    cutout_regions: int = 8
    cutout_max_size: int = 32
    cutout_prob: float = 0.5
    cutout_fill: int = 0
    brightness_contrast_limit: float = 0.3
    brightness_contrast_prob: float = 0.5
    crop_min: int = 512
    crop_max: int = 540
    crop_prob: float = 0.1


def apply_brightness_contrast(
    pixels: np.ndarray, brightness: float, contrast: float
) -> np.ndarray:
    """out = ((x * (1 + brightness)) - 127.5) * (1 + contrast) + 127.5, clipped."""
    x = pixels.astype(np.float64) * (1.0 + brightness)
    x = (x - 127.5) * (1.0 + contrast) + 127.5
    return np.clip(np.rint(x), 0, 255).astype(np.uint8)


def photometric_augment(
    pixels: np.ndarray,
    rng_seed: int,
    config: PhotometricConfig = PhotometricConfig(),
) -> np.ndarray:
    """Cutout, brightness/contrast, and crop-resize augmentations, in that
    fixed order, each gated by its own probability. Deterministic under seed."""
    rng = SplitMix64(rng_seed)
    out = np.array(pixels, copy=True)
    h, w = out.shape[:2]

    for _ in range(config.cutout_regions):
        if rng.random() < config.cutout_prob:
            cw = min(rng.randint(1, config.cutout_max_size), w)
            ch = min(rng.randint(1, config.cutout_max_size), h)
            x = rng.randint(0, w - cw)
            y = rng.randint(0, h - ch)
            out[y : y + ch, x : x + cw] = config.cutout_fill

    if rng.random() < config.brightness_contrast_prob:
        brightness = rng.uniform(
            -config.brightness_contrast_limit, config.brightness_contrast_limit
        )
        contrast = rng.uniform(
            -config.brightness_contrast_limit, config.brightness_contrast_limit
        )
        out = apply_brightness_contrast(out, brightness, contrast)

    if rng.random() < config.crop_prob:
        if min(h, w) < config.crop_min:
            logger.warning(
                "crop skipped: image %dx%d smaller than minimum crop side %d",
                w, h, config.crop_min,
            )
        else:
            side = rng.randint(config.crop_min, min(config.crop_max, h, w))
            x = rng.randint(0, w - side)
            y = rng.randint(0, h - side)
            out = resize_nearest(out[y : y + side, x : x + side], h, w)

    return out
