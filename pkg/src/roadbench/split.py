"""Stratified train/evaluation split, stratifying on country of origin.

Within each country the image ids are shuffled with a seeded SplitMix64
Fisher-Yates pass and the first round_half_up(fraction * count) ids go to the
evaluation side. The same (dataset, fraction, seed) triple reproduces the
same split byte for byte on any platform.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

from .dataset import ALL_COUNTRIES, Country, Dataset
from .errors import DataError
from .rng import SplitMix64, stable_hash64


@dataclass(frozen=True)
class SplitResult:
    train_ids: tuple[str, ...]
    eval_ids: tuple[str, ...]
    seed: int
    eval_fraction: float

    def per_country_counts(self) -> dict[Country, dict[str, int]]:
        counts = {c: {"train": 0, "eval": 0} for c in ALL_COUNTRIES}
        for image_id in self.train_ids:
            counts[Country.from_image_id(image_id)]["train"] += 1
        for image_id in self.eval_ids:
            counts[Country.from_image_id(image_id)]["eval"] += 1
        return counts


def _round_half_up(x: float) -> int:
    return math.floor(x + 0.5)


def stratified_split(
    ds: Dataset, eval_fraction: float = 0.10, *, seed: int
) -> SplitResult:
    """Partition dataset ids into train/eval lists, per-country proportional.

    Strata are the countries present in the dataset. Output id lists are
    sorted lexicographically; membership depends on the seed, per-stratum
    counts do not.
    """
    if not 0.0 < eval_fraction < 1.0:
        raise ValueError(f"eval_fraction {eval_fraction} out of range (0, 1)")
    if len(ds) == 0:
        raise DataError("cannot split an empty dataset")

    eval_ids: list[str] = []
    for country in ALL_COUNTRIES:
        ids = [r.image_id for r in ds.by_country(country)]
        if not ids:
            continue
        # Independent stream per stratum: deleting one country's images
        # cannot shift another country's selection.
        rng = SplitMix64(seed ^ stable_hash64(country.value))
        rng.shuffle(ids)
        take = _round_half_up(len(ids) * eval_fraction)
        eval_ids.extend(ids[:take])

    chosen = frozenset(eval_ids)
    train_ids = tuple(i for i in ds.image_ids if i not in chosen)
    return SplitResult(train_ids, tuple(sorted(eval_ids)), seed, eval_fraction)


def save_split(result: SplitResult, out_dir: Path) -> list[Path]:
    """Persist a split as two id files plus a JSON sidecar."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    train_path = out / "train_ids.txt"
    eval_path = out / "eval_ids.txt"
    sidecar_path = out / "split.json"
    train_path.write_text("".join(i + "\n" for i in result.train_ids), encoding="utf-8")
    eval_path.write_text("".join(i + "\n" for i in result.eval_ids), encoding="utf-8")
    sidecar = {
        "seed": result.seed,
        "eval_fraction": result.eval_fraction,
        "strata": {
            c.value: counts for c, counts in result.per_country_counts().items()
        },
    }
    sidecar_path.write_text(
        json.dumps(sidecar, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return [train_path, eval_path, sidecar_path]
