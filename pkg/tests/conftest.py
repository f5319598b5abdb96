from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from roadbench.dataset import (
    Annotation,
    BoundingBox,
    Country,
    DamageClass,
    Dataset,
    ImageRecord,
)
from roadbench.images import save_image


def voc_xml(width: int, height: int, objects: list[tuple[str, int, int, int, int]]) -> str:
    parts = [
        "<annotation>",
        f"<size><width>{width}</width><height>{height}</height><depth>3</depth></size>",
    ]
    for name, xmin, ymin, xmax, ymax in objects:
        parts.append(
            f"<object><name>{name}</name><bndbox>"
            f"<xmin>{xmin}</xmin><ymin>{ymin}</ymin>"
            f"<xmax>{xmax}</xmax><ymax>{ymax}</ymax>"
            f"</bndbox></object>"
        )
    parts.append("</annotation>")
    return "".join(parts)


def record(
    image_id: str,
    width: int = 600,
    height: int = 600,
    annotations: tuple[Annotation, ...] = (),
    image_path: Path | None = None,
) -> ImageRecord:
    return ImageRecord(
        image_id,
        Country.from_image_id(image_id),
        width,
        height,
        annotations,
        image_path,
    )


def ann(cls: str, xmin: int, ymin: int, xmax: int, ymax: int) -> Annotation:
    return Annotation(DamageClass(cls), BoundingBox(xmin, ymin, xmax, ymax))


def write_dataset_dir(
    root: Path,
    images: dict[str, list[tuple[str, int, int, int, int]]],
    size: tuple[int, int] = (64, 64),
    pixel_value: int = 120,
) -> Path:
    """Materialize images/ and annotations/xmls/ under root."""
    width, height = size
    image_dir = root / "images"
    xml_dir = root / "annotations" / "xmls"
    image_dir.mkdir(parents=True, exist_ok=True)
    xml_dir.mkdir(parents=True, exist_ok=True)
    for image_id, objects in images.items():
        pixels = np.full((height, width, 3), pixel_value, dtype=np.uint8)
        save_image(pixels, image_dir / f"{image_id}.png")
        (xml_dir / f"{image_id}.xml").write_text(voc_xml(width, height, objects))
    return root


@pytest.fixture
def tiny_dataset(tmp_path: Path) -> Dataset:
    """Three-country in-memory dataset with a handful of annotations."""
    return Dataset(
        [
            record("Czech_000001", annotations=(ann("D00", 10, 10, 50, 40),)),
            record("Czech_000002", annotations=(ann("D00", 5, 5, 25, 25), ann("D40", 30, 30, 60, 60))),
            record("India_000001", annotations=(ann("D20", 100, 100, 200, 180),)),
            record("Japan_000001", annotations=(ann("D10", 0, 0, 40, 20),)),
            record("Japan_000002"),
        ]
    )
