"""Domain types, VOC-style annotation parsing, and dataset loading.

Covers the three-country road-damage dataset: images from Czech, India, and
Japan with four scored damage classes (D00 longitudinal crack, D10 transverse
crack, D20 alligator crack, D40 pothole). Boxes are half-open pixel
rectangles [xmin, xmax) x [ymin, ymax), so area and IoU arithmetic stay in
exact integers.
"""

from __future__ import annotations

import enum
import xml.etree.ElementTree as ET
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Iterator

from .errors import DataError
from .images import read_image_size

IMAGE_SUFFIXES = (".jpg", ".jpeg", ".png")


class DamageClass(enum.Enum):
    """The four scored damage types."""

    D00 = "D00"  # longitudinal crack
    D10 = "D10"  # transverse crack
    D20 = "D20"  # alligator crack
    D40 = "D40"  # pothole

    @classmethod
    def parse(cls, name: str) -> "DamageClass":
        try:
            return cls(name)
        except ValueError:
            raise DataError(f"unknown damage class {name!r}") from None

    def __str__(self) -> str:
        return self.value


ALL_CLASSES: tuple[DamageClass, ...] = tuple(DamageClass)


class Country(enum.Enum):
    CZECH = "Czech"
    INDIA = "India"
    JAPAN = "Japan"

    @classmethod
    def from_image_id(cls, image_id: str) -> "Country":
        """Derive country from the image-id prefix, e.g. "Japan_012722"."""
        prefix = image_id.split("_", 1)[0]
        for country in cls:
            if country.value == prefix:
                return country
        raise DataError(f"image id {image_id!r} has no known country prefix")

    def __str__(self) -> str:
        return self.value


ALL_COUNTRIES: tuple[Country, ...] = tuple(Country)


@dataclass(frozen=True, order=True)
class BoundingBox:
    """Axis-aligned half-open pixel rectangle [xmin, xmax) x [ymin, ymax)."""

    xmin: int
    ymin: int
    xmax: int
    ymax: int

    def __post_init__(self) -> None:
        if not (0 <= self.xmin < self.xmax and 0 <= self.ymin < self.ymax):
            raise DataError(
                f"degenerate or negative box "
                f"({self.xmin}, {self.ymin}, {self.xmax}, {self.ymax})"
            )

    @property
    def width(self) -> int:
        return self.xmax - self.xmin

    @property
    def height(self) -> int:
        return self.ymax - self.ymin

    @property
    def area(self) -> int:
        return self.width * self.height

    def intersection_area(self, other: "BoundingBox") -> int:
        w = min(self.xmax, other.xmax) - max(self.xmin, other.xmin)
        h = min(self.ymax, other.ymax) - max(self.ymin, other.ymin)
        return w * h if w > 0 and h > 0 else 0


@dataclass(frozen=True)
class Annotation:
    cls: DamageClass
    box: BoundingBox
    pseudo: bool = False  # True when promoted from a model prediction


@dataclass(frozen=True)
class ImageRecord:
    """One image with its ground-truth annotations and country of origin."""

    image_id: str
    country: Country
    width: int
    height: int
    annotations: tuple[Annotation, ...] = ()
    image_path: Path | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise DataError(f"{self.image_id}: non-positive image dimensions")
        if Country.from_image_id(self.image_id) is not self.country:
            raise DataError(f"{self.image_id}: country does not match id prefix")
        for ann in self.annotations:
            b = ann.box
            if b.xmax > self.width or b.ymax > self.height:
                raise DataError(f"{self.image_id}: box {b} outside {self.width}x{self.height}")


class Dataset:
    """Ordered, indexed collection of ImageRecords.

    Records are kept sorted lexicographically by image id regardless of the
    order they were supplied in, so loading is independent of filesystem
    enumeration order.
    """

    def __init__(self, records: Iterable[ImageRecord]):
        self.records: tuple[ImageRecord, ...] = tuple(
            sorted(records, key=lambda r: r.image_id)
        )
        self._by_id: dict[str, ImageRecord] = {}
        for rec in self.records:
            if rec.image_id in self._by_id:
                raise DataError(f"duplicate image id {rec.image_id!r}")
            self._by_id[rec.image_id] = rec
        self._by_country: dict[Country, tuple[ImageRecord, ...]] = {
            c: tuple(r for r in self.records if r.country is c) for c in ALL_COUNTRIES
        }

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[ImageRecord]:
        return iter(self.records)

    def __contains__(self, image_id: str) -> bool:
        return image_id in self._by_id

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Dataset) and self.records == other.records

    def get(self, image_id: str) -> ImageRecord:
        try:
            return self._by_id[image_id]
        except KeyError:
            raise DataError(f"unknown image id {image_id!r}") from None

    def by_country(self, country: Country) -> tuple[ImageRecord, ...]:
        return self._by_country[country]

    @property
    def image_ids(self) -> tuple[str, ...]:
        return tuple(r.image_id for r in self.records)

    def total_annotations(self) -> int:
        return sum(len(r.annotations) for r in self.records)


@dataclass(frozen=True)
class ParseWarning:
    """One recoverable anomaly found while reading annotation data."""

    image_id: str
    code: str
    detail: str

    def as_line(self) -> str:
        return f"{self.image_id}\t{self.code}\t{self.detail}"


def write_warning_log(warnings: Iterable[ParseWarning], path: Path) -> None:
    """Line-oriented log: ``<image_id>\\t<code>\\t<detail>``."""
    text = "".join(w.as_line() + "\n" for w in warnings)
    Path(path).write_text(text, encoding="utf-8")


def _int_text(element: ET.Element | None, tag: str, context: str) -> int:
    node = element.findtext(tag) if element is not None else None
    if node is None:
        raise DataError(f"{context}: missing <{tag}>")
    try:
        return int(round(float(node)))
    except ValueError:
        raise DataError(f"{context}: bad integer in <{tag}>: {node!r}") from None


def parse_voc_annotation(
    xml_text: bytes | str,
    image_id: str,
    *,
    strict: bool = False,
) -> tuple[ImageRecord, list[ParseWarning]]:
    """Parse one VOC-style XML document into an ImageRecord.

    Default policy is lenient: objects with unknown class names or degenerate
    boxes are skipped and boxes overshooting the image are clamped, each with
    a warning record. With strict=True any such anomaly rejects the file.
    """
    try:
        root = ET.fromstring(xml_text)
    except ET.ParseError as exc:
        raise DataError(f"{image_id}: malformed XML: {exc}") from exc

    country = Country.from_image_id(image_id)
    size = root.find("size")
    if size is None:
        raise DataError(f"{image_id}: missing <size>")
    width = _int_text(size, "width", image_id)
    height = _int_text(size, "height", image_id)

    annotations: list[Annotation] = []
    warnings: list[ParseWarning] = []

    def anomaly(code: str, detail: str) -> None:
        if strict:
            raise DataError(f"{image_id}: {code}: {detail}")
        warnings.append(ParseWarning(image_id, code, detail))

    for obj in root.findall("object"):
        name = (obj.findtext("name") or "").strip()
        try:
            cls = DamageClass.parse(name)
        except DataError:
            anomaly("unknown_class", f"skipped object with class {name!r}")
            continue
        bndbox = obj.find("bndbox")
        if bndbox is None:
            anomaly("missing_bndbox", f"skipped {name} object without <bndbox>")
            continue
        xmin = _int_text(bndbox, "xmin", image_id)
        ymin = _int_text(bndbox, "ymin", image_id)
        xmax = _int_text(bndbox, "xmax", image_id)
        ymax = _int_text(bndbox, "ymax", image_id)
        clamped = (max(0, xmin), max(0, ymin), min(width, xmax), min(height, ymax))
        if clamped != (xmin, ymin, xmax, ymax):
            anomaly(
                "box_clamped",
                f"{name} box ({xmin}, {ymin}, {xmax}, {ymax}) clamped to image",
            )
            xmin, ymin, xmax, ymax = clamped
        if xmin >= xmax or ymin >= ymax:
            anomaly(
                "degenerate_box",
                f"skipped {name} box ({xmin}, {ymin}, {xmax}, {ymax})",
            )
            continue
        pseudo = (obj.findtext("pseudo") or "").strip() == "1"
        annotations.append(Annotation(cls, BoundingBox(xmin, ymin, xmax, ymax), pseudo))

    record = ImageRecord(image_id, country, width, height, tuple(annotations))
    return record, warnings


def record_to_voc_xml(record: ImageRecord) -> str:
    """Serialize a record back to the XML schema accepted by the parser.

    Output is deterministic, LF-terminated, and round-trips through
    parse_voc_annotation to an equal record.
    """
    lines = [
        "<annotation>",
        f"  <filename>{record.image_id}.jpg</filename>",
        "  <size>",
        f"    <width>{record.width}</width>",
        f"    <height>{record.height}</height>",
        "    <depth>3</depth>",
        "  </size>",
    ]
    for ann in record.annotations:
        lines.append("  <object>")
        lines.append(f"    <name>{ann.cls.value}</name>")
        if ann.pseudo:
            lines.append("    <pseudo>1</pseudo>")
        lines.append("    <bndbox>")
        lines.append(f"      <xmin>{ann.box.xmin}</xmin>")
        lines.append(f"      <ymin>{ann.box.ymin}</ymin>")
        lines.append(f"      <xmax>{ann.box.xmax}</xmax>")
        lines.append(f"      <ymax>{ann.box.ymax}</ymax>")
        lines.append("    </bndbox>")
        lines.append("  </object>")
    lines.append("</annotation>")
    return "\n".join(lines) + "\n"


class DatasetLayout(enum.Enum):
    TRAIN_WITH_XML = "train_with_xml"
    TEST_IMAGES_ONLY = "test_images_only"


def _annotation_candidates(image_path: Path) -> list[Path]:
    """Places to look for the XML belonging to an image, most specific first."""
    stem = image_path.stem
    candidates = [image_path.with_suffix(".xml")]
    parts = list(image_path.parent.parts)
    for i in range(len(parts) - 1, -1, -1):
        if parts[i] == "images":
            base = parts[:i]
            candidates.append(Path(*base, "annotations", "xmls", f"{stem}.xml"))
            candidates.append(Path(*base, "annotations", f"{stem}.xml"))
            candidates.append(Path(*base, "xmls", f"{stem}.xml"))
            break
    return candidates


def _find_images(root: Path) -> list[Path]:
    return sorted(
        p for p in Path(root).rglob("*") if p.suffix.lower() in IMAGE_SUFFIXES
    )


def load_dataset(
    root_path: Path,
    layout: DatasetLayout = DatasetLayout.TRAIN_WITH_XML,
    *,
    strict: bool = False,
    jobs: int = 1,
) -> tuple[Dataset, list[ParseWarning]]:
    """Load every image under root_path into a Dataset.

    TRAIN_WITH_XML requires one XML per image (dimensions come from the XML);
    TEST_IMAGES_ONLY reads dimensions from the image headers and yields empty
    annotation lists. Parsing may run on several worker threads, results are
    merged back into canonical image-id order either way.
    """
    root = Path(root_path)
    if not root.is_dir():
        raise DataError(f"dataset root is not a directory: {root}")
    image_paths = _find_images(root)
    if not image_paths:
        raise DataError(f"no images found under {root}")

    def load_one(image_path: Path) -> tuple[ImageRecord, list[ParseWarning]]:
        image_id = image_path.stem
        if layout is DatasetLayout.TRAIN_WITH_XML:
            xml_path = next(
                (c for c in _annotation_candidates(image_path) if c.is_file()), None
            )
            if xml_path is None:
                raise DataError(f"missing annotation XML for image {image_path}")
            record, warnings = parse_voc_annotation(
                xml_path.read_bytes(), image_id, strict=strict
            )
        else:
            width, height = read_image_size(image_path)
            country = Country.from_image_id(image_id)
            record = ImageRecord(image_id, country, width, height)
            warnings = []
        return replace(record, image_path=image_path), warnings

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(load_one, image_paths))
    else:
        results = [load_one(p) for p in image_paths]

    results.sort(key=lambda pair: pair[0].image_id)
    records = [record for record, _ in results]
    warnings = [w for _, ws in results for w in ws]
    return Dataset(records), warnings
