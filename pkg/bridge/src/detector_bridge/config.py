from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

DEFAULT_TTA_SIZES: tuple[int, ...] = (400, 500, 600, 700, 800, 900, 1000, 1100, 1200)

VALID_CLASSES = ("D00", "D10", "D20", "D40")


class BridgeError(Exception):
    """Configuration or data problem the bridge cannot recover from."""


@dataclass(frozen=True)
class BridgeConfig:
    """How to run a model over an image directory.

    class_map translates model class names to the four damage codes; names
    already in {D00, D10, D20, D40} pass through. Any other unmapped name is
    an error, never a silent drop.
    """

    model_path: Path
    score_floor: float = 0.0
    device: str = "cpu"
    tta: bool = False
    tta_sizes: tuple[int, ...] = DEFAULT_TTA_SIZES
    hflip: bool = True
    class_map: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.tta and not self.tta_sizes:
            raise BridgeError("TTA enabled but the resize list is empty")
        if not 0.0 <= self.score_floor < 1.0:
            raise BridgeError(f"score floor {self.score_floor} out of [0, 1)")
        for source, target in self.class_map.items():
            if target not in VALID_CLASSES:
                raise BridgeError(f"class_map maps {source!r} to unknown class {target!r}")

    def map_class(self, name: str) -> str:
        mapped = self.class_map.get(name, name)
        if mapped not in VALID_CLASSES:
            raise BridgeError(
                f"model emitted class {name!r} with no mapping to one of {VALID_CLASSES}"
            )
        return mapped
