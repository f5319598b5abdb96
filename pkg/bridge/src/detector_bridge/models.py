"""Model loading and the view protocol models predict against.

A model is any object with ``predict(view: ImageView) -> list[RawDetection]``
returning boxes in the view's own coordinate frame. The bridge hands each
model the view metadata (scale, flip, original size) so synthetic stub
models can answer exactly; real adapters only look at ``view.pixels``.

Model artifacts are JSON files dispatched on their ``kind`` key:

* ``stub_echo``: fixed detections per image id, stored in original image
  coordinates and echoed back exactly under any resize/flip. Used for
  integration tests and harness validation.
* ``python``: names a ``module``/``attr`` import path; the attribute is
  called with the artifact dict and must return a predict-capable object.
"""

from __future__ import annotations

import importlib
import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Protocol

import numpy as np

from .config import BridgeError


@dataclass(frozen=True)
class ImageView:
    """One (possibly resized/flipped) rendering of a source image."""

    image_id: str
    pixels: np.ndarray | None
    width: int
    height: int
    orig_width: int
    orig_height: int
    scale_x: Fraction  # view / original
    scale_y: Fraction
    flipped: bool


@dataclass(frozen=True)
class RawDetection:
    """Model output in view coordinates; boxes are exact rationals."""

    class_name: str
    score: float
    xmin: Fraction
    ymin: Fraction
    xmax: Fraction
    ymax: Fraction


class Model(Protocol):
    def predict(self, view: ImageView) -> list[RawDetection]: ...


class StubEchoModel:
    """Echoes configured boxes, transformed exactly into each view's frame.

    Equivariant by construction: whatever resize or flip the bridge applies,
    back-mapping recovers identical original-frame detections.
    """

    def __init__(self, detections: dict[str, list[dict]]):
        self._detections = detections

    def predict(self, view: ImageView) -> list[RawDetection]:
        raw = self._detections.get(view.image_id, [])
        out: list[RawDetection] = []
        for entry in raw:
            xmin, ymin, xmax, ymax = (Fraction(v) for v in entry["box"])
            xmin *= view.scale_x
            xmax *= view.scale_x
            ymin *= view.scale_y
            ymax *= view.scale_y
            if view.flipped:
                xmin, xmax = view.width - xmax, view.width - xmin
            out.append(RawDetection(entry["cls"], float(entry["score"]), xmin, ymin, xmax, ymax))
        return out


def load_model(path: Path) -> Model:
    path = Path(path)
    try:
        artifact = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise BridgeError(f"cannot read model artifact {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise BridgeError(f"model artifact {path} is not valid JSON: {exc}") from exc
    kind = artifact.get("kind")
    if kind == "stub_echo":
        detections = artifact.get("detections")
        if not isinstance(detections, dict):
            raise BridgeError(f"stub_echo artifact {path} lacks a 'detections' object")
        return StubEchoModel(detections)
    if kind == "python":
        module_name = artifact.get("module")
        attr = artifact.get("attr", "load")
        if not module_name:
            raise BridgeError(f"python artifact {path} lacks a 'module' key")
        try:
            loader = getattr(importlib.import_module(module_name), attr)
        except (ImportError, AttributeError) as exc:
            raise BridgeError(f"cannot load model from {module_name}:{attr}: {exc}") from exc
        return loader(artifact)
    raise BridgeError(f"unknown model artifact kind {kind!r} in {path}")
