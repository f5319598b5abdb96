"""Minimal image I/O: header-only size reads, RGB arrays, deterministic resize.

Pixel data moves through the toolkit as uint8 numpy arrays of shape
(height, width, 3) in RGB channel order.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from .errors import DataError


def read_image_size(path: Path) -> tuple[int, int]:
    """Return (width, height) from the image header without decoding pixels."""
    try:
        with Image.open(path) as im:
            return im.size
    except Exception as exc:
        raise DataError(f"unreadable image header: {path}: {exc}") from exc


def load_rgb(path: Path) -> np.ndarray:
    try:
        with Image.open(path) as im:
            return np.asarray(im.convert("RGB"))
    except DataError:
        raise
    except Exception as exc:
        raise DataError(f"unreadable image: {path}: {exc}") from exc


def save_image(pixels: np.ndarray, path: Path) -> None:
    Image.fromarray(np.ascontiguousarray(pixels)).save(path)


def resize_nearest(pixels: np.ndarray, out_height: int, out_width: int) -> np.ndarray:
    """Nearest-neighbour resize with pure integer index math.

    out[i, j] = in[floor(i * in_h / out_h), floor(j * in_w / out_w)], which is
    bit-reproducible everywhere, unlike interpolating resizers.
    """
    if out_height < 1 or out_width < 1:
        raise ValueError("output dimensions must be positive")
    in_h, in_w = pixels.shape[:2]
    rows = (np.arange(out_height) * in_h) // out_height
    cols = (np.arange(out_width) * in_w) // out_width
    return pixels[rows[:, None], cols[None, :]]
