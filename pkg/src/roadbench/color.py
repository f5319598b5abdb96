"""sRGB <-> CIELAB conversion and per-channel statistics transfer.

The transfer shifts a patch's L*a*b* distribution onto the statistics of its
destination region so a pasted patch picks up the local lighting and road
tone. All math runs in float64; conversions round-trip to well below 1e-9,
which keeps the mean/std contract testable.
"""

from __future__ import annotations

import numpy as np

# sRGB D65 linear-light matrix and its exact numerical inverse.
_RGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
_XYZ_TO_RGB = np.linalg.inv(_RGB_TO_XYZ)
# Normalizing by the matrix's own row sums maps (255, 255, 255) exactly to
# L*=100, a*=b*=0 instead of trusting externally rounded white-point values.
_WHITE = _RGB_TO_XYZ @ np.ones(3)
_EPS = 216.0 / 24389.0
_KAPPA = 24389.0 / 27.0

DEFAULT_STD_FLOOR = 1e-6


def _check_rgb(block: np.ndarray, name: str) -> np.ndarray:
    arr = np.asarray(block, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[-1] != 3 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ValueError(f"{name} must be a non-empty HxWx3 RGB block")
    return arr


def rgb_to_lab(rgb: np.ndarray) -> np.ndarray:
    """Convert RGB values in [0, 255] to CIELAB (D65), float64."""
    c = np.asarray(rgb, dtype=np.float64) / 255.0
    lin = np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)
    xyz = lin @ _RGB_TO_XYZ.T / _WHITE
    f = np.where(xyz > _EPS, np.cbrt(xyz), (_KAPPA * xyz + 16.0) / 116.0)
    lab = np.empty_like(f)
    lab[..., 0] = 116.0 * f[..., 1] - 16.0
    lab[..., 1] = 500.0 * (f[..., 0] - f[..., 1])
    lab[..., 2] = 200.0 * (f[..., 1] - f[..., 2])
    return lab


def lab_to_rgb(lab: np.ndarray) -> np.ndarray:
    """Inverse of rgb_to_lab. Returns float64 RGB, unclamped."""
    lab = np.asarray(lab, dtype=np.float64)
    fy = (lab[..., 0] + 16.0) / 116.0
    fx = fy + lab[..., 1] / 500.0
    fz = fy - lab[..., 2] / 200.0
    f = np.stack([fx, fy, fz], axis=-1)
    f3 = f**3
    xyz = np.where(f3 > _EPS, f3, (116.0 * f - 16.0) / _KAPPA) * _WHITE
    lin = xyz @ _XYZ_TO_RGB.T
    c = np.where(
        lin <= 0.0031308,
        12.92 * lin,
        1.055 * np.maximum(lin, 0.0) ** (1.0 / 2.4) - 0.055,
    )
    return c * 255.0


def color_transfer(
    patch: np.ndarray,
    target_region: np.ndarray,
    std_floor: float = DEFAULT_STD_FLOOR,
) -> np.ndarray:
    """Match the patch's per-channel L*a*b* statistics to the target region.

    Per channel: out = (src - mu_src) * (sigma_tgt / sigma_src) + mu_tgt.
    Channels with sigma_src below std_floor fall back to the pure mean shift
    out = src - mu_src + mu_tgt. Returns float64 RGB clipped to [0, 255];
    callers quantize when pasting into uint8 images.
    """
    src_lab = rgb_to_lab(_check_rgb(patch, "patch"))
    tgt_lab = rgb_to_lab(_check_rgb(target_region, "target_region"))
    src_flat = src_lab.reshape(-1, 3)
    tgt_flat = tgt_lab.reshape(-1, 3)
    mu_src = src_flat.mean(axis=0)
    mu_tgt = tgt_flat.mean(axis=0)
    sd_src = src_flat.std(axis=0)
    sd_tgt = tgt_flat.std(axis=0)

    out = np.empty_like(src_lab)
    for ch in range(3):
        centered = src_lab[..., ch] - mu_src[ch]
        if sd_src[ch] < std_floor:
            out[..., ch] = centered + mu_tgt[ch]
        else:
            out[..., ch] = centered * (sd_tgt[ch] / sd_src[ch]) + mu_tgt[ch]
    return np.clip(lab_to_rgb(out), 0.0, 255.0)
