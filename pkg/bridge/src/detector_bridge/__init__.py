"""Detector bridge: run a detection model over an image directory and write
prediction files in the roadbench line format, optionally with test-time
augmentation (multi-size resize plus horizontal flip) and exact coordinate
back-mapping."""

from .config import BridgeConfig, BridgeError, DEFAULT_TTA_SIZES
from .inference import run_inference, tta_merge, unflip_box, unscale_box
from .models import ImageView, RawDetection, StubEchoModel, load_model

__version__ = "0.1.0"

__all__ = [
    "BridgeConfig",
    "BridgeError",
    "DEFAULT_TTA_SIZES",
    "ImageView",
    "RawDetection",
    "StubEchoModel",
    "load_model",
    "run_inference",
    "tta_merge",
    "unflip_box",
    "unscale_box",
]
