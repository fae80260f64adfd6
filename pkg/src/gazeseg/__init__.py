"""Gaze-driven interactive segmentation workbench."""

from .core import (
    GazeSample,
    GazeStream,
    ImageSlice,
    Mask,
    PointPrompt,
    decode_rle,
    encode_rle,
    mask_difference,
    region_membership,
)
from .metrics import AggregateStat, aggregate, dice

__version__ = "0.1.0"

__all__ = [
    "AggregateStat",
    "GazeSample",
    "GazeStream",
    "ImageSlice",
    "Mask",
    "PointPrompt",
    "aggregate",
    "decode_rle",
    "dice",
    "encode_rle",
    "mask_difference",
    "region_membership",
    "__version__",
]
