"""Shared immutable value types: image slices, binary masks, gaze, point prompts.

Coordinate convention used everywhere: x is the column axis, y is the row
axis, and pixel (r, c) covers the half-open cell [r, r+1) x [c, c+1).  A
fractional coordinate therefore belongs to exactly one pixel (its floor),
and a point is inside an H x W image iff 0 <= x < W and 0 <= y < H.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import OutOfBounds, ProtocolError, ShapeMismatch

# WORD abdominal organ enumeration, ids 1..16 in this order.
WORD_ORGANS = (
    "liver",
    "spleen",
    "kidney_left",
    "kidney_right",
    "stomach",
    "gallbladder",
    "esophagus",
    "pancreas",
    "duodenum",
    "colon",
    "intestine",
    "adrenal",
    "rectum",
    "bladder",
    "head_of_femur_left",
    "head_of_femur_right",
)

FOREGROUND = 1
BACKGROUND = 0
NON_POINT = -1
_VALID_LABELS = (FOREGROUND, BACKGROUND, NON_POINT)


def organ_name(organ_id: int) -> str:
    if not 1 <= organ_id <= len(WORD_ORGANS):
        raise OutOfBounds(f"organ id {organ_id} outside 1..{len(WORD_ORGANS)}")
    return WORD_ORGANS[organ_id - 1]


def pixel_of(v: float) -> int:
    """Map a fractional coordinate to its pixel index (half-open cells)."""
    return int(math.floor(v))


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ImageSlice:
    """A single 2D slice with intensities normalized to [0, 1]."""

    intensities: np.ndarray
    slice_index: int = 0
    case_id: str = "case"

    def __post_init__(self):
        arr = np.asarray(self.intensities, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ShapeMismatch("intensities must be a 2D array with H, W >= 1")
        if float(arr.min()) < 0.0 or float(arr.max()) > 1.0:
            raise OutOfBounds("intensities must lie in [0, 1]")
        object.__setattr__(self, "intensities", _freeze(arr))

    @property
    def height(self) -> int:
        return self.intensities.shape[0]

    @property
    def width(self) -> int:
        return self.intensities.shape[1]


@dataclass(frozen=True, eq=False)
class Mask:
    """Binary mask for one structure, shape-matched to its image slice."""

    bits: np.ndarray
    structure_label: str = "none"

    def __post_init__(self):
        arr = np.asarray(self.bits)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ShapeMismatch("mask must be a 2D array with H, W >= 1")
        if arr.dtype != np.uint8:
            uniq = np.unique(arr)
            if not np.all(np.isin(uniq, (0, 1))):
                raise OutOfBounds("mask values must be 0 or 1")
            arr = arr.astype(np.uint8)
        elif arr.max(initial=0) > 1:
            raise OutOfBounds("mask values must be 0 or 1")
        object.__setattr__(self, "bits", _freeze(arr))

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    def area(self) -> int:
        return int(self.bits.sum())

    def is_empty(self) -> bool:
        return not self.bits.any()

    def same_bits(self, other: "Mask") -> bool:
        return self.bits.shape == other.bits.shape and bool(
            np.array_equal(self.bits, other.bits)
        )


def empty_mask_like(height: int, width: int, structure_label: str = "none") -> Mask:
    return Mask(np.zeros((height, width), dtype=np.uint8), structure_label)


@dataclass(frozen=True)
class GazeSample:
    """One timestamped gaze coordinate; t is milliseconds, monotone per stream."""

    x: float
    y: float
    t: float
    in_image: bool = True


@dataclass(frozen=True)
class GazeStream:
    samples: tuple[GazeSample, ...] = ()
    source: str = "synthetic"  # synthetic | mouse-proxy | tracker

    def __post_init__(self):
        samples = tuple(self.samples)
        ts = [s.t for s in samples]
        if any(b < a for a, b in zip(ts, ts[1:])):
            raise OutOfBounds("gaze timestamps must be non-decreasing")
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return len(self.samples)


@dataclass(frozen=True)
class PointPrompt:
    """Fixed-capacity labeled point list; labels are 1/0/-1 (fg/bg/padding).

    Padding entries always form a suffix and carry label -1 at (0, 0).
    """

    capacity: int
    points: tuple[tuple[float, float, int], ...]

    def __post_init__(self):
        if self.capacity < 1:
            raise OutOfBounds("capacity must be >= 1")
        pts = tuple((float(x), float(y), int(lab)) for x, y, lab in self.points)
        if len(pts) != self.capacity:
            raise ShapeMismatch(
                f"prompt holds {len(pts)} entries, capacity is {self.capacity}"
            )
        seen_padding = False
        for x, y, lab in pts:
            if lab not in _VALID_LABELS:
                raise OutOfBounds(f"label {lab} outside {{1, 0, -1}}")
            if lab == NON_POINT:
                seen_padding = True
                if (x, y) != (0.0, 0.0):
                    raise OutOfBounds("padding entries must sit at (0, 0)")
            elif seen_padding:
                raise OutOfBounds("padding must be suffix-positioned")
        object.__setattr__(self, "points", pts)

    @classmethod
    def build(
        cls,
        points: Sequence[tuple[float, float]],
        labels: Sequence[int],
        capacity: int,
    ) -> "PointPrompt":
        """Assemble a prompt from live points, padding the tail with -1 entries."""
        if len(points) != len(labels):
            raise ShapeMismatch("points and labels differ in length")
        if len(points) > capacity:
            raise OutOfBounds(f"{len(points)} live points exceed capacity {capacity}")
        live = [(float(x), float(y), int(l)) for (x, y), l in zip(points, labels)]
        pad = [(0.0, 0.0, NON_POINT)] * (capacity - len(live))
        return cls(capacity=capacity, points=tuple(live + pad))

    def live_points(self) -> list[tuple[float, float, int]]:
        return [p for p in self.points if p[2] != NON_POINT]

    def foreground_points(self) -> list[tuple[float, float]]:
        return [(x, y) for x, y, lab in self.points if lab == FOREGROUND]

    def background_points(self) -> list[tuple[float, float]]:
        return [(x, y) for x, y, lab in self.points if lab == BACKGROUND]


def mask_difference(predicted: Mask, reference: Mask) -> Mask:
    """Pixelwise XOR of two masks; the error region targeted by corrections."""
    if predicted.bits.shape != reference.bits.shape:
        raise ShapeMismatch(
            f"mask shapes differ: {predicted.bits.shape} vs {reference.bits.shape}"
        )
    return Mask(np.bitwise_xor(predicted.bits, reference.bits), reference.structure_label)


def region_membership(point: tuple[float, float], gt: Mask, diff: Mask) -> str:
    """Classify a point as 'diff', 'gt', or 'out' (difference takes priority)."""
    if gt.bits.shape != diff.bits.shape:
        raise ShapeMismatch("gt and diff masks must share a shape")
    x, y = point
    col, row = pixel_of(x), pixel_of(y)
    h, w = gt.bits.shape
    if not (0 <= row < h and 0 <= col < w):
        raise OutOfBounds(f"point ({x}, {y}) rounds outside {h}x{w}")
    if diff.bits[row, col]:
        return "diff"
    if gt.bits[row, col]:
        return "gt"
    return "out"


def encode_rle(mask: Mask) -> dict:
    """Run-length wire encoding: alternating runs starting with background."""
    flat = mask.bits.ravel()
    n = flat.size
    changes = np.flatnonzero(np.diff(flat))
    bounds = np.concatenate(([0], changes + 1, [n]))
    runs = np.diff(bounds).tolist()
    if flat[0] == 1:
        runs = [0] + runs
    return {"size": [mask.height, mask.width], "rle": [int(r) for r in runs]}


def decode_rle(obj: dict, structure_label: str = "none") -> Mask:
    """Decode the wire RLE object; raises ProtocolError on malformed input."""
    if not isinstance(obj, dict) or "size" not in obj or "rle" not in obj:
        raise ProtocolError("RLE object must carry 'size' and 'rle'")
    size = obj["size"]
    if (
        not isinstance(size, (list, tuple))
        or len(size) != 2
        or not all(isinstance(v, int) and v >= 1 for v in size)
    ):
        raise ProtocolError("RLE size must be two positive integers")
    runs = obj["rle"]
    if not isinstance(runs, (list, tuple)) or not runs:
        raise ProtocolError("RLE runs missing")
    for i, r in enumerate(runs):
        if not isinstance(r, int) or r < 0 or (r == 0 and i != 0):
            raise ProtocolError("RLE runs must be positive (first may be 0)")
    h, w = size
    total = sum(runs)
    if total != h * w:
        raise ProtocolError(f"RLE runs sum to {total}, expected {h * w}")
    values = np.arange(len(runs), dtype=np.int64) % 2
    flat = np.repeat(values.astype(np.uint8), runs)
    return Mask(flat.reshape(h, w), structure_label)
