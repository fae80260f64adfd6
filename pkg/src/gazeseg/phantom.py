"""Synthetic hard-edged phantoms with exactly known ground-truth masks.

A phantom is a background intensity plus non-overlapping blobs; each blob
is one or more ellipse lobes separated by thin background gaps, so a
structure's reference mask can have several connected components.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import ImageSlice, Mask
from .errors import InvalidParam, OverlapError


@dataclass(frozen=True)
class Blob:
    """One structure: `lobes` ellipses of semi-axes (rx, ry) laid out along
    the rotated x-axis with a background gap between neighbours."""

    center: tuple[float, float]  # (x, y)
    radii: tuple[float, float]  # (rx, ry)
    intensity: float
    rotation: float = 0.0  # radians
    lobes: int = 1
    lobe_gap_px: float = 3.0
    name: str = ""

    def __post_init__(self):
        if not 0.0 <= self.intensity <= 1.0:
            raise InvalidParam("blob intensity must lie in [0, 1]")
        if self.radii[0] <= 0 or self.radii[1] <= 0:
            raise InvalidParam("blob radii must be positive")
        if self.lobes < 1:
            raise InvalidParam("lobe count must be >= 1")


@dataclass(frozen=True)
class PhantomSpec:
    height: int
    width: int
    blobs: tuple[Blob, ...]
    background_intensity: float = 0.2
    noise_std: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.height < 1 or self.width < 1:
            raise InvalidParam("phantom dims must be >= 1")
        if not 0.0 <= self.background_intensity <= 1.0:
            raise InvalidParam("background intensity must lie in [0, 1]")
        if self.noise_std < 0:
            raise InvalidParam("noise std must be >= 0")
        object.__setattr__(self, "blobs", tuple(self.blobs))


def _rasterize_blob(blob: Blob, height: int, width: int) -> np.ndarray:
    ys, xs = np.mgrid[0:height, 0:width]
    # Evaluate at pixel centers under the half-open cell convention.
    px = xs + 0.5
    py = ys + 0.5
    rx, ry = blob.radii
    cos_t, sin_t = math.cos(blob.rotation), math.sin(blob.rotation)
    bits = np.zeros((height, width), dtype=np.uint8)
    pitch = 2 * rx + blob.lobe_gap_px
    for i in range(blob.lobes):
        offset = (i - (blob.lobes - 1) / 2.0) * pitch
        cx = blob.center[0] + offset * cos_t
        cy = blob.center[1] + offset * sin_t
        dx = px - cx
        dy = py - cy
        u = dx * cos_t + dy * sin_t
        v = -dx * sin_t + dy * cos_t
        bits |= ((u / rx) ** 2 + (v / ry) ** 2 <= 1.0).astype(np.uint8)
    return bits


def generate_phantom(spec: PhantomSpec) -> tuple[ImageSlice, list[Mask]]:
    """Render the phantom image and the exact per-blob reference masks."""
    masks: list[Mask] = []
    image = np.full((spec.height, spec.width), spec.background_intensity, dtype=np.float64)
    occupied = np.zeros((spec.height, spec.width), dtype=bool)
    for i, blob in enumerate(spec.blobs):
        bits = _rasterize_blob(blob, spec.height, spec.width)
        if not bits.any():
            raise InvalidParam(f"blob {i} rasterizes to nothing")
        if (occupied & bits.astype(bool)).any():
            raise OverlapError(f"blob {i} collides with an earlier blob")
        occupied |= bits.astype(bool)
        image[bits.astype(bool)] = blob.intensity
        masks.append(Mask(bits, structure_label=blob.name or f"blob{i}"))
    if spec.noise_std > 0:
        rng = np.random.default_rng(spec.seed)
        image = image + rng.normal(0.0, spec.noise_std, size=image.shape)
    image = np.clip(image, 0.0, 1.0)
    return ImageSlice(image, slice_index=0, case_id="phantom"), masks


def two_lobe_spec(
    seed: int = 0,
    height: int = 160,
    width: int = 160,
    intensity: float = 0.65,
    gap_px: float = 3.0,
    noise_std: float = 0.003,
) -> PhantomSpec:
    """A single two-lobe structure with randomized placement and rotation."""
    rng = np.random.default_rng(seed)
    rx = float(rng.uniform(11.0, 14.0))
    ry = float(rng.uniform(9.0, 12.0))
    rot = float(rng.uniform(0.0, math.pi))
    span = 2 * rx + gap_px + rx  # keep both lobes well inside the frame
    cx = float(rng.uniform(span, width - span))
    cy = float(rng.uniform(span, height - span))
    blob = Blob(
        center=(cx, cy),
        radii=(rx, ry),
        intensity=intensity,
        rotation=rot,
        lobes=2,
        lobe_gap_px=gap_px,
        name="twolobe",
    )
    return PhantomSpec(height=height, width=width, blobs=(blob,), noise_std=noise_std, seed=seed)


def mixed_spec(seed: int = 0, height: int = 160, width: int = 160) -> PhantomSpec:
    """One disk structure plus one two-lobe structure per image."""
    rng = np.random.default_rng(seed)
    disk = Blob(
        center=(float(rng.uniform(38, 52)), float(rng.uniform(38, 52))),
        radii=(float(rng.uniform(16, 21)), float(rng.uniform(15, 20))),
        intensity=0.70,
        rotation=float(rng.uniform(0.0, math.pi)),
        name="disk",
    )
    twin = Blob(
        center=(float(rng.uniform(100, 118)), float(rng.uniform(100, 118))),
        radii=(float(rng.uniform(10, 13)), float(rng.uniform(9, 12))),
        intensity=0.65,
        rotation=float(rng.uniform(0.0, math.pi)),
        lobes=2,
        lobe_gap_px=3.0,
        name="twolobe",
    )
    return PhantomSpec(
        height=height, width=width, blobs=(disk, twin), noise_std=0.004, seed=seed
    )
