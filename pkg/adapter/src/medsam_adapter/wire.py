"""Wire-level helpers: RLE mask codec and grayscale PNG payloads.

These implement the protocol's data formats directly from their wire
definitions so the sidecar stands alone.
"""

from __future__ import annotations

import base64
import io

import numpy as np
from PIL import Image


class WireError(ValueError):
    pass


def encode_rle(bits: np.ndarray) -> dict:
    """{"size": [H, W], "rle": [...]}: alternating runs, background first."""
    h, w = bits.shape
    flat = bits.astype(np.uint8).ravel()
    changes = np.flatnonzero(np.diff(flat))
    bounds = np.concatenate(([0], changes + 1, [flat.size]))
    runs = np.diff(bounds).tolist()
    if flat[0] == 1:
        runs = [0] + runs
    return {"size": [int(h), int(w)], "rle": [int(r) for r in runs]}


def decode_rle(obj: dict) -> np.ndarray:
    try:
        h, w = (int(v) for v in obj["size"])
        runs = [int(r) for r in obj["rle"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise WireError(f"malformed RLE object: {exc}") from exc
    if h < 1 or w < 1 or not runs:
        raise WireError("RLE needs positive dims and at least one run")
    for i, r in enumerate(runs):
        if r < 0 or (r == 0 and i != 0):
            raise WireError("runs must be positive (first may be 0)")
    if sum(runs) != h * w:
        raise WireError(f"runs sum to {sum(runs)}, expected {h * w}")
    values = (np.arange(len(runs)) % 2).astype(np.uint8)
    return np.repeat(values, runs).reshape(h, w)


def png_b64_to_array(payload: str) -> np.ndarray:
    try:
        raw = base64.b64decode(payload, validate=True)
        img = Image.open(io.BytesIO(raw))
        img.load()
    except Exception as exc:
        raise WireError(f"bad PNG payload: {exc}") from exc
    if img.mode != "L":
        img = img.convert("L")
    return np.asarray(img, dtype=np.float64) / 255.0


def array_to_png_b64(values01: np.ndarray) -> str:
    data = np.clip(np.round(values01 * 255.0), 0, 255).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(data, mode="L").save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")
