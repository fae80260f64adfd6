"""8-bit grayscale PNG helpers for wire payloads and corpus files."""

from __future__ import annotations

import base64
import io
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import ProtocolError


def array_to_png_bytes(values01: np.ndarray) -> bytes:
    """Quantize a [0, 1] array to 8-bit grayscale PNG bytes."""
    arr = np.asarray(values01, dtype=np.float64)
    data = np.clip(np.round(arr * 255.0), 0, 255).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(data, mode="L").save(buf, format="PNG")
    return buf.getvalue()


def png_bytes_to_array(data: bytes) -> np.ndarray:
    """Decode 8-bit grayscale PNG bytes back to a [0, 1] float array."""
    try:
        img = Image.open(io.BytesIO(data))
        img.load()
    except Exception as exc:  # Pillow raises a mix of OSError subclasses
        raise ProtocolError(f"bad PNG payload: {exc}") from exc
    if img.mode != "L":
        img = img.convert("L")
    return np.asarray(img, dtype=np.float64) / 255.0


def array_to_png_b64(values01: np.ndarray) -> str:
    return base64.b64encode(array_to_png_bytes(values01)).decode("ascii")


def png_b64_to_array(payload: str) -> np.ndarray:
    try:
        raw = base64.b64decode(payload, validate=True)
    except Exception as exc:
        raise ProtocolError(f"bad base64 payload: {exc}") from exc
    return png_bytes_to_array(raw)


def save_png(path: str | Path, values01: np.ndarray) -> None:
    Path(path).write_bytes(array_to_png_bytes(values01))


def load_png(path: str | Path) -> np.ndarray:
    return png_bytes_to_array(Path(path).read_bytes())
