"""Segmentation backend contract, the built-in deterministic reference
segmenter, and the HTTP client for a remote backend speaking the same wire
protocol."""

from __future__ import annotations

import time
import uuid
from dataclasses import dataclass
from typing import Any

import httpx
import numpy as np
from scipy import ndimage

from .core import (
    ImageSlice,
    Mask,
    PointPrompt,
    decode_rle,
    encode_rle,
    pixel_of,
)
from .errors import (
    BackendUnavailable,
    EmptyMask,
    EmptyPrompt,
    ProtocolError,
    ShapeMismatch,
)
from .pngio import array_to_png_b64, png_b64_to_array

_FOUR_CONNECTED = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=np.uint8)

Box = tuple[int, int, int, int]  # (row_min, col_min, row_max, col_max), inclusive


@dataclass(frozen=True, eq=False)
class SegmentationRequest:
    prompt: PointPrompt
    image: ImageSlice | None = None
    case_id: str | None = None
    slice_index: int | None = None
    box: Box | None = None
    prior_mask: Mask | None = None
    request_id: str = ""

    def __post_init__(self):
        if self.box is not None:
            r0, c0, r1, c1 = self.box
            if r0 > r1 or c0 > c1:
                raise ProtocolError("box corners must be ordered")
        if not self.request_id:
            object.__setattr__(self, "request_id", uuid.uuid4().hex)

    def has_live_input(self) -> bool:
        return bool(self.prompt.live_points()) or self.box is not None


@dataclass(frozen=True, eq=False)
class SegmentationResponse:
    mask: Mask
    prob: np.ndarray | None
    latency_ms: float
    request_id: str

    def __post_init__(self):
        if self.prob is not None:
            prob = np.asarray(self.prob, dtype=np.float64)
            if prob.shape != self.mask.bits.shape:
                raise ShapeMismatch("probability map must match the mask shape")
            if not np.array_equal((prob >= 0.5).astype(np.uint8), self.mask.bits):
                raise ProtocolError("mask must equal prob thresholded at 0.5")
            prob.setflags(write=False)
            object.__setattr__(self, "prob", prob)


def bbox_from_mask(mask: Mask, margin: int = 0) -> Box:
    """Tight inclusive bounds of the set pixels, expanded and clamped."""
    if mask.is_empty():
        raise EmptyMask("cannot bound an empty mask")
    rows = np.flatnonzero(mask.bits.any(axis=1))
    cols = np.flatnonzero(mask.bits.any(axis=0))
    r0 = max(0, int(rows[0]) - margin)
    r1 = min(mask.height - 1, int(rows[-1]) + margin)
    c0 = max(0, int(cols[0]) - margin)
    c1 = min(mask.width - 1, int(cols[-1]) + margin)
    return (r0, c0, r1, c1)


def _seed_pixels(
    prompt: PointPrompt, shape: tuple[int, int], box: Box | None
) -> list[tuple[int, int]]:
    """Rounded in-bounds foreground points in row-major order, deduplicated."""
    h, w = shape
    seeds = []
    for x, y in prompt.foreground_points():
        row, col = pixel_of(y), pixel_of(x)
        if not (0 <= row < h and 0 <= col < w):
            continue
        if box is not None and not (box[0] <= row <= box[2] and box[1] <= col <= box[3]):
            continue
        seeds.append((row, col))
    seen: set[tuple[int, int]] = set()
    ordered = []
    for rc in sorted(seeds):
        if rc not in seen:
            seen.add(rc)
            ordered.append(rc)
    return ordered


def _neighborhood_mean(intensities: np.ndarray, seeds: list[tuple[int, int]]) -> float:
    """Mean intensity over the seeds' clipped 3x3 neighborhoods.

    Every seed contributes its full neighborhood (repeats allowed), so each
    seed carries equal weight even when neighborhoods overlap.
    """
    h, w = intensities.shape
    values: list[float] = []
    for r, c in seeds:
        block = intensities[max(0, r - 1) : r + 2, max(0, c - 1) : c + 2]
        values.extend(block.ravel().tolist())
    return float(np.mean(values))


def reference_segment(
    image: ImageSlice,
    prompt: PointPrompt,
    box: Box | None = None,
    prior: Mask | None = None,
    tau: float = 0.1,
) -> tuple[Mask, np.ndarray]:
    """Intensity-band region growing from the prompt's foreground points.

    The admission band is centred on the pooled mean intensity around the
    seeds; growth is 4-connected, optionally constrained to a box, and seed
    pixels always belong to the output.  A prior mask contributes its
    in-band pixels as extra seeds so disconnected parts can persist.
    Background-labeled points carve out grown pixels that sit in their own
    intensity band and lie closer to a background point than to any
    foreground point.  The probability map is 0 outside the mask and an
    affine ramp over [0.5, 1] inside so thresholding at 0.5 recovers the
    mask exactly.
    """
    h, w = image.height, image.width
    if box is not None:
        r0, c0, r1, c1 = box
        box = (max(0, r0), max(0, c0), min(h - 1, r1), min(w - 1, c1))
        if box[0] > box[2] or box[1] > box[3]:
            raise ProtocolError("box lies outside the image")
    seeds = _seed_pixels(prompt, (h, w), box)
    if not seeds and box is not None:
        seeds = [((box[0] + box[2]) // 2, (box[1] + box[3]) // 2)]
    if not seeds:
        raise EmptyPrompt("no usable foreground points and no box")

    intensities = image.intensities
    mu = _neighborhood_mean(intensities, seeds)
    admissible = np.abs(intensities - mu) <= tau
    if box is not None:
        constraint = np.zeros((h, w), dtype=bool)
        constraint[box[0] : box[2] + 1, box[1] : box[3] + 1] = True
        admissible &= constraint

    if prior is not None:
        if prior.bits.shape != (h, w):
            raise ShapeMismatch("prior mask must match the image shape")
        prior_seeds = np.argwhere(prior.bits.astype(bool) & admissible)
        seeds = seeds + [tuple(rc) for rc in prior_seeds.tolist()]

    labels, _ = ndimage.label(admissible, structure=_FOUR_CONNECTED)
    seed_labels = {labels[r, c] for r, c in seeds if labels[r, c] != 0}
    grown = np.isin(labels, sorted(seed_labels)) if seed_labels else np.zeros((h, w), dtype=bool)
    for r, c in seeds:
        grown[r, c] = True  # seeds are kept even when outside the band

    bg_points = prompt.background_points()
    fg_points = prompt.foreground_points()
    if bg_points and fg_points and grown.any():
        grown = _subtract_background(intensities, grown, bg_points, fg_points, tau)
        for r, c in seeds:
            grown[r, c] = True

    prob = np.zeros((h, w), dtype=np.float64)
    if grown.any():
        band = np.maximum(0.0, 1.0 - np.abs(intensities[grown] - mu) / tau)
        prob[grown] = 0.5 + 0.5 * band
    return Mask(grown.astype(np.uint8), structure_label="none"), prob


def _subtract_background(
    intensities: np.ndarray,
    grown: np.ndarray,
    bg_points: list[tuple[float, float]],
    fg_points: list[tuple[float, float]],
    tau: float,
) -> np.ndarray:
    h, w = intensities.shape
    rows, cols = np.nonzero(grown)
    px = cols + 0.5
    py = rows + 0.5
    bg = np.asarray(bg_points, dtype=np.float64)
    fg = np.asarray(fg_points, dtype=np.float64)
    d_bg = ((px[:, None] - bg[None, :, 0]) ** 2 + (py[:, None] - bg[None, :, 1]) ** 2).min(axis=1)
    d_fg = ((px[:, None] - fg[None, :, 0]) ** 2 + (py[:, None] - fg[None, :, 1]) ** 2).min(axis=1)
    mu_bg = []
    for x, y in bg_points:
        r, c = pixel_of(y), pixel_of(x)
        if 0 <= r < h and 0 <= c < w:
            mu_bg.append(_neighborhood_mean(intensities, [(r, c)]))
    if not mu_bg:
        return grown
    vals = intensities[rows, cols]
    in_bg_band = np.zeros(vals.shape, dtype=bool)
    for m in mu_bg:
        in_bg_band |= np.abs(vals - m) <= tau
    remove = (d_bg < d_fg) & in_bg_band
    out = grown.copy()
    out[rows[remove], cols[remove]] = False
    return out


class ReferenceBackend:
    """Deterministic in-process backend; same request, same mask, always."""

    def __init__(self, tau: float = 0.1):
        if tau <= 0:
            raise ProtocolError("tau must be positive")
        self.tau = tau

    def describe(self) -> dict:
        return {"kind": "reference", "tau": self.tau}

    def segment(self, req: SegmentationRequest) -> SegmentationResponse:
        if req.image is None:
            raise ProtocolError("reference backend needs an inline image")
        if not req.has_live_input():
            raise EmptyPrompt("request carries no live points and no box")
        started = time.perf_counter()
        mask, prob = reference_segment(
            req.image, req.prompt, box=req.box, prior=req.prior_mask, tau=self.tau
        )
        latency_ms = (time.perf_counter() - started) * 1000.0
        return SegmentationResponse(
            mask=mask, prob=prob, latency_ms=latency_ms, request_id=req.request_id
        )


def serialize_request(req: SegmentationRequest, inline_image: bool = True) -> dict:
    """Canonical JSON body for POST /v1/segment."""
    body: dict[str, Any] = {
        "request_id": req.request_id,
        "case_id": req.case_id,
        "slice_index": req.slice_index,
        "image_png_b64": None,
        "points": [[x, y, lab] for x, y, lab in req.prompt.points],
        "box": list(req.box) if req.box is not None else None,
        "prior_mask": encode_rle(req.prior_mask) if req.prior_mask is not None else None,
    }
    if inline_image and req.image is not None:
        body["image_png_b64"] = array_to_png_b64(req.image.intensities)
    return body


def deserialize_request(body: dict) -> SegmentationRequest:
    """Rebuild a request from its wire body (image decoded when inline)."""
    points = body.get("points") or []
    prompt = PointPrompt(
        capacity=max(1, len(points)),
        points=tuple((float(p[0]), float(p[1]), int(p[2])) for p in points),
    )
    image = None
    if body.get("image_png_b64"):
        arr = png_b64_to_array(body["image_png_b64"])
        image = ImageSlice(
            arr,
            slice_index=int(body.get("slice_index") or 0),
            case_id=str(body.get("case_id") or "inline"),
        )
    box = tuple(int(v) for v in body["box"]) if body.get("box") is not None else None
    prior = decode_rle(body["prior_mask"]) if body.get("prior_mask") is not None else None
    return SegmentationRequest(
        prompt=prompt,
        image=image,
        case_id=body.get("case_id"),
        slice_index=body.get("slice_index"),
        box=box,  # type: ignore[arg-type]
        prior_mask=prior,
        request_id=str(body.get("request_id") or ""),
    )


def serialize_response(resp: SegmentationResponse) -> dict:
    return {
        "request_id": resp.request_id,
        "mask": encode_rle(resp.mask),
        "prob_png_b64": array_to_png_b64(resp.prob) if resp.prob is not None else None,
        "latency_ms": resp.latency_ms,
    }


def deserialize_response(body: dict) -> SegmentationResponse:
    try:
        mask = decode_rle(body["mask"])
        prob = png_b64_to_array(body["prob_png_b64"]) if body.get("prob_png_b64") else None
        return SegmentationResponse(
            mask=mask,
            prob=prob,
            latency_ms=float(body["latency_ms"]),
            request_id=str(body["request_id"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ProtocolError(f"malformed response body: {exc}") from exc


class RemoteBackend:
    """Blocking HTTP client for a backend serving POST /v1/segment."""

    def __init__(
        self,
        base_url: str,
        timeout_s: float = 10.0,
        client: httpx.Client | None = None,
        inline_image: bool = True,
    ):
        self.base_url = base_url.rstrip("/")
        self.timeout_s = timeout_s
        self.inline_image = inline_image
        self._client = client

    def describe(self) -> dict:
        return {"kind": "remote", "url": self.base_url, "timeout_s": self.timeout_s}

    def _post(self, body: dict) -> httpx.Response:
        url = f"{self.base_url}/v1/segment"
        try:
            if self._client is not None:
                # injected clients (tests, pooled transports) own their timeout
                return self._client.post(url, json=body)
            with httpx.Client(timeout=self.timeout_s) as client:
                return client.post(url, json=body)
        except (httpx.ConnectError, httpx.TimeoutException, httpx.NetworkError) as exc:
            raise BackendUnavailable(f"backend at {self.base_url} unreachable: {exc}") from exc

    def segment(self, req: SegmentationRequest) -> SegmentationResponse:
        body = serialize_request(req, inline_image=self.inline_image)
        resp = self._post(body)
        if resp.status_code == 400:
            try:
                err = resp.json()
            except ValueError as exc:
                raise ProtocolError(f"unparseable error body: {exc}") from exc
            if err.get("error") == "empty_prompt":
                raise EmptyPrompt(err.get("detail", ""))
            raise ProtocolError(f"{err.get('error')}: {err.get('detail')}")
        if resp.status_code != 200:
            raise BackendUnavailable(f"backend returned HTTP {resp.status_code}")
        try:
            payload = resp.json()
        except ValueError as exc:
            raise ProtocolError(f"response is not JSON: {exc}") from exc
        parsed = deserialize_response(payload)
        if parsed.request_id != req.request_id:
            raise ProtocolError(
                f"response echoes request_id {parsed.request_id!r}, sent {req.request_id!r}"
            )
        return parsed
