"""FastAPI app implementing POST /v1/segment and GET /v1/health over an
inference engine, with one cached embedding per (case_id, slice_index)."""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass

import numpy as np
from fastapi import FastAPI
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .engine import SegmentEngine
from .wire import WireError, array_to_png_b64, decode_rle, encode_rle, png_b64_to_array


@dataclass
class AdapterConfig:
    capacity: int = 20  # prompt slot count; must match the strategy side
    supports_prior_mask: bool = True
    emit_prob: bool = True

    def __post_init__(self):
        if not 1 <= self.capacity <= 50:
            raise ValueError("capacity must lie in 1..50")


class RleModel(BaseModel):
    size: list[int] = Field(min_length=2, max_length=2)
    rle: list[int] = Field(min_length=1)


class SegmentRequestModel(BaseModel):
    request_id: str
    case_id: str | None = None
    slice_index: int | None = None
    image_png_b64: str | None = None
    points: list[list[float]] = Field(default_factory=list)
    box: list[int] | None = Field(default=None, min_length=4, max_length=4)
    prior_mask: RleModel | None = None


def create_app(engine: SegmentEngine | None, config: AdapterConfig | None = None) -> FastAPI:
    """Build the sidecar app.  A None engine means the checkpoint is still
    loading: /v1/segment answers 503 until `app.state.engine` is set."""
    config = config or AdapterConfig()
    app = FastAPI(title="medsam adapter", version="0.1.0")
    app.state.engine = engine
    app.state.config = config
    cache: dict[tuple[str, int], object] = {}
    cache_lock = threading.Lock()  # one in-flight inference per device

    def error(code: str, detail: str, status: int = 400) -> JSONResponse:
        return JSONResponse(status_code=status, content={"error": code, "detail": detail})

    @app.get("/v1/health")
    def health() -> dict:
        ready = app.state.engine is not None
        return {
            "status": "ok" if ready else "loading",
            "capacity": config.capacity,
            "prior_mask": config.supports_prior_mask,
        }

    @app.post("/v1/segment")
    def segment(body: SegmentRequestModel):
        if app.state.engine is None:
            return error("loading", "checkpoint is still loading", status=503)
        if len(body.points) > config.capacity:
            return error(
                "capacity_mismatch",
                f"{len(body.points)} points exceed the prompt capacity {config.capacity}",
            )
        points = []
        for entry in body.points:
            if len(entry) != 3:
                return error("bad_point", f"point {entry!r} is not [x, y, label]")
            x, y, lab = float(entry[0]), float(entry[1]), int(entry[2])
            if lab not in (1, 0, -1):
                return error("bad_label", f"label {lab} outside {{1, 0, -1}}")
            points.append((x, y, lab))
        live = [p for p in points if p[2] != -1]
        box = tuple(int(v) for v in body.box) if body.box is not None else None
        if box is not None and (box[0] > box[2] or box[1] > box[3]):
            return error("bad_box", "box corners must be ordered")
        if not live and box is None:
            return error("empty_prompt", "no live points and no box")

        prior = None
        if body.prior_mask is not None:
            if not config.supports_prior_mask:
                return error("prior_unsupported", "this adapter serves a no-prior checkpoint")
            try:
                prior = decode_rle(body.prior_mask.model_dump())
            except WireError as exc:
                return error("bad_rle", str(exc))

        try:
            if body.image_png_b64:
                image = png_b64_to_array(body.image_png_b64)
                key = (body.case_id or "inline", int(body.slice_index or 0))
            else:
                return error("missing_image", "adapter requests must inline image_png_b64")
        except WireError as exc:
            return error("bad_png", str(exc))
        if prior is not None and prior.shape != image.shape:
            return error("bad_rle", "prior mask shape disagrees with the image")

        started = time.perf_counter()
        with cache_lock:
            embedding = cache.get(key)
            if embedding is None or body.case_id is None:
                embedding = app.state.engine.embed(image)
                if body.case_id is not None:
                    cache[key] = embedding
            mask, prob = app.state.engine.decode(embedding, points, box, prior)
        latency_ms = (time.perf_counter() - started) * 1000.0
        mask = np.asarray(mask, dtype=np.uint8)
        return {
            "request_id": body.request_id,
            "mask": encode_rle(mask),
            "prob_png_b64": array_to_png_b64(np.asarray(prob)) if config.emit_prob else None,
            "latency_ms": latency_ms,
        }

    return app
