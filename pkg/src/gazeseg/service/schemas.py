"""Pydantic models for the HTTP wire protocol."""

from __future__ import annotations

from pydantic import BaseModel, Field


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


class SegmentResponseModel(BaseModel):
    request_id: str
    mask: RleModel
    prob_png_b64: str | None = None
    latency_ms: float


class ErrorModel(BaseModel):
    error: str
    detail: str = ""
