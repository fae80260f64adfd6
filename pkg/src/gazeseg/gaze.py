"""Screen-to-image mapping, dispersion-threshold fixation detection, and
synthetic dwell/jitter gaze streams."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .core import GazeSample, GazeStream
from .errors import CorruptLog, InvalidParam

GAZE_SOURCES = ("synthetic", "mouse-proxy", "tracker")


@dataclass(frozen=True)
class Viewport:
    """Affine mapping between screen pixels and image pixels."""

    offset_x: float = 0.0
    offset_y: float = 0.0
    scale: float = 1.0
    display_density: float = 7.21  # px/mm, informational only

    def __post_init__(self):
        if self.scale <= 0:
            raise InvalidParam("viewport scale must be positive")

    def to_dict(self) -> dict:
        return {
            "offset_x": self.offset_x,
            "offset_y": self.offset_y,
            "scale": self.scale,
            "display_density": self.display_density,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "Viewport":
        return cls(
            offset_x=float(obj.get("offset_x", 0.0)),
            offset_y=float(obj.get("offset_y", 0.0)),
            scale=float(obj.get("scale", 1.0)),
            display_density=float(obj.get("display_density", 7.21)),
        )


@dataclass(frozen=True)
class Fixation:
    """A stationary-gaze interval summarized by its centroid."""

    cx: float
    cy: float
    start_t: float
    end_t: float
    sample_count: int

    def __post_init__(self):
        if self.end_t < self.start_t or self.sample_count < 1:
            raise InvalidParam("fixation must span >= 0 ms and >= 1 sample")


def map_screen_to_image(
    sample: GazeSample, vp: Viewport, bounds: tuple[int, int]
) -> GazeSample:
    """Map a screen-space sample into image space, flagging out-of-image points."""
    h, w = bounds
    x = (sample.x - vp.offset_x) / vp.scale
    y = (sample.y - vp.offset_y) / vp.scale
    return GazeSample(x=x, y=y, t=sample.t, in_image=(0 <= x < w and 0 <= y < h))


def map_image_to_screen(x: float, y: float, vp: Viewport) -> tuple[float, float]:
    """Inverse of map_screen_to_image for coordinates."""
    return (x * vp.scale + vp.offset_x, y * vp.scale + vp.offset_y)


def _dispersion(xs: Sequence[float], ys: Sequence[float]) -> float:
    return (max(xs) - min(xs)) + (max(ys) - min(ys))


def detect_fixations(
    stream: GazeStream, dispersion_px: float = 30.0, min_duration_ms: float = 100.0
) -> list[Fixation]:
    """Dispersion-threshold (I-DT) fixation grouping.

    Maximal sample windows whose x-spread plus y-spread stays within
    dispersion_px for at least min_duration_ms become fixations.  Only
    in-image samples participate; an out-of-image sample breaks a window.
    """
    if dispersion_px <= 0 or min_duration_ms <= 0:
        raise InvalidParam("dispersion and minimum duration must be positive")

    fixations: list[Fixation] = []
    run: list[GazeSample] = []
    for sample in list(stream.samples) + [None]:  # type: ignore[list-item]
        if sample is not None and sample.in_image:
            run.append(sample)
            continue
        if run:
            fixations.extend(_idt_run(run, dispersion_px, min_duration_ms))
            run = []
    return fixations


def _idt_run(
    run: list[GazeSample], dispersion_px: float, min_duration_ms: float
) -> list[Fixation]:
    out: list[Fixation] = []
    n = len(run)
    i = 0
    while i < n:
        j = i
        while j + 1 < n and run[j].t - run[i].t < min_duration_ms:
            j += 1
        if run[j].t - run[i].t < min_duration_ms:
            break  # remaining tail cannot reach the duration floor
        xs = [s.x for s in run[i : j + 1]]
        ys = [s.y for s in run[i : j + 1]]
        if _dispersion(xs, ys) <= dispersion_px:
            while j + 1 < n:
                nxt = run[j + 1]
                if _dispersion(xs + [nxt.x], ys + [nxt.y]) > dispersion_px:
                    break
                xs.append(nxt.x)
                ys.append(nxt.y)
                j += 1
            members = run[i : j + 1]
            out.append(
                Fixation(
                    cx=sum(xs) / len(xs),
                    cy=sum(ys) / len(ys),
                    start_t=members[0].t,
                    end_t=members[-1].t,
                    sample_count=len(members),
                )
            )
            i = j + 1
        else:
            i += 1
    return out


def synthesize_gaze_noise(
    points: Sequence[tuple[float, float]],
    jitter_std: float,
    rate_hz: float = 90.0,
    dwell_ms: float = 100.0,
    rng: np.random.Generator | None = None,
    start_t: float = 0.0,
) -> GazeStream:
    """Emit a dwell of jittered samples around each target point.

    Each point produces dwell_ms * rate_hz / 1000 samples with isotropic
    Gaussian jitter, spaced 1000 / rate_hz ms apart, timestamps continuing
    across points.
    """
    if rate_hz <= 0 or dwell_ms <= 0 or jitter_std < 0:
        raise InvalidParam("rate, dwell and jitter must be positive")
    if rng is None:
        rng = np.random.default_rng(0)
    per_point = int(round(dwell_ms * rate_hz / 1000.0))
    dt = 1000.0 / rate_hz
    samples: list[GazeSample] = []
    t = start_t
    for x, y in points:
        for _ in range(per_point):
            jx, jy = (rng.normal(0.0, jitter_std, size=2) if jitter_std > 0 else (0.0, 0.0))
            samples.append(GazeSample(x=x + jx, y=y + jy, t=t))
            t += dt
    return GazeStream(samples=tuple(samples), source="synthetic")


def write_gaze_log(path: str | Path, stream: GazeStream) -> None:
    """One JSON object per line: {"t": ms, "x": float, "y": float, "src": source}."""
    with open(path, "w", encoding="utf-8") as fh:
        for s in stream.samples:
            fh.write(
                json.dumps({"t": s.t, "x": s.x, "y": s.y, "src": stream.source}) + "\n"
            )


def read_gaze_log(path: str | Path) -> GazeStream:
    samples: list[GazeSample] = []
    source = "tracker"
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                samples.append(GazeSample(x=float(obj["x"]), y=float(obj["y"]), t=float(obj["t"])))
                source = obj.get("src", source)
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise CorruptLog(f"bad gaze log line {line_no}: {exc}") from exc
    if source not in GAZE_SOURCES:
        source = "tracker"
    return GazeStream(samples=tuple(samples), source=source)
