"""Iterative gaze-selection strategies that turn accumulated gaze into the
next fixed-capacity point prompt."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .core import FOREGROUND, PointPrompt
from .errors import EmptyInput, InsufficientPoints, InvalidParam, NoFixations
from .gaze import Fixation

STRATEGY_KINDS = (
    "accumulate_sample",
    "linear_combo",
    "incremental",
    "fixation_replace",
    "fixation_accumulate",
)
LABEL_MODES = ("fixed_ones", "random_binary")
CAPACITY_MODES = ("fixed", "random_1_to_20")
POINT_SOURCES = ("samples", "fixations")


@dataclass(frozen=True)
class StrategyConfig:
    kind: str = "accumulate_sample"
    capacity: int = 20
    alpha: float = 0.6  # linear_combo: weight on the previous iteration's point
    k: int = 2  # incremental: points appended per iteration
    label_mode: str = "fixed_ones"
    send_prior_mask: bool = False
    capacity_mode: str = "fixed"
    source: str = "samples"  # live-session point source for non-fixation kinds
    use_out_of_image: bool = False
    fixation_dispersion_px: float = 30.0
    fixation_min_duration_ms: float = 100.0

    def __post_init__(self):
        if self.kind not in STRATEGY_KINDS:
            raise InvalidParam(f"unknown strategy kind {self.kind!r}")
        if not 1 <= self.capacity <= 50:
            raise InvalidParam("capacity must lie in 1..50")
        if not 0.0 <= self.alpha <= 1.0:
            raise InvalidParam("alpha must lie in [0, 1]")
        if self.k < 1:
            raise InvalidParam("k must be >= 1")
        if self.label_mode not in LABEL_MODES:
            raise InvalidParam(f"unknown label mode {self.label_mode!r}")
        if self.capacity_mode not in CAPACITY_MODES:
            raise InvalidParam(f"unknown capacity mode {self.capacity_mode!r}")
        if self.source not in POINT_SOURCES:
            raise InvalidParam(f"unknown point source {self.source!r}")

    def describe(self) -> str:
        """Stable strategy label used in result tables."""
        if self.kind == "linear_combo":
            return f"linear_combo(alpha={self.alpha:g})"
        if self.kind == "incremental":
            return f"incremental(k={self.k})"
        return self.kind

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "capacity": self.capacity,
            "alpha": self.alpha,
            "k": self.k,
            "label_mode": self.label_mode,
            "send_prior_mask": self.send_prior_mask,
            "capacity_mode": self.capacity_mode,
            "source": self.source,
            "use_out_of_image": self.use_out_of_image,
            "fixation_dispersion_px": self.fixation_dispersion_px,
            "fixation_min_duration_ms": self.fixation_min_duration_ms,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "StrategyConfig":
        known = {f: obj[f] for f in cls.__dataclass_fields__ if f in obj}
        return cls(**known)


class StrategyState:
    """Per-structure mutable state: gaze history, last prompt, iteration, rng.

    The history buffer is a preallocated, doubling float array so a prompt
    step over a long session stays sub-millisecond.
    """

    def __init__(self, config: StrategyConfig, seed: int):
        self.config = config
        self.rng = np.random.default_rng(seed)
        self.iteration = 0
        self.previous_prompt: PointPrompt | None = None
        self._hist = np.empty((256, 2), dtype=np.float64)
        self._hist_iter = np.empty(256, dtype=np.int64)
        self._hist_len = 0
        if config.capacity_mode == "random_1_to_20":
            # One live-point budget per structure, drawn before any prompt.
            self.live_cap = int(self.rng.integers(1, 21))
        else:
            self.live_cap = config.capacity

    @property
    def history_len(self) -> int:
        return self._hist_len

    def history_view(self) -> np.ndarray:
        return self._hist[: self._hist_len]

    def record(self, points: Sequence[tuple[float, float]]) -> None:
        n = len(points)
        if n == 0:
            return
        need = self._hist_len + n
        if need > self._hist.shape[0]:
            grow = max(need, self._hist.shape[0] * 2)
            new = np.empty((grow, 2), dtype=np.float64)
            new[: self._hist_len] = self._hist[: self._hist_len]
            self._hist = new
            new_it = np.empty(grow, dtype=np.int64)
            new_it[: self._hist_len] = self._hist_iter[: self._hist_len]
            self._hist_iter = new_it
        self._hist[self._hist_len : need] = np.asarray(points, dtype=np.float64)
        self._hist_iter[self._hist_len : need] = self.iteration
        self._hist_len = need

    def _sample_history(self, m: int) -> np.ndarray:
        m = min(m, self._hist_len)
        idx = self.rng.choice(self._hist_len, size=m, replace=False)
        return self._hist[idx]


def label_points(
    points: Sequence[tuple[float, float]], mode: str, rng: np.random.Generator
) -> list[int]:
    """Assign prompt labels: all-foreground, or a fair coin per point."""
    if mode == "fixed_ones":
        return [FOREGROUND] * len(points)
    if mode == "random_binary":
        return [int(b) for b in rng.integers(0, 2, size=len(points))]
    raise InvalidParam(f"unknown label mode {mode!r}")


def _finish(state: StrategyState, pts: np.ndarray | list) -> PointPrompt:
    coords = [(float(x), float(y)) for x, y in np.asarray(pts).reshape(-1, 2)]
    labels = label_points(coords, state.config.label_mode, state.rng)
    prompt = PointPrompt.build(coords, labels, state.config.capacity)
    state.previous_prompt = prompt
    state.iteration += 1
    return prompt


def next_prompt_accumulate(
    state: StrategyState, new_points: Sequence[tuple[float, float]]
) -> PointPrompt:
    """Pool every point seen so far, then sample the budget without replacement."""
    state.record(new_points)
    return _finish(state, state._sample_history(state.live_cap))


def next_prompt_linear(
    state: StrategyState, new_points: Sequence[tuple[float, float]]
) -> PointPrompt:
    """Blend each fresh point with its nearest point from the previous prompt.

    The previous point is weighted alpha, the fresh point (1 - alpha); the
    first iteration passes the fresh points through untouched.
    """
    if len(new_points) == 0:
        raise EmptyInput("linear combination needs at least one new point")
    state.record(new_points)
    cur = np.asarray(new_points, dtype=np.float64)[: state.live_cap]
    if state.iteration == 0 or state.previous_prompt is None:
        return _finish(state, cur)
    prev_live = [(x, y) for x, y, _ in state.previous_prompt.live_points()]
    if not prev_live:
        return _finish(state, cur)
    prev = np.asarray(prev_live, dtype=np.float64)
    # Nearest previous point per current point; argmin takes the lowest index on ties.
    d2 = ((cur[:, None, :] - prev[None, :, :]) ** 2).sum(axis=2)
    matched = prev[np.argmin(d2, axis=1)]
    alpha = state.config.alpha
    return _finish(state, alpha * matched + (1.0 - alpha) * cur)


def next_prompt_incremental(
    state: StrategyState, new_points: Sequence[tuple[float, float]]
) -> PointPrompt:
    """Grow the prompt by k points per iteration up to the live-point cap,
    subsampling uniformly once the accumulated set exceeds it."""
    k = state.config.k
    if len(new_points) < k:
        raise InsufficientPoints(f"need {k} points per iteration, got {len(new_points)}")
    state.record(list(new_points)[:k])
    if state._hist_len <= state.live_cap:
        live = state.history_view().copy()
    else:
        live = state._sample_history(state.live_cap)
    return _finish(state, live)


def next_prompt_fixation(
    state: StrategyState, fixations: Sequence[Fixation], mode: str
) -> PointPrompt:
    """Prompt from fixation centroids: resample the current window with
    replacement, or accumulate centroids across iterations."""
    if mode not in ("replace", "accumulate"):
        raise InvalidParam(f"unknown fixation mode {mode!r}")
    if len(fixations) == 0:
        raise NoFixations("no fixations in the current window")
    centroids = [(f.cx, f.cy) for f in fixations]
    if mode == "replace":
        state.record(centroids)
        idx = state.rng.integers(0, len(centroids), size=state.live_cap)
        chosen = [centroids[i] for i in idx]
        return _finish(state, chosen)
    state.record(centroids)
    return _finish(state, state._sample_history(state.live_cap))


def next_prompt(
    state: StrategyState,
    new_points: Sequence[tuple[float, float]] | None = None,
    fixations: Sequence[Fixation] | None = None,
) -> PointPrompt:
    """Dispatch on the configured strategy kind."""
    kind = state.config.kind
    if kind == "accumulate_sample":
        return next_prompt_accumulate(state, new_points or [])
    if kind == "linear_combo":
        return next_prompt_linear(state, new_points or [])
    if kind == "incremental":
        return next_prompt_incremental(state, new_points or [])
    if kind == "fixation_replace":
        return next_prompt_fixation(state, fixations or [], "replace")
    if kind == "fixation_accumulate":
        return next_prompt_fixation(state, fixations or [], "accumulate")
    raise InvalidParam(f"unknown strategy kind {kind!r}")
