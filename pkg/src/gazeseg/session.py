"""Live interactive-correction sessions: a serialized per-session state
machine that buffers gaze, recomputes masks on a cadence, logs every event,
and can be replayed deterministically from its log."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .backend import SegmentationRequest
from .core import GazeSample, GazeStream, Mask, decode_rle, empty_mask_like, encode_rle
from .dataio import CorpusCase
from .errors import (
    CorruptLog,
    EmptyPrompt,
    NoFixations,
    ProtocolError,
    WorkbenchError,
)
from .gaze import Viewport, detect_fixations, map_screen_to_image
from .harness import derive_seed
from .metrics import aggregate, dice
from .pngio import array_to_png_b64
from .strategy import StrategyConfig, StrategyState, next_prompt

PROTO_VERSION = 1
PHASES = ("idle", "loaded", "segmenting", "finalized")


@dataclass(frozen=True)
class SessionEvent:
    t: float  # ms since session start, strictly increasing
    kind: str  # gaze | prompt | mask | key | load | finalize | error
    payload: dict

    def to_json(self) -> str:
        return json.dumps({"t": self.t, "kind": self.kind, "payload": self.payload})


@dataclass
class SessionConfig:
    cadence_ms: float = 200.0
    evaluation_mode: bool = True  # stream dice when reference masks exist
    session_seed: int = 0
    default_strategy: StrategyConfig = field(default_factory=StrategyConfig)
    viewport: Viewport = field(default_factory=Viewport)
    allow_manual_tick: bool = False  # test hook: accept {"type": "tick"}


class CaseStore:
    """Read-only lookup from (case_id, slice_index) to slice and masks."""

    def __init__(self, corpus: Sequence[CorpusCase]):
        self._by_key: dict[tuple[str, int], CorpusCase] = {}
        for case in corpus:
            self._by_key[(case.case_id, case.image.slice_index)] = case

    def get(self, case_id: str, slice_index: int) -> CorpusCase | None:
        return self._by_key.get((case_id, slice_index))

    def case_ids(self) -> list[str]:
        return sorted({cid for cid, _ in self._by_key})


def _now_ms() -> float:
    return time.monotonic() * 1000.0


class Session:
    """One interactive session; all methods must be called from a single
    logical executor so event ordering is total."""

    def __init__(
        self,
        store: CaseStore,
        backend,
        config: SessionConfig | None = None,
        clock: Callable[[], float] = _now_ms,
        log_sink: Callable[[SessionEvent], None] | None = None,
    ):
        self.store = store
        self.backend = backend
        self.config = config or SessionConfig()
        self._clock = clock
        self._t0 = clock()
        self._last_t = -1.0
        self.log: list[SessionEvent] = []
        self._log_sink = log_sink

        self.phase = "idle"
        self.case: CorpusCase | None = None
        self.viewport = self.config.viewport
        self.structure: str | None = None
        self.mode = "gaze"
        self.strategy_state: StrategyState | None = None
        self.gaze_buffer: list[GazeSample] = []
        self.current_mask: Mask | None = None
        self.iteration = 0  # recompute counter, monotone across the session
        self.structure_started_ms: float | None = None
        self.timings: dict[str, float] = {}

    # -- event log ---------------------------------------------------------

    def _log(self, kind: str, payload: dict) -> None:
        t = self._clock() - self._t0
        if t <= self._last_t:
            t = self._last_t + 0.001  # keep the log strictly ordered
        self._last_t = t
        event = SessionEvent(t=t, kind=kind, payload=payload)
        self.log.append(event)
        if self._log_sink is not None:
            self._log_sink(event)

    # -- message handling ----------------------------------------------------

    def handle_message(self, msg: dict) -> list[dict]:
        """Process one client message; every message is logged before any
        response is produced, and errors leave the state unchanged."""
        try:
            if not isinstance(msg, dict) or "type" not in msg:
                raise ProtocolError("message must be an object with a 'type'")
            mtype = msg["type"]
            if mtype == "hello":
                return self._on_hello(msg)
            if mtype == "load_case":
                return self._on_load_case(msg)
            if mtype == "start_structure":
                return self._on_start_structure(msg)
            if mtype == "gaze":
                return self._on_gaze(msg)
            if mtype == "box":
                return self._on_box(msg)
            if mtype == "key":
                return self._on_key(msg)
            if mtype == "tick" and self.config.allow_manual_tick:
                return self.recompute_tick()
            raise ProtocolError(f"unknown message type {mtype!r}")
        except WorkbenchError as exc:
            self._log("error", {"code": exc.code, "detail": str(exc)})
            return [{"type": "error", "code": exc.code, "detail": str(exc)}]

    def _on_hello(self, msg: dict) -> list[dict]:
        if msg.get("proto") != PROTO_VERSION:
            raise ProtocolError(f"protocol version {msg.get('proto')} unsupported")
        self._log("load", {"what": "hello", "client": msg.get("client", "unknown")})
        return []

    def _on_load_case(self, msg: dict) -> list[dict]:
        if self.phase == "segmenting":
            raise ProtocolError("cannot load a case while segmenting")
        case_id = msg.get("case_id")
        slice_index = int(msg.get("slice_index", 0))
        case = self.store.get(case_id, slice_index) if case_id else None
        if case is None:
            raise ProtocolError(f"case_not_found: {case_id}/{slice_index}")
        viewport = (
            Viewport.from_dict(msg["viewport"]) if "viewport" in msg else self.config.viewport
        )
        self._log(
            "load",
            {"what": "case", "case_id": case_id, "slice_index": slice_index,
             "viewport": viewport.to_dict()},
        )
        self.case = case
        self.viewport = viewport
        self.phase = "loaded"
        self.structure = None
        self.current_mask = None
        return [
            {
                "type": "case_loaded",
                "image_png_b64": array_to_png_b64(case.image.intensities),
                "H": case.image.height,
                "W": case.image.width,
                "viewport": viewport.to_dict(),
            }
        ]

    def _on_start_structure(self, msg: dict) -> list[dict]:
        if self.phase not in ("loaded", "finalized") or self.case is None:
            raise ProtocolError(f"cannot start a structure in phase {self.phase!r}")
        structure = msg.get("structure")
        if structure is None or self.case.mask_for(structure) is None:
            raise ProtocolError(f"structure_not_found: {structure}")
        mode = msg.get("mode", "gaze")
        if mode not in ("gaze", "bbox"):
            raise ProtocolError(f"unknown mode {mode!r}")
        cfg = (
            StrategyConfig.from_dict(msg["strategy"])
            if "strategy" in msg
            else self.config.default_strategy
        )
        seed = derive_seed(self.config.session_seed, self.case.case_id, structure)
        self._log(
            "load",
            {"what": "structure", "structure": structure, "mode": mode,
             "strategy": cfg.to_dict(), "seed": seed},
        )
        self.structure = structure
        self.mode = mode
        self.strategy_state = StrategyState(cfg, seed)
        self.gaze_buffer = []
        self.current_mask = None
        self.phase = "segmenting"
        self.structure_started_ms = self._last_t
        return []

    def _on_gaze(self, msg: dict) -> list[dict]:
        if self.phase != "segmenting":
            raise ProtocolError(f"gaze not accepted in phase {self.phase!r}")
        samples = msg.get("samples")
        if not isinstance(samples, list):
            raise ProtocolError("gaze message needs a 'samples' list")
        self._log("gaze", {"samples": samples})
        if self.mode != "gaze":
            return []  # logged for analytics, never prompts in bbox mode
        assert self.case is not None
        bounds = (self.case.image.height, self.case.image.width)
        for entry in samples:
            t, x, y = float(entry[0]), float(entry[1]), float(entry[2])
            mapped = map_screen_to_image(GazeSample(x=x, y=y, t=t), self.viewport, bounds)
            self.gaze_buffer.append(mapped)
        return []

    def _on_box(self, msg: dict) -> list[dict]:
        if self.phase != "segmenting" or self.mode != "bbox":
            raise ProtocolError("box prompts need an active bbox-mode structure")
        try:
            box = (int(msg["r0"]), int(msg["c0"]), int(msg["r1"]), int(msg["c1"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError(f"malformed box message: {exc}") from exc
        if box[0] == box[2] and box[1] == box[3]:
            raise ProtocolError("degenerate box")
        return self.bbox_mode_segment(box)

    def bbox_mode_segment(self, box: tuple[int, int, int, int]) -> list[dict]:
        """Single box-prompted backend call; the comparison baseline mode."""
        assert self.case is not None and self.strategy_state is not None
        capacity = self.strategy_state.config.capacity
        from .core import PointPrompt

        prompt = PointPrompt.build([], [], capacity)
        self._log("prompt", {"what": "box", "iteration": self.iteration + 1, "box": list(box)})
        req = SegmentationRequest(
            prompt=prompt, image=self.case.image, case_id=self.case.case_id, box=box,
            request_id=f"sess:{self.iteration + 1}",
        )
        try:
            resp = self.backend.segment(req)
        except WorkbenchError as exc:
            self._log("error", {"code": exc.code, "detail": str(exc)})
            return [{"type": "error", "code": exc.code, "detail": str(exc)}]
        self.iteration += 1
        self.current_mask = resp.mask
        return [self._mask_message(resp.mask, resp.latency_ms)]

    def _mask_message(self, mask: Mask, latency_ms: float) -> dict:
        score = self._current_dice(mask)
        rle = encode_rle(mask)
        self._log(
            "mask",
            {"iteration": self.iteration, "rle": rle, "dice": score, "latency_ms": latency_ms},
        )
        return {
            "type": "mask",
            "iteration": self.iteration,
            "rle": rle,
            "dice": score if self.config.evaluation_mode else None,
            "latency_ms": latency_ms,
        }

    def _current_dice(self, mask: Mask) -> float | None:
        if self.case is None or self.structure is None:
            return None
        gt = self.case.mask_for(self.structure)
        if gt is None:
            return None
        return dice(mask, gt)

    def _on_key(self, msg: dict) -> list[dict]:
        name = msg.get("name")
        if name != "Enter":
            raise ProtocolError(f"unknown key {name!r}")
        if self.phase != "segmenting":
            raise ProtocolError(f"Enter not accepted in phase {self.phase!r}")
        self._log("key", {"name": "Enter"})
        assert self.case is not None and self.structure is not None
        elapsed = self._last_t - (self.structure_started_ms or 0.0)
        final = self.current_mask or empty_mask_like(
            self.case.image.height, self.case.image.width
        )
        score = self._current_dice(final)
        self.timings[self.structure] = elapsed
        self._log(
            "finalize",
            {"structure": self.structure, "elapsed_ms": elapsed, "dice": score},
        )
        self.phase = "finalized"
        return [
            {
                "type": "done",
                "elapsed_ms": elapsed,
                "final_rle": encode_rle(final),
                "dice": score if self.config.evaluation_mode else None,
            }
        ]

    # -- recompute loop ------------------------------------------------------

    def recompute_tick(self) -> list[dict]:
        """Drain the gaze buffer into the strategy and refresh the mask.

        No-op outside gaze-mode segmenting or with an empty buffer; backend
        failures are logged and the previous mask is kept.
        """
        if self.phase != "segmenting" or self.mode != "gaze":
            return []
        if not self.gaze_buffer:
            return []
        assert self.case is not None and self.strategy_state is not None
        drained, self.gaze_buffer = self.gaze_buffer, []
        cfg = self.strategy_state.config

        new_points: list[tuple[float, float]] = []
        fixations = None
        if cfg.kind in ("fixation_replace", "fixation_accumulate") or cfg.source == "fixations":
            stream = GazeStream(samples=tuple(drained), source="tracker")
            fixations = detect_fixations(
                stream, cfg.fixation_dispersion_px, cfg.fixation_min_duration_ms
            )
            new_points = [(f.cx, f.cy) for f in fixations]
        else:
            usable = drained if cfg.use_out_of_image else [s for s in drained if s.in_image]
            new_points = [(s.x, s.y) for s in usable]
        if not new_points and not fixations:
            return []

        try:
            prompt = next_prompt(self.strategy_state, new_points=new_points, fixations=fixations)
        except NoFixations as exc:
            self._log("error", {"code": exc.code, "detail": str(exc)})
            return []
        self._log(
            "prompt",
            {
                "what": "points",
                "iteration": self.iteration + 1,
                "new_points": [[x, y] for x, y in new_points],
                "points": [[x, y, lab] for x, y, lab in prompt.points],
            },
        )
        req = SegmentationRequest(
            prompt=prompt,
            image=self.case.image,
            case_id=self.case.case_id,
            prior_mask=self.current_mask if cfg.send_prior_mask else None,
            request_id=f"sess:{self.iteration + 1}",
        )
        try:
            resp = self.backend.segment(req)
        except WorkbenchError as exc:
            self._log("error", {"code": exc.code, "detail": str(exc)})
            return [{"type": "error", "code": exc.code, "detail": str(exc)}]
        self.iteration += 1
        self.current_mask = resp.mask
        return [self._mask_message(resp.mask, resp.latency_ms)]


# -- log persistence and replay ----------------------------------------------


def write_session_log(path: str | Path, events: Iterable[SessionEvent]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for event in events:
            fh.write(event.to_json() + "\n")


def read_session_log(path: str | Path) -> list[SessionEvent]:
    events: list[SessionEvent] = []
    last_t = float("-inf")
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                event = SessionEvent(t=float(obj["t"]), kind=str(obj["kind"]), payload=obj["payload"])
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise CorruptLog(f"line {line_no}: {exc}") from exc
            if event.t <= last_t:
                raise CorruptLog(f"line {line_no}: timestamps not strictly increasing")
            last_t = event.t
            events.append(event)
    return events


def replay_session(
    events: Sequence[SessionEvent],
    backend,
    store: CaseStore,
) -> dict:
    """Re-execute the strategy and backend calls recorded in a session log.

    With the same seed and backend every regenerated prompt and mask must
    match the log bit-for-bit; the report carries per-structure dice
    trajectories and wall times plus their mean/std.
    """
    case: CorpusCase | None = None
    state: StrategyState | None = None
    structure: str | None = None
    structure_start: float | None = None
    structures: list[dict] = []
    trajectory: list[float | None] = []
    prompt_mismatches = 0
    mask_mismatches = 0
    pending_mask: Mask | None = None
    current_mask: Mask | None = None

    def close_structure(end_t: float, payload: dict) -> None:
        nonlocal structure, structure_start, trajectory
        structures.append(
            {
                "structure": structure,
                "elapsed_ms": payload.get("elapsed_ms", end_t - (structure_start or 0.0)),
                "dice_trajectory": trajectory,
                "final_dice": payload.get("dice"),
            }
        )
        structure = None
        structure_start = None
        trajectory = []

    for event in events:
        kind, payload = event.kind, event.payload
        if kind == "load" and payload.get("what") == "case":
            got = store.get(payload["case_id"], int(payload.get("slice_index", 0)))
            if got is None:
                raise CorruptLog(f"log references unknown case {payload.get('case_id')!r}")
            case = got
        elif kind == "load" and payload.get("what") == "structure":
            if case is None:
                raise CorruptLog("structure start before any case load")
            structure = payload["structure"]
            state = StrategyState(StrategyConfig.from_dict(payload["strategy"]), int(payload["seed"]))
            structure_start = event.t
            trajectory = []
            current_mask = None
        elif kind == "prompt":
            if case is None or structure is None:
                raise CorruptLog("prompt event outside a structure")
            if payload.get("what") == "box":
                from .core import PointPrompt

                box = tuple(int(v) for v in payload["box"])
                prompt = PointPrompt.build([], [], state.config.capacity if state else 20)
                req = SegmentationRequest(
                    prompt=prompt, image=case.image, case_id=case.case_id, box=box,  # type: ignore[arg-type]
                )
                pending_mask = backend.segment(req).mask
            else:
                if state is None:
                    raise CorruptLog("points prompt before structure start")
                new_points = [(float(x), float(y)) for x, y in payload["new_points"]]
                prompt = next_prompt(state, new_points=new_points)
                logged = [(float(x), float(y), int(l)) for x, y, l in payload["points"]]
                if list(prompt.points) != logged:
                    prompt_mismatches += 1
                req = SegmentationRequest(
                    prompt=prompt,
                    image=case.image,
                    case_id=case.case_id,
                    prior_mask=current_mask if state.config.send_prior_mask else None,
                )
                try:
                    pending_mask = backend.segment(req).mask
                except EmptyPrompt:
                    pending_mask = None
        elif kind == "mask":
            if pending_mask is None:
                raise CorruptLog("mask event with no preceding prompt")
            logged_mask = decode_rle(payload["rle"])
            if not logged_mask.same_bits(pending_mask):
                mask_mismatches += 1
            current_mask = pending_mask
            pending_mask = None
            trajectory.append(payload.get("dice"))
        elif kind == "finalize":
            if structure is None:
                raise CorruptLog("finalize without an open structure")
            close_structure(event.t, payload)

    if structure is not None:
        raise CorruptLog(f"log truncated inside structure {structure!r}")

    elapsed = [s["elapsed_ms"] for s in structures]
    stats = aggregate([e / 1000.0 for e in elapsed]) if elapsed else None
    return {
        "exact_replay": prompt_mismatches == 0 and mask_mismatches == 0,
        "prompt_mismatches": prompt_mismatches,
        "mask_mismatches": mask_mismatches,
        "structures": structures,
        "elapsed_mean_s": stats.mean if stats else None,
        "elapsed_std_s": stats.std if stats else None,
    }
