"""FastAPI application exposing the segmentation endpoint and the
interactive session channel over the core package."""

from __future__ import annotations

import asyncio
import json
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse

from ..backend import (
    ReferenceBackend,
    SegmentationRequest,
    deserialize_request,
    serialize_response,
)
from ..dataio import CorpusCase, load_corpus_config
from ..errors import ProtocolError, WorkbenchError
from ..gaze import Viewport
from ..session import CaseStore, Session, SessionConfig, write_session_log
from ..strategy import StrategyConfig
from .schemas import SegmentRequestModel


@dataclass
class ServiceConfig:
    corpus: list[CorpusCase] = field(default_factory=list)
    tau: float = 0.1
    cadence_ms: float = 200.0
    evaluation_mode: bool = True
    session_seed: int = 0
    default_strategy: StrategyConfig = field(default_factory=StrategyConfig)
    viewport: Viewport = field(default_factory=Viewport)
    log_dir: str | None = None
    allow_manual_tick: bool = False


def load_service_config(doc: dict, base_dir: str | Path = ".") -> ServiceConfig:
    corpus_doc = dict(doc.get("corpus", {"kind": "builtin", "name": "default"}))
    if corpus_doc.get("kind") in ("dir", "manifest") and "path" in corpus_doc:
        corpus_doc["path"] = str(Path(base_dir) / corpus_doc["path"])
    return ServiceConfig(
        corpus=load_corpus_config(corpus_doc),
        tau=float(doc.get("backend", {}).get("tau", 0.1)),
        cadence_ms=float(doc.get("cadence_ms", 200.0)),
        evaluation_mode=bool(doc.get("evaluation_mode", True)),
        session_seed=int(doc.get("session_seed", 0)),
        default_strategy=StrategyConfig.from_dict(doc.get("strategy", {})),
        viewport=Viewport.from_dict(doc.get("viewport", {})),
        log_dir=doc.get("log_dir"),
        allow_manual_tick=bool(doc.get("allow_manual_tick", False)),
    )


def create_app(config: ServiceConfig | None = None) -> FastAPI:
    config = config or ServiceConfig()
    app = FastAPI(title="gazeseg service", version="0.1.0")
    store = CaseStore(config.corpus)
    backend = ReferenceBackend(tau=config.tau)
    app.state.config = config
    app.state.store = store
    app.state.backend = backend

    def error_response(code: str, detail: str, status: int = 400) -> JSONResponse:
        return JSONResponse(status_code=status, content={"error": code, "detail": detail})

    @app.get("/v1/health")
    def health() -> dict:
        return {
            "status": "ok",
            "backend": backend.describe(),
            "cases": store.case_ids(),
        }

    @app.post("/v1/segment")
    def segment(body: SegmentRequestModel):
        try:
            req = deserialize_request(body.model_dump())
            if req.image is None:
                if req.case_id is None:
                    raise ProtocolError("request needs an inline image or a case_id")
                case = store.get(req.case_id, int(req.slice_index or 0))
                if case is None:
                    raise ProtocolError(f"case_not_found: {req.case_id}")
                req = SegmentationRequest(
                    prompt=req.prompt,
                    image=case.image,
                    case_id=req.case_id,
                    slice_index=req.slice_index,
                    box=req.box,
                    prior_mask=req.prior_mask,
                    request_id=req.request_id,
                )
            resp = backend.segment(req)
        except WorkbenchError as exc:
            return error_response(exc.code, str(exc))
        return serialize_response(resp)

    @app.websocket("/v1/session")
    async def session_channel(ws: WebSocket):
        await ws.accept()
        sink = None
        log_path = None
        fh = None
        if config.log_dir:
            Path(config.log_dir).mkdir(parents=True, exist_ok=True)
            log_path = Path(config.log_dir) / f"session_{int(time.time())}_{uuid.uuid4().hex[:8]}.jsonl"
            fh = open(log_path, "w", encoding="utf-8")

            def sink(event):  # noqa: F811
                fh.write(event.to_json() + "\n")
                fh.flush()

        session = Session(
            store=store,
            backend=backend,
            config=SessionConfig(
                cadence_ms=config.cadence_ms,
                evaluation_mode=config.evaluation_mode,
                session_seed=config.session_seed,
                default_strategy=config.default_strategy,
                viewport=config.viewport,
                allow_manual_tick=config.allow_manual_tick,
            ),
            log_sink=sink,
        )

        async def ticker():
            while True:
                await asyncio.sleep(config.cadence_ms / 1000.0)
                for out in session.recompute_tick():
                    await ws.send_json(out)

        tick_task = asyncio.create_task(ticker())
        try:
            while True:
                raw = await ws.receive_text()
                try:
                    msg = json.loads(raw)
                except json.JSONDecodeError:
                    msg = {"type": "__unparseable__"}
                for out in session.handle_message(msg):
                    await ws.send_json(out)
        except WebSocketDisconnect:
            pass
        finally:
            tick_task.cancel()
            if fh is not None:
                fh.close()

    return app
