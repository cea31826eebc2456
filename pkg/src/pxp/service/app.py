"""HTTP and WebSocket service."""
from __future__ import annotations

from typing import Any

from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect
from fastapi.responses import PlainTextResponse

from .. import __version__
from ..engine import AwaitingDecision
from ..model import ProtocolError, dumps_transcript
from ..pex import PexError
from . import handlers
from .gateway import GatewayConnection, TranscriptStore
from .schemas import (
    AnalyzeRequest,
    AnalyzeResponse,
    CaseReportResponse,
    GraphResponse,
    MmsvMapRequest,
    MmsvPathsResponse,
    RunRequest,
    RunResponse,
    frame_schema,
)


def _bad_request(exc: Exception) -> HTTPException:
    return HTTPException(status_code=400, detail=str(exc))


def create_app(store: TranscriptStore | None = None) -> FastAPI:
    app = FastAPI(title="pxp", version=__version__)
    app.state.store = store if store is not None else TranscriptStore()

    @app.get("/health")
    def health() -> dict[str, Any]:
        return {"status": "ok", "version": __version__}

    @app.post("/sessions/run", response_model=RunResponse)
    def run_session(req: RunRequest) -> RunResponse:
        try:
            return handlers.run(req)
        except AwaitingDecision as exc:
            raise HTTPException(400, f"agent {exc} needs a live client; use /gateway") from exc
        except (handlers.HandlerError, ProtocolError, PexError, ValueError, KeyError) as exc:
            raise _bad_request(exc) from exc

    @app.post("/analyze", response_model=AnalyzeResponse)
    def analyze(req: AnalyzeRequest) -> AnalyzeResponse:
        try:
            return handlers.analyze(req)
        except (handlers.HandlerError, KeyError, ValueError) as exc:
            raise _bad_request(exc) from exc

    @app.get("/graph", response_model=GraphResponse)
    def graph(table: str = "pxpk", k: int = 2) -> GraphResponse:
        try:
            return handlers.graph(table, k)
        except handlers.HandlerError as exc:
            raise _bad_request(exc) from exc

    @app.get("/mmsv/paths", response_model=MmsvPathsResponse)
    def mmsv_paths(max_len: int = 5, measure: str = "nodes", full: bool = True) -> MmsvPathsResponse:
        try:
            return handlers.mmsv_paths(max_len, measure, full)
        except handlers.HandlerError as exc:
            raise _bad_request(exc) from exc

    @app.post("/mmsv/map")
    def mmsv_map(req: MmsvMapRequest) -> dict[str, Any]:
        try:
            return handlers.mmsv_map(req)
        except handlers.HandlerError as exc:
            raise _bad_request(exc) from exc

    @app.post("/casebook/{case}/replay", response_model=CaseReportResponse)
    def replay(case: str) -> CaseReportResponse:
        try:
            return handlers.replay(case)
        except handlers.HandlerError as exc:
            raise HTTPException(404, str(exc)) from exc

    @app.get("/schema/frames")
    def schema() -> dict[str, Any]:
        return frame_schema()

    @app.get("/transcripts")
    def transcripts() -> list[str]:
        return app.state.store.ids()

    @app.get("/transcripts/{session_id}", response_class=PlainTextResponse)
    def transcript(session_id: str) -> str:
        t = app.state.store.get(session_id)
        if t is None:
            raise HTTPException(404, f"no stored transcript {session_id}")
        return dumps_transcript(t)

    @app.websocket("/gateway")
    async def gateway(ws: WebSocket) -> None:
        await ws.accept()
        conn = GatewayConnection(app.state.store)
        try:
            await ws.send_json(conn.hello())
            while True:
                try:
                    raw = await ws.receive_json()
                except ValueError:
                    await ws.send_json(conn.error("frames must be JSON objects"))
                    continue
                for frame in conn.handle(raw):
                    await ws.send_json(frame)
        except WebSocketDisconnect:
            pass
        finally:
            conn.disconnect()

    return app


app = create_app()
