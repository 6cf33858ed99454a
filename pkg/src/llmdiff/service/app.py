"""HTTP layer for the pairwise preference evaluation."""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.responses import FileResponse, JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from llmdiff.errors import (
    IncompleteSessionError,
    InvalidArgumentError,
    InvalidManifestError,
    PairNotFoundError,
    SessionNotFoundError,
)
from llmdiff.service.store import EvalStore, PairManifest


class CreateSessionBody(BaseModel):
    user_id: str
    seed: int = 0
    manifest: str | None = None


class VoteBody(BaseModel):
    choice: str


class RaiseHandBody(BaseModel):
    index: int


def create_app(store: EvalStore, default_manifest: str | None = None,
               ui_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="pairwise preference evaluation")

    @app.exception_handler(SessionNotFoundError)
    @app.exception_handler(PairNotFoundError)
    async def _not_found(request, exc):
        return JSONResponse(status_code=404, content={"detail": str(exc)})

    @app.exception_handler(InvalidArgumentError)
    @app.exception_handler(InvalidManifestError)
    async def _bad_request(request, exc):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.exception_handler(IncompleteSessionError)
    async def _incomplete(request, exc):
        return JSONResponse(
            status_code=409, content={"detail": str(exc), "missing": exc.missing}
        )

    @app.post("/sessions")
    def create_session(body: CreateSessionBody):
        manifest_path = body.manifest or default_manifest
        if manifest_path is None:
            raise InvalidArgumentError("no manifest configured or provided")
        manifest = PairManifest.load(manifest_path)
        session = store.create_session(body.user_id, manifest, body.seed)
        return {"session_id": session.session_id, "pair_count": session.pair_count}

    @app.get("/sessions/{session_id}")
    def session_state(session_id: str):
        session = store.get_session(session_id)
        return {
            "session_id": session.session_id,
            "user_id": session.user_id,
            "pair_count": session.pair_count,
            "progress": session.progress,
            "complete": session.complete,
            "choices": {str(i): c for i, c in sorted(session.votes.items())},
        }

    @app.get("/sessions/{session_id}/pairs/{index}")
    def next_pair(session_id: str, index: int):
        return store.pair_payload(session_id, index)

    @app.put("/sessions/{session_id}/votes/{index}")
    def record_vote(session_id: str, index: int, body: VoteBody):
        return store.record_vote(session_id, index, body.choice)

    @app.post("/sessions/{session_id}/raise-hand")
    def raise_hand(session_id: str, body: RaiseHandBody):
        store.raise_hand(session_id, body.index)
        return {"status": "recorded"}

    @app.get("/results/export")
    def export_results(sessions: str | None = None):
        ids = sessions.split(",") if sessions else None
        return {"rows": store.export_results(ids)}

    @app.get("/images/{session_id}/{index}/{side}")
    def image(session_id: str, index: int, side: str):
        path = store.image_path(session_id, index, side)
        if not path.exists():
            raise HTTPException(status_code=404, detail="image file missing")
        return FileResponse(path)

    if ui_dir is not None and Path(ui_dir).exists():
        app.mount("/ui", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app
