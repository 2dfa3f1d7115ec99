"""HTTP session-persistence service backing the human-simulation UI.

Endpoints mirror the storage key structure:

    PUT /sessions/{user_id}/{ticker}/{kind}            -> {"version": n}
    GET /sessions/{user_id}/{ticker}/{kind}[?version=] -> {"version": n, "body": ...}
    GET /healthz

Schema violations come back as 400 with the offending field path; a missing
key is a 404 so the UI can start a fresh session, and backend failures are
500s, never conflated with not-found.
"""

from __future__ import annotations

import logging

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from .sessions import KINDS, SchemaError, SessionKey
from .storage import NotFoundError, StorageError, VersionedStore, session_get, session_put

logger = logging.getLogger(__name__)


def create_app(storage_root: str, cors_origin: str = "*") -> FastAPI:
    app = FastAPI(title="quorumtrade session service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=[cors_origin] if cors_origin != "*" else ["*"],
        allow_methods=["GET", "PUT", "OPTIONS"],
        allow_headers=["*"],
    )
    store = VersionedStore(storage_root)
    app.state.store = store

    def _key_or_response(user_id: str, ticker: str, kind: str):
        try:
            return SessionKey(user_id=user_id, ticker=ticker, kind=kind)
        except ValueError as exc:
            return JSONResponse(
                status_code=400,
                content={"error": "bad-key", "message": str(exc), "kinds": list(KINDS)},
            )

    @app.get("/healthz")
    async def healthz():
        return {"status": "ok"}

    @app.put("/sessions/{user_id}/{ticker}/{kind}")
    async def put_session(user_id: str, ticker: str, kind: str, request: Request):
        key = _key_or_response(user_id, ticker, kind)
        if isinstance(key, JSONResponse):
            return key
        try:
            body = await request.json()
        except Exception:
            return JSONResponse(status_code=400, content={"error": "bad-json"})
        try:
            version = session_put(store, key, body)
        except SchemaError as exc:
            return JSONResponse(
                status_code=400,
                content={"error": "schema", "path": exc.path, "message": exc.message},
            )
        except StorageError as exc:
            logger.error("storage failure on put %s: %s", key.storage_path(), exc)
            return JSONResponse(status_code=500, content={"error": "storage", "message": str(exc)})
        return {"version": version}

    @app.get("/sessions/{user_id}/{ticker}/{kind}")
    async def get_session(user_id: str, ticker: str, kind: str, version: int | None = None):
        key = _key_or_response(user_id, ticker, kind)
        if isinstance(key, JSONResponse):
            return key
        try:
            body, got_version = session_get(store, key, version)
        except NotFoundError:
            return JSONResponse(status_code=404, content={"error": "not-found"})
        except StorageError as exc:
            logger.error("storage failure on get %s: %s", key.storage_path(), exc)
            return JSONResponse(status_code=500, content={"error": "storage", "message": str(exc)})
        return {"version": got_version, "body": body}

    return app


def serve(storage_root: str, host: str = "127.0.0.1", port: int = 8787,
          cors_origin: str = "*") -> None:
    import uvicorn

    uvicorn.run(create_app(storage_root, cors_origin), host=host, port=port, log_level="info")
