"""HTTP front for the session engine.

Long stages (interpret, segment, compose) run as background jobs the client
polls; planning and artifact reads answer synchronously. Artifact responses
carry the media type recorded at store time, so mask PNGs and heatmaps can
feed straight into an <img> tag.
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException, Request, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .errors import OverseecError
from .jobs import JobRegistry, UnknownJobError
from .session import Engine, SessionStateError, UnknownSessionError
from .store import UnknownRefError


class SessionBody(BaseModel):
    image: str


class InterpretBody(BaseModel):
    session: str
    prompt: str


class SegmentBody(BaseModel):
    session: str


class ComposeBody(BaseModel):
    session: str
    prompt: str | None = None
    program: str | None = None


class PlanBody(BaseModel):
    costmap: str
    start: tuple[int, int]
    goal: tuple[int, int]
    session: str | None = None


def create_app(engine: Engine, workers: int = 2) -> FastAPI:
    app = FastAPI(title="overseec")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    jobs = JobRegistry(workers=workers)
    app.state.engine = engine
    app.state.jobs = jobs

    def _bad_request(exc: Exception) -> HTTPException:
        return HTTPException(status_code=400, detail=str(exc))

    @app.post("/images")
    async def upload_image(request: Request) -> dict:
        data = await request.body()
        if not data:
            raise HTTPException(status_code=400, detail="empty request body")
        try:
            ref = engine.upload_image(data)
        except OverseecError as exc:
            raise _bad_request(exc) from exc
        return {"ref": ref}

    @app.post("/sessions")
    def create_session(body: SessionBody) -> dict:
        try:
            manifest = engine.create_session(body.image)
        except UnknownRefError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        return {"id": manifest["id"]}

    @app.get("/sessions/{session_id}/manifest")
    def get_manifest(session_id: str) -> dict:
        try:
            return engine.manifest(session_id)
        except UnknownSessionError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc

    def _submit(kind: str, fn, inputs: dict) -> dict:
        job = jobs.submit(kind, fn, inputs)
        return {"job": job.id}

    @app.post("/jobs/interpret")
    def submit_interpret(body: InterpretBody) -> dict:
        engine.manifest(body.session)  # fail fast on unknown sessions
        return _submit(
            "interpret",
            lambda: engine.interpret(body.session, body.prompt),
            {"session": body.session, "prompt": body.prompt},
        )

    @app.post("/jobs/segment")
    def submit_segment(body: SegmentBody) -> dict:
        engine.manifest(body.session)
        return _submit(
            "segment",
            lambda: engine.segment(body.session),
            {"session": body.session},
        )

    @app.post("/jobs/compose")
    def submit_compose(body: ComposeBody) -> dict:
        engine.manifest(body.session)
        if (body.prompt is None) == (body.program is None):
            raise HTTPException(
                status_code=400, detail="pass exactly one of prompt or program"
            )
        return _submit(
            "compose",
            lambda: engine.compose(body.session, body.prompt, body.program),
            {"session": body.session},
        )

    @app.get("/jobs/{job_id}")
    def get_job(job_id: str) -> dict:
        try:
            return jobs.get(job_id).to_json()
        except UnknownJobError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc

    @app.post("/plan")
    def plan_route(body: PlanBody) -> dict:
        try:
            path = engine.plan_route(body.costmap, body.start, body.goal, body.session)
        except UnknownRefError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        except (ValueError, OverseecError) as exc:
            raise _bad_request(exc) from exc
        return {
            "pixels": [[x, y] for x, y in path.pixels],
            "cost": path.cost,
        }

    @app.get("/artifacts/{ref}")
    def get_artifact(ref: str) -> Response:
        try:
            data = engine.store.get(ref)
            media_type = engine.store.media_type(ref)
        except UnknownRefError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        return Response(content=data, media_type=media_type)

    @app.exception_handler(UnknownSessionError)
    async def _unknown_session(request: Request, exc: UnknownSessionError):
        return JSONResponse(status_code=404, content={"detail": str(exc)})

    @app.exception_handler(SessionStateError)
    async def _session_state(request: Request, exc: SessionStateError):
        return JSONResponse(status_code=409, content={"detail": str(exc)})

    return app
