"""HTTP wrapper around the review workflow and taxonomy queries.

The service owns the verdict log (single writer, concurrent readers) and
serves tasks to annotators; the browser UI is a static bundle mounted under
/ui that talks only to these endpoints.
"""
from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, Query, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from ..errors import DuplicateVerdict, UnknownPath
from ..review import ReviewTask, Verdict, VerdictLog, read_tasks
from ..taxonomy import Taxonomy, load_bundled_taxonomy
from .schemas import (
    LevelCountsOut,
    ProgressOut,
    ResolveOut,
    TaskOut,
    VerdictIn,
    VerdictOut,
)


def create_app(
    tasks: "list[ReviewTask] | str | Path",
    log_path: "str | Path",
    taxonomy: Taxonomy | None = None,
    static_dir: "str | Path | None" = None,
) -> FastAPI:
    if not isinstance(tasks, list):
        tasks = read_tasks(tasks)
    taxonomy = taxonomy or load_bundled_taxonomy()
    task_index: dict[str, ReviewTask] = {t.task_id: t for t in tasks}
    task_order = sorted(task_index)
    log = VerdictLog(log_path)

    app = FastAPI(title="uner review service", version="0.1.0")

    @app.exception_handler(RequestValidationError)
    async def malformed(request: Request, exc: RequestValidationError):
        # The API contract promises 400 for malformed verdicts, not 422.
        return JSONResponse(status_code=400, content={"detail": str(exc.errors()[:3])})

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok", "tasks": len(task_index), "verdicts": len(log)}

    @app.get("/tasks/next", response_model=TaskOut, responses={204: {"model": None}})
    def next_task(annotator: str = Query(min_length=1)):
        for task_id in task_order:
            if not log.has(task_id, annotator):
                return TaskOut(**task_index[task_id].to_dict())
        return Response(status_code=204)

    @app.get("/tasks/{task_id}", response_model=TaskOut)
    def get_task(task_id: str):
        task = task_index.get(task_id)
        if task is None:
            return JSONResponse(status_code=404, content={"detail": f"unknown task {task_id!r}"})
        return TaskOut(**task.to_dict())

    @app.post("/verdicts", response_model=VerdictOut, status_code=201)
    def post_verdict(payload: VerdictIn):
        if payload.task_id not in task_index:
            return JSONResponse(
                status_code=404, content={"detail": f"unknown task {payload.task_id!r}"}
            )
        if payload.action == "relabel":
            if not payload.label:
                return JSONResponse(
                    status_code=400, content={"detail": "relabel verdict requires a label"}
                )
            try:
                taxonomy.resolve(payload.label)
            except UnknownPath as exc:
                return JSONResponse(status_code=400, content={"detail": str(exc)})
        elif payload.label:
            return JSONResponse(
                status_code=400,
                content={"detail": f"{payload.action} verdict must not carry a label"},
            )
        verdict = Verdict(
            task_id=payload.task_id,
            annotator_id=payload.annotator_id,
            action=payload.action,
            label=payload.label,
        )
        try:
            stored = log.append(verdict)
        except DuplicateVerdict as exc:
            return JSONResponse(status_code=409, content={"detail": str(exc)})
        return VerdictOut(**stored.to_dict())

    @app.get("/progress", response_model=ProgressOut)
    def progress():
        judged_tasks = {v.task_id for v in log}
        per_annotator: dict[str, int] = {}
        for v in log:
            per_annotator[v.annotator_id] = per_annotator.get(v.annotator_id, 0) + 1
        done = len(judged_tasks)
        return ProgressOut(
            tasks=len(task_index),
            done=done,
            open=len(task_index) - done,
            verdicts=len(log),
            per_annotator=dict(sorted(per_annotator.items())),
        )

    @app.get("/taxonomy")
    def taxonomy_tree() -> dict:
        return taxonomy.to_dict()

    @app.get("/taxonomy/levels", response_model=LevelCountsOut)
    def taxonomy_levels():
        return LevelCountsOut(counts=list(taxonomy.level_counts()))

    @app.get("/taxonomy/resolve", response_model=ResolveOut)
    def taxonomy_resolve(path: str):
        try:
            resolved = taxonomy.resolve(path)
            return ResolveOut(path=str(resolved), exists=True, level=resolved.depth)
        except UnknownPath as exc:
            return ResolveOut(path=path, exists=False, deepest_valid_prefix=exc.deepest_valid)

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/ui", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app
