"""HTTP JSON API over the engine: one endpoint per engine operation.

Mutations are serialized per project; every response from a project-scoped
endpoint carries the project version counter so clients can poll for sync.
"""

import logging
import threading
from typing import Any

from fastapi import FastAPI, HTTPException, Response
from pydantic import BaseModel, Field

from .errors import (
    BackendError,
    ContextdError,
    DecisionParseError,
    ExtractionError,
    InvalidBoundsError,
    JournalError,
    LoadError,
    PlaceholderEditError,
    ReviewStateError,
    SuggestionStateError,
    UnknownNodeError,
    UnknownPathError,
)
from .project import new_project
from .runtime import EngineConfig, ProjectEngine
from .store import ProjectStore
from .traces import export_traces_jsonl

logger = logging.getLogger(__name__)

_NOT_FOUND = (UnknownNodeError, UnknownPathError, LoadError)
_CONFLICT = (SuggestionStateError, ReviewStateError, JournalError, PlaceholderEditError)
_BAD_REQUEST = (InvalidBoundsError, DecisionParseError, ExtractionError)


class CreateProjectBody(BaseModel):
    title: str = "Untitled project"


class MessageBody(BaseModel):
    text: str
    from_node: str | None = None


class EditNodeBody(BaseModel):
    # content edits are journaled domain mutations; layout_pos is UI-only
    content: str | None = None
    layout_pos: list[float] | None = None


class BranchBody(BaseModel):
    intent: str | None = None


class DeleteBody(BaseModel):
    ids: list[str]
    preview: bool = False


class ScopeBody(BaseModel):
    op: str = Field(pattern="^(include|exclude|revert)$")
    ids: list[str]


class PathBody(BaseModel):
    target: str


class MainlineBody(BaseModel):
    # null clears a pin; omitted leaves it unchanged
    start: str | None = None
    end: str | None = None

    model_config = {"extra": "forbid"}


class HistoryBody(BaseModel):
    op: str = Field(pattern="^(undo|redo|reset)$")


class RespondBody(BaseModel):
    action: str = Field(pattern="^(accept|reject|ignore)$")


class ExtractBody(BaseModel):
    type: str = Field(pattern="^(reasoning|task_sop|context_case)$")
    ids: list[str]


class ReviewBody(BaseModel):
    edits: dict = Field(default_factory=dict)
    approve: bool = False


class EnabledBody(BaseModel):
    enabled: bool


class ServiceState:
    """In-process registry of loaded projects and their per-project locks."""

    def __init__(self, store: ProjectStore, backend, config: EngineConfig):
        self.store = store
        self.backend = backend
        self.config = config
        self.engines: dict[str, ProjectEngine] = {}
        self.locks: dict[str, threading.Lock] = {}
        self._guard = threading.Lock()

    def lock(self, project_id: str) -> threading.Lock:
        with self._guard:
            return self.locks.setdefault(project_id, threading.Lock())

    def engine(self, project_id: str) -> ProjectEngine:
        with self._guard:
            engine = self.engines.get(project_id)
        if engine is None:
            project = self.store.load(project_id)
            engine = ProjectEngine(project, self.backend, self.config)
            with self._guard:
                engine = self.engines.setdefault(project_id, engine)
        return engine

    def create(self, title: str) -> ProjectEngine:
        with self._guard:
            project = new_project(self.store.next_project_id(), title)
            self.store.save(project)
            engine = ProjectEngine(project, self.backend, self.config)
            self.engines[project.id] = engine
            return engine

    def find_by_prefix(self, entity_id: str) -> ProjectEngine:
        """Resolve /nodes/{id}-style routes: ids are '<project>-<kind><n>'."""
        project_id = entity_id.rsplit("-", 1)[0] if "-" in entity_id else ""
        if not project_id or not self.store.exists(project_id):
            raise UnknownNodeError(f"unknown id: {entity_id}")
        return self.engine(project_id)


def create_app(store: ProjectStore, backend, config: EngineConfig | None = None) -> FastAPI:
    state = ServiceState(store, backend, config or EngineConfig())
    app = FastAPI(title="contextd", version="0.1.0")
    app.state.ctxd = state

    def run(project_id: str, fn) -> Any:
        engine = state.engine(project_id)
        with state.lock(project_id):
            try:
                result = fn(engine)
            except _NOT_FOUND as exc:
                raise HTTPException(status_code=404, detail=str(exc)) from exc
            except _CONFLICT as exc:
                raise HTTPException(status_code=409, detail=str(exc)) from exc
            except _BAD_REQUEST as exc:
                raise HTTPException(status_code=400, detail=str(exc)) from exc
            except BackendError as exc:
                raise HTTPException(status_code=502, detail=str(exc)) from exc
            except ContextdError as exc:
                raise HTTPException(status_code=400, detail=str(exc)) from exc
            state.store.save(engine.project)
            return result

    def versioned(engine: ProjectEngine, payload: dict) -> dict:
        payload["version"] = engine.project.version
        return payload

    def resolve(entity_id: str) -> ProjectEngine:
        try:
            return state.find_by_prefix(entity_id)
        except _NOT_FOUND as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc

    # --- projects ---

    @app.post("/projects", status_code=201)
    def create_project(body: CreateProjectBody):
        engine = state.create(body.title)
        return versioned(engine, {"id": engine.project.id, "title": engine.project.title})

    @app.get("/projects")
    def list_projects():
        out = []
        for project_id in state.store.list_ids():
            project = state.engine(project_id).project
            out.append(
                {
                    "id": project.id,
                    "title": project.title,
                    "version": project.version,
                    "created_at": project.created_at,
                }
            )
        return out

    @app.get("/projects/{project_id}")
    def get_project(project_id: str):
        try:
            engine = state.engine(project_id)
        except LoadError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        return engine.project.to_doc()

    @app.get("/projects/{project_id}/topology")
    def get_topology(project_id: str):
        try:
            engine = state.engine(project_id)
        except LoadError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        project = engine.project
        return {
            "version": project.version,
            "topology": project.topology.to_dict() | {"journal": None},
            "scope": project.scope.to_dict(),
            "mainline_summary": project.mainline_summary,
            "can_undo": project.topology.journal.can_undo,
            "can_redo": project.topology.journal.can_redo,
        }

    # --- turns ---

    @app.post("/projects/{project_id}/messages")
    def post_message(project_id: str, body: MessageBody):
        def fn(engine: ProjectEngine):
            result = engine.run_turn(body.text, from_node=body.from_node)
            return versioned(engine, result.to_dict())

        return run(project_id, fn)

    # --- node operations ---

    @app.patch("/nodes/{node_id}")
    def edit_node(node_id: str, body: EditNodeBody):
        engine = resolve(node_id)
        if body.content is None and body.layout_pos is None:
            raise HTTPException(status_code=400, detail="nothing to patch")

        def fn(eng: ProjectEngine):
            if body.content is not None:
                eng.edit_node(node_id, body.content)
            if body.layout_pos is not None:
                eng.set_layout(node_id, tuple(body.layout_pos))
            return versioned(eng, {"node": node_id})

        return run(engine.project.id, fn)

    @app.post("/nodes/{node_id}/branch")
    def branch_from_node(node_id: str, body: BranchBody | None = None):
        engine = resolve(node_id)
        intent = body.intent if body else None

        def fn(eng: ProjectEngine):
            branch_id = eng.create_branch(node_id, intent=intent)
            return versioned(eng, {"branch": branch_id})

        return run(engine.project.id, fn)

    @app.post("/nodes/{node_id}/rebranch")
    def rebranch_from_node(node_id: str, body: BranchBody | None = None):
        engine = resolve(node_id)
        intent = body.intent if body else None

        def fn(eng: ProjectEngine):
            branch_id = eng.rebranch_from(node_id, intent=intent)
            return versioned(eng, {"branch": branch_id})

        return run(engine.project.id, fn)

    @app.post("/projects/{project_id}/nodes/delete")
    def delete_nodes(project_id: str, body: DeleteBody):
        def fn(engine: ProjectEngine):
            report = engine.delete_nodes(body.ids, preview=body.preview)
            return versioned(engine, {"report": report.to_dict()})

        return run(project_id, fn)

    # --- scope / path / mainline / history ---

    @app.post("/projects/{project_id}/scope")
    def scope_op(project_id: str, body: ScopeBody):
        def fn(engine: ProjectEngine):
            engine.scope_op(body.op, body.ids)
            return versioned(engine, {"scope": engine.project.scope.to_dict()})

        return run(project_id, fn)

    @app.post("/projects/{project_id}/path")
    def transition(project_id: str, body: PathBody):
        def fn(engine: ProjectEngine):
            engine.transition_path(body.target)
            return versioned(engine, {"base_path": engine.project.scope.base_path})

        return run(project_id, fn)

    @app.post("/projects/{project_id}/mainline")
    def mainline(project_id: str, body: MainlineBody):
        fields_set = body.model_fields_set

        def fn(engine: ProjectEngine):
            engine.set_mainline_bounds(
                start=body.start,
                end=body.end,
                clear_start="start" in fields_set and body.start is None,
                clear_end="end" in fields_set and body.end is None,
            )
            topology = engine.project.topology
            return versioned(
                engine,
                {
                    "mainline_start": topology.mainline_start,
                    "mainline_end": topology.mainline_end,
                },
            )

        return run(project_id, fn)

    @app.post("/projects/{project_id}/history")
    def history(project_id: str, body: HistoryBody):
        def fn(engine: ProjectEngine):
            engine.history(body.op)
            return versioned(engine, {"op": body.op})

        return run(project_id, fn)

    # --- suggestions ---

    @app.post("/suggestions/{suggestion_id}/respond")
    def respond(suggestion_id: str, body: RespondBody):
        engine = resolve(suggestion_id)

        def fn(eng: ProjectEngine):
            effect = eng.respond_to_suggestion(suggestion_id, body.action)
            return versioned(eng, {"effect": effect})

        return run(engine.project.id, fn)

    @app.get("/projects/{project_id}/suggestions")
    def suggestions(project_id: str):
        engine = state.engine(project_id)
        project = engine.project
        return {
            "version": project.version,
            "suggestions": [s.to_dict() for s in project.suggestions],
        }

    # --- patterns ---

    @app.post("/projects/{project_id}/patterns/extract")
    def extract(project_id: str, body: ExtractBody):
        def fn(engine: ProjectEngine):
            capsule = engine.extract_pattern(body.type, body.ids)
            return versioned(engine, {"capsule": capsule.to_dict()})

        return run(project_id, fn)

    @app.post("/patterns/{capsule_id}/review")
    def review(capsule_id: str, body: ReviewBody):
        engine = resolve(capsule_id)

        def fn(eng: ProjectEngine):
            capsule = eng.review_pattern(capsule_id, body.edits, body.approve)
            return versioned(eng, {"capsule": capsule.to_dict()})

        return run(engine.project.id, fn)

    @app.post("/patterns/{capsule_id}/enabled")
    def set_enabled(capsule_id: str, body: EnabledBody):
        engine = resolve(capsule_id)

        def fn(eng: ProjectEngine):
            capsule = eng.set_capsule_enabled(capsule_id, body.enabled)
            return versioned(eng, {"capsule": capsule.to_dict()})

        return run(engine.project.id, fn)

    @app.get("/projects/{project_id}/patterns")
    def patterns(project_id: str):
        engine = state.engine(project_id)
        project = engine.project
        return {
            "version": project.version,
            "patterns": [c.to_dict() for c in project.capsules],
        }

    # --- traces / user model ---

    @app.get("/projects/{project_id}/user-model")
    def user_model(project_id: str):
        engine = state.engine(project_id)
        project = engine.project
        model = project.user_model
        return {
            "version": project.version,
            "user_model": model.to_dict() if model else None,
        }

    @app.get("/projects/{project_id}/traces")
    def traces(project_id: str):
        engine = state.engine(project_id)
        return Response(
            content=export_traces_jsonl(engine.project.traces),
            media_type="application/x-ndjson",
        )

    return app
