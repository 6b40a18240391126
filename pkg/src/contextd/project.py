"""Project aggregate: topology, scope, capsules, suggestions, traces, model.

All timestamps are logical ticks from the topology clock, so a replayed
project serializes byte-identically. One JSON document per project.
"""

import json
import logging
from dataclasses import dataclass, field

from .assembly import ContextScopeState
from .errors import LoadError
from .graph import ConversationTopology
from .patterns import PatternCapsule
from .traces import TraceEvent, UserModel

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1


@dataclass
class Project:
    id: str
    title: str
    topology: ConversationTopology
    scope: ContextScopeState
    capsules: list[PatternCapsule] = field(default_factory=list)
    suggestions: list = field(default_factory=list)  # runtime.Suggestion
    traces: list[TraceEvent] = field(default_factory=list)
    user_model: UserModel | None = None
    mainline_summary: str | None = None
    created_at: int = 0
    version: int = 0
    next_suggestion: int = 1
    next_capsule: int = 1
    next_trace: int = 1
    next_activation: int = 1
    traces_since_model_update: int = 0

    def tick(self) -> int:
        return self.topology.tick()

    def allocate_suggestion_id(self) -> str:
        sid = f"{self.id}-s{self.next_suggestion}"
        self.next_suggestion += 1
        return sid

    def allocate_capsule_id(self) -> str:
        cid = f"{self.id}-c{self.next_capsule}"
        self.next_capsule += 1
        return cid

    def allocate_trace_id(self) -> str:
        tid = f"{self.id}-t{self.next_trace}"
        self.next_trace += 1
        return tid

    def allocate_activation_seq(self) -> int:
        seq = self.next_activation
        self.next_activation += 1
        return seq

    def capsule_by_id(self, capsule_id: str) -> PatternCapsule | None:
        for capsule in self.capsules:
            if capsule.id == capsule_id:
                return capsule
        return None

    def suggestion_by_id(self, suggestion_id: str):
        for suggestion in self.suggestions:
            if suggestion.id == suggestion_id:
                return suggestion
        return None

    def pending_suggestion(self):
        for suggestion in self.suggestions:
            if suggestion.state == "pending":
                return suggestion
        return None

    def active_capsules(self) -> list[PatternCapsule]:
        """Capsules that may reach the pattern appendix, in activation order."""
        active = [c for c in self.capsules if c.state == "active"]
        return sorted(active, key=lambda c: (c.activated_seq or 0, c.id))

    def to_doc(self) -> dict:
        from .runtime import Suggestion  # local import breaks module cycle

        return {
            "schema": SCHEMA_VERSION,
            "id": self.id,
            "title": self.title,
            "created_at": self.created_at,
            "version": self.version,
            "topology": self.topology.to_dict(),
            "scope": self.scope.to_dict(),
            "capsules": [c.to_dict() for c in self.capsules],
            "suggestions": [s.to_dict() for s in self.suggestions],
            "traces": [t.to_dict() for t in self.traces],
            "user_model": self.user_model.to_dict() if self.user_model else None,
            "mainline_summary": self.mainline_summary,
            "next_suggestion": self.next_suggestion,
            "next_capsule": self.next_capsule,
            "next_trace": self.next_trace,
            "next_activation": self.next_activation,
            "traces_since_model_update": self.traces_since_model_update,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "Project":
        from .runtime import Suggestion

        if not isinstance(doc, dict) or doc.get("schema") != SCHEMA_VERSION:
            raise LoadError(f"unsupported project document schema: {doc.get('schema')!r}")
        try:
            project = cls(
                id=doc["id"],
                title=doc["title"],
                topology=ConversationTopology.from_dict(doc["topology"]),
                scope=ContextScopeState.from_dict(doc["scope"]),
                capsules=[PatternCapsule.from_dict(c) for c in doc["capsules"]],
                suggestions=[Suggestion.from_dict(s) for s in doc["suggestions"]],
                traces=[TraceEvent.from_dict(t) for t in doc["traces"]],
                user_model=(
                    UserModel.from_dict(doc["user_model"]) if doc["user_model"] else None
                ),
                mainline_summary=doc.get("mainline_summary"),
                created_at=doc.get("created_at", 0),
                version=doc.get("version", 0),
                next_suggestion=doc.get("next_suggestion", 1),
                next_capsule=doc.get("next_capsule", 1),
                next_trace=doc.get("next_trace", 1),
                next_activation=doc.get("next_activation", 1),
                traces_since_model_update=doc.get("traces_since_model_update", 0),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise LoadError(f"malformed project document: {exc}") from exc
        return project


def new_project(project_id: str, title: str) -> Project:
    topology = ConversationTopology(id_prefix=f"{project_id}-")
    return Project(
        id=project_id,
        title=title,
        topology=topology,
        scope=ContextScopeState(),
    )


def canonical_json(doc: dict) -> str:
    """Stable rendering for snapshots and golden diffs."""
    return json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False) + "\n"
