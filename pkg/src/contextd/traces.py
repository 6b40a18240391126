"""Structural interaction traces and the prompt-level user model.

Every suggestion response and unprompted structural operation appends exactly
one TraceEvent; the user-model agent digests new events on a debounce and the
result is injected into the structure prompt as advisory guidance.
"""

import json
import logging
from dataclasses import dataclass, field

from .backend import ROLE_USER_MODEL, make_request
from .errors import BackendError, ContextdError
from .prompts import build_user_model_prompt

logger = logging.getLogger(__name__)

TRACE_KINDS = frozenset(
    {
        "suggestion_accepted",
        "suggestion_rejected",
        "suggestion_ignored_explicit",
        "suggestion_ignored_superseded",
        "manual_branch",
        "manual_return",
        "manual_include",
        "manual_exclude",
        "manual_delete",
        "manual_mainline_change",
        "manual_edit",
        "extraction_requested",
        "capsule_reviewed",
    }
)

LIFECYCLE_STAGES = ("cold_start", "learning", "ready")

CONTEXT_CHAR_LIMIT = 280


@dataclass
class TraceEvent:
    id: str
    kind: str
    subject_ids: list[str]
    compressed_context: list[list[str]] = field(default_factory=list)
    created_at: int = 0
    detail: str | None = None

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "kind": self.kind,
            "subject_ids": list(self.subject_ids),
            "compressed_context": [list(pair) for pair in self.compressed_context],
            "created_at": self.created_at,
            "detail": self.detail,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TraceEvent":
        return cls(
            id=d["id"],
            kind=d["kind"],
            subject_ids=list(d["subject_ids"]),
            compressed_context=[list(p) for p in d.get("compressed_context", [])],
            created_at=d.get("created_at", 0),
            detail=d.get("detail"),
        )


def make_trace_event(
    event_id: str,
    kind: str,
    subject_ids,
    compressed_context=None,
    created_at: int = 0,
    detail: str | None = None,
) -> TraceEvent:
    if kind not in TRACE_KINDS:
        raise ContextdError(f"unknown trace kind: {kind}")
    return TraceEvent(
        id=event_id,
        kind=kind,
        subject_ids=list(subject_ids),
        compressed_context=compressed_context or [],
        created_at=created_at,
        detail=detail,
    )


def compress_recent_pairs(nodes, k: int = 3, limit: int = CONTEXT_CHAR_LIMIT):
    """Last k (user, assistant) content pairs from an ordered node list."""
    pairs: list[list[str]] = []
    pending_user: str | None = None
    for node in nodes:
        if node.placeholder:
            continue
        if node.role == "user":
            pending_user = node.content
        elif node.role == "assistant" and pending_user is not None:
            pairs.append([pending_user[:limit], node.content[:limit]])
            pending_user = None
    return pairs[-k:]


def export_traces_jsonl(traces) -> str:
    """One canonical JSON object per line, in append order."""
    return "".join(
        json.dumps(event.to_dict(), sort_keys=True, ensure_ascii=False) + "\n"
        for event in traces
    )


@dataclass
class UserModel:
    lifecycle: str = "cold_start"
    generalizations: list = field(default_factory=list)
    supporting_examples: list = field(default_factory=list)
    updated_at: int = 0
    raw_json: str = ""

    def to_dict(self) -> dict:
        return {
            "lifecycle": self.lifecycle,
            "generalizations": self.generalizations,
            "supporting_examples": self.supporting_examples,
            "updated_at": self.updated_at,
            "raw_json": self.raw_json,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "UserModel":
        return cls(
            lifecycle=d["lifecycle"],
            generalizations=d.get("generalizations", []),
            supporting_examples=d.get("supporting_examples", []),
            updated_at=d.get("updated_at", 0),
            raw_json=d.get("raw_json", ""),
        )


def default_user_model() -> UserModel:
    doc = {
        "lifecycle": "cold_start",
        "generalizations": [],
        "supporting_examples": [],
    }
    return UserModel(raw_json=json.dumps(doc, sort_keys=True))


def validate_user_model_payload(raw: str, updated_at: int) -> UserModel:
    """Validate lifecycle plus the two arrays; keep the emitted JSON verbatim."""
    try:
        payload = json.loads(raw)
    except ValueError as exc:
        raise ContextdError(f"user model output is not valid JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise ContextdError("user model output must be a JSON object")
    lifecycle = payload.get("lifecycle")
    if lifecycle not in LIFECYCLE_STAGES:
        raise ContextdError(f"unknown lifecycle stage: {lifecycle!r}")
    generalizations = payload.get("generalizations")
    examples = payload.get("supporting_examples")
    if not isinstance(generalizations, list) or not isinstance(examples, list):
        raise ContextdError("user model needs generalizations/supporting_examples arrays")
    if not generalizations and not examples and lifecycle != "cold_start":
        raise ContextdError("empty evidence requires lifecycle cold_start")
    return UserModel(
        lifecycle=lifecycle,
        generalizations=generalizations,
        supporting_examples=examples,
        updated_at=updated_at,
        raw_json=raw,
    )


def build_user_model_payload(new_events, prior: UserModel | None) -> str:
    """User message for the model updater: new evidence plus the prior model."""
    body = {
        "prior_model": json.loads(prior.raw_json) if prior and prior.raw_json else None,
        "new_events": [event.to_dict() for event in new_events],
    }
    return json.dumps(body, sort_keys=True, ensure_ascii=False)


def update_user_model(backend, new_events, prior: UserModel | None, updated_at: int):
    """Run the user-model agent over new trace events; returns the new model.

    Raises on backend or validation failure; the caller keeps the prior model.
    """
    request = make_request(
        system_text=build_user_model_prompt(),
        messages=[("user", build_user_model_payload(new_events, prior))],
        role_tag=ROLE_USER_MODEL,
    )
    response = backend.generate(request)
    return validate_user_model_payload(response.text, updated_at)
