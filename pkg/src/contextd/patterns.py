"""Pattern capsules: extraction, human review, activation, export.

requires_human_review capsules enter state needs_review and stay out of every
prompt until an approve event; only active capsules reach the appendix.
"""

import json
import logging
from dataclasses import dataclass, field

from .backend import ROLE_EXTRACTION, make_request
from .errors import ExtractionError, ReviewStateError
from .prompts import EXTRACTION_TYPES, build_extraction_system, render_transcript

logger = logging.getLogger(__name__)

STATE_NEEDS_REVIEW = "needs_review"
STATE_ACTIVE = "active"
STATE_DISABLED = "disabled"

CAPSULE_STATES = (STATE_NEEDS_REVIEW, STATE_ACTIVE, STATE_DISABLED)
EXTRACTION_KEYS = ("name", "requires_human_review", "instruction", "example")


@dataclass
class PatternCapsule:
    id: str
    type: str
    name: str
    instruction: str
    example: str
    requires_human_review: bool
    state: str
    source_nodes: list[str] = field(default_factory=list)
    created_at: int = 0
    activated_seq: int | None = None  # activation order for the appendix
    enabled_history: list[list] = field(default_factory=list)  # [tick, enabled]

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "type": self.type,
            "name": self.name,
            "instruction": self.instruction,
            "example": self.example,
            "requires_human_review": self.requires_human_review,
            "state": self.state,
            "source_nodes": list(self.source_nodes),
            "created_at": self.created_at,
            "activated_seq": self.activated_seq,
            "enabled_history": [list(h) for h in self.enabled_history],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PatternCapsule":
        return cls(
            id=d["id"],
            type=d["type"],
            name=d["name"],
            instruction=d["instruction"],
            example=d["example"],
            requires_human_review=d["requires_human_review"],
            state=d["state"],
            source_nodes=list(d.get("source_nodes", [])),
            created_at=d.get("created_at", 0),
            activated_seq=d.get("activated_seq"),
            enabled_history=[list(h) for h in d.get("enabled_history", [])],
        )


def validate_extraction_payload(raw: str) -> dict:
    """Strict 4-key contract: name/instruction/example strings, review flag bool."""
    try:
        payload = json.loads(raw)
    except ValueError as exc:
        raise ExtractionError(f"extraction output is not valid JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise ExtractionError("extraction output must be a JSON object")
    keys = set(payload)
    if keys != set(EXTRACTION_KEYS):
        missing = set(EXTRACTION_KEYS) - keys
        extra = keys - set(EXTRACTION_KEYS)
        raise ExtractionError(
            f"extraction output must have exactly 4 keys"
            f" (missing={sorted(missing)}, extra={sorted(extra)})"
        )
    for key in ("name", "instruction", "example"):
        if not isinstance(payload[key], str):
            raise ExtractionError(f"extraction key {key!r} must be a string")
    if not isinstance(payload["requires_human_review"], bool):
        raise ExtractionError("requires_human_review must be a boolean")
    return payload


def extract_pattern(
    backend,
    extraction_type: str,
    nodes,
    capsule_id: str,
    created_at: int,
) -> PatternCapsule:
    """Run the extraction prompt over the nodes and validate the result.

    Nothing is stored on failure; the caller owns persistence and tracing.
    """
    if extraction_type not in EXTRACTION_TYPES:
        raise ExtractionError(f"unknown extraction type: {extraction_type}")
    transcript = render_transcript(nodes)
    request = make_request(
        system_text=build_extraction_system(extraction_type),
        messages=[("user", transcript)],
        role_tag=ROLE_EXTRACTION,
    )
    response = backend.generate(request)
    payload = validate_extraction_payload(response.text)
    return PatternCapsule(
        id=capsule_id,
        type=extraction_type,
        name=payload["name"],
        instruction=payload["instruction"],
        example=payload["example"],
        requires_human_review=payload["requires_human_review"],
        state=STATE_NEEDS_REVIEW if payload["requires_human_review"] else STATE_ACTIVE,
        source_nodes=[node.id for node in nodes],
        created_at=created_at,
    )


def review_pattern(capsule: PatternCapsule, edits: dict, approve: bool) -> PatternCapsule:
    if capsule.state != STATE_NEEDS_REVIEW:
        raise ReviewStateError(f"capsule {capsule.id} is not awaiting review")
    for key in ("name", "instruction", "example"):
        if key in edits and edits[key] is not None:
            setattr(capsule, key, edits[key])
    if approve:
        capsule.state = STATE_ACTIVE
    return capsule


def set_enabled(capsule: PatternCapsule, enabled: bool) -> PatternCapsule:
    if capsule.state == STATE_NEEDS_REVIEW:
        raise ReviewStateError(f"capsule {capsule.id} has not passed review")
    capsule.state = STATE_ACTIVE if enabled else STATE_DISABLED
    return capsule


def export_capsules(capsules) -> list[dict]:
    """Cross-project exchange format: the 4 content keys plus type and state."""
    return [
        {
            "type": c.type,
            "state": c.state,
            "name": c.name,
            "requires_human_review": c.requires_human_review,
            "instruction": c.instruction,
            "example": c.example,
        }
        for c in capsules
    ]


def import_capsules(data, allocate_id, tick) -> list[PatternCapsule]:
    """Rebuild capsules from the exchange format with fresh local ids.

    Approved capsules stay usable across projects; anything still flagged for
    review re-enters the review gate here.
    """
    imported = []
    for entry in data:
        if entry.get("type") not in EXTRACTION_TYPES:
            raise ExtractionError(f"unknown capsule type: {entry.get('type')!r}")
        review = bool(entry.get("requires_human_review"))
        state = entry.get("state") or (STATE_NEEDS_REVIEW if review else STATE_DISABLED)
        if state not in CAPSULE_STATES:
            raise ExtractionError(f"unknown capsule state: {state!r}")
        try:
            capsule = PatternCapsule(
                id=allocate_id(),
                type=entry["type"],
                name=entry["name"],
                instruction=entry["instruction"],
                example=entry["example"],
                requires_human_review=review,
                state=state,
                created_at=tick(),
            )
        except KeyError as exc:
            raise ExtractionError(f"capsule import missing key: {exc}") from exc
        imported.append(capsule)
    return imported
