"""Byte-exact prompt construction for the four agent roles.

Every fixed text lives under templates/ as a UTF-8, LF-normalized resource so
the golden tests diff cleanly; this module only selects, substitutes, and
joins blocks (blocks are separated by exactly one blank line).
"""

import logging
from dataclasses import dataclass, field
from importlib import resources
from string import Template

from .errors import ContextdError

logger = logging.getLogger(__name__)

MODE_MAINLINE = "mainline"
MODE_BRANCH = "branch"

MEMORY_KINDS = ("mainline_progress", "branch_summary")
EXTRACTION_TYPES = ("reasoning", "task_sop", "context_case")

_ROLE_LABELS = {"user": "User:", "assistant": "Assistant:", "system": "System:"}

_cache: dict[str, str] = {}


def load_template(name: str) -> str:
    """Load a template resource, CRLF-normalized, trailing newline stripped."""
    if name not in _cache:
        text = (
            resources.files("contextd")
            .joinpath("templates", f"{name}.txt")
            .read_text(encoding="utf-8")
        )
        _cache[name] = text.replace("\r\n", "\n").rstrip("\n")
    return _cache[name]


@dataclass
class ExecutionContext:
    """Structural state lines inserted into the structure-copilot prompt.

    Omitted optional fields produce omitted lines, never blank placeholders.
    """

    mode: str = MODE_MAINLINE
    branch_depth: int = 0
    branch_intent: str | None = None
    parent_tldr: str | None = None
    mainline_tldr: str | None = None
    total_branches: int | None = None
    active_branches: int | None = None
    recent_intents: list[str] = field(default_factory=list)

    def render(self) -> str:
        lines = [
            "Execution context:",
            f"Current mode: {self.mode}.",
            f"Branch depth: {self.branch_depth}.",
        ]
        if self.branch_intent:
            lines.append(f"Current branch intent: {self.branch_intent}")
        if self.parent_tldr:
            lines.append(f"Parent context TLDR: {self.parent_tldr}")
        if self.mainline_tldr:
            lines.append(f"Mainline TLDR: {self.mainline_tldr}")
        if self.total_branches is not None:
            lines.append(f"Total branches in project: {self.total_branches}.")
        if self.active_branches is not None:
            lines.append(f"Active branches: {self.active_branches}.")
        if self.recent_intents:
            lines.append("Recent branch intents: " + " || ".join(self.recent_intents))
        return "\n".join(lines)


@dataclass
class PromptInputs:
    """Everything the conversation/structure prompt builders need for one turn."""

    mode: str = MODE_MAINLINE
    anchor_node_id: str | None = None
    mainline_summary: str | None = None
    branch_summaries: list[str] = field(default_factory=list)
    enabled_patterns: list = field(default_factory=list)
    exec_ctx: ExecutionContext | None = None
    user_model_json: str | None = None


def build_conversation_system(inputs: PromptInputs) -> str:
    """Conversation-agent system text: shared preamble plus the mode case.

    Case A: mainline, no completed-branch summaries. Case B: mainline with
    summaries. Case C: branch without a mainline summary. Case D: branch with
    one. The activated-pattern appendix is appended last in every case.
    """
    parts = [load_template("conversation_preamble")]
    if inputs.mode == MODE_MAINLINE:
        if inputs.branch_summaries:
            block = load_template("completed_branches_header") + "\n" + "\n".join(
                f"- {summary}" for summary in inputs.branch_summaries
            )
            parts.append(block)
    elif inputs.mode == MODE_BRANCH:
        if not inputs.anchor_node_id:
            raise ContextdError("branch mode requires an anchor node id")
        parts.append(
            Template(load_template("subtask_branch_line")).substitute(
                anchor_node_id=inputs.anchor_node_id
            )
        )
        if inputs.mainline_summary:
            parts.append(
                Template(load_template("current_context_status")).substitute(
                    mainline_summary=inputs.mainline_summary
                )
            )
    else:
        raise ContextdError(f"unknown prompt mode: {inputs.mode}")

    appendix = render_pattern_appendix(inputs.enabled_patterns)
    if appendix:
        parts.append(appendix)
    return "\n\n".join(parts)


def render_pattern_appendix(patterns) -> str:
    """Activated-capsule blocks in activation order, blank-line separated."""
    blocks = []
    template = Template(load_template("pattern_block"))
    for capsule in patterns:
        state = getattr(capsule, "state", "active")
        if state != "active":
            raise ContextdError(
                f"capsule {getattr(capsule, 'id', '?')} is not active (review gate)"
            )
        blocks.append(
            template.substitute(
                type=capsule.type,
                name=capsule.name,
                instruction=capsule.instruction,
                example=capsule.example,
            )
        )
    return "\n\n".join(blocks)


def build_structure_prompt(
    exec_ctx: ExecutionContext | None, user_model_json: str | None = None
) -> str:
    """Structure-copilot prompt: static body, optional insertions, JSON tail."""
    parts = [load_template("structure_body")]
    if exec_ctx is not None:
        parts.append(exec_ctx.render())
    if user_model_json is not None:
        parts.append(
            load_template("structure_user_model_guidance") + "\n" + user_model_json
        )
    parts.append(load_template("structure_tail"))
    return "\n\n".join(parts)


def build_memory_prompt(kind: str) -> str:
    if kind == "mainline_progress":
        return load_template("memory_mainline_progress")
    if kind == "branch_summary":
        return load_template("memory_branch_summary")
    raise ContextdError(f"unknown memory prompt kind: {kind}")


def render_transcript(nodes) -> str:
    """Numbered transcript (assembly order) plus the 4-key JSON directive."""
    lines = ["Conversation transcript:"]
    for i, node in enumerate(nodes, start=1):
        label = _ROLE_LABELS.get(node.role)
        if label is None:
            raise ContextdError(f"unknown node role: {node.role}")
        lines.append(f"{i}. {label} {node.content}")
    return "\n".join(lines) + "\n\n" + load_template("transcript_tail")


def build_extraction_system(extraction_type: str) -> str:
    if extraction_type not in EXTRACTION_TYPES:
        raise ContextdError(f"unknown extraction type: {extraction_type}")
    return load_template(f"extract_{extraction_type}")


def build_user_model_prompt() -> str:
    return load_template("user_model_agent")
