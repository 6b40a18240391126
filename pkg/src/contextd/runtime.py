"""Turn orchestration: conversation + structure agents, suggestions, memory.

The conversation and structure agents share one assembled context and run
concurrently; a structure-agent failure never blocks the reply. Suggestions
take effect only through an explicit accept, and every response or unprompted
structural operation records exactly one trace event.
"""

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from . import patterns as patterns_mod
from .assembly import apply_scope_overrides, assemble, resolve_visible_path
from .backend import (
    ROLE_CONVERSATION,
    ROLE_MEMORY,
    ROLE_STRUCTURE,
    make_request,
)
from .errors import (
    BackendError,
    ContextdError,
    DecisionParseError,
    SuggestionStateError,
    UnknownNodeError,
    UnknownPathError,
)
from .graph import BRANCH_COMPLETED, MAINLINE, ContextNode
from .project import Project
from .prompts import (
    MODE_BRANCH,
    MODE_MAINLINE,
    ExecutionContext,
    PromptInputs,
    build_memory_prompt,
    build_structure_prompt,
)
from .traces import (
    compress_recent_pairs,
    default_user_model,
    make_trace_event,
    update_user_model,
)

logger = logging.getLogger(__name__)

PRIMARY_ACTIONS = ("continue", "branch", "return_parent")
ASSET_ACTIONS = ("none", "extract_reasoning", "extract_task_sop")
DECISION_KEYS = (
    "primary_action",
    "asset_action",
    "confidence",
    "reason",
    "asset_reason",
    "show_suggestion",
)

SUGGESTION_PENDING = "pending"
SUGGESTION_ACCEPTED = "accepted"
SUGGESTION_REJECTED = "rejected"
SUGGESTION_IGNORED = "ignored"

RECENT_INTENTS_LIMIT = 5


@dataclass
class StructureDecision:
    primary_action: str
    asset_action: str
    confidence: float
    reason: str
    asset_reason: str
    show_suggestion: bool

    def to_dict(self) -> dict:
        return {
            "primary_action": self.primary_action,
            "asset_action": self.asset_action,
            "confidence": self.confidence,
            "reason": self.reason,
            "asset_reason": self.asset_reason,
            "show_suggestion": self.show_suggestion,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StructureDecision":
        return cls(**{key: d[key] for key in DECISION_KEYS})


def parse_structure_decision(raw: str) -> StructureDecision:
    """Strict 6-field contract; no coercion, unknown keys rejected."""
    try:
        payload = json.loads(raw)
    except ValueError as exc:
        raise DecisionParseError(f"decision is not valid JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise DecisionParseError("decision must be a JSON object")
    keys = set(payload)
    if keys != set(DECISION_KEYS):
        missing = set(DECISION_KEYS) - keys
        extra = keys - set(DECISION_KEYS)
        raise DecisionParseError(
            f"decision shape mismatch (missing={sorted(missing)}, extra={sorted(extra)})"
        )
    if payload["primary_action"] not in PRIMARY_ACTIONS:
        raise DecisionParseError(f"unknown primary_action: {payload['primary_action']!r}")
    if payload["asset_action"] not in ASSET_ACTIONS:
        raise DecisionParseError(f"unknown asset_action: {payload['asset_action']!r}")
    confidence = payload["confidence"]
    if isinstance(confidence, bool) or not isinstance(confidence, (int, float)):
        raise DecisionParseError("confidence must be a number")
    if not 0.0 <= confidence <= 1.0:
        raise DecisionParseError(f"confidence outside [0,1]: {confidence}")
    for key in ("reason", "asset_reason"):
        if not isinstance(payload[key], str):
            raise DecisionParseError(f"{key} must be a string")
    if payload["asset_action"] != "none" and not payload["asset_reason"]:
        raise DecisionParseError("asset_reason required when asset_action is set")
    if not isinstance(payload["show_suggestion"], bool):
        raise DecisionParseError("show_suggestion must be a boolean")
    return StructureDecision(
        primary_action=payload["primary_action"],
        asset_action=payload["asset_action"],
        confidence=float(confidence),
        reason=payload["reason"],
        asset_reason=payload["asset_reason"],
        show_suggestion=payload["show_suggestion"],
    )


@dataclass
class Suggestion:
    id: str
    decision: StructureDecision
    anchor_node: str
    state: str = SUGGESTION_PENDING
    created_at: int = 0

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "decision": self.decision.to_dict(),
            "anchor_node": self.anchor_node,
            "state": self.state,
            "created_at": self.created_at,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Suggestion":
        return cls(
            id=d["id"],
            decision=StructureDecision.from_dict(d["decision"]),
            anchor_node=d["anchor_node"],
            state=d["state"],
            created_at=d.get("created_at", 0),
        )


@dataclass
class TurnResult:
    user_node: str
    assistant_node: str
    suggestion: Suggestion | None
    assembled: object  # AssembledContext, retained for audit

    def to_dict(self) -> dict:
        return {
            "user_node": self.user_node,
            "assistant_node": self.assistant_node,
            "suggestion": self.suggestion.to_dict() if self.suggestion else None,
            "assembled": self.assembled.to_dict(),
        }


@dataclass
class EngineConfig:
    user_model_enabled: bool = False
    model_update_every: int = 5
    trace_context_pairs: int = 3

    @classmethod
    def from_env(cls, env) -> "EngineConfig":
        flag = env.get("CTXD_USER_MODEL_ENABLED", "").strip().lower()
        return cls(user_model_enabled=flag in ("1", "true", "yes", "on"))


class ProjectEngine:
    """Mixed-initiative facade over one project: turns, suggestions, structure ops.

    The service serializes calls per project; within a turn only the two agent
    calls run concurrently. Memory and user-model work happens after commit.
    """

    def __init__(self, project: Project, backend, config: EngineConfig | None = None):
        self.project = project
        self.backend = backend
        self.config = config or EngineConfig()

    # --- turn pipeline ---

    def run_turn(self, user_text: str, from_node: str | None = None) -> TurnResult:
        project = self.project
        topology = project.topology
        scope = project.scope
        if from_node is not None:
            scope.base_path = topology.path_of(from_node)
            scope.truncate_at = from_node

        inputs = self.prompt_inputs()
        assembled = assemble(topology, scope, user_text, inputs)
        structure_system = build_structure_prompt(
            inputs.exec_ctx, inputs.user_model_json
        )
        conv_request = make_request(
            assembled.system_text, assembled.messages, ROLE_CONVERSATION
        )
        struct_request = make_request(
            structure_system, assembled.messages, ROLE_STRUCTURE
        )

        with ThreadPoolExecutor(max_workers=2) as pool:
            conv_future = pool.submit(self.backend.generate, conv_request)
            struct_future = pool.submit(self.backend.generate, struct_request)
            conv_response = conv_future.result()  # failure aborts the turn
            try:
                struct_response = struct_future.result()
            except BackendError as exc:
                struct_response = None
                logger.warning("structure agent failed, continuing: %s", exc)

        user_node = ContextNode(
            id=topology.allocate_node_id(), role="user", content=user_text
        )
        assistant_node = ContextNode(
            id=topology.allocate_node_id(), role="assistant", content=conv_response.text
        )
        after = None
        if scope.truncate_at is not None and scope.truncate_at in topology.path_nodes(
            scope.base_path
        ):
            after = scope.truncate_at
        topology.append_exchange(scope.base_path, user_node, assistant_node, after=after)
        if scope.truncate_at is not None:
            scope.truncate_at = assistant_node.id

        self._supersede_pending()

        suggestion = None
        if struct_response is not None:
            try:
                decision = parse_structure_decision(struct_response.text)
            except DecisionParseError as exc:
                logger.warning("structure decision rejected: %s", exc)
            else:
                if decision.show_suggestion and not (
                    decision.primary_action == "continue"
                    and decision.asset_action == "none"
                ):
                    suggestion = Suggestion(
                        id=project.allocate_suggestion_id(),
                        decision=decision,
                        anchor_node=assistant_node.id,
                        created_at=project.tick(),
                    )
                    project.suggestions.append(suggestion)

        self._commit()
        self._maybe_update_user_model()
        return TurnResult(
            user_node=user_node.id,
            assistant_node=assistant_node.id,
            suggestion=suggestion,
            assembled=assembled,
        )

    def _supersede_pending(self) -> None:
        pending = self.project.pending_suggestion()
        if pending is not None:
            pending.state = SUGGESTION_IGNORED
            self._record("suggestion_ignored_superseded", [pending.id])

    # --- suggestion negotiation ---

    def respond_to_suggestion(self, suggestion_id: str, action: str) -> dict:
        project = self.project
        suggestion = project.suggestion_by_id(suggestion_id)
        if suggestion is None:
            raise SuggestionStateError(f"unknown suggestion: {suggestion_id}")
        if suggestion.state != SUGGESTION_PENDING:
            raise SuggestionStateError(f"suggestion {suggestion_id} is not pending")
        if action not in ("accept", "reject", "ignore"):
            raise SuggestionStateError(f"unknown suggestion action: {action}")

        effect: dict = {"suggestion": suggestion_id, "action": action}
        if action == "reject":
            suggestion.state = SUGGESTION_REJECTED
            self._record("suggestion_rejected", [suggestion_id])
        elif action == "ignore":
            suggestion.state = SUGGESTION_IGNORED
            self._record("suggestion_ignored_explicit", [suggestion_id])
        else:
            if suggestion.anchor_node not in project.topology.nodes:
                suggestion.state = SUGGESTION_IGNORED
                self._record(
                    "suggestion_ignored_explicit",
                    [suggestion_id],
                    detail="stale_anchor",
                )
                effect["stale_anchor"] = True
                self._commit()
                return effect
            effect.update(self._execute_accept(suggestion))
            suggestion.state = SUGGESTION_ACCEPTED
            subjects = [suggestion_id] + [
                v for k, v in effect.items() if k in ("branch", "capsule") and v
            ]
            self._record("suggestion_accepted", subjects)
        self._commit()
        self._maybe_update_user_model()
        return effect

    def _execute_accept(self, suggestion: Suggestion) -> dict:
        """Apply both fields of the accepted decision; accept is the only
        path by which a StructureDecision ever mutates the topology."""
        project = self.project
        decision = suggestion.decision
        effect: dict = {}
        if decision.primary_action == "branch":
            parent = project.topology.path_of(suggestion.anchor_node)
            branch_id = project.topology.create_branch(
                parent, suggestion.anchor_node, intent=decision.reason or None
            )
            self._enter_path(branch_id)
            effect["branch"] = branch_id
        elif decision.primary_action == "return_parent":
            base = project.scope.base_path
            if base != MAINLINE and base in project.topology.branches:
                target = project.topology.branches[base].parent
                self._leave_branch_to_parent(base, target)
                effect["returned_to"] = target
        if decision.asset_action != "none":
            extraction_type = decision.asset_action.removeprefix("extract_")
            capsule = self._run_extraction(extraction_type, self._visible_node_ids())
            effect["capsule"] = capsule.id
        return effect

    # --- path transitions (memory agent) ---

    def transition_path(self, target: str) -> None:
        """User-initiated path switch; summarization per transition direction."""
        project = self.project
        if not project.topology.path_exists(target):
            raise UnknownPathError(f"unknown path: {target}")
        base = project.scope.base_path
        if target == base:
            project.scope.truncate_at = None
            self._commit()
            return
        if (
            base != MAINLINE
            and base in project.topology.branches
            and project.topology.branches[base].parent == target
        ):
            self._leave_branch_to_parent(base, target)
            self._record("manual_return", [base])
        else:
            self._enter_path(target)
        self._commit()
        self._maybe_update_user_model()

    def _enter_path(self, target: str) -> None:
        """Entering a branch from the mainline refreshes the mainline summary."""
        project = self.project
        if project.scope.base_path == MAINLINE and target != MAINLINE:
            project.mainline_summary = self._memory_summary(
                "mainline_progress", self._mainline_turn_nodes()
            )
        project.scope.base_path = target
        project.scope.truncate_at = None

    def _leave_branch_to_parent(self, branch_id: str, target: str) -> None:
        project = self.project
        branch = project.topology.branches[branch_id]
        summary = self._memory_summary("branch_summary", self._branch_turn_nodes(branch))
        branch.status = BRANCH_COMPLETED
        if summary is not None:
            branch.summary = summary
        project.scope.base_path = target
        project.scope.truncate_at = None

    def _memory_summary(self, kind: str, nodes) -> str | None:
        """Memory-agent call; failures degrade to an absent summary."""
        request = make_request(
            build_memory_prompt(kind),
            [(node.role, node.content) for node in nodes],
            ROLE_MEMORY,
        )
        try:
            return self.backend.generate(request).text
        except BackendError as exc:
            logger.warning("memory agent failed (%s): %s", kind, exc)
            return None

    def _mainline_turn_nodes(self):
        topology = self.project.topology
        start, end = topology.window_bounds()
        ids = topology.mainline[start : end + 1]
        return self._content_nodes(ids)

    def _branch_turn_nodes(self, branch):
        return self._content_nodes(branch.segment)

    def _content_nodes(self, ids):
        topology = self.project.topology
        excluded = self.project.scope.excluded_nodes
        return [
            topology.nodes[i]
            for i in ids
            if i not in excluded and not topology.nodes[i].placeholder
        ]

    # --- unprompted structural operations (all traced) ---

    def create_branch(self, anchor: str, intent: str | None = None) -> str:
        parent = self.project.topology.path_of(anchor)
        branch_id = self.project.topology.create_branch(parent, anchor, intent=intent)
        self._record("manual_branch", [branch_id, anchor])
        self._commit()
        self._maybe_update_user_model()
        return branch_id

    def rebranch_from(self, node_id: str, intent: str | None = None) -> str:
        branch_id = self.project.topology.rebranch_from(node_id, intent=intent)
        self._record("manual_branch", [branch_id, node_id])
        self._commit()
        self._maybe_update_user_model()
        return branch_id

    def edit_node(self, node_id: str, content: str) -> None:
        self.project.topology.edit_node(node_id, content)
        self._record("manual_edit", [node_id])
        self._commit()
        self._maybe_update_user_model()

    def set_layout(self, node_id: str, pos: tuple[float, float] | None) -> None:
        """Rearrange-mode drag; layout only, no trace, no journal entry."""
        self.project.topology.set_layout_pos(node_id, pos)
        self._commit()

    def delete_nodes(self, ids, preview: bool = False):
        report = self.project.topology.delete_nodes(ids, preview=preview)
        if preview:
            return report
        scope = self.project.scope
        if not self.project.topology.path_exists(scope.base_path):
            scope.base_path = MAINLINE
            scope.truncate_at = None
        if scope.truncate_at is not None and scope.truncate_at not in self.project.topology.nodes:
            scope.truncate_at = None
        self._record("manual_delete", sorted(ids))
        self._commit()
        self._maybe_update_user_model()
        return report

    def set_mainline_bounds(
        self,
        start: str | None = None,
        end: str | None = None,
        clear_start: bool = False,
        clear_end: bool = False,
    ) -> None:
        topology = self.project.topology
        topology.set_mainline_bounds(
            start=start, end=end, clear_start=clear_start, clear_end=clear_end
        )
        scope = self.project.scope
        if not topology.path_exists(scope.base_path):
            # the base branch was consumed by a promotion; work continues there
            scope.base_path = MAINLINE
            scope.truncate_at = None
        subjects = [s for s in (start, end) if s]
        self._record("manual_mainline_change", subjects)
        self._commit()
        self._maybe_update_user_model()

    def scope_op(self, op: str, ids) -> None:
        scope = self.project.scope
        ids = list(ids)
        if op == "include":
            scope.include(ids)
            self._record("manual_include", ids)
        elif op == "exclude":
            scope.exclude(ids)
            self._record("manual_exclude", ids)
        elif op == "revert":
            deactivated, reactivated = scope.revert(ids)
            if deactivated:
                self._record("manual_exclude", deactivated, detail="revert")
            if reactivated:
                self._record("manual_include", reactivated, detail="revert")
        else:
            raise ContextdError(f"unknown scope op: {op}")
        self._commit()
        self._maybe_update_user_model()

    def history(self, op: str) -> None:
        topology = self.project.topology
        if op == "undo":
            topology.undo()
        elif op == "redo":
            topology.redo()
        elif op == "reset":
            topology.reset()
        else:
            raise ContextdError(f"unknown history op: {op}")
        scope = self.project.scope
        if not topology.path_exists(scope.base_path):
            scope.base_path = MAINLINE
            scope.truncate_at = None
        self._commit()

    # --- patterns ---

    def extract_pattern(self, extraction_type: str, node_ids):
        project = self.project
        nodes = []
        for node_id in node_ids:
            node = project.topology.nodes.get(node_id)
            if node is None:
                raise UnknownNodeError(f"unknown node: {node_id}")
            if not node.placeholder:
                nodes.append(node)
        nodes.sort(key=lambda n: (n.created_at, n.seq))
        capsule = self._store_extraction(extraction_type, nodes)
        self._record("extraction_requested", [capsule.id] + [n.id for n in nodes])
        self._commit()
        self._maybe_update_user_model()
        return capsule

    def _run_extraction(self, extraction_type: str, node_ids):
        nodes = [
            self.project.topology.nodes[i]
            for i in node_ids
            if not self.project.topology.nodes[i].placeholder
        ]
        return self._store_extraction(extraction_type, nodes)

    def _store_extraction(self, extraction_type: str, nodes):
        project = self.project
        capsule = patterns_mod.extract_pattern(
            self.backend,
            extraction_type,
            nodes,
            capsule_id=project.allocate_capsule_id(),
            created_at=project.tick(),
        )
        if capsule.state == patterns_mod.STATE_ACTIVE:
            capsule.activated_seq = project.allocate_activation_seq()
            capsule.enabled_history.append([capsule.created_at, True])
        project.capsules.append(capsule)
        return capsule

    def review_pattern(self, capsule_id: str, edits: dict, approve: bool):
        project = self.project
        capsule = project.capsule_by_id(capsule_id)
        if capsule is None:
            raise UnknownNodeError(f"unknown capsule: {capsule_id}")
        patterns_mod.review_pattern(capsule, edits, approve)
        if approve:
            capsule.activated_seq = project.allocate_activation_seq()
            capsule.enabled_history.append([project.tick(), True])
        self._record(
            "capsule_reviewed", [capsule_id], detail="approved" if approve else "edited"
        )
        self._commit()
        self._maybe_update_user_model()
        return capsule

    def set_capsule_enabled(self, capsule_id: str, enabled: bool):
        project = self.project
        capsule = project.capsule_by_id(capsule_id)
        if capsule is None:
            raise UnknownNodeError(f"unknown capsule: {capsule_id}")
        patterns_mod.set_enabled(capsule, enabled)
        if enabled:
            capsule.activated_seq = project.allocate_activation_seq()
        capsule.enabled_history.append([project.tick(), enabled])
        self._commit()
        return capsule

    # --- prompt input assembly ---

    def prompt_inputs(self) -> PromptInputs:
        project = self.project
        scope = project.scope
        topology = project.topology
        mode = MODE_MAINLINE if scope.base_path == MAINLINE else MODE_BRANCH
        anchor = None
        branch_summaries: list[str] = []
        if mode == MODE_BRANCH:
            anchor = topology.branches[scope.base_path].anchor
        else:
            branch_summaries = [
                b.summary
                for b in topology.branches.values()
                if b.status == BRANCH_COMPLETED and b.summary
            ]
        user_model_json = None
        if self.config.user_model_enabled and project.user_model is not None:
            user_model_json = project.user_model.raw_json
        return PromptInputs(
            mode=mode,
            anchor_node_id=anchor,
            mainline_summary=project.mainline_summary if mode == MODE_BRANCH else None,
            branch_summaries=branch_summaries,
            enabled_patterns=project.active_capsules(),
            exec_ctx=self.execution_context(),
            user_model_json=user_model_json,
        )

    def execution_context(self) -> ExecutionContext:
        project = self.project
        topology = project.topology
        scope = project.scope
        mode = MODE_MAINLINE if scope.base_path == MAINLINE else MODE_BRANCH
        depth = 0
        branch_intent = None
        parent_tldr = None
        if mode == MODE_BRANCH:
            chain = topology.branch_chain(scope.base_path)
            depth = len(chain)
            branch_intent = chain[-1].intent
            if len(chain) > 1:
                parent_tldr = chain[-2].summary
        intents = [b.intent for b in topology.branches.values() if b.intent]
        return ExecutionContext(
            mode=mode,
            branch_depth=depth,
            branch_intent=branch_intent,
            parent_tldr=parent_tldr,
            mainline_tldr=project.mainline_summary,
            total_branches=len(topology.branches),
            active_branches=sum(
                1 for b in topology.branches.values() if b.status == "active"
            ),
            recent_intents=list(reversed(intents[-RECENT_INTENTS_LIMIT:])),
        )

    def _visible_node_ids(self) -> list[str]:
        scope = self.project.scope
        visible = resolve_visible_path(
            self.project.topology, scope.base_path, scope.truncate_at
        )
        effective, _ = apply_scope_overrides(visible, scope, self.project.topology)
        return [n.id for n in sorted(effective, key=lambda n: (n.created_at, n.seq))]

    # --- traces and the user model ---

    def _record(self, kind: str, subject_ids, detail: str | None = None) -> None:
        project = self.project
        context = compress_recent_pairs(
            [
                project.topology.nodes[i]
                for i in self._visible_ids_safe()
            ],
            k=self.config.trace_context_pairs,
        )
        event = make_trace_event(
            project.allocate_trace_id(),
            kind,
            subject_ids,
            compressed_context=context,
            created_at=project.tick(),
            detail=detail,
        )
        project.traces.append(event)
        project.traces_since_model_update += 1

    def _visible_ids_safe(self) -> list[str]:
        try:
            return self._visible_node_ids()
        except ContextdError:
            return []

    def _maybe_update_user_model(self) -> None:
        project = self.project
        if not self.config.user_model_enabled:
            return
        if project.traces_since_model_update < self.config.model_update_every:
            return
        self.refresh_user_model()

    def refresh_user_model(self):
        """Run the user-model agent over traces accumulated since last update."""
        project = self.project
        if project.traces_since_model_update == 0 and project.user_model is not None:
            return project.user_model
        if not project.traces:
            return project.user_model or default_user_model()
        new_events = project.traces[-project.traces_since_model_update :]
        try:
            model = update_user_model(
                self.backend, new_events, project.user_model, project.tick()
            )
        except ContextdError as exc:
            logger.warning("user model update failed, keeping prior: %s", exc)
            return project.user_model
        project.user_model = model
        project.traces_since_model_update = 0
        return model

    def _commit(self) -> None:
        self.project.version += 1
