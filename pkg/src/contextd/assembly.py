"""Effective-context computation: visible path, scope overrides, ordering.

Pure functions over immutable topology snapshots; safe for unrestricted
parallel invocation. Placeholders never survive past the override stage.
"""

import logging
from dataclasses import dataclass, field

from .errors import UnknownPathError
from .graph import MAINLINE, ContextNode, ConversationTopology
from .prompts import PromptInputs, build_conversation_system

logger = logging.getLogger(__name__)


@dataclass
class ContextScopeState:
    """The active perspective: base path plus manual include/exclude overrides.

    excluded and included stay disjoint: an include removes the id from
    excluded, and vice versa.
    """

    base_path: str = MAINLINE
    excluded_nodes: set[str] = field(default_factory=set)
    included_nodes: set[str] = field(default_factory=set)
    truncate_at: str | None = None

    def exclude(self, ids) -> None:
        for node_id in ids:
            self.excluded_nodes.add(node_id)
            self.included_nodes.discard(node_id)

    def include(self, ids) -> None:
        for node_id in ids:
            self.included_nodes.add(node_id)
            self.excluded_nodes.discard(node_id)

    def revert(self, ids) -> tuple[list[str], list[str]]:
        """Toggle activation state; returns (newly_excluded, newly_activated)."""
        deactivated: list[str] = []
        reactivated: list[str] = []
        for node_id in ids:
            if node_id in self.excluded_nodes:
                self.excluded_nodes.discard(node_id)
                reactivated.append(node_id)
            else:
                self.excluded_nodes.add(node_id)
                self.included_nodes.discard(node_id)
                deactivated.append(node_id)
        return deactivated, reactivated

    def to_dict(self) -> dict:
        return {
            "base_path": self.base_path,
            "excluded_nodes": sorted(self.excluded_nodes),
            "included_nodes": sorted(self.included_nodes),
            "truncate_at": self.truncate_at,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ContextScopeState":
        return cls(
            base_path=d.get("base_path", MAINLINE),
            excluded_nodes=set(d.get("excluded_nodes", [])),
            included_nodes=set(d.get("included_nodes", [])),
            truncate_at=d.get("truncate_at"),
        )


@dataclass
class AssembledContext:
    system_text: str
    messages: list[tuple[str, str]]
    final_user_turn: str
    ignored_included: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "system_text": self.system_text,
            "messages": [[role, content] for role, content in self.messages],
            "final_user_turn": self.final_user_turn,
            "ignored_included": list(self.ignored_included),
        }


def resolve_visible_path(
    topology: ConversationTopology,
    base_path: str,
    truncate_at: str | None = None,
) -> list[ContextNode]:
    """Ordered default-visible nodes for the base path, before overrides.

    Mainline mode yields the mainline window. Branch mode yields the mainline
    window prefix through the root anchor, each intermediate segment through
    the next nested anchor, then the current branch's full segment. Parallel
    sibling branches never appear. truncate_at cuts immediately after it.
    """
    if not topology.path_exists(base_path):
        raise UnknownPathError(f"unknown path: {base_path}")

    start_idx, end_idx = topology.window_bounds()
    if base_path == MAINLINE:
        ids = topology.mainline[start_idx : end_idx + 1]
    else:
        chain = topology.branch_chain(base_path)
        root = chain[0]
        if root.anchor not in topology.mainline:
            raise UnknownPathError(f"dangling branch chain at: {root.id}")
        anchor_idx = topology.mainline.index(root.anchor)
        ids = (
            topology.mainline[start_idx : anchor_idx + 1]
            if anchor_idx >= start_idx
            else []
        )
        for i, branch in enumerate(chain):
            if i + 1 < len(chain):
                nested_anchor = chain[i + 1].anchor
                if nested_anchor not in branch.segment:
                    raise UnknownPathError(f"dangling branch chain at: {branch.id}")
                cut = branch.segment.index(nested_anchor)
                ids = ids + branch.segment[: cut + 1]
            else:
                ids = ids + list(branch.segment)

    if truncate_at is not None and truncate_at in ids:
        ids = ids[: ids.index(truncate_at) + 1]
    return [topology.nodes[node_id] for node_id in ids]


def apply_scope_overrides(
    visible: list[ContextNode],
    scope: ContextScopeState,
    topology: ConversationTopology,
) -> tuple[list[ContextNode], list[str]]:
    """Effective set = (visible \\ excluded) ∪ included, placeholders dropped.

    Included ids may come from anywhere on the map; unknown ones are ignored
    and reported rather than raising, since scope states can outlive deletions.
    """
    effective: dict[str, ContextNode] = {
        node.id: node for node in visible if node.id not in scope.excluded_nodes
    }
    ignored: list[str] = []
    for node_id in sorted(scope.included_nodes):
        node = topology.nodes.get(node_id)
        if node is None:
            ignored.append(node_id)
        else:
            effective[node_id] = node
    result = [node for node in effective.values() if not node.placeholder]
    return result, ignored


def order_and_render(
    effective: list[ContextNode], new_user_text: str
) -> list[tuple[str, str]]:
    """Sort by (timestamp, seq), map to (role, content), append the new user turn."""
    ordered = sorted(effective, key=lambda n: (n.created_at, n.seq))
    messages = [(node.role, node.content) for node in ordered]
    messages.append(("user", new_user_text))
    return messages


def assemble(
    topology: ConversationTopology,
    scope: ContextScopeState,
    new_user_text: str,
    prompt_inputs: PromptInputs,
) -> AssembledContext:
    """Full per-turn context: system text plus the effective ordered messages."""
    visible = resolve_visible_path(topology, scope.base_path, scope.truncate_at)
    effective, ignored = apply_scope_overrides(visible, scope, topology)
    messages = order_and_render(effective, new_user_text)
    system_text = build_conversation_system(prompt_inputs)
    return AssembledContext(
        system_text=system_text,
        messages=messages,
        final_user_turn=new_user_text,
        ignored_included=ignored,
    )
