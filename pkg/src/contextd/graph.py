"""Conversation topology: node store, mainline, branches, deletion grafting, journal.

All structural mutations run through the topology and are recorded in its
MutationJournal as (forward, inverse) command entries, so undo/redo/reset
replay deterministically, including placeholder ids.
"""

import logging
from dataclasses import dataclass, field

from .errors import (
    DuplicateNodeError,
    InvalidBoundsError,
    JournalError,
    PlaceholderEditError,
    UnknownNodeError,
    UnknownPathError,
)

logger = logging.getLogger(__name__)

MAINLINE = "mainline"

ROLE_USER = "user"
ROLE_ASSISTANT = "assistant"
ROLE_SYSTEM = "system"
NODE_ROLES = frozenset({ROLE_USER, ROLE_ASSISTANT, ROLE_SYSTEM})

BRANCH_ACTIVE = "active"
BRANCH_COMPLETED = "completed"

DEMOTED_MAINLINE_INTENT = "demoted mainline"


@dataclass
class ContextNode:
    """One atomic context unit: a single user/assistant/system message."""

    id: str
    role: str
    content: str
    created_at: int = 0
    seq: int = 0
    placeholder: bool = False
    layout_pos: tuple[float, float] | None = None  # UI layout only, never assembled

    def to_dict(self) -> dict:
        d = {
            "id": self.id,
            "role": self.role,
            "content": self.content,
            "created_at": self.created_at,
            "seq": self.seq,
            "placeholder": self.placeholder,
        }
        if self.layout_pos is not None:
            d["layout_pos"] = list(self.layout_pos)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ContextNode":
        pos = d.get("layout_pos")
        return cls(
            id=d["id"],
            role=d["role"],
            content=d["content"],
            created_at=d["created_at"],
            seq=d["seq"],
            placeholder=d.get("placeholder", False),
            layout_pos=tuple(pos) if pos is not None else None,
        )


def make_placeholder(node_id: str, created_at: int, seq: int) -> ContextNode:
    # Placeholders are semantically empty: system role, empty content.
    return ContextNode(
        id=node_id,
        role=ROLE_SYSTEM,
        content="",
        created_at=created_at,
        seq=seq,
        placeholder=True,
    )


@dataclass
class Branch:
    """A sub-thread anchored at a node on its parent path."""

    id: str
    parent: str  # MAINLINE or a branch id
    anchor: str  # node id on the parent path
    segment: list[str] = field(default_factory=list)
    intent: str | None = None
    status: str = BRANCH_ACTIVE
    summary: str | None = None

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "parent": self.parent,
            "anchor": self.anchor,
            "segment": list(self.segment),
            "intent": self.intent,
            "status": self.status,
            "summary": self.summary,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Branch":
        return cls(
            id=d["id"],
            parent=d["parent"],
            anchor=d["anchor"],
            segment=list(d["segment"]),
            intent=d.get("intent"),
            status=d.get("status", BRANCH_ACTIVE),
            summary=d.get("summary"),
        )


@dataclass
class PlaceholderRecord:
    """A placeholder inserted by deletion grafting; id is None in previews."""

    id: str | None
    origin: str  # the deleted node this placeholder replaced
    path: str  # container path (MAINLINE or branch id)

    def to_dict(self) -> dict:
        return {"id": self.id, "origin": self.origin, "path": self.path}


@dataclass
class DeletionReport:
    removed: list[str] = field(default_factory=list)
    placeholders: list[PlaceholderRecord] = field(default_factory=list)
    dropped_branches: list[str] = field(default_factory=list)
    preview: bool = False

    def to_dict(self) -> dict:
        return {
            "removed": list(self.removed),
            "placeholders": [p.to_dict() for p in self.placeholders],
            "dropped_branches": list(self.dropped_branches),
            "preview": self.preview,
        }


@dataclass
class MutationJournal:
    """Ordered (forward, inverse) command entries with a cursor and a baseline.

    Entries are plain dicts so the journal serializes with the topology and
    redo replays byte-identically (placeholder/node ids are recorded, not
    re-allocated).
    """

    entries: list[dict] = field(default_factory=list)
    cursor: int = 0
    baseline: dict = field(default_factory=dict)

    def record(self, entry: dict) -> None:
        del self.entries[self.cursor :]
        self.entries.append(entry)
        self.cursor += 1

    @property
    def can_undo(self) -> bool:
        return self.cursor > 0

    @property
    def can_redo(self) -> bool:
        return self.cursor < len(self.entries)

    def to_dict(self) -> dict:
        return {
            "entries": _deep_copy(self.entries),
            "cursor": self.cursor,
            "baseline": _deep_copy(self.baseline),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MutationJournal":
        return cls(
            entries=_deep_copy(d.get("entries", [])),
            cursor=d.get("cursor", 0),
            baseline=_deep_copy(d.get("baseline", {})),
        )


def _deep_copy(obj):
    if isinstance(obj, dict):
        return {k: _deep_copy(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_deep_copy(v) for v in obj]
    return obj


class ConversationTopology:
    """Per-project structure: nodes, ordered mainline, branch records, journal."""

    def __init__(self, id_prefix: str = ""):
        self.nodes: dict[str, ContextNode] = {}
        self.mainline: list[str] = []
        self.branches: dict[str, Branch] = {}
        self.mainline_start: str | None = None
        self.mainline_end: str | None = None
        self.id_prefix = id_prefix
        self._next_node = 1
        self._next_branch = 1
        self._next_seq = 1
        self._clock = 0
        self.journal = MutationJournal(baseline=self.structure_dict())

    # --- id / clock allocation ---

    def allocate_node_id(self) -> str:
        nid = f"{self.id_prefix}n{self._next_node}"
        self._next_node += 1
        return nid

    def allocate_branch_id(self) -> str:
        bid = f"{self.id_prefix}b{self._next_branch}"
        self._next_branch += 1
        return bid

    def tick(self) -> int:
        self._clock += 1
        return self._clock

    # --- lookups ---

    def path_exists(self, path: str) -> bool:
        return path == MAINLINE or path in self.branches

    def path_nodes(self, path: str) -> list[str]:
        """Full ordered node-id list of a path (window-independent)."""
        if path == MAINLINE:
            return self.mainline
        try:
            return self.branches[path].segment
        except KeyError:
            raise UnknownPathError(f"unknown path: {path}") from None

    def path_of(self, node_id: str) -> str:
        """Path containing the node; every stored node lives in exactly one."""
        if node_id not in self.nodes:
            raise UnknownNodeError(f"unknown node: {node_id}")
        if node_id in self.mainline:
            return MAINLINE
        for branch in self.branches.values():
            if node_id in branch.segment:
                return branch.id
        raise UnknownNodeError(f"node not on any path: {node_id}")

    def branch_chain(self, branch_id: str) -> list[Branch]:
        """Chain from the root branch (parented on the mainline) to branch_id."""
        chain: list[Branch] = []
        seen: set[str] = set()
        current = branch_id
        while current != MAINLINE:
            if current in seen or current not in self.branches:
                raise UnknownPathError(f"dangling branch chain at: {current}")
            seen.add(current)
            branch = self.branches[current]
            chain.append(branch)
            current = branch.parent
        chain.reverse()
        return chain

    def window_bounds(self) -> tuple[int, int]:
        """Mainline window as (start_index, end_index) inclusive; (0, -1) if empty."""
        if not self.mainline:
            return 0, -1
        start = self.mainline.index(self.mainline_start) if self.mainline_start else 0
        end = (
            self.mainline.index(self.mainline_end)
            if self.mainline_end
            else len(self.mainline) - 1
        )
        return start, end

    # --- mutations ---

    def append_exchange(
        self,
        path: str,
        user_node: ContextNode,
        assistant_node: ContextNode,
        after: str | None = None,
    ) -> None:
        """Append a (user, assistant) exchange to the tail of the path's window.

        `after` pins the insertion point (restart-from-node); otherwise the
        exchange lands after the mainline window end, or the segment tail.
        Both nodes get the same timestamp tick; seq breaks the tie.
        """
        if not self.path_exists(path):
            raise UnknownPathError(f"unknown path: {path}")
        for node in (user_node, assistant_node):
            if node.id in self.nodes:
                raise DuplicateNodeError(f"duplicate node id: {node.id}")
        if user_node.id == assistant_node.id:
            raise DuplicateNodeError(f"duplicate node id: {user_node.id}")

        container = self.path_nodes(path)
        if after is not None:
            if after not in container:
                raise UnknownNodeError(f"insertion point not on path: {after}")
            index = container.index(after) + 1
        elif path == MAINLINE and self.mainline_end is not None:
            index = container.index(self.mainline_end) + 1
        else:
            index = len(container)

        tick = self.tick()
        for node in (user_node, assistant_node):
            node.created_at = tick
            node.seq = self._next_seq
            self._next_seq += 1

        prev_end = self.mainline_end
        prev_status = None
        new_end = prev_end
        if path == MAINLINE and self.mainline_end is not None:
            new_end = assistant_node.id
        if path != MAINLINE:
            prev_status = self.branches[path].status

        entry = {
            "op": "append_exchange",
            "path": path,
            "index": index,
            "user": user_node.to_dict(),
            "assistant": assistant_node.to_dict(),
            "prev_mainline_end": prev_end,
            "new_mainline_end": new_end,
            "prev_branch_status": prev_status,
        }
        self._apply_append(entry)
        self.journal.record(entry)

    def create_branch(
        self,
        parent: str,
        anchor: str,
        intent: str | None = None,
        branch_id: str | None = None,
    ) -> str:
        if not self.path_exists(parent):
            raise UnknownPathError(f"unknown path: {parent}")
        if anchor not in self.path_nodes(parent):
            raise UnknownNodeError(f"anchor {anchor} not on path {parent}")
        bid = branch_id or self.allocate_branch_id()
        if bid in self.branches:
            raise DuplicateNodeError(f"duplicate branch id: {bid}")
        branch = Branch(id=bid, parent=parent, anchor=anchor, intent=intent)
        entry = {"op": "create_branch", "branch": branch.to_dict()}
        self._apply_create_branch(entry)
        self.journal.record(entry)
        return bid

    def rebranch_from(self, node_id: str, intent: str | None = None) -> str:
        """Branch anchored at the node, parent inferred from its containing path."""
        return self.create_branch(self.path_of(node_id), node_id, intent=intent)

    def edit_node(self, node_id: str, new_content: str) -> None:
        node = self.nodes.get(node_id)
        if node is None:
            raise UnknownNodeError(f"unknown node: {node_id}")
        if node.placeholder:
            raise PlaceholderEditError(f"cannot edit placeholder: {node_id}")
        entry = {
            "op": "edit_node",
            "node": node_id,
            "before": node.content,
            "after": new_content,
        }
        self._apply_edit(entry)
        self.journal.record(entry)

    def delete_nodes(self, ids, preview: bool = False) -> DeletionReport:
        """Remove nodes, grafting placeholders where structure requires them.

        A deleted node is replaced by a placeholder (same slot) iff it anchors
        a surviving branch or is an explicit mainline boundary; everything else
        is removed outright. Branches whose whole segment is deleted are
        dropped unless a surviving branch still anchors into them.
        """
        doomed = set(ids)
        if not doomed:
            return DeletionReport(preview=preview)
        for node_id in doomed:
            if node_id not in self.nodes:
                raise UnknownNodeError(f"unknown node: {node_id}")

        # Branch survivor fixpoint: a wholly-deleted branch still survives (as
        # a placeholder husk) while some surviving branch anchors inside it.
        dropped = {
            b.id
            for b in self.branches.values()
            if b.segment and set(b.segment) <= doomed
        }
        changed = True
        while changed:
            changed = False
            for branch in self.branches.values():
                if branch.id in dropped:
                    continue
                host = self._container_of(branch.anchor)
                if host in dropped:
                    dropped.discard(host)
                    changed = True

        def structural(node_id: str) -> bool:
            if node_id == self.mainline_start or node_id == self.mainline_end:
                return True
            return any(
                b.anchor == node_id and b.id not in dropped
                for b in self.branches.values()
            )

        report = DeletionReport(preview=preview)
        placeholder_for: dict[str, dict] = {}
        new_segments: dict[str, list[str]] = {}
        added_nodes: list[dict] = []

        containers = [(MAINLINE, self.mainline)] + [
            (b.id, b.segment) for b in self.branches.values() if b.id not in dropped
        ]
        for path, slots in containers:
            kept: list[str] = []
            for node_id in slots:
                if node_id not in doomed:
                    kept.append(node_id)
                    continue
                if structural(node_id):
                    if preview:
                        record = PlaceholderRecord(id=None, origin=node_id, path=path)
                    else:
                        pid = self.allocate_node_id()
                        placeholder = make_placeholder(pid, self.tick(), self._next_seq)
                        self._next_seq += 1
                        record = PlaceholderRecord(id=pid, origin=node_id, path=path)
                        placeholder_for[node_id] = placeholder.to_dict()
                        added_nodes.append(placeholder.to_dict())
                        kept.append(pid)
                    report.placeholders.append(record)
            new_segments[path] = kept
        report.removed = sorted(doomed, key=lambda n: self.nodes[n].seq)
        report.dropped_branches = sorted(dropped)

        if preview:
            return report

        entry = {
            "op": "delete_nodes",
            "before": self.structure_dict(),
            "removed_nodes": [self.nodes[n].to_dict() for n in report.removed],
            "added_nodes": added_nodes,
            "after": None,  # filled below once the after-state is built
        }

        for node_id in report.removed:
            del self.nodes[node_id]
        for node_dict in added_nodes:
            node = ContextNode.from_dict(node_dict)
            self.nodes[node.id] = node
        self.mainline = new_segments[MAINLINE]
        for branch_id in report.dropped_branches:
            del self.branches[branch_id]
        for branch in self.branches.values():
            branch.segment = new_segments[branch.id]
            if branch.anchor in placeholder_for:
                branch.anchor = placeholder_for[branch.anchor]["id"]
        if self.mainline_start in placeholder_for:
            self.mainline_start = placeholder_for[self.mainline_start]["id"]
        if self.mainline_end in placeholder_for:
            self.mainline_end = placeholder_for[self.mainline_end]["id"]

        entry["after"] = self.structure_dict()
        self.journal.record(entry)
        return report

    def set_mainline_bounds(
        self,
        start: str | None = None,
        end: str | None = None,
        clear_start: bool = False,
        clear_end: bool = False,
    ) -> None:
        """Move the mainline window, or promote a branch path to mainline.

        When `end` lies on a branch, the mainline prefix through the root
        anchor plus the chained segments up to `end` become the new mainline;
        the displaced old tail is demoted to a branch.
        """
        if start is None and end is None and not clear_start and not clear_end:
            return
        before = self.structure_dict()
        new_start = None if clear_start else (start or self.mainline_start)
        if new_start is not None and new_start not in self.nodes:
            raise UnknownNodeError(f"unknown node: {new_start}")
        if new_start is not None and new_start not in self.mainline:
            raise InvalidBoundsError("mainline start must lie on the mainline")

        if end is not None:
            if end not in self.nodes:
                raise UnknownNodeError(f"unknown node: {end}")
            end_path = self.path_of(end)
            if end_path == MAINLINE:
                self._check_window(new_start, end)
                self.mainline_start = new_start
                self.mainline_end = end
            else:
                self._promote(end)
                if new_start is not None and new_start in self.mainline:
                    self.mainline_start = new_start
                elif self.mainline_start not in self.mainline:
                    self.mainline_start = None
        else:
            new_end = None if clear_end else self.mainline_end
            self._check_window(new_start, new_end)
            self.mainline_start = new_start
            self.mainline_end = new_end

        entry = {
            "op": "set_mainline_bounds",
            "before": before,
            "after": self.structure_dict(),
        }
        self.journal.record(entry)

    def set_layout_pos(self, node_id: str, pos: tuple[float, float] | None) -> None:
        """Rearrange-mode support; layout only, never journaled or assembled."""
        node = self.nodes.get(node_id)
        if node is None:
            raise UnknownNodeError(f"unknown node: {node_id}")
        node.layout_pos = pos

    # --- journal traversal ---

    def undo(self) -> None:
        if not self.journal.can_undo:
            raise JournalError("nothing to undo")
        entry = self.journal.entries[self.journal.cursor - 1]
        self._apply_entry(entry, forward=False)
        self.journal.cursor -= 1

    def redo(self) -> None:
        if not self.journal.can_redo:
            raise JournalError("nothing to redo")
        entry = self.journal.entries[self.journal.cursor]
        self._apply_entry(entry, forward=True)
        self.journal.cursor += 1

    def reset(self) -> None:
        while self.journal.can_undo:
            self.undo()

    # --- internals ---

    def _container_of(self, node_id: str) -> str:
        if node_id in self.mainline:
            return MAINLINE
        for branch in self.branches.values():
            if node_id in branch.segment:
                return branch.id
        return MAINLINE

    def _check_window(self, start: str | None, end: str | None) -> None:
        if start is None or end is None:
            return
        if end not in self.mainline:
            raise InvalidBoundsError("mainline end must lie on the mainline")
        if self.mainline.index(start) > self.mainline.index(end):
            raise InvalidBoundsError("mainline start after end")

    def _promote(self, end: str) -> None:
        end_path = self.path_of(end)
        chain = self.branch_chain(end_path)
        root = chain[0]
        if root.parent != MAINLINE or root.anchor not in self.mainline:
            raise UnknownPathError("unreachable end: root branch not on mainline")
        anchor_pos = self.mainline.index(root.anchor)
        old_tail = self.mainline[anchor_pos + 1 :]
        new_mainline = self.mainline[: anchor_pos + 1]

        for i, branch in enumerate(chain):
            boundary = chain[i + 1].anchor if i + 1 < len(chain) else end
            if boundary not in branch.segment:
                raise UnknownPathError("unreachable end: broken branch chain")
            cut = branch.segment.index(boundary)
            new_mainline.extend(branch.segment[: cut + 1])
            leftover = branch.segment[cut + 1 :]
            if leftover:
                branch.segment = leftover
                branch.anchor = boundary
            else:
                del self.branches[branch.id]

        if old_tail:
            demoted = Branch(
                id=self.allocate_branch_id(),
                parent=MAINLINE,
                anchor=root.anchor,
                segment=old_tail,
                intent=DEMOTED_MAINLINE_INTENT,
            )
            self.branches[demoted.id] = demoted

        self.mainline = new_mainline
        self.mainline_end = end
        # Every surviving anchor resolves; re-parent to its containing path.
        for branch in self.branches.values():
            branch.parent = self._container_of(branch.anchor)

    def _apply_append(self, entry: dict) -> None:
        user = ContextNode.from_dict(entry["user"])
        assistant = ContextNode.from_dict(entry["assistant"])
        container = self.path_nodes(entry["path"])
        container[entry["index"] : entry["index"]] = [user.id, assistant.id]
        self.nodes[user.id] = user
        self.nodes[assistant.id] = assistant
        if entry["path"] == MAINLINE:
            self.mainline_end = entry["new_mainline_end"]
        else:
            self.branches[entry["path"]].status = BRANCH_ACTIVE

    def _unapply_append(self, entry: dict) -> None:
        container = self.path_nodes(entry["path"])
        for key in ("user", "assistant"):
            node_id = entry[key]["id"]
            container.remove(node_id)
            del self.nodes[node_id]
        if entry["path"] == MAINLINE:
            self.mainline_end = entry["prev_mainline_end"]
        else:
            self.branches[entry["path"]].status = entry["prev_branch_status"]

    def _apply_create_branch(self, entry: dict) -> None:
        branch = Branch.from_dict(entry["branch"])
        self.branches[branch.id] = branch

    def _apply_edit(self, entry: dict) -> None:
        self.nodes[entry["node"]].content = entry["after"]

    def _restore_structure(self, structure: dict) -> None:
        self.mainline = list(structure["mainline"])
        self.branches = {
            bid: Branch.from_dict(b) for bid, b in structure["branches"].items()
        }
        self.mainline_start = structure["mainline_start"]
        self.mainline_end = structure["mainline_end"]

    def _apply_entry(self, entry: dict, forward: bool) -> None:
        op = entry["op"]
        if op == "append_exchange":
            self._apply_append(entry) if forward else self._unapply_append(entry)
        elif op == "create_branch":
            if forward:
                self._apply_create_branch(entry)
            else:
                del self.branches[entry["branch"]["id"]]
        elif op == "edit_node":
            self.nodes[entry["node"]].content = (
                entry["after"] if forward else entry["before"]
            )
        elif op in ("delete_nodes", "set_mainline_bounds"):
            if forward:
                for node_dict in entry.get("removed_nodes", []):
                    del self.nodes[node_dict["id"]]
                for node_dict in entry.get("added_nodes", []):
                    node = ContextNode.from_dict(node_dict)
                    self.nodes[node.id] = node
                self._restore_structure(entry["after"])
            else:
                for node_dict in entry.get("added_nodes", []):
                    del self.nodes[node_dict["id"]]
                for node_dict in entry.get("removed_nodes", []):
                    node = ContextNode.from_dict(node_dict)
                    self.nodes[node.id] = node
                self._restore_structure(entry["before"])
        else:
            raise JournalError(f"unknown journal op: {op}")

    # --- serialization ---

    def structure_dict(self) -> dict:
        """Structural snapshot (no counters, no journal) for baselines and oracles."""
        return {
            "mainline": list(self.mainline),
            "branches": {bid: b.to_dict() for bid, b in self.branches.items()},
            "mainline_start": self.mainline_start,
            "mainline_end": self.mainline_end,
        }

    def to_dict(self) -> dict:
        return {
            "nodes": {nid: n.to_dict() for nid, n in self.nodes.items()},
            "mainline": list(self.mainline),
            "branches": {bid: b.to_dict() for bid, b in self.branches.items()},
            "mainline_start": self.mainline_start,
            "mainline_end": self.mainline_end,
            "id_prefix": self.id_prefix,
            "next_node": self._next_node,
            "next_branch": self._next_branch,
            "next_seq": self._next_seq,
            "clock": self._clock,
            "journal": self.journal.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ConversationTopology":
        topo = cls(id_prefix=d.get("id_prefix", ""))
        topo.nodes = {nid: ContextNode.from_dict(n) for nid, n in d["nodes"].items()}
        topo.mainline = list(d["mainline"])
        topo.branches = {
            bid: Branch.from_dict(b) for bid, b in d["branches"].items()
        }
        topo.mainline_start = d.get("mainline_start")
        topo.mainline_end = d.get("mainline_end")
        topo._next_node = d["next_node"]
        topo._next_branch = d["next_branch"]
        topo._next_seq = d["next_seq"]
        topo._clock = d["clock"]
        topo.journal = MutationJournal.from_dict(d["journal"])
        return topo
