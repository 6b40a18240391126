"""Acceptance suite: one test per release criterion, at the stated tolerance.

Run with `pytest tests/test_acceptance.py -v -s` to see one line per criterion.
"""

import json
import random
import time
from pathlib import Path

import pytest

from contextd.assembly import (
    ContextScopeState,
    apply_scope_overrides,
    resolve_visible_path,
)
from contextd.backend import MockBackend
from contextd.errors import DecisionParseError, SuggestionStateError
from contextd.graph import MAINLINE
from contextd.project import Project, canonical_json, new_project
from contextd.prompts import build_structure_prompt
from contextd.replay import run_replay
from contextd.runtime import (
    ASSET_ACTIONS,
    PRIMARY_ACTIONS,
    ProjectEngine,
    parse_structure_decision,
)
from contextd.store import ProjectStore
from helpers import exchange, random_scope_parts, random_topology
from make_goldens import outputs
from oracles import check_topology, oracle_effective_ids, oracle_visible_ids

GOLDEN_DIR = Path(__file__).parent / "goldens"
DATA_DIR = Path(__file__).parent / "data"

CORPUS_SIZE = 1000


def report(name: str, detail: str = ""):
    suffix = f" ({detail})" if detail else ""
    print(f"\nACCEPTANCE PASS: {name}{suffix}")


def corpus():
    """The shared randomized corpus: (topology, scope parts) per seed."""
    for seed in range(CORPUS_SIZE):
        rng = random.Random(seed)
        topo = random_topology(rng, max_nodes=30, max_depth=4)
        yield seed, rng, topo, random_scope_parts(rng, topo)


def test_prompt_golden_suite():
    started = time.monotonic()
    built = outputs()
    for name, text in built.items():
        golden = (GOLDEN_DIR / "prompts" / f"{name}.txt").read_text(encoding="utf-8")
        assert text == golden, f"golden drift: {name}"
    elapsed = time.monotonic() - started
    assert elapsed < 1.0, f"golden suite took {elapsed:.2f}s"
    report("prompt golden suite", f"{len(built)} fixtures byte-equal in {elapsed:.2f}s")


def test_assembly_oracle_equivalence():
    started = time.monotonic()
    checked = 0
    for seed, rng, topo, (base, excluded, included, truncate) in corpus():
        visible = [n.id for n in resolve_visible_path(topo, base, truncate)]
        assert visible == oracle_visible_ids(topo, base, truncate), f"seed {seed}"
        scope = ContextScopeState(
            base_path=base,
            excluded_nodes=set(excluded),
            included_nodes=set(included),
            truncate_at=truncate,
        )
        effective, _ = apply_scope_overrides(
            resolve_visible_path(topo, base, truncate), scope, topo
        )
        got = [n.id for n in sorted(effective, key=lambda n: (n.created_at, n.seq))]
        assert got == oracle_effective_ids(topo, visible, excluded, included), (
            f"seed {seed}"
        )
        checked += 1
    elapsed = time.monotonic() - started
    assert checked >= 1000 and elapsed < 30, f"{checked} topologies in {elapsed:.1f}s"
    report("assembly oracle equivalence", f"{checked} topologies in {elapsed:.1f}s")


def test_isolation_invariants():
    sibling_leaks = excluded_leaks = placeholder_leaks = 0
    for seed, rng, topo, (base, excluded, included, truncate) in corpus():
        scope = ContextScopeState(
            base_path=base,
            excluded_nodes=set(excluded),
            included_nodes=set(included),
            truncate_at=truncate,
        )
        effective, _ = apply_scope_overrides(
            resolve_visible_path(topo, base, truncate), scope, topo
        )
        allowed_paths = {MAINLINE}
        if base != MAINLINE:
            allowed_paths |= {b.id for b in topo.branch_chain(base)}
        for node in effective:
            if node.id in excluded:
                excluded_leaks += 1
            if node.placeholder:
                placeholder_leaks += 1
            if node.id not in included:
                path = topo.path_of(node.id)
                if path not in allowed_paths or (
                    base == MAINLINE and path != MAINLINE
                ):
                    sibling_leaks += 1
    assert sibling_leaks == 0 and excluded_leaks == 0 and placeholder_leaks == 0
    report(
        "isolation invariants",
        f"0 sibling / 0 excluded / 0 placeholder leaks over {CORPUS_SIZE} topologies",
    )


def test_grafting_totality_and_minimality():
    started = time.monotonic()
    checked = 0
    for seed in range(400):
        rng = random.Random(10_000 + seed)
        topo = random_topology(rng, max_nodes=30, max_depth=4)
        ids = list(topo.nodes)
        doomed = set(rng.sample(ids, k=rng.randint(1, max(1, len(ids) // 2))))
        pre_branches = {b.id: b.to_dict() for b in topo.branches.values()}
        pre_start, pre_end = topo.mainline_start, topo.mainline_end

        report_obj = topo.delete_nodes(doomed)
        check_topology(topo)  # totality: every surviving anchor resolves

        survivors = set(topo.branches)
        expected_origins = set()
        for node_id in doomed:
            anchors_survivor = any(
                b["anchor"] == node_id and bid in survivors
                for bid, b in pre_branches.items()
            )
            if anchors_survivor or node_id in (pre_start, pre_end):
                expected_origins.add(node_id)
        got_origins = {p.origin for p in report_obj.placeholders}
        assert got_origins == expected_origins, f"seed {seed}: placeholder minimality"
        for branch_id, branch in pre_branches.items():
            if branch_id not in survivors:
                assert branch["segment"] and set(branch["segment"]) <= doomed, (
                    f"seed {seed}: dropped a branch that was not wholly deleted"
                )
        checked += 1
    elapsed = time.monotonic() - started
    assert elapsed < 30
    report(
        "grafting totality",
        f"{checked} random deletion rounds, minimal placeholders, in {elapsed:.1f}s",
    )


def _random_mutation(rng, topo):
    roll = rng.random()
    paths = [MAINLINE] + list(topo.branches)
    if roll < 0.45:
        topo.append_exchange(rng.choice(paths), *exchange(topo, "j"))
    elif roll < 0.6:
        parent = rng.choice(paths)
        slots = topo.path_nodes(parent)
        if slots:
            topo.create_branch(parent, rng.choice(slots))
        else:
            topo.append_exchange(parent, *exchange(topo, "j"))
    elif roll < 0.7:
        victims = [n for n in topo.nodes if not topo.nodes[n].placeholder]
        if victims:
            topo.edit_node(rng.choice(victims), f"e{rng.random():.3f}")
    elif roll < 0.85:
        ids = list(topo.nodes)
        if ids:
            topo.delete_nodes(set(rng.sample(ids, k=rng.randint(1, min(3, len(ids))))))
    else:
        candidates = [
            n for b in topo.branches.values() for n in b.segment
        ] or (topo.mainline and [rng.choice(topo.mainline)]) or []
        if candidates:
            topo.set_mainline_bounds(end=rng.choice(candidates))


def test_journal_round_trip():
    for seed in range(60):
        rng = random.Random(20_000 + seed)
        topo = random_topology(rng, max_nodes=10, with_bounds=False)
        for _ in range(rng.randint(1, 50)):
            _random_mutation(rng, topo)
        final = topo.structure_dict()
        topo.reset()
        assert topo.structure_dict() == topo.journal.baseline, f"seed {seed}: undo-all"
        while topo.journal.can_redo:
            topo.redo()
        assert topo.structure_dict() == final, f"seed {seed}: redo-all"
        check_topology(topo)
    report("journal round-trip", "60 random mutation sequences (length ≤ 50), exact")


def test_structure_decision_parser_classification():
    accepted = rejected = 0
    for primary in PRIMARY_ACTIONS:
        for asset in ASSET_ACTIONS:
            for confidence in (0, 1):
                raw = json.dumps(
                    {
                        "primary_action": primary,
                        "asset_action": asset,
                        "confidence": confidence,
                        "reason": "r",
                        "asset_reason": "" if asset == "none" else "a",
                        "show_suggestion": True,
                    }
                )
                decision = parse_structure_decision(raw)
                assert decision.primary_action == primary
                accepted += 1
    base = {
        "primary_action": "continue",
        "asset_action": "none",
        "confidence": 0.5,
        "reason": "r",
        "asset_reason": "",
        "show_suggestion": False,
    }
    near_misses = []
    for key in base:
        doc = dict(base)
        doc.pop(key)
        near_misses.append(json.dumps(doc))
    for bad in (
        dict(base, confidence=1.01),
        dict(base, confidence=-0.5),
        dict(base, confidence="0.5"),
        dict(base, confidence=True),
        dict(base, show_suggestion="false"),
        dict(base, show_suggestion=1),
        dict(base, primary_action="merge"),
        dict(base, asset_action="extract_everything"),
        dict(base, reason=None),
        dict(base, unexpected="key"),
        dict(base, asset_action="extract_task_sop", asset_reason=""),
    ):
        near_misses.append(json.dumps(bad))
    near_misses += ["", "[]", "null", "not json"]
    for raw in near_misses:
        with pytest.raises(DecisionParseError):
            parse_structure_decision(raw)
        rejected += 1
    report(
        "structure-decision parser",
        f"{accepted} valid shapes accepted, {rejected} near-misses rejected",
    )


def _suggestion_engine():
    project = new_project("p1", "sm")
    backend = MockBackend(
        {
            "responses": [
                {"role": "conversation", "text": "r"},
                {
                    "role": "structure",
                    "text": json.dumps(
                        {
                            "primary_action": "branch",
                            "asset_action": "none",
                            "confidence": 0.9,
                            "reason": "shift",
                            "asset_reason": "",
                            "show_suggestion": True,
                        }
                    ),
                },
                {"role": "memory", "text": "m"},
            ]
        }
    )
    return ProjectEngine(project, backend), project


def test_suggestion_lifecycle_state_machine():
    # exhaustive: every response action from every reachable state
    for first in ("accept", "reject", "ignore"):
        for second in ("accept", "reject", "ignore"):
            engine, project = _suggestion_engine()
            turn = engine.run_turn("go")
            engine.respond_to_suggestion(turn.suggestion.id, first)
            with pytest.raises(SuggestionStateError):
                engine.respond_to_suggestion(turn.suggestion.id, second)

    # superseding marks pending suggestions ignored, never executes them
    engine, project = _suggestion_engine()
    first = engine.run_turn("one").suggestion
    second = engine.run_turn("two").suggestion
    assert first.state == "ignored" and second.state == "pending"

    # interleaved turns/responses: ≤1 pending, mutation only via accept
    rng = random.Random(99)
    for trial in range(30):
        engine, project = _suggestion_engine()
        accepts = 0
        for _ in range(rng.randint(2, 15)):
            pending = project.pending_suggestion()
            if pending is not None and rng.random() < 0.6:
                action = rng.choice(["accept", "reject", "ignore"])
                engine.respond_to_suggestion(pending.id, action)
                accepts += action == "accept"
            else:
                engine.run_turn("next")
            assert sum(s.state == "pending" for s in project.suggestions) <= 1
            accept_traces = [
                t for t in project.traces if t.kind == "suggestion_accepted"
            ]
            assert len(project.topology.branches) == len(accept_traces) == accepts
    report(
        "suggestion lifecycle",
        "exhaustive transitions + 30 interleaving trials, single-pending held",
    )


def test_end_to_end_journey_replay(tmp_path):
    started = time.monotonic()
    out = tmp_path / "snapshot.json"
    code, snapshot = run_replay(DATA_DIR / "journey.json", tmp_path / "store", out)
    elapsed = time.monotonic() - started
    assert code == 0, snapshot.get("failure")
    assert elapsed < 10, f"journey took {elapsed:.1f}s"

    golden = (GOLDEN_DIR / "journey_snapshot.json").read_text(encoding="utf-8")
    assert out.read_text(encoding="utf-8") == golden, "snapshot diverged from golden"

    project = snapshot["project"]
    topology = project["topology"]
    branch_accepts = [
        s
        for s in project["suggestions"]
        if s["state"] == "accepted" and s["decision"]["primary_action"] == "branch"
    ]
    assert len(branch_accepts) == 1
    assert len(project["scope"]["excluded_nodes"]) >= 2
    placeholders = [n for n, d in topology["nodes"].items() if d["placeholder"]]
    assert len(placeholders) == 1
    assert topology["mainline_end"] in topology["mainline"]
    pm_nodes = {"p1-n9", "p1-n10", "p1-n11", "p1-n12", "p1-n15", "p1-n16"}
    assert pm_nodes <= set(topology["mainline"]), "PM path not promoted"
    demoted = [
        b for b in topology["branches"].values() if b["intent"] == "demoted mainline"
    ]
    assert len(demoted) == 1 and demoted[0]["segment"]
    active_sops = [
        c for c in project["capsules"] if c["type"] == "task_sop" and c["state"] == "active"
    ]
    assert len(active_sops) == 1
    assert any(
        t["kind"] == "capsule_reviewed" and t["detail"] == "approved"
        for t in project["traces"]
    )
    report("end-to-end journey replay", f"exact snapshot match in {elapsed:.1f}s")


def test_persistence_round_trip(tmp_path, journey_snapshot):
    store = ProjectStore(tmp_path)
    journey_project = Project.from_doc(journey_snapshot["project"])
    store.save(journey_project)
    assert store.load("p1").to_doc() == journey_project.to_doc()

    big = new_project("p2", "synthetic")
    for i in range(5000):
        big.topology.append_exchange(MAINLINE, *exchange(big.topology, str(i)))
    assert len(big.topology.nodes) == 10_000
    started = time.monotonic()
    store.save(big)
    loaded = store.load("p2")
    elapsed = time.monotonic() - started
    assert loaded.to_doc() == big.to_doc()
    assert elapsed < 1.0, f"10k-node round-trip took {elapsed:.2f}s"
    report(
        "persistence round-trip",
        f"journey + 10k-node project deep-equal, big round-trip {elapsed:.2f}s",
    )


def test_extraction_validation_and_review_gate():
    # 4-key contract is enforced (full fuzz lives in test_patterns)
    from contextd.errors import ExtractionError
    from contextd.patterns import validate_extraction_payload

    good = {
        "name": "N",
        "requires_human_review": True,
        "instruction": "i",
        "example": "e",
    }
    validate_extraction_payload(json.dumps(good))
    for mutate in (
        lambda d: d.pop("example"),
        lambda d: d.update(extra=1),
        lambda d: d.update(requires_human_review="yes"),
    ):
        doc = dict(good)
        mutate(doc)
        with pytest.raises(ExtractionError):
            validate_extraction_payload(json.dumps(doc))

    # gate proof: across random capsule workflows, a review-flagged capsule
    # appears in a prompt only after an approving capsule_reviewed trace
    rng = random.Random(7)
    for trial in range(25):
        project = new_project("p1", "gate")
        backend = MockBackend(
            {
                "responses": [
                    {"role": "conversation", "text": "r"},
                    {
                        "role": "extraction",
                        "text": json.dumps(
                            dict(good, requires_human_review=rng.random() < 0.6)
                        ),
                    },
                ]
            }
        )
        engine = ProjectEngine(project, backend)
        turn = engine.run_turn("seed")
        approved: set[str] = set()
        for _ in range(rng.randint(2, 10)):
            roll = rng.random()
            if roll < 0.4:
                backend.entries.append(
                    {
                        "role": "extraction",
                        "text": json.dumps(
                            dict(good, requires_human_review=rng.random() < 0.6)
                        ),
                        "_used": False,
                    }
                )
                engine.extract_pattern("task_sop", [turn.user_node])
            elif roll < 0.6:
                pending = [c for c in project.capsules if c.state == "needs_review"]
                if pending:
                    capsule = rng.choice(pending)
                    engine.review_pattern(capsule.id, {}, approve=True)
                    approved.add(capsule.id)
            elif roll < 0.8:
                active = [c for c in project.capsules if c.state == "active"]
                if active:
                    engine.set_capsule_enabled(rng.choice(active).id, rng.random() < 0.5)
            # every prompt build is audited against the trace log
            inputs = engine.prompt_inputs()
            build_structure_prompt(inputs.exec_ctx, inputs.user_model_json)
            for capsule in inputs.enabled_patterns:
                if capsule.requires_human_review:
                    assert capsule.id in approved, (
                        f"trial {trial}: {capsule.id} reached a prompt before review"
                    )
                    assert any(
                        t.kind == "capsule_reviewed"
                        and t.detail == "approved"
                        and capsule.id in t.subject_ids
                        for t in project.traces
                    )
    report(
        "extraction validation",
        "4-key contract enforced; review gate held across 25 random workflows",
    )
