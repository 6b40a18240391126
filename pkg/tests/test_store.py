"""Persistence: save/load round-trips, atomic replace, corrupt documents."""

import json
import random
import time

import pytest

from contextd.backend import MockBackend
from contextd.errors import LoadError
from contextd.graph import MAINLINE
from contextd.project import canonical_json, new_project
from contextd.runtime import ProjectEngine
from contextd.store import ProjectStore
from helpers import exchange


def busy_project():
    project = new_project("p1", "busy")
    backend = MockBackend(
        {
            "responses": [
                {"role": "conversation", "text": "r"},
                {"role": "memory", "text": "m"},
                {
                    "role": "extraction",
                    "text": json.dumps(
                        {
                            "name": "Thing",
                            "requires_human_review": False,
                            "instruction": "do it",
                            "example": "when it applies",
                        }
                    ),
                },
            ]
        }
    )
    engine = ProjectEngine(project, backend)
    turn = engine.run_turn("hello")
    engine.run_turn("more")
    branch = engine.create_branch(turn.assistant_node, intent="side quest")
    engine.transition_path(branch)
    engine.run_turn("inside")
    engine.scope_op("exclude", [turn.user_node])
    engine.extract_pattern("task_sop", [turn.user_node, turn.assistant_node])
    return project


class TestRoundTrip:
    def test_save_then_load_deep_equal(self, tmp_path):
        store = ProjectStore(tmp_path)
        project = busy_project()
        store.save(project)
        loaded = store.load("p1")
        assert loaded.to_doc() == project.to_doc()

    def test_reload_in_fresh_store_object(self, tmp_path):
        store = ProjectStore(tmp_path)
        project = busy_project()
        store.save(project)
        again = ProjectStore(tmp_path).load("p1")
        assert again.to_doc() == project.to_doc()
        # journal survives persistence: undo still works after reload
        again.topology.undo()
        assert again.to_doc() != project.to_doc()

    def test_ten_thousand_node_project_under_a_second(self, tmp_path):
        project = new_project("p1", "big")
        topo = project.topology
        for i in range(5000):
            topo.append_exchange(MAINLINE, *exchange(topo, str(i)))
        assert len(topo.nodes) == 10000
        store = ProjectStore(tmp_path)
        started = time.monotonic()
        store.save(project)
        loaded = store.load("p1")
        elapsed = time.monotonic() - started
        assert loaded.to_doc() == project.to_doc()
        assert elapsed < 1.0, f"round-trip took {elapsed:.2f}s"


class TestFailureModes:
    def test_truncated_file_is_a_load_error(self, tmp_path):
        store = ProjectStore(tmp_path)
        store.save(busy_project())
        path = tmp_path / "p1.json"
        path.write_text(path.read_text()[: 200], encoding="utf-8")
        with pytest.raises(LoadError):
            store.load("p1")

    def test_wrong_schema_is_a_load_error(self, tmp_path):
        store = ProjectStore(tmp_path)
        (tmp_path / "p1.json").write_text(
            canonical_json({"schema": 99, "id": "p1"}), encoding="utf-8"
        )
        with pytest.raises(LoadError):
            store.load("p1")

    def test_unknown_project(self, tmp_path):
        with pytest.raises(LoadError):
            ProjectStore(tmp_path).load("p42")

    def test_save_leaves_no_temp_litter(self, tmp_path):
        store = ProjectStore(tmp_path)
        store.save(busy_project())
        assert [p.name for p in tmp_path.iterdir()] == ["p1.json"]


class TestIds:
    def test_sequential_project_ids(self, tmp_path):
        store = ProjectStore(tmp_path)
        assert store.next_project_id() == "p1"
        store.save(new_project("p1", "a"))
        assert store.next_project_id() == "p2"
        store.save(new_project("p2", "b"))
        assert store.list_ids() == ["p1", "p2"]

    def test_random_mutations_survive_round_trip(self, tmp_path):
        rng = random.Random(13)
        project = busy_project()
        store = ProjectStore(tmp_path)
        for _ in range(5):
            victim = rng.choice(list(project.topology.nodes))
            if not project.topology.nodes[victim].placeholder:
                project.topology.edit_node(victim, f"edit-{victim}")
            store.save(project)
            assert store.load("p1").to_doc() == project.to_doc()
