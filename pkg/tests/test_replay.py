"""Replay runner: empty scripts, failing steps, and the full journey."""

import json

from contextd.replay import run_replay, subset_match


def write_script(tmp_path, script):
    path = tmp_path / "script.json"
    path.write_text(json.dumps(script), encoding="utf-8")
    return path


class TestSubsetMatch:
    def test_dict_subset(self):
        assert subset_match({"a": 1}, {"a": 1, "b": 2})
        assert not subset_match({"a": 2}, {"a": 1})
        assert not subset_match({"c": 1}, {"a": 1})

    def test_list_pairwise(self):
        assert subset_match([{"x": 1}], [{"x": 1, "y": 2}])
        assert not subset_match([1], [1, 2])


class TestRunner:
    def test_empty_script_yields_baseline(self, tmp_path):
        script = write_script(tmp_path, {"steps": []})
        code, snapshot = run_replay(script, tmp_path / "store")
        assert code == 0
        assert snapshot == {"status": "ok", "project": None}

    def test_invalid_step_nonzero_exit_with_partial_snapshot(self, tmp_path):
        script = write_script(
            tmp_path,
            {
                "mock": {"responses": [{"role": "conversation", "text": "r"}]},
                "steps": [
                    {"method": "POST", "path": "/projects", "body": {"title": "t"}},
                    {"method": "POST", "path": "/projects/p1/path", "body": {"target": "b404"}},
                ],
            },
        )
        code, snapshot = run_replay(script, tmp_path / "store")
        assert code == 1
        assert snapshot["status"] == "failed"
        assert snapshot["failed_step"] == 1
        assert snapshot["project"]["id"] == "p1"  # partial state still captured

    def test_expectation_mismatch_fails(self, tmp_path):
        script = write_script(
            tmp_path,
            {
                "steps": [
                    {
                        "method": "POST",
                        "path": "/projects",
                        "body": {"title": "t"},
                        "expect_status": 201,
                        "expect": {"id": "p99"},
                    }
                ]
            },
        )
        code, snapshot = run_replay(script, tmp_path / "store")
        assert code == 1

    def test_snapshot_written_to_disk(self, tmp_path):
        script = write_script(tmp_path, {"steps": []})
        out = tmp_path / "snap.json"
        run_replay(script, tmp_path / "store", snapshot_path=out)
        assert json.loads(out.read_text()) == {"status": "ok", "project": None}


class TestJourneySmoke:
    def test_journey_properties(self, tmp_path, journey_snapshot):
        project = journey_snapshot["project"]
        topology = project["topology"]
        placeholders = [
            n for n, d in topology["nodes"].items() if d["placeholder"]
        ]
        assert placeholders == ["p1-n19"]
        assert len(project["scope"]["excluded_nodes"]) >= 2
        branch_accepts = [
            s
            for s in project["suggestions"]
            if s["state"] == "accepted" and s["decision"]["primary_action"] == "branch"
        ]
        assert len(branch_accepts) == 1
        demoted = [
            b for b in topology["branches"].values() if b["intent"] == "demoted mainline"
        ]
        assert len(demoted) == 1 and demoted[0]["segment"] == ["p1-n13", "p1-n14"]
        capsules = project["capsules"]
        assert [c["state"] for c in capsules] == ["active"]
        assert capsules[0]["type"] == "task_sop"
