"""Headless scenario replay: scripted API calls against the mock backend.

A script is one JSON document:

    {
      "mock": {"responses": [...]} | "path/to/mock.json",
      "steps": [
        {"method": "POST", "path": "/projects", "body": {...},
         "expect_status": 201, "expect": {"id": "p1"}}
      ],
      "snapshot_project": "p1"
    }

`expect` is a subset match (dict keys recursively contained, lists compared
pairwise). The final snapshot is the canonical project document, wrapped with
a status so partial runs are flagged.
"""

import json
import logging
from pathlib import Path

from fastapi.testclient import TestClient

from .backend import MockBackend
from .errors import ReplayError
from .project import canonical_json
from .runtime import EngineConfig
from .service import create_app
from .store import ProjectStore

logger = logging.getLogger(__name__)


def subset_match(expected, actual) -> bool:
    if isinstance(expected, dict):
        if not isinstance(actual, dict):
            return False
        return all(key in actual and subset_match(val, actual[key]) for key, val in expected.items())
    if isinstance(expected, list):
        if not isinstance(actual, list) or len(expected) != len(actual):
            return False
        return all(subset_match(e, a) for e, a in zip(expected, actual))
    return expected == actual


def load_script(script_path) -> dict:
    path = Path(script_path)
    try:
        script = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise ReplayError(f"cannot load replay script {script_path}: {exc}") from exc
    mock = script.get("mock", {})
    if isinstance(mock, str):
        mock_path = Path(mock)
        if not mock_path.is_absolute():
            mock_path = path.parent / mock_path
        mock = json.loads(mock_path.read_text(encoding="utf-8"))
        script["mock"] = mock
    return script


def run_replay(script_path, store_dir, snapshot_path=None, env=None) -> tuple[int, dict]:
    """Execute the script; returns (exit_status, snapshot document)."""
    script = load_script(script_path)
    store = ProjectStore(store_dir)
    backend = MockBackend(script.get("mock", {}))
    config = EngineConfig.from_env(env or {})
    app = create_app(store, backend, config)
    client = TestClient(app, raise_server_exceptions=False)

    status = "ok"
    failed_step = None
    failure: str | None = None
    for i, step in enumerate(script.get("steps", [])):
        method = step.get("method", "POST").upper()
        path = step.get("path")
        if not path:
            status, failed_step, failure = "failed", i, "step has no path"
            break
        response = client.request(method, path, json=step.get("body"))
        expected_status = step.get("expect_status", 200 if method != "POST" else None)
        ok_status = (
            response.status_code == expected_status
            if expected_status is not None
            else response.status_code < 400
        )
        if not ok_status:
            status, failed_step = "failed", i
            failure = f"status {response.status_code}: {response.text[:300]}"
            break
        if "expect" in step:
            try:
                body = response.json()
            except ValueError:
                body = None
            if not subset_match(step["expect"], body):
                status, failed_step = "failed", i
                failure = f"expectation mismatch: {json.dumps(step['expect'])[:300]}"
                break

    project_id = script.get("snapshot_project")
    if project_id is None:
        ids = store.list_ids()
        project_id = ids[0] if ids else None
    project_doc = None
    if project_id is not None and store.exists(project_id):
        project_doc = store.load(project_id).to_doc()

    snapshot = {"status": status, "project": project_doc}
    if failed_step is not None:
        snapshot["failed_step"] = failed_step
        snapshot["failure"] = failure
        logger.error("replay failed at step %d: %s", failed_step, failure)
    if snapshot_path is not None:
        Path(snapshot_path).write_text(canonical_json(snapshot), encoding="utf-8")
    return (0 if status == "ok" else 1), snapshot
