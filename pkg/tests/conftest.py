import json
from pathlib import Path

import pytest

from contextd.replay import run_replay

DATA_DIR = Path(__file__).parent / "data"
GOLDEN_DIR = Path(__file__).parent / "goldens"


@pytest.fixture(scope="session")
def journey_snapshot(tmp_path_factory):
    """Run the journey replay once per session; several suites assert on it."""
    store = tmp_path_factory.mktemp("journey-store")
    out = store / "snapshot.json"
    code, snapshot = run_replay(
        DATA_DIR / "journey.json", store, snapshot_path=out
    )
    assert code == 0, f"journey replay failed: {snapshot.get('failure')}"
    return json.loads(out.read_text(encoding="utf-8"))
