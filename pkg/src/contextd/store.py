"""File-backed project store: one JSON document per project, atomic replace."""

import json
import logging
import os
import re
from pathlib import Path

from .errors import LoadError, StoreError
from .project import Project, canonical_json

logger = logging.getLogger(__name__)

_PROJECT_FILE = re.compile(r"^(p\d+)\.json$")


class ProjectStore:
    def __init__(self, directory):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    def _path(self, project_id: str) -> Path:
        return self.directory / f"{project_id}.json"

    def next_project_id(self) -> str:
        highest = 0
        for path in self.directory.glob("p*.json"):
            match = _PROJECT_FILE.match(path.name)
            if match:
                highest = max(highest, int(match.group(1)[1:]))
        return f"p{highest + 1}"

    def list_ids(self) -> list[str]:
        ids = [
            _PROJECT_FILE.match(p.name).group(1)
            for p in self.directory.glob("p*.json")
            if _PROJECT_FILE.match(p.name)
        ]
        return sorted(ids, key=lambda pid: int(pid[1:]))

    def exists(self, project_id: str) -> bool:
        return self._path(project_id).exists()

    def save(self, project: Project) -> None:
        """Write-then-rename so a crash mid-save never corrupts the store."""
        target = self._path(project.id)
        tmp = target.with_suffix(".json.tmp")
        try:
            tmp.write_text(canonical_json(project.to_doc()), encoding="utf-8")
            os.replace(tmp, target)
        except OSError as exc:
            raise StoreError(f"cannot save project {project.id}: {exc}") from exc

    def load(self, project_id: str) -> Project:
        path = self._path(project_id)
        if not path.exists():
            raise LoadError(f"unknown project: {project_id}")
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise LoadError(f"corrupt project document {project_id}: {exc}") from exc
        return Project.from_doc(doc)
