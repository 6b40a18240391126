"""Pluggable LLM backends: chat-completions over HTTP, and a scripted mock.

One operation: generate(request) -> LlmResponse. json_mode is set exactly for
the structure / extraction / user_model roles.
"""

import json
import logging
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import httpx

from .errors import BackendError, MockScriptError

logger = logging.getLogger(__name__)

ROLE_CONVERSATION = "conversation"
ROLE_STRUCTURE = "structure"
ROLE_MEMORY = "memory"
ROLE_EXTRACTION = "extraction"
ROLE_USER_MODEL = "user_model"

JSON_MODE_ROLES = frozenset({ROLE_STRUCTURE, ROLE_EXTRACTION, ROLE_USER_MODEL})

DEFAULT_STRUCTURE_DECISION = (
    '{"primary_action":"continue","asset_action":"none","confidence":0.5,'
    '"reason":"no scripted decision","asset_reason":"","show_suggestion":false}'
)


@dataclass
class LlmRequest:
    system_text: str
    messages: list[tuple[str, str]]
    json_mode: bool
    role_tag: str

    def __post_init__(self):
        expected = self.role_tag in JSON_MODE_ROLES
        if self.json_mode != expected:
            raise BackendError(
                f"json_mode must be {expected} for role {self.role_tag}"
            )


def make_request(system_text: str, messages, role_tag: str) -> LlmRequest:
    return LlmRequest(
        system_text=system_text,
        messages=[(role, content) for role, content in messages],
        json_mode=role_tag in JSON_MODE_ROLES,
        role_tag=role_tag,
    )


@dataclass
class LlmResponse:
    text: str
    latency: float
    backend_id: str


class HttpChatBackend:
    """Chat-completions-style JSON over HTTP(S); configured via environment.

    Per-role model overrides come from CTXD_LLM_MODEL_<ROLE> when present.
    """

    def __init__(
        self,
        base_url: str,
        model: str,
        api_key: str | None = None,
        role_models: dict[str, str] | None = None,
        timeout: float = 60.0,
        transport: httpx.BaseTransport | None = None,
    ):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.api_key = api_key
        self.role_models = role_models or {}
        self._client = httpx.Client(timeout=timeout, transport=transport)

    @classmethod
    def from_env(cls, env=os.environ) -> "HttpChatBackend":
        base_url = env.get("CTXD_LLM_BASE_URL")
        if not base_url:
            raise BackendError("CTXD_LLM_BASE_URL is not set (live mode needs it)")
        model = env.get("CTXD_LLM_MODEL", "gpt-4o-mini")
        role_models = {}
        for role in (
            ROLE_CONVERSATION,
            ROLE_STRUCTURE,
            ROLE_MEMORY,
            ROLE_EXTRACTION,
            ROLE_USER_MODEL,
        ):
            override = env.get(f"CTXD_LLM_MODEL_{role.upper()}")
            if override:
                role_models[role] = override
        return cls(
            base_url=base_url,
            model=model,
            api_key=env.get("CTXD_LLM_API_KEY"),
            role_models=role_models,
        )

    def build_payload(self, request: LlmRequest) -> dict:
        payload = {
            "model": self.role_models.get(request.role_tag, self.model),
            "messages": [{"role": "system", "content": request.system_text}]
            + [{"role": role, "content": content} for role, content in request.messages],
        }
        if request.json_mode:
            payload["response_format"] = {"type": "json_object"}
        return payload

    def generate(self, request: LlmRequest) -> LlmResponse:
        headers = {}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        started = time.monotonic()
        try:
            response = self._client.post(
                f"{self.base_url}/chat/completions",
                json=self.build_payload(request),
                headers=headers,
            )
            response.raise_for_status()
            body = response.json()
            text = body["choices"][0]["message"]["content"]
        except (httpx.HTTPError, KeyError, IndexError, ValueError) as exc:
            raise BackendError(f"chat backend failed: {exc}") from exc
        return LlmResponse(
            text=text,
            latency=time.monotonic() - started,
            backend_id=f"http:{self.model}",
        )


class MockBackend:
    """Deterministic scripted backend for replay and integration tests.

    The script maps (role_tag, match-pattern or call-index) to canned text:

        {"responses": [
            {"role": "conversation", "index": 0, "text": "..."},
            {"role": "structure", "match": "substring", "text": "{...}"},
            {"role": "memory", "text": "default for this role"}
        ]}

    Selection order per call: exact per-role call index, then the first
    unused match entry whose pattern occurs in the rendered request, then a
    role default (reusable). Unmatched structure calls degrade to a canned
    "continue" decision so scripts only need to spell out interventions.
    """

    def __init__(self, script: dict | None = None):
        script = script or {}
        self.entries = [dict(e) for e in script.get("responses", [])]
        for entry in self.entries:
            if "role" not in entry or "text" not in entry:
                raise MockScriptError("mock entry needs 'role' and 'text'")
            entry.setdefault("_used", False)
        self.calls: dict[str, int] = {}
        self.log: list[dict] = []

    @classmethod
    def from_file(cls, path) -> "MockBackend":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise MockScriptError(f"cannot load mock script {path}: {exc}") from exc
        return cls(data)

    def _rendered(self, request: LlmRequest) -> str:
        return "\n".join(
            [request.system_text] + [content for _, content in request.messages]
        )

    def generate(self, request: LlmRequest) -> LlmResponse:
        role = request.role_tag
        index = self.calls.get(role, 0)
        self.calls[role] = index + 1
        self.log.append({"role": role, "index": index})

        chosen = None
        for entry in self.entries:
            if entry["role"] == role and entry.get("index") == index:
                chosen = entry
                break
        if chosen is None:
            rendered = self._rendered(request)
            for entry in self.entries:
                if (
                    entry["role"] == role
                    and entry.get("match")
                    and not entry["_used"]
                    and entry["match"] in rendered
                ):
                    chosen = entry
                    entry["_used"] = True
                    break
        if chosen is None:
            for entry in self.entries:
                if (
                    entry["role"] == role
                    and entry.get("match") is None
                    and entry.get("index") is None
                ):
                    chosen = entry
                    break
        if chosen is None:
            if role == ROLE_STRUCTURE:
                return LlmResponse(DEFAULT_STRUCTURE_DECISION, 0.0, "mock")
            raise MockScriptError(f"no mock response for role={role} call={index}")
        return LlmResponse(chosen["text"], 0.0, "mock")
