"""Generation-agent backends.

Agents speak one wire protocol: a JSON request ``{role, stage_index, contract,
inputs}`` and a JSON response whose shape depends on the role. Two backends
implement it: :class:`ScriptedBackend` reads canned responses from a fixture
directory (files named ``<role>.<stage>.<scenario>.json``) and
:class:`ServiceBackend` POSTs to an HTTP endpoint.
"""

from __future__ import annotations

import json
import logging
import os
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Protocol

import httpx
import jsonschema

from .contract import DeltaAction, canonical_json
from .errors import BackendError
from .grammar import is_label, label_kind, marker_problems

log = logging.getLogger(__name__)


class Role(str, Enum):
    ARCHITECT = "architect"
    WRITER = "writer"
    REFINER = "refiner"


class BackendUnavailable(BackendError):
    pass


class MalformedResponse(BackendError):
    def __init__(self, message: str, raw: bytes | str = b"", violations: list["SchemaViolation"] | None = None):
        super().__init__(message)
        self.raw = raw
        self.violations = violations or []


class ScenarioMiss(BackendError):
    def __init__(self, key: str):
        super().__init__(f"no scripted fixture for {key}")
        self.key = key


@dataclass(frozen=True)
class AgentRequest:
    role: Role
    stage_index: int
    contract_snapshot: dict
    inputs: dict
    attempt: int = 0

    def to_wire(self) -> dict:
        return {
            "role": self.role.value,
            "stage_index": self.stage_index,
            "contract": self.contract_snapshot,
            "inputs": self.inputs,
        }


@dataclass(frozen=True)
class AgentResponse:
    content: dict
    usage: dict | None = None
    raw: bytes = field(default=b"", repr=False, compare=False)


@dataclass(frozen=True)
class SchemaViolation:
    path: str
    message: str

    def __str__(self) -> str:
        return f"{self.path}: {self.message}"


_STRINGS = {"type": "array", "items": {"type": "string"}}
_USAGE = {"type": "object"}

RESPONSE_SCHEMAS: dict[Role, dict] = {
    Role.ARCHITECT: {
        "type": "object",
        "required": ["sections", "artifacts", "citations"],
        "additionalProperties": False,
        "properties": {
            "usage": _USAGE,
            "sections": {
                "type": "array",
                "items": {
                    "type": "object",
                    "required": ["id", "title"],
                    "additionalProperties": False,
                    "properties": {
                        "id": {"type": "string", "pattern": "^[A-Za-z0-9_.\\-]+$"},
                        "title": {"type": "string", "minLength": 1},
                        "outline": _STRINGS,
                        "evidence_links": _STRINGS,
                        "bound_artifacts": _STRINGS,
                    },
                },
            },
            "artifacts": {
                "type": "array",
                "items": {
                    "type": "object",
                    "required": ["kind", "label", "description", "expected_sections"],
                    "additionalProperties": False,
                    "properties": {
                        "kind": {"enum": ["figure", "table"]},
                        "label": {"type": "string"},
                        "description": {"type": "string"},
                        "expected_sections": {"type": "array", "minItems": 1, "items": {"type": "string"}},
                        "header": _STRINGS,
                        "rows": {"type": "array", "items": _STRINGS},
                        "placeholder": {"type": "string"},
                    },
                },
            },
            "citations": _STRINGS,
        },
    },
    Role.WRITER: {
        "type": "object",
        "required": ["section_id", "text"],
        "additionalProperties": False,
        "properties": {"usage": _USAGE, "section_id": {"type": "string"}, "text": {"type": "string"}},
    },
    Role.REFINER: {
        "type": "object",
        "required": ["sections"],
        "additionalProperties": False,
        "properties": {
            "usage": _USAGE,
            "sections": {
                "type": "array",
                "items": {
                    "type": "object",
                    "required": ["section_id", "text"],
                    "additionalProperties": False,
                    "properties": {"section_id": {"type": "string"}, "text": {"type": "string"}},
                },
            },
            "deltas": {
                "type": "array",
                "items": {
                    "type": "object",
                    "required": ["action", "payload"],
                    "additionalProperties": False,
                    "properties": {
                        "action": {"enum": [a.value for a in DeltaAction]},
                        "payload": {"type": "object"},
                    },
                },
            },
        },
    },
}


def _path(parts) -> str:
    out = "$"
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else f".{p}"
    return out


def validate_response(resp: AgentResponse | dict, role: Role | str) -> list[SchemaViolation]:
    """Schema and grammar problems of a response; empty when it is acceptable."""
    role = Role(role)
    content = resp.content if isinstance(resp, AgentResponse) else resp
    validator = jsonschema.Draft202012Validator(RESPONSE_SCHEMAS[role])
    errors = sorted(validator.iter_errors(content), key=lambda e: (_path(e.absolute_path), e.message))
    out = [SchemaViolation(_path(e.absolute_path), e.message) for e in errors]
    if out:
        return out

    if role is Role.ARCHITECT:
        seen: set[str] = set()
        for i, art in enumerate(content["artifacts"]):
            label = art["label"]
            if not is_label(label):
                out.append(SchemaViolation(f"$.artifacts[{i}].label", f"{label!r} violates the label grammar"))
            elif label_kind(label) != art["kind"]:
                out.append(SchemaViolation(f"$.artifacts[{i}].label", f"{label!r} does not match kind {art['kind']}"))
            if label in seen:
                out.append(SchemaViolation(f"$.artifacts[{i}].label", f"duplicate proposal {label!r}"))
            seen.add(label)
        for i, sec in enumerate(content["sections"]):
            for j, label in enumerate(sec.get("bound_artifacts", [])):
                if not is_label(label):
                    out.append(SchemaViolation(f"$.sections[{i}].bound_artifacts[{j}]",
                                               f"{label!r} violates the label grammar"))
    elif role is Role.WRITER:
        out.extend(SchemaViolation("$.text", p) for p in marker_problems(content["text"]))
    else:
        for i, sec in enumerate(content["sections"]):
            out.extend(SchemaViolation(f"$.sections[{i}].text", p) for p in marker_problems(sec["text"]))
    return out


class Backend(Protocol):
    def send(self, req: AgentRequest) -> AgentResponse: ...


def _decode(raw: bytes) -> AgentResponse:
    try:
        content = json.loads(raw)
    except (ValueError, UnicodeDecodeError) as exc:
        raise MalformedResponse(f"response is not JSON: {exc}", raw) from exc
    if not isinstance(content, dict):
        raise MalformedResponse("response is not a JSON object", raw)
    usage = content.get("usage")
    return AgentResponse(content, usage if isinstance(usage, dict) else None, raw)


class ScriptedBackend:
    """Fixture-driven backend; a pure function of (role, stage index, scenario)."""

    def __init__(self, fixture_dir: str | Path, scenario: str):
        self.fixture_dir = Path(fixture_dir)
        self.scenario = scenario

    def fixture_key(self, req: AgentRequest) -> str:
        return f"{req.role.value}.{req.stage_index}.{self.scenario}.json"

    def send(self, req: AgentRequest) -> AgentResponse:
        key = self.fixture_key(req)
        path = self.fixture_dir / key
        if not path.is_file():
            raise ScenarioMiss(key)
        return _decode(path.read_bytes())


@dataclass
class ServiceConfig:
    endpoint: str
    token_env: str = "CONTRACTGEN_TOKEN"
    timeout: float = 60.0
    retries: int = 3
    backoff: float = 0.5

    @classmethod
    def from_mapping(cls, data: dict, environ: dict | None = None) -> "ServiceConfig":
        env = os.environ if environ is None else environ
        cfg = cls(
            endpoint=data.get("endpoint", ""),
            token_env=data.get("token_env", cls.token_env),
            timeout=float(data.get("timeout", cls.timeout)),
            retries=int(data.get("retries", cls.retries)),
            backoff=float(data.get("backoff", cls.backoff)),
        )
        if "CONTRACTGEN_ENDPOINT" in env:
            cfg.endpoint = env["CONTRACTGEN_ENDPOINT"]
        if "CONTRACTGEN_TIMEOUT" in env:
            cfg.timeout = float(env["CONTRACTGEN_TIMEOUT"])
        if "CONTRACTGEN_RETRIES" in env:
            cfg.retries = int(env["CONTRACTGEN_RETRIES"])
        return cfg


class ServiceBackend:
    """HTTP backend. Transport failures, 429 and 5xx are retried with exponential backoff."""

    def __init__(self, config: ServiceConfig, client: httpx.Client | None = None,
                 sleep: Callable[[float], None] = time.sleep):
        self.config = config
        self.client = client or httpx.Client(timeout=config.timeout)
        self.sleep = sleep

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        token = os.environ.get(self.config.token_env)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        else:
            log.warning("auth token variable %s is not set", self.config.token_env)
        return headers

    def send(self, req: AgentRequest) -> AgentResponse:
        body = canonical_json(req.to_wire()).encode("utf-8")
        attempts = self.config.retries + 1
        last = ""
        for attempt in range(attempts):
            if attempt:
                delay = self.config.backoff * 2 ** (attempt - 1)
                log.info("retrying %s request in %.1fs (%s)", req.role.value, delay, last)
                self.sleep(delay)
            try:
                r = self.client.post(self.config.endpoint, content=body, headers=self._headers())
            except httpx.TransportError as exc:
                last = f"{type(exc).__name__}: {exc}"
                continue
            if r.status_code == 429 or r.status_code >= 500:
                last = f"HTTP {r.status_code}"
                continue
            if r.status_code >= 400:
                raise BackendUnavailable(f"{self.config.endpoint} rejected the request: HTTP {r.status_code}")
            return _decode(r.content)
        raise BackendUnavailable(f"{self.config.endpoint} unavailable after {attempts} attempts ({last})")


def dispatch(backend: Backend, req: AgentRequest) -> AgentResponse:
    """Send ``req`` and gate the response through :func:`validate_response`."""
    resp = backend.send(req)
    problems = validate_response(resp, req.role)
    if problems:
        raise MalformedResponse(
            f"{req.role.value} response fails its schema: " + "; ".join(map(str, problems)),
            resp.raw,
            problems,
        )
    return resp
