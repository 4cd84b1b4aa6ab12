from __future__ import annotations

import json

import httpx
import pytest

from contractgen.agents import (
    AgentRequest,
    AgentResponse,
    BackendUnavailable,
    MalformedResponse,
    Role,
    ScenarioMiss,
    ScriptedBackend,
    ServiceBackend,
    ServiceConfig,
    dispatch,
    validate_response,
)
from contractgen.contract import new_contract


def req(role=Role.WRITER, stage=0):
    return AgentRequest(role, stage, new_contract().to_dict(), {})


def writer(text):
    return {"section_id": "s1", "text": text}


def test_writer_with_valid_marker():
    assert validate_response(AgentResponse(writer("see [[FIG:fig:a]] here")), Role.WRITER) == []


def test_writer_with_bad_label():
    v = validate_response(AgentResponse(writer("see [[FIG:Bad Label]]")), Role.WRITER)
    assert len(v) == 1
    assert "label grammar" in v[0].message
    assert v[0].path == "$.text"


@pytest.mark.parametrize("text", ["[[FIG:tab:a]]", "[[CITE:bad key]]", "[[fig:fig:a]]"])
def test_writer_marker_problems(text):
    assert len(validate_response(writer(text), Role.WRITER)) == 1


def architect(*labels):
    return {
        "sections": [{"id": "s1", "title": "One"}],
        "artifacts": [{"kind": "figure", "label": lab, "description": "d", "expected_sections": ["s1"]} for lab in labels],
        "citations": [],
    }


def test_architect_duplicate_proposal():
    v = validate_response(architect("fig:a", "fig:a"), Role.ARCHITECT)
    assert len(v) == 1
    assert "duplicate" in v[0].message
    assert v[0].path == "$.artifacts[1].label"


def test_architect_schema_violation_has_path():
    bad = architect("fig:a")
    del bad["sections"][0]["title"]
    v = validate_response(bad, "architect")
    assert v and v[0].path == "$.sections[0]"


def test_refiner_unknown_delta_action():
    v = validate_response({"sections": [], "deltas": [{"action": "Explode", "payload": {}}]}, Role.REFINER)
    assert v and v[0].path == "$.deltas[0].action"


def test_scripted_backend_is_deterministic(fixtures_dir):
    b = ScriptedBackend(fixtures_dir, "demo")
    r1 = dispatch(b, req(Role.ARCHITECT))
    r2 = dispatch(b, req(Role.ARCHITECT))
    assert r1.raw == r2.raw == (fixtures_dir / "architect.0.demo.json").read_bytes()
    assert r1.content == r2.content


def test_scripted_backend_miss_names_key(fixtures_dir):
    with pytest.raises(ScenarioMiss) as exc:
        ScriptedBackend(fixtures_dir, "nosuch").send(req(Role.ARCHITECT))
    assert exc.value.key == "architect.0.nosuch.json"
    assert exc.value.exit_code == 3


def test_dispatch_rejects_schema_failures(tmp_path):
    (tmp_path / "writer.0.x.json").write_text(json.dumps({"section_id": "s1"}))
    with pytest.raises(MalformedResponse) as exc:
        dispatch(ScriptedBackend(tmp_path, "x"), req())
    assert exc.value.violations
    assert exc.value.raw


# ---------------------------------------------------------------- service backend


def service(handler, retries=3):
    sleeps = []
    cfg = ServiceConfig("http://agents.test/v1", retries=retries, backoff=0.5)
    backend = ServiceBackend(cfg, httpx.Client(transport=httpx.MockTransport(handler)), sleeps.append)
    return backend, sleeps


def test_service_sends_wire_request_and_token(monkeypatch):
    monkeypatch.setenv("CONTRACTGEN_TOKEN", "sekret")
    seen = {}

    def handler(request: httpx.Request):
        seen["body"] = json.loads(request.content)
        seen["auth"] = request.headers.get("authorization")
        return httpx.Response(200, json=writer("ok"))

    backend, sleeps = service(handler)
    resp = dispatch(backend, req())
    assert resp.content == writer("ok")
    assert set(seen["body"]) == {"role", "stage_index", "contract", "inputs"}
    assert seen["auth"] == "Bearer sekret"
    assert sleeps == []


def test_service_retries_transient_then_succeeds():
    calls = []

    def handler(request):
        calls.append(1)
        if len(calls) < 3:
            return httpx.Response(503)
        return httpx.Response(200, json=writer("ok"))

    backend, sleeps = service(handler)
    assert backend.send(req()).content == writer("ok")
    assert sleeps == [0.5, 1.0]


def test_service_gives_up_after_retries():
    def handler(request):
        raise httpx.ConnectError("refused", request=request)

    backend, sleeps = service(handler)
    with pytest.raises(BackendUnavailable):
        backend.send(req())
    assert sleeps == [0.5, 1.0, 2.0]


def test_service_invalid_json_is_not_retried():
    calls = []

    def handler(request):
        calls.append(1)
        return httpx.Response(200, content=b"<html>")

    backend, sleeps = service(handler)
    with pytest.raises(MalformedResponse) as exc:
        backend.send(req())
    assert len(calls) == 1 and sleeps == []
    assert exc.value.raw == b"<html>"


def test_service_client_error_is_not_retried():
    backend, sleeps = service(lambda r: httpx.Response(401))
    with pytest.raises(BackendUnavailable):
        backend.send(req())
    assert sleeps == []


def test_service_config_environment_overrides():
    env = {"CONTRACTGEN_ENDPOINT": "http://other", "CONTRACTGEN_RETRIES": "5", "CONTRACTGEN_TIMEOUT": "2.5"}
    cfg = ServiceConfig.from_mapping({"endpoint": "http://file", "token_env": "MY_TOKEN"}, env)
    assert (cfg.endpoint, cfg.retries, cfg.timeout, cfg.token_env) == ("http://other", 5, 2.5, "MY_TOKEN")
