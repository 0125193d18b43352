"""Telemetry broadcast and environment configuration."""

import json

from matchain.config import env_int, telemetry_ipc_enabled
from matchain.telemetry import TelemetryEmitter, drain, emit_telemetry, emitter


def test_emitter_is_a_singleton():
    assert TelemetryEmitter() is emitter


def test_subscribers_receive_events(no_telemetry_ipc):
    q = emitter.subscribe()
    try:
        assert emitter.active
        emit_telemetry("BranchAndBound", "node", {"prefix": [0, 1], "bound": 0.5})
    finally:
        emitter.unsubscribe(q)
    (event,) = drain(q)
    assert event["type"] == "solver_telemetry"
    assert event["component"] == "BranchAndBound"
    assert event["data"] == {"prefix": [0, 1], "bound": 0.5}
    emit_telemetry("BranchAndBound", "done")
    assert drain(q) == []


def test_inactive_without_listeners(no_telemetry_ipc):
    assert not emitter.queues
    assert not emitter.active


def test_ipc_mirror_on_stderr(monkeypatch, capsys):
    monkeypatch.setenv("MATCHAIN_TELEMETRY_IPC", "1")
    assert telemetry_ipc_enabled()
    emit_telemetry("ThinFilm", "incumbent", {"reflectance": 0.9})
    line = capsys.readouterr().err.strip()
    assert line.startswith("__TELEMETRY__:")
    payload = json.loads(line.split(":", 1)[1])
    assert payload["action"] == "incumbent"
    assert payload["data"]["reflectance"] == 0.9


def test_env_int(monkeypatch):
    monkeypatch.setenv("MATCHAIN_X", "4")
    assert env_int("MATCHAIN_X", 1) == 4
    monkeypatch.setenv("MATCHAIN_X", "1e8")
    assert env_int("MATCHAIN_X", 1) == 100_000_000
    monkeypatch.setenv("MATCHAIN_X", "many")
    assert env_int("MATCHAIN_X", 7) == 7
    monkeypatch.setenv("MATCHAIN_X", "0")
    assert env_int("MATCHAIN_X", 7) == 1
    monkeypatch.delenv("MATCHAIN_X")
    assert env_int("MATCHAIN_X", 7) == 7
