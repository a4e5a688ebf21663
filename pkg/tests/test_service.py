from __future__ import annotations

import json
import urllib.error
import urllib.request

import pytest

from conftest import CATALOG_TEXT, POLICY_TEXT, RETENTION_TEXT
from fleetgov.client import HttpDriver, ServiceClient
from fleetgov.errors import (
    ConfigError,
    DuplicatePersonaInDomain,
    GovernanceError,
    InvalidState,
    UnknownAgent,
)
from fleetgov.service import GovernanceService, ServiceConfig, build_plane
from fleetgov.simulator import ScenarioConfig, run_scenario, run_scenario_local

OPERATORS = ["op.test", "sim", "console"]


def write_fixtures(tmp_path, policy: bool = True) -> dict:
    (tmp_path / "catalog.txt").write_text(CATALOG_TEXT)
    (tmp_path / "retention.txt").write_text(RETENTION_TEXT)
    raw = {
        "listen": "127.0.0.1:0",
        "data_dir": str(tmp_path / "data"),
        "capability_catalog": str(tmp_path / "catalog.txt"),
        "retention_classes": str(tmp_path / "retention.txt"),
        "operators": OPERATORS,
        "clock": {"mode": "logical", "start": 1000},
        "id_seed": 77,
    }
    if policy:
        (tmp_path / "policy.txt").write_text(POLICY_TEXT)
        raw["policy_document"] = str(tmp_path / "policy.txt")
    return raw


@pytest.fixture
def service(tmp_path):
    raw = write_fixtures(tmp_path)
    handle = GovernanceService(ServiceConfig.from_dict(raw))
    host, port = handle.start()
    handle.base_url = f"http://{host}:{port}"
    try:
        yield handle
    finally:
        handle.stop()


def client_for(service, operator="op.test") -> ServiceClient:
    return ServiceClient(service.base_url, operator)


def onboard_via_wire(client, persona="sepsis-watch"):
    agent = client.register(persona, "patient_safety", ["vitals_monitoring"],
                            ["read_vitals"], ["vitals"])
    agent_id = agent["agent_id"]
    client.approve(agent_id, "dr.a", "unit.icu", client.healthz()["now"] + 86400, {
        "policy_version": 1,
        "model_id": "model-x",
        "prompt_hash": "11" * 32,
        "config_hash": "22" * 32,
        "approved_at": client.healthz()["now"],
    })
    client.transition(agent_id, "provision")
    client.transition(agent_id, "activate")
    credential = client.issue_credential(agent_id, ["read_vitals", "vitals"], 80000)
    return agent_id, credential["credential_id"]


# -- config --------------------------------------------------------------------

def test_config_requires_existing_paths(tmp_path):
    raw = write_fixtures(tmp_path)
    raw["capability_catalog"] = str(tmp_path / "missing.txt")
    with pytest.raises(ConfigError) as excinfo:
        ServiceConfig.from_dict(raw)
    assert "capability_catalog" in str(excinfo.value)


def test_config_validates_parse(tmp_path):
    raw = write_fixtures(tmp_path)
    (tmp_path / "catalog.txt").write_text("not a catalog line\n")
    with pytest.raises(GovernanceError):
        ServiceConfig.from_dict(raw)


def test_config_requires_operators(tmp_path):
    raw = write_fixtures(tmp_path)
    raw["operators"] = []
    with pytest.raises(ConfigError) as excinfo:
        ServiceConfig.from_dict(raw)
    assert "operators" in str(excinfo.value)


# -- wire basics -----------------------------------------------------------------

def test_register_and_fetch_roundtrip(service):
    client = client_for(service)
    agent = client.register("sepsis-watch", "patient_safety",
                            ["vitals_monitoring"], ["read_vitals"], ["vitals"])
    fetched = client.agent(agent["agent_id"])
    assert fetched["agent"]["persona"] == "sepsis-watch"
    assert fetched["agent"]["state"] == "Requested"
    verify = client.verify_audit()
    assert verify["ok"]
    events = client.audit_events(kinds="registration")["events"]
    assert len(events) == 1
    assert events[0]["actor"] == "op.test"


def test_unknown_endpoint_structured_error(service):
    client = client_for(service)
    with pytest.raises(GovernanceError) as excinfo:
        client.get("/no/such/endpoint")
    assert excinfo.value.code == "not_found"


def test_mutating_requires_operator_header(service):
    request = urllib.request.Request(
        service.base_url + "/agents",
        data=json.dumps({"persona": "x", "domain_class": "privacy",
                         "scope_of_practice": ["records_release"]}).encode(),
        method="POST", headers={"Content-Type": "application/json"})
    with pytest.raises(urllib.error.HTTPError) as excinfo:
        urllib.request.urlopen(request)
    assert excinfo.value.code == 401
    envelope = json.loads(excinfo.value.read())
    assert envelope["code"] == "operator_required"


def test_unknown_operator_rejected(service):
    client = ServiceClient(service.base_url, "intruder")
    with pytest.raises(GovernanceError) as excinfo:
        client.register("x", "privacy", ["records_release"], [], [])
    assert excinfo.value.code == "unknown_operator"


def test_reads_do_not_require_operator(service):
    with urllib.request.urlopen(service.base_url + "/healthz") as response:
        payload = json.loads(response.read())
    assert payload["status"] == "ok"


def test_error_codes_map_to_statuses(service):
    client = client_for(service)
    onboard_via_wire(client)
    # duplicate persona -> typed error reconstructed from the envelope
    with pytest.raises(DuplicatePersonaInDomain):
        client.register("sepsis-watch", "patient_safety", ["vitals_monitoring"],
                        ["read_vitals"], ["vitals"])
    with pytest.raises(UnknownAgent):
        client.transition("agt-missing", "provision")
    requested = client.register("fresh", "privacy", ["records_release"],
                                ["read_notes"], ["notes"])
    with pytest.raises(InvalidState):
        client.kill(requested["agent_id"], "manual", "not active yet")


def test_mediate_flow_over_wire(service):
    client = client_for(service)
    agent_id, credential_id = onboard_via_wire(client)
    outcome = client.mediate(agent_id, credential_id, "read_vitals",
                             [["vitals", True]], workflow_id="w1", intent="check")
    assert outcome["disposition"] == "executed"
    decisions = client.audit_events(kinds="decision")["events"]
    assert len(decisions) == 1
    assert decisions[0]["payload"]["decision"]["effect"] == "allow"
    # the submitting operator is recorded as the channel
    assert decisions[0]["payload"]["request"]["channel"] == "op.test"


def test_kill_via_wire_and_pending_queue(service):
    client = client_for(service)
    agent_id, credential_id = onboard_via_wire(client)
    report = client.kill(agent_id, "manual", "operator judgment")
    assert report["revoked_credentials"] == 1
    with pytest.raises(InvalidState):
        client.kill(agent_id, "manual", "again")
    outcome = client.mediate(agent_id, credential_id, "read_vitals")
    assert outcome["disposition"] == "denied"


def test_memory_endpoints(service):
    client = client_for(service)
    agent_id, _credential = onboard_via_wire(client)
    entry = client.post("/memory", {
        "agent_id": agent_id, "shard_key": "p-1", "data_category": "vitals",
        "phi": True, "payload": b"hr=70".hex(), "ttl": 3600,
        "workflow_id": "w9"})
    assert entry["entry_id"].startswith("mem-")
    read = client.get("/memory", agent_id=agent_id, shard_key="p-1")
    assert read["count"] == 1
    assert bytes.fromhex(read["entries"][0]["payload"]) == b"hr=70"


def test_kpi_and_maturity_endpoints(service):
    client = client_for(service)
    onboard_via_wire(client)
    now = client.healthz()["now"]
    snapshot = client.kpi(0, now + 1)
    assert snapshot["ownership_coverage"] == 1.0
    assessment = client.maturity(0, now + 1)
    assert assessment["level"] >= 2


def test_bundle_export_over_wire(service):
    from fleetgov.audit import verify_bundle
    client = client_for(service)
    onboard_via_wire(client)
    bundle = client.export_bundle(kinds="registration,approval")
    verification = verify_bundle(bundle)
    assert verification.ok
    assert verification.count == 2


def test_registry_export_over_wire(service):
    client = client_for(service)
    agent_id, _ = onboard_via_wire(client)
    with urllib.request.urlopen(service.base_url + "/registry/export") as response:
        text = response.read().decode()
    assert agent_id in text


def test_clock_advance_logical_only(service):
    client = client_for(service)
    before = client.healthz()["now"]
    after = client.advance_clock(500)
    assert after == before + 500


def test_startup_policy_loaded(service):
    client = client_for(service)
    assert client.get("/policy")["policy_version"] == 1


def test_restart_rehydrates_state(tmp_path):
    raw = write_fixtures(tmp_path)
    raw["id_seed"] = 3
    config = ServiceConfig.from_dict(raw)
    service = GovernanceService(config)
    host, port = service.start()
    client = ServiceClient(f"http://{host}:{port}", "op.test")
    agent = client.register("sepsis-watch", "patient_safety",
                            ["vitals_monitoring"], ["read_vitals"], ["vitals"])
    live_before = service.plane.live_state()
    events_before = len(service.plane.audit)
    service.stop()

    plane = build_plane(ServiceConfig.from_dict(raw))
    assert plane.live_state() == live_before
    assert len(plane.audit) == events_before
    assert plane.audit.verify_chain().ok
    # the restarted plane keeps working and the chain continues
    record = plane.registry.get(agent["agent_id"])
    assert record.persona == "sepsis-watch"
    plane.close()


def test_wire_scenario_matches_in_process(tmp_path):
    """Transport equivalence at simulator scale (small run)."""
    from fleetgov.simulator import SIM_CATALOG_TEXT, SIM_RETENTION_TEXT, SIM_TRIGGERS
    cfg = ScenarioConfig(seed=8, n_agents=4, duration=12_000, duplication_prob=0.2,
                         orphan_prob=0.3, drift_prob=0.3, incident_prob=0.3,
                         tool_call_rate=3.0)
    local_result, _plane = run_scenario_local(cfg)

    (tmp_path / "catalog.txt").write_text(SIM_CATALOG_TEXT)
    (tmp_path / "retention.txt").write_text(SIM_RETENTION_TEXT)
    raw = {
        "listen": "127.0.0.1:0",
        "data_dir": str(tmp_path / "data"),
        "capability_catalog": str(tmp_path / "catalog.txt"),
        "retention_classes": str(tmp_path / "retention.txt"),
        "operators": ["sim"],
        "clock": {"mode": "logical", "start": 0},
        "id_seed": cfg.seed,
        "triggers": [
            {"trigger_id": t.trigger_id, "kind": t.kind,
             "parameters": dict(t.parameters)} for t in SIM_TRIGGERS
        ],
    }
    service = GovernanceService(ServiceConfig.from_dict(raw))
    host, port = service.start()
    try:
        wire_result = run_scenario(
            cfg, HttpDriver(ServiceClient(f"http://{host}:{port}", "sim")))
    finally:
        service.stop()
    assert wire_result.log_digest == local_result.log_digest
    assert wire_result.event_count == local_result.event_count
    assert wire_result.snapshot == local_result.snapshot


def test_three_way_transport_equivalence(tmp_path):
    """The same operation sequence, driven in-process, via the CLI, and
    over the wire, yields byte-identical audit logs under a fixed logical
    clock and id seed."""
    import json as json_mod

    from fleetgov.cli import main as cli_main

    def sequence_config(base: str) -> dict:
        directory = tmp_path / base
        directory.mkdir()
        (directory / "catalog.txt").write_text(CATALOG_TEXT)
        (directory / "retention.txt").write_text(RETENTION_TEXT)
        (directory / "policy.txt").write_text(POLICY_TEXT)
        return {
            "listen": "127.0.0.1:0",
            "data_dir": str(directory / "data"),
            "capability_catalog": str(directory / "catalog.txt"),
            "retention_classes": str(directory / "retention.txt"),
            "policy_document": str(directory / "policy.txt"),
            "operators": ["op.x"],
            "clock": {"mode": "logical", "start": 9000},
            "id_seed": 451,
        }

    # in-process
    raw = sequence_config("inproc")
    plane = build_plane(ServiceConfig.from_dict(raw))
    from conftest import baseline as make_baseline, draft as make_draft
    record = plane.registry.register_agent(make_draft(), "op.x")
    plane.registry.approve_agent(record.agent_id, "dr.a", None,
                                 plane.clock.now() + 30 * 86400,
                                 make_baseline(plane), "op.x")
    plane.lifecycle.transition(record.agent_id, "provision", "op.x")
    plane.lifecycle.transition(record.agent_id, "activate", "op.x")
    inproc_bytes = b"".join(
        __import__("fleetgov.audit", fromlist=["encode_record"]).encode_record(e)
        for e in plane.audit.events())
    plane.close()

    # via the CLI (in-process backend, same deterministic config)
    raw_cli = sequence_config("cli")
    config_path = tmp_path / "cli-service.json"
    config_path.write_text(json_mod.dumps(raw_cli))
    base = ["--config", str(config_path), "--operator", "op.x"]
    assert cli_main(base + ["register", "--persona", "sepsis-watch",
                            "--domain", "patient_safety",
                            "--scope", "vitals_monitoring",
                            "--tools", "read_vitals",
                            "--data-scopes", "vitals"]) == 0
    agents_raw = json_mod.loads(
        __import__("subprocess").run(
            ["python3", "-m", "fleetgov.cli", *base, "agents",
             "--format", "records"],
            capture_output=True, text=True).stdout.splitlines()[0])
    agent_id = agents_raw["agent_id"]
    # CLI approve computes expiration and approved_at from the backend clock,
    # so pin the baseline fields to the fixture values
    assert cli_main(base + ["approve", agent_id, "--owner", "dr.a",
                            "--expires-in", "30d", "--model-id", "model-x",
                            "--prompt-hash", "11" * 32,
                            "--config-hash", "22" * 32]) == 0
    assert cli_main(base + ["transition", agent_id, "provision"]) == 0
    assert cli_main(base + ["transition", agent_id, "activate"]) == 0
    cli_bytes = (tmp_path / "cli" / "data" / "audit.log").read_bytes()

    # over the wire
    raw_wire = sequence_config("wire")
    service = GovernanceService(ServiceConfig.from_dict(raw_wire))
    host, port = service.start()
    client = ServiceClient(f"http://{host}:{port}", "op.x")
    try:
        agent = client.register("sepsis-watch", "patient_safety",
                                ["vitals_monitoring"], ["read_vitals"], ["vitals"])
        now = client.healthz()["now"]
        client.approve(agent["agent_id"], "dr.a", None, now + 30 * 86400, {
            "policy_version": 1, "model_id": "model-x",
            "prompt_hash": "11" * 32, "config_hash": "22" * 32,
            "approved_at": now,
        })
        client.transition(agent["agent_id"], "provision")
        client.transition(agent["agent_id"], "activate")
    finally:
        service.stop()
    wire_bytes = (tmp_path / "wire" / "data" / "audit.log").read_bytes()

    assert inproc_bytes == cli_bytes == wire_bytes


def test_background_sweeper_suspends_lapsed_agents(tmp_path):
    import time

    raw = write_fixtures(tmp_path)
    raw["clock"] = {"mode": "wall"}
    raw["sweep_interval_seconds"] = 1
    del raw["id_seed"]
    service = GovernanceService(ServiceConfig.from_dict(raw))
    host, port = service.start()
    client = ServiceClient(f"http://{host}:{port}", "op.test")
    try:
        agent = client.register("short-lived", "patient_safety",
                                ["vitals_monitoring"], ["read_vitals"], ["vitals"])
        now = client.healthz()["now"]
        client.approve(agent["agent_id"], "dr.a", None, now + 2, {
            "policy_version": 1, "model_id": "m",
            "prompt_hash": "00" * 32, "config_hash": "11" * 32,
            "approved_at": now,
        })
        client.transition(agent["agent_id"], "provision")
        client.transition(agent["agent_id"], "activate")
        deadline = time.time() + 10
        state = "Active"
        while time.time() < deadline:
            state = client.agent(agent["agent_id"])["agent"]["state"]
            if state == "Suspended":
                break
            time.sleep(0.5)
        assert state == "Suspended"
        events = client.audit_events(kinds="transition",
                                     agent_id=agent["agent_id"])["events"]
        assert events[-1]["payload"]["reason"] == "expired"
        assert events[-1]["actor"] == "system"
    finally:
        service.stop()


def test_sweeper_config_requires_wall_clock(tmp_path):
    raw = write_fixtures(tmp_path)
    raw["sweep_interval_seconds"] = 5   # clock is logical in the fixture
    with pytest.raises(ConfigError):
        ServiceConfig.from_dict(raw)


def test_kpi_default_window_from_config(tmp_path):
    raw = write_fixtures(tmp_path)
    raw["kpi_window_seconds"] = 500
    service = GovernanceService(ServiceConfig.from_dict(raw))
    host, port = service.start()
    client = ServiceClient(f"http://{host}:{port}", "op.test")
    try:
        onboard_via_wire(client)
        client.advance_clock(300)
        snapshot = client.get("/kpi")["snapshot"]
        now = client.healthz()["now"]
        assert snapshot["window_end"] == now
        assert snapshot["window_start"] == now - 500
    finally:
        service.stop()
