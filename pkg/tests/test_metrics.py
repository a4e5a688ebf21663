from __future__ import annotations

import itertools

import pytest

from conftest import OP, baseline, credential_for, draft, make_plane, onboard
from fleetgov.errors import WindowOutsideLog
from fleetgov.metrics import (
    FeatureFlags,
    MaturityThresholds,
    assess_maturity,
    compute_snapshot,
)
from fleetgov.registry import DomainClass
from oracles import kpi_oracle


def window(plane):
    events = plane.audit.events()
    return events[0].timestamp, plane.clock.now() + 1


def snapshot_now(plane):
    start, end = window(plane)
    return plane.kpi(start, end)


# -- individual KPI definitions ------------------------------------------------

def test_ownership_three_of_four(plane):
    for i in range(3):
        onboard(plane, draft(persona=f"owned-{i}"))
    plane.registry.register_agent(draft(persona="unowned"), OP)   # Requested, no owner
    assert snapshot_now(plane).ownership_coverage == 0.75


def test_ownership_excludes_decommissioned(plane):
    kept = onboard(plane, draft(persona="kept"))
    gone = onboard(plane, draft(persona="gone"))
    plane.decommission(gone.agent_id, "x", OP)
    assert snapshot_now(plane).ownership_coverage == 1.0
    assert kept.state.value == "Active"


def test_median_revocation_latency_median_of_three():
    """Latencies {2min, 5min, 11min} -> median 5min, via delayed revocations."""
    plane = make_plane()
    delays = (120, 300, 660)
    for index, delay in enumerate(delays):
        record = onboard(plane, draft(persona=f"agent-{index}"))
        credential_for(plane, record, ttl=86400 * 30)
        plane.lifecycle.transition(record.agent_id, "suspend", OP)  # retirement trigger
        plane.clock.advance(delay)
        plane.registry.revoke_credentials(record.agent_id, "slow cleanup", OP)
    assert snapshot_now(plane).median_revocation_latency == 300.0


def test_latency_zero_when_atomic(plane):
    record = onboard(plane)
    credential_for(plane, record, ttl=5000)
    plane.decommission(record.agent_id, "sunset", OP)
    assert snapshot_now(plane).median_revocation_latency == 0.0


def test_latency_absent_without_retirements(plane):
    onboard(plane)
    assert snapshot_now(plane).median_revocation_latency is None


def test_decision_coverage_mixed(plane):
    record = onboard(plane)
    credential = credential_for(plane, record)
    for _ in range(3):
        plane.mediator.mediate(record.agent_id, credential.credential_id,
                               "read_vitals", [("vitals", True)])
    plane.record_ungoverned_call(record.agent_id, "read_vitals")
    assert snapshot_now(plane).decision_coverage == 0.75


def test_orphan_counting(plane):
    healthy = onboard(plane, draft(persona="healthy"))
    departed = onboard(plane, draft(persona="departed"))
    plane.registry.mark_owner_departed(departed.agent_id, OP)
    lapsed = onboard(plane, draft(persona="lapsed"), lifespan=10)
    plane.clock.advance(100)   # lapsed expiration passed, sweep NOT run
    snapshot = snapshot_now(plane)
    assert snapshot.orphan_count == 2
    # sweeping turns the lapsed agent Suspended -> no longer an orphan
    plane.lifecycle.sweep_expired()
    assert snapshot_now(plane).orphan_count == 1
    assert healthy.state.value == "Active" and lapsed.state.value == "Suspended"


def test_phi_minimization_rate(plane):
    record = onboard(plane)
    plane.write_memory(record.agent_id, "p", "vitals", True, b"x", 3600,
                       workflow_id="wfl-good")
    plane.read_memory(record.agent_id, "p", workflow_id="wfl-good")
    # fabricated ungoverned over-read in another workflow
    plane.record_ungoverned_read(record.agent_id, "p", ["vitals", "medications"],
                                 True, 2, workflow_id="wfl-bad")
    snapshot = snapshot_now(plane)
    assert snapshot.phi_minimization_rate == 0.5


def test_non_phi_workflows_ignored_by_phi_rate(plane):
    record = onboard(plane, draft(persona="clerk", domain=DomainClass.ADMINISTRATIVE,
                                  scope=("claims_processing",),
                                  tools=("read_claims",), data_scopes=("claims",)))
    credential = credential_for(plane, record)
    plane.mediator.mediate(record.agent_id, credential.credential_id, "read_claims",
                           [("claims", False)], workflow_id="wfl-claims")
    assert snapshot_now(plane).phi_minimization_rate == 1.0


def test_control_drift_rate_and_resolution(plane):
    drifted = onboard(plane, draft(persona="drifted"))
    onboard(plane, draft(persona="steady"))
    plane.lifecycle.detect_drift(drifted.agent_id, {
        "policy_version": 9, "model_id": "other",
        "prompt_hash": b"\x00" * 32, "config_hash": b"\x00" * 32}, OP)
    assert snapshot_now(plane).control_drift_rate == 0.5
    # re-approving the baseline resolves the finding
    plane.registry.update_baseline(drifted.agent_id, baseline(plane), OP)
    assert snapshot_now(plane).control_drift_rate == 0.0


def test_incident_rate_per_agent_day(plane):
    for i in range(2):
        onboard(plane, draft(persona=f"agent-{i}"))
    start = plane.audit.events()[0].timestamp
    for _ in range(3):
        plane.report_incident(plane.registry.agents()[0].agent_id, "tool_misuse",
                              2, OP)
    plane.clock.advance(86400)   # one day window
    end = start + 86400
    snapshot = plane.kpi(start, end)
    assert snapshot.incident_rate == pytest.approx(3 / (2 * 1.0))


def test_window_validation(plane):
    onboard(plane)
    now = plane.clock.now()
    with pytest.raises(WindowOutsideLog):
        plane.kpi(now, now)
    with pytest.raises(WindowOutsideLog):
        plane.kpi(now + 10_000, now + 20_000)
    with pytest.raises(WindowOutsideLog):
        compute_snapshot([], 0, 10)


def test_snapshot_determinism(plane):
    onboard(plane)
    start, end = window(plane)
    assert plane.kpi(start, end) == plane.kpi(start, end)


def test_engine_matches_oracle_on_handmade_history(plane):
    record = onboard(plane)
    credential = credential_for(plane, record)
    plane.mediator.mediate(record.agent_id, credential.credential_id, "read_vitals",
                           [("vitals", True)], workflow_id="w1")
    plane.write_memory(record.agent_id, "p", "vitals", True, b"x", 3600,
                       workflow_id="w1")
    plane.read_memory(record.agent_id, "p", workflow_id="w1")
    plane.report_incident(record.agent_id, "phi_exposure", 3, OP)
    other = onboard(plane, draft(persona="other"))
    plane.registry.mark_owner_departed(other.agent_id, OP)
    plane.clock.advance(5000)
    plane.decommission(record.agent_id, "done", OP)
    start, end = window(plane)
    snapshot = plane.kpi(start, end)
    expected = kpi_oracle(plane.audit.events(), start, end)
    for name, value in expected.items():
        assert getattr(snapshot, name) == value, name


# -- maturity ----------------------------------------------------------------

def _snapshot(**overrides):
    values = dict(window_start=0, window_end=86400, ownership_coverage=1.0,
                  median_revocation_latency=0.0, decision_coverage=1.0,
                  orphan_count=0, phi_minimization_rate=1.0,
                  control_drift_rate=0.0, incident_rate=0.0, computed_at=86400)
    values.update(overrides)
    from fleetgov.metrics import KpiSnapshot
    return KpiSnapshot(**values)


def test_all_disabled_is_level_one():
    assessment = assess_maturity(_snapshot(), FeatureFlags())
    assert assessment.level == 1
    assert assessment.level_name == "Ad-hoc"


def test_perfect_snapshot_all_features_is_level_four():
    assessment = assess_maturity(_snapshot(), FeatureFlags.all_enabled())
    assert assessment.level == 4
    assert assessment.level_name == "Optimized"
    assert all(item["passed"] for item in assessment.evidence)


def test_levels_gate_on_kpis():
    features = FeatureFlags.all_enabled()
    assert assess_maturity(_snapshot(ownership_coverage=0.9), features).level == 1
    assert assess_maturity(_snapshot(decision_coverage=0.94), features).level == 1
    assert assess_maturity(_snapshot(phi_minimization_rate=0.85), features).level == 2
    assert assess_maturity(_snapshot(orphan_count=1), features).level == 3
    assert assess_maturity(_snapshot(control_drift_rate=0.06), features).level == 3


def test_levels_gate_on_features():
    snapshot = _snapshot()
    assert assess_maturity(snapshot, FeatureFlags(
        managed_identity=True, decision_logging=True)).level == 2
    assert assess_maturity(snapshot, FeatureFlags(
        managed_identity=True, decision_logging=True,
        policy_enforcement=True, shared_context_controls=True)).level == 3


def test_monotone_in_enabled_features():
    """Enabling one more control never lowers the level (full lattice sweep)."""
    snapshot = _snapshot(phi_minimization_rate=0.92, control_drift_rate=0.02)
    names = FeatureFlags.NAMES
    levels = {}
    for bits in itertools.product((False, True), repeat=len(names)):
        flags = FeatureFlags(**dict(zip(names, bits)))
        levels[bits] = assess_maturity(snapshot, flags).level
    for bits, level in levels.items():
        for index, enabled in enumerate(bits):
            if not enabled:
                upgraded = tuple(b or i == index for i, b in enumerate(bits))
                assert levels[upgraded] >= level, (bits, upgraded)


def test_custom_thresholds():
    snapshot = _snapshot(decision_coverage=0.80)
    strict = assess_maturity(snapshot, FeatureFlags.all_enabled())
    lenient = assess_maturity(snapshot, FeatureFlags.all_enabled(),
                              MaturityThresholds(decision_coverage=0.75))
    assert strict.level == 1 and lenient.level == 4


def test_feature_names_validation():
    with pytest.raises(ValueError):
        FeatureFlags.from_names(["warp_drive"])
    flags = FeatureFlags.from_names(["managed_identity", "decision_logging"])
    assert flags.managed_identity and not flags.policy_enforcement


def test_snapshot_rows_one_per_kpi():
    rows = _snapshot().rows()
    assert len(rows) == 7
    assert [name for name, _value in rows] == [
        "ownership_coverage", "median_revocation_latency", "decision_coverage",
        "orphan_count", "phi_minimization_rate", "control_drift_rate",
        "incident_rate"]
