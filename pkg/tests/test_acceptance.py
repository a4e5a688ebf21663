"""Acceptance suite: one test per exit criterion, each printing a
[PASS]/[FAIL] line. Tolerances are pinned here, not deferred.

Run with `pytest tests/test_acceptance.py -v -s` to see the lines.
"""

from __future__ import annotations

import itertools

import pytest

from conftest import OP, baseline, credential_for, draft, make_plane, onboard
from fleetgov.audit import AuditLog, encode_record, verify_bundle, verify_log_file
from fleetgov.clock import LogicalClock
from fleetgov.errors import InvalidState, InvalidTransition
from fleetgov.lifecycle import LifecycleEvent, LifecycleState, TRANSITIONS
from fleetgov.mediation import Claim
from fleetgov.metrics import FeatureFlags, assess_maturity
from fleetgov.policy import Matcher, PolicyRule, evaluate_rules
from fleetgov.registry import DomainClass
from fleetgov.rng import SplitMix64
from fleetgov.simulator import ScenarioConfig, run_scenario, run_scenario_local
from oracles import kpi_oracle

EXACT = 1e-12           # stated tolerance for KPI fraction comparisons


def report(criterion: str, passed: bool, detail: str = "") -> None:
    marker = "PASS" if passed else "FAIL"
    suffix = f"  ({detail})" if detail else ""
    print(f"[{marker}] {criterion}{suffix}")
    assert passed, f"{criterion}{suffix}"


# -- 1. decision coverage ----------------------------------------------------

def test_decision_coverage_governed_vs_ungoverned():
    config = ScenarioConfig(seed=1001, n_agents=10, duration=36_000,
                            duplication_prob=0.2, orphan_prob=0.2, drift_prob=0.2,
                            incident_prob=0.2, tool_call_rate=10.0)   # 1000 calls
    governed, plane = run_scenario_local(config)
    decision_events = [e for e in plane.audit.events() if e.kind == "decision"]
    covered_requests = {e.payload["request"]["request_id"] for e in decision_events}
    ungoverned = run_scenario(ScenarioConfig(
        seed=1001, n_agents=10, duration=36_000, duplication_prob=0.2,
        orphan_prob=0.2, drift_prob=0.2, incident_prob=0.2, tool_call_rate=10.0,
        governed=False))
    ok = (len(decision_events) == 1000
          and len(covered_requests) == 1000
          and governed.snapshot["decision_coverage"] == 1.0
          and ungoverned.snapshot["decision_coverage"] < 1.0)
    report("decision coverage: 1000 governed calls -> 1000 decision records, "
           "coverage 1.0; ungoverned < 1.0", ok,
           f"records={len(decision_events)} governed="
           f"{governed.snapshot['decision_coverage']} "
           f"ungoverned={ungoverned.snapshot['decision_coverage']:.3f}")


# -- 2. decommission completeness ---------------------------------------------

def test_decommission_completeness_randomized():
    rng = SplitMix64(2002)
    total = 0
    failures = []
    for plane_index in range(5):
        plane = make_plane(seed=plane_index)
        records = []
        for i in range(20):
            record = onboard(plane, draft(persona=f"agent-{plane_index}-{i}"),
                             lifespan=50_000 + rng.below(50_000))
            for _ in range(rng.below(4)):
                credential_for(plane, record, ttl=1 + rng.below(10_000))
            for _ in range(rng.below(5)):
                plane.write_memory(record.agent_id, f"shard-{rng.below(5)}",
                                   "vitals", True, b"obs", 1 + rng.below(86_400))
            records.append(record)
            plane.clock.advance(rng.below(100))
        start = plane.audit.events()[0].timestamp
        for record in records:
            if rng.chance(0.4):
                plane.lifecycle.transition(record.agent_id, "suspend", OP)
            plane.decommission(record.agent_id, "randomized retirement", OP)
            total += 1
            active = [c for c in plane.registry.credentials_for(record.agent_id)
                      if c.status == "active"]
            unfrozen = [e for e in plane.memory.export_for_audit(record.agent_id)
                        if not e.frozen]
            report_obj = plane.lifecycle.termination_report(record.agent_id)
            if active or unfrozen or report_obj is None:
                failures.append(record.agent_id)
            with pytest.raises(InvalidState):
                plane.decommission(record.agent_id, "again", OP)
        snapshot = plane.kpi(start, plane.clock.now() + 1)
        if snapshot.median_revocation_latency not in (None, 0.0):
            failures.append(f"latency={snapshot.median_revocation_latency}")
    report("decommission completeness: 100 randomized decommissions leave "
           "0 active credentials, 0 unfrozen entries, 1 termination report; "
           "median revocation latency 0 under the logical clock",
           total == 100 and not failures,
           f"decommissions={total} failures={failures[:3]}")


# -- 3. precedence dominance ---------------------------------------------------

def test_precedence_dominance_exhaustive():
    plane = make_plane()
    record = onboard(plane)
    rank = {DomainClass.PATIENT_SAFETY: 0, DomainClass.PRIVACY: 1,
            DomainClass.CLINICAL_OUTCOME: 2, DomainClass.ADMINISTRATIVE: 3}

    def rule(rule_id, domain, effect):
        return PolicyRule(rule_id=rule_id, domain_class=domain,
                          subject=Matcher("*"), action=Matcher("*"),
                          resource=Matcher("*"), effect=effect)

    checks = 0
    for deny_class, allow_class in itertools.product(DomainClass, repeat=2):
        deny_rule = rule("deny-side", deny_class, "deny")
        allow_rule = rule("allow-side", allow_class, "allow")
        for ordering in ((deny_rule, allow_rule), (allow_rule, deny_rule)):
            effect, winning, _, _ = evaluate_rules(ordering, record, "tool",
                                                   [("vitals", True)])
            checks += 1
            if rank[deny_class] <= rank[allow_class]:
                assert effect == "deny" and winning == "deny-side", \
                    (deny_class, allow_class)
            else:
                assert effect == "allow" and winning == "allow-side", \
                    (deny_class, allow_class)

    # patient_safety deny defeats lower-class allows in every ordering
    safety_wins = all(
        evaluate_rules(perm, record, "tool", [("vitals", True)])[0] == "deny"
        for lower in (DomainClass.PRIVACY, DomainClass.CLINICAL_OUTCOME,
                      DomainClass.ADMINISTRATIVE)
        for perm in itertools.permutations(
            (rule("s", DomainClass.PATIENT_SAFETY, "deny"),
             rule("l", lower, "allow"))))

    # conflict resolution over all 16 ordered class pairs
    a = onboard(plane, draft(persona="claimant-a"))
    b = onboard(plane, draft(persona="claimant-b"))
    lattice_ok = True
    for class_a, class_b in itertools.product(DomainClass, repeat=2):
        case = plane.mediator.open_conflict(
            a.agent_id, b.agent_id, "resource",
            {a.agent_id: Claim(class_a, "a"), b.agent_id: Claim(class_b, "b")}, OP)
        outcome = plane.mediator.resolve_conflict(case.case_id, OP)
        if rank[class_a] == rank[class_b]:
            lattice_ok &= outcome.status == "escalated"
        else:
            expected = a.agent_id if rank[class_a] < rank[class_b] else b.agent_id
            lattice_ok &= outcome.resolution == expected
    report("precedence dominance: safety deny defeats lower-class allow in all "
           "orderings; conflict lattice holds over all 16 class pairs",
           safety_wins and lattice_ok, f"rule-pair checks={checks}")


# -- 4. lifecycle safety --------------------------------------------------------

def test_lifecycle_safety_random_walks():
    rng = SplitMix64(4004)
    plane = make_plane()
    events = ["approve", "provision", "activate", "suspend", "reactivate",
              "decommission"]
    agents = [plane.registry.register_agent(draft(persona=f"walker-{i}"), OP)
              for i in range(20)]
    violations = 0
    absorbing_violations = 0
    steps = 10_000
    for _ in range(steps):
        record = agents[rng.below(len(agents))]
        event_name = events[rng.below(len(events))]
        before = record.state
        try:
            if event_name == "approve":
                plane.registry.approve_agent(record.agent_id, "dr.w", None,
                                             plane.clock.now() + 10 ** 7,
                                             baseline(plane), OP)
            elif event_name == "decommission":
                plane.decommission(record.agent_id, "walk", OP)
            else:
                plane.lifecycle.transition(record.agent_id, event_name, OP)
        except (InvalidTransition, InvalidState):
            if record.state is not before:
                violations += 1
            continue
        after = record.state
        if TRANSITIONS.get((before, LifecycleEvent(event_name))) is not after:
            violations += 1
        if before is LifecycleState.DECOMMISSIONED:
            absorbing_violations += 1
    report("lifecycle safety: 10k random events never leave the transition "
           "table; Decommissioned is absorbing",
           violations == 0 and absorbing_violations == 0,
           f"steps={steps} agents={len(agents)}")


# -- 5. audit chain ---------------------------------------------------------------

def test_audit_chain_tamper_detection(tmp_path):
    path = tmp_path / "audit.log"
    log = AuditLog(path, clock=LogicalClock(1))
    for i in range(250):
        log.append("incident", "op", {"agent_id": f"agt-{i % 7}", "n": i,
                                      "category": "tool_misuse", "severity": 1})
    log.close()
    pristine = path.read_bytes()
    assert verify_log_file(path).ok

    boundaries = []
    offset = 0
    for event in log.events():
        size = len(encode_record(event))
        boundaries.append((offset, offset + size, event.seq))
        offset += size

    rng = SplitMix64(5005)
    detected = 0
    for _ in range(100):
        position = rng.below(len(pristine))
        tampered = bytearray(pristine)
        tampered[position] ^= 1 + rng.below(255)
        path.write_bytes(bytes(tampered))
        expected_seq = next(seq for lo, hi, seq in boundaries if lo <= position < hi)
        result = verify_log_file(path)
        if not result.ok and result.first_bad_seq == expected_seq:
            detected += 1

    path.write_bytes(pristine)
    clean_again = verify_log_file(path).ok
    bundle = log.export_bundle(agent_id="agt-3")
    bundle_ok = verify_bundle(bundle).ok
    report("audit chain: 100/100 injected corruptions detected at the exact "
           "seq; untampered log verifies; bundle re-verifies standalone",
           detected == 100 and clean_again and bundle_ok,
           f"detected={detected}/100")


# -- 6. KPI oracle equivalence ----------------------------------------------------

def test_kpi_oracle_equivalence_25_scenarios():
    mismatches = []
    for seed in range(25):
        config = ScenarioConfig(
            seed=seed, n_agents=4 + seed % 5, duration=15_000 + 1000 * (seed % 7),
            duplication_prob=0.1 * (seed % 4), orphan_prob=0.1 * (seed % 5),
            drift_prob=0.1 * (seed % 3), incident_prob=0.1 * (seed % 4),
            tool_call_rate=2.0 + (seed % 3), governed=(seed % 5 != 4))
        result, plane = run_scenario_local(config)
        expected = kpi_oracle(plane.audit.events(), 0, config.duration)
        for name, value in expected.items():
            got = result.snapshot[name]
            if value is None or isinstance(value, int):
                equal = got == value
            else:
                equal = got is not None and abs(got - value) <= EXACT
            if not equal:
                mismatches.append((seed, name, value, got))
    report("KPI oracle equivalence: all seven KPIs equal the replay oracle "
           "over 25 random scenarios (fractions within 1e-12)",
           not mismatches, f"mismatches={mismatches[:3]}")


# -- 7. memory bounds ---------------------------------------------------------------

def test_memory_bounds_randomized_queries():
    rng = SplitMix64(7007)
    plane = make_plane()
    scope_options = (
        ("vitals",), ("medications",), ("vitals", "medications"),
        ("vitals", "medications", "claims"),
    )
    agents = []
    for i in range(6):
        scopes = scope_options[rng.below(len(scope_options))]
        capabilities = {"vitals": "vitals_monitoring",
                        "medications": "medication_review",
                        "claims": "claims_processing"}
        agents.append(onboard(plane, draft(
            persona=f"reader-{i}",
            scope=tuple(capabilities[s] for s in scopes),
            tools=(), data_scopes=scopes)))
    shards = [f"patient-{i}" for i in range(8)]
    for _ in range(300):
        agent = agents[rng.below(len(agents))]
        category = sorted(agent.data_scopes)[rng.below(len(agent.data_scopes))]
        plane.write_memory(agent.agent_id, shards[rng.below(len(shards))],
                           category, category != "claims", b"x",
                           1 + rng.below(5000))
        plane.clock.advance(rng.below(10))

    leaks = expired_reads = cross_shard = 0
    queries = 10_000
    for _ in range(queries):
        agent = agents[rng.below(len(agents))]
        shard = shards[rng.below(len(shards))]
        categories = None if rng.chance(0.4) else \
            [("vitals", "medications", "claims", "notes")[rng.below(4)]]
        now = plane.clock.now() + rng.below(6000)
        for entry in plane.read_memory(agent.agent_id, shard, categories, now):
            if entry.data_category not in agent.data_scopes:
                leaks += 1
            if categories is not None and entry.data_category not in categories:
                leaks += 1
            if entry.shard_key != shard:
                cross_shard += 1
            if entry.created_at + entry.ttl <= now:
                expired_reads += 1
    report("memory bounds: zero out-of-scope, cross-shard, or past-TTL reads "
           "over 10k randomized queries",
           leaks == 0 and cross_shard == 0 and expired_reads == 0,
           f"queries={queries}")


# -- 8. determinism -----------------------------------------------------------------

def test_determinism_across_runs_and_transports(tmp_path):
    from fleetgov.client import HttpDriver, ServiceClient
    from fleetgov.service import GovernanceService, ServiceConfig
    from fleetgov.simulator import SIM_CATALOG_TEXT, SIM_RETENTION_TEXT, SIM_TRIGGERS

    config = ScenarioConfig(seed=8008, n_agents=5, duration=15_000,
                            duplication_prob=0.2, orphan_prob=0.3, drift_prob=0.3,
                            incident_prob=0.3, tool_call_rate=4.0)
    first = run_scenario(config)
    second = run_scenario(config)

    (tmp_path / "catalog.txt").write_text(SIM_CATALOG_TEXT)
    (tmp_path / "retention.txt").write_text(SIM_RETENTION_TEXT)
    raw = {
        "listen": "127.0.0.1:0",
        "data_dir": str(tmp_path / "data"),
        "capability_catalog": str(tmp_path / "catalog.txt"),
        "retention_classes": str(tmp_path / "retention.txt"),
        "operators": ["sim"],
        "clock": {"mode": "logical", "start": 0},
        "id_seed": config.seed,
        "triggers": [{"trigger_id": t.trigger_id, "kind": t.kind,
                      "parameters": dict(t.parameters)} for t in SIM_TRIGGERS],
    }
    service = GovernanceService(ServiceConfig.from_dict(raw))
    host, port = service.start()
    try:
        wire = run_scenario(config, HttpDriver(
            ServiceClient(f"http://{host}:{port}", "sim")))
    finally:
        service.stop()

    report("determinism: identical config yields identical terminal digests "
           "across two in-process runs and across transports",
           first.log_digest == second.log_digest == wire.log_digest
           and first.chain_ok and wire.chain_ok,
           f"digest={first.log_digest.hex()[:16]}…")


# -- 9. maturity monotonicity ---------------------------------------------------------

def test_maturity_monotonicity_full_lattice():
    from fleetgov.metrics import KpiSnapshot
    snapshots = [
        KpiSnapshot(0, 86400, 1.0, 0.0, 1.0, 0, 1.0, 0.0, 0.0, 86400),
        KpiSnapshot(0, 86400, 1.0, 0.0, 0.97, 0, 0.92, 0.04, 0.2, 86400),
        KpiSnapshot(0, 86400, 0.9, None, 1.0, 2, 0.5, 0.5, 1.0, 86400),
    ]
    names = FeatureFlags.NAMES
    violations = []
    for snapshot in snapshots:
        levels = {}
        for bits in itertools.product((False, True), repeat=len(names)):
            flags = FeatureFlags(**dict(zip(names, bits)))
            levels[bits] = assess_maturity(snapshot, flags).level
        for bits, level in levels.items():
            for index, enabled in enumerate(bits):
                if not enabled:
                    upgraded = tuple(b or i == index for i, b in enumerate(bits))
                    if levels[upgraded] < level:
                        violations.append((bits, upgraded))
    report("maturity monotonicity: enabling controls never lowers the level "
           "across the full feature lattice (3 snapshots x 32 combinations)",
           not violations, f"violations={violations[:3]}")
