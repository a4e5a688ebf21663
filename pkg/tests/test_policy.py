from __future__ import annotations

import itertools

import pytest
from hypothesis import given, settings, strategies as st

from conftest import OP, POLICY_TEXT, draft, make_plane, onboard
from fleetgov.errors import (
    DuplicateRuleId,
    ParseError,
    UnknownDomainClass,
    UnknownPolicyVersion,
)
from fleetgov.mediation import ToolCallRequest
from fleetgov.policy import (
    KillSwitchTrigger,
    Matcher,
    PolicyRule,
    PolicyVersion,
    TelemetryEvent,
    evaluate_rules,
    parse_policy_document,
)
from fleetgov.registry import DomainClass
from fleetgov.rng import SplitMix64
from oracles import policy_verdict_oracle


def _request(plane, record, tool, resources=(), request_id="req-1"):
    return ToolCallRequest(
        request_id=request_id,
        agent_id=record.agent_id,
        credential_id="crd-x",
        tool=tool,
        resources=tuple(resources),
        workflow_id=None,
        intent="",
        submitted_at=plane.clock.now(),
    )


def _rule(rule_id, domain, effect, subject="*", action="*", resource="*",
          conditions=(), phi_only=False):
    return PolicyRule(
        rule_id=rule_id,
        domain_class=domain,
        subject=Matcher(subject),
        action=Matcher(action),
        resource=Matcher(resource),
        effect=effect,
        conditions=frozenset(conditions),
        resource_phi_only=phi_only,
    )


# -- document parsing ----------------------------------------------------

def test_parse_the_fixture_policy():
    rules = parse_policy_document(POLICY_TEXT)
    assert [r.rule_id for r in rules] == [
        "ps-medication-human-gate", "privacy-deny-phi-export",
        "clinical-allow-reads", "admin-allow-operations"]
    assert rules[0].resource_phi_only is True
    assert rules[0].conditions == frozenset({"human_approval_present"})


def test_parse_error_names_line_and_field():
    with pytest.raises(ParseError) as excinfo:
        parse_policy_document("rule r1\n  klass patient_safety\n")
    assert "line 2" in str(excinfo.value)
    assert "klass" in str(excinfo.value)


def test_duplicate_rule_id():
    document = """\
rule r1
  class administrative
  subject *
  action *
  resource *
  effect allow

rule r1
  class privacy
  subject *
  action *
  resource *
  effect deny
"""
    with pytest.raises(DuplicateRuleId):
        parse_policy_document(document)


def test_unknown_domain_class():
    with pytest.raises(UnknownDomainClass):
        parse_policy_document("rule r1\n  class cosmic\n")


def test_missing_field_reported():
    with pytest.raises(ParseError) as excinfo:
        parse_policy_document(
            "rule r1\n  class administrative\n  subject *\n  action *\n  effect allow\n")
    assert "resource" in str(excinfo.value)


def test_interior_wildcard_rejected():
    with pytest.raises(ParseError):
        parse_policy_document(
            "rule r1\n  class administrative\n  subject a*b\n  action *\n"
            "  resource *\n  effect allow\n")


def test_matcher_semantics():
    assert Matcher("*").matches("anything")
    assert Matcher("read_*").matches("read_vitals")
    assert not Matcher("read_*").matches("write_vitals")
    assert Matcher("exact").matches("exact")
    assert not Matcher("exact").matches("exactly")
    with pytest.raises(ValueError):
        Matcher("")


# -- versioning -----------------------------------------------------------

def test_versions_monotone(plane):
    v2 = plane.policy.load_policy(POLICY_TEXT, OP)
    assert v2.version == 2    # fixture plane loaded version 1
    v3 = plane.policy.load_policy(POLICY_TEXT, OP)
    assert v3.version == 3
    assert v2.source_digest == v3.source_digest   # byte-identical document


def test_policy_loaded_event(plane):
    before = len(plane.audit)
    plane.policy.load_policy(POLICY_TEXT, OP)
    event = plane.audit.events()[-1]
    assert len(plane.audit) == before + 1
    assert event.kind == "policy_loaded"
    assert event.payload["rule_count"] == 4


def test_unknown_version(plane):
    with pytest.raises(UnknownPolicyVersion):
        plane.policy.version(99)


# -- evaluation semantics -----------------------------------------------------

def test_single_match_allows(plane):
    record = onboard(plane)
    rules = (_rule("r1", DomainClass.CLINICAL_OUTCOME, "allow", action="read_vitals"),)
    effect, winning, matched, trace = evaluate_rules(
        rules, record, "read_vitals", [("vitals", True)])
    assert (effect, winning) == ("allow", "r1")
    assert matched == (("r1", "clinical_outcome", "allow"),)
    assert any("r1" in line for line in trace)


def test_safety_deny_beats_administrative_allow_any_order(plane):
    record = onboard(plane)
    allow = _rule("admin-allow", DomainClass.ADMINISTRATIVE, "allow",
                  action="use_cheap_lab")
    deny = _rule("safety-deny", DomainClass.PATIENT_SAFETY, "deny",
                 action="use_cheap_lab")
    for rules in ((allow, deny), (deny, allow)):
        effect, winning, _, _ = evaluate_rules(rules, record, "use_cheap_lab", [])
        assert (effect, winning) == ("deny", "safety-deny")


def test_medication_gate_blocks_without_approval(plane):
    record = onboard(plane, draft(persona="med-review",
                                  domain=DomainClass.CLINICAL_OUTCOME,
                                  scope=("medication_review",),
                                  tools=("order_medication",),
                                  data_scopes=("medications",)))
    gate = _rule("gate", DomainClass.PATIENT_SAFETY, "require_human",
                 action="order_medication", conditions=("human_approval_present",))
    effect, winning, _, _ = evaluate_rules(
        (gate,), record, "order_medication", [("medications", True)])
    assert (effect, winning) == ("require_human", "gate")

    effect, _, _, trace = evaluate_rules(
        (gate,), record, "order_medication", [("medications", True)],
        condition_tags=frozenset({"human_approval_present"}))
    assert effect == "allow"
    assert any("discharged" in line for line in trace)


def test_default_deny(plane):
    record = onboard(plane)
    effect, winning, matched, _ = evaluate_rules((), record, "anything", [])
    assert (effect, winning, matched) == ("deny", "default_deny", ())


def test_conditional_allow_requires_tags(plane):
    record = onboard(plane)
    conditional = _rule("c1", DomainClass.ADMINISTRATIVE, "allow",
                        conditions=("after_hours_approved",))
    effect, winning, _, _ = evaluate_rules((conditional,), record, "tool", [])
    assert (effect, winning) == ("deny", "default_deny")
    effect, winning, _, _ = evaluate_rules(
        (conditional,), record, "tool", [],
        condition_tags=frozenset({"after_hours_approved"}))
    assert (effect, winning) == ("allow", "c1")


def test_phi_only_resource_matcher(plane):
    record = onboard(plane)
    deny_phi = _rule("p1", DomainClass.PRIVACY, "deny", action="export_records",
                     resource="*", phi_only=True)
    # non-phi resources do not match the phi-only rule -> default deny
    effect, winning, matched, _ = evaluate_rules(
        (deny_phi,), record, "export_records", [("claims", False)])
    assert (effect, winning, matched) == ("deny", "default_deny", ())
    effect, winning, _, _ = evaluate_rules(
        (deny_phi,), record, "export_records", [("notes", True)])
    assert (effect, winning) == ("deny", "p1")


def test_winning_rule_tiebreak_is_lexicographic(plane):
    record = onboard(plane)
    rules = (_rule("zz", DomainClass.PRIVACY, "deny"),
             _rule("aa", DomainClass.PRIVACY, "deny"))
    _, winning, _, _ = evaluate_rules(rules, record, "t", [])
    assert winning == "aa"


def _random_rules(rng: SplitMix64, count: int):
    domains = list(DomainClass)
    effects = ("allow", "deny", "require_human")
    subjects = ("*", "sepsis-watch", "vitals_monitoring", "someone-else")
    actions = ("*", "read_vitals", "read_*", "order_medication")
    resources = ("*", "vitals", "medications", "vit*")
    rules = []
    for i in range(count):
        rules.append(_rule(
            f"r{i}",
            domains[rng.below(4)],
            effects[rng.below(3)],
            subject=subjects[rng.below(4)],
            action=actions[rng.below(4)],
            resource=resources[rng.below(4)],
            conditions=("human_approval_present",) if rng.chance(0.25) else (),
            phi_only=rng.chance(0.25),
        ))
    return tuple(rules)


def test_random_rule_sets_match_bruteforce_oracle(plane):
    record = onboard(plane)
    rng = SplitMix64(41)
    requests = [
        ("read_vitals", (("vitals", True),)),
        ("order_medication", (("medications", True),)),
        ("read_claims", (("claims", False),)),
        ("book_slot", ()),
    ]
    for trial in range(200):
        rules = _random_rules(rng, 1 + rng.below(6))
        tool, resources = requests[rng.below(len(requests))]
        tags = frozenset({"human_approval_present"}) if rng.chance(0.3) else frozenset()
        effect, winning, _, _ = evaluate_rules(rules, record, tool, resources, tags)
        expected_effect, expected_winning = policy_verdict_oracle(
            rules, record, tool, resources, tags)
        assert (effect, winning) == (expected_effect, expected_winning), \
            f"trial {trial}: rules={[r.rule_id for r in rules]}"


def test_order_independence_over_permutations(plane):
    record = onboard(plane)
    rng = SplitMix64(43)
    for _ in range(30):
        rules = _random_rules(rng, 4)
        verdicts = set()
        for permutation in itertools.permutations(rules):
            effect, winning, matched, _ = evaluate_rules(
                permutation, record, "read_vitals", (("vitals", True),))
            verdicts.add((effect, winning, matched))
        assert len(verdicts) == 1


@settings(max_examples=120, deadline=None)
@given(lower=st.lists(
    st.tuples(
        st.sampled_from([DomainClass.PRIVACY, DomainClass.CLINICAL_OUTCOME,
                         DomainClass.ADMINISTRATIVE]),
        st.sampled_from(["allow", "deny", "require_human"]),
    ), max_size=5))
def test_precedence_dominance_property(lower):
    """A matching patient_safety deny defeats every lower-class combination."""
    plane = make_plane(load_policy=False)
    record = onboard(plane)
    rules = [_rule("safety-0", DomainClass.PATIENT_SAFETY, "deny")]
    for index, (domain, effect) in enumerate(lower):
        rules.append(_rule(f"lower-{index}", domain, effect))
    effect, winning, _, _ = evaluate_rules(tuple(rules), record, "read_vitals",
                                           (("vitals", True),))
    assert effect == "deny"
    assert winning == "safety-0"


def test_evaluate_records_decision_and_event(plane):
    record = onboard(plane)
    version = plane.policy.latest_version()
    request = _request(plane, record, "read_vitals", (("vitals", True),))
    before = len(plane.audit)
    decision = plane.policy.evaluate(request, record, version)
    assert decision.effect == "allow"
    assert decision.policy_version == version.version
    assert len(plane.audit) == before + 1
    assert plane.audit.events()[-1].kind == "decision"
    assert plane.policy.decision(decision.decision_id) is decision


def test_evaluate_requires_loaded_version(plane):
    record = onboard(plane)
    ghost = PolicyVersion(version=42, rules=(), loaded_at=0, source_digest=b"\0" * 32)
    with pytest.raises(UnknownPolicyVersion):
        plane.policy.evaluate(_request(plane, record, "x"), record, ghost)


def test_evaluate_deterministic(plane):
    record = onboard(plane)
    version = plane.policy.latest_version()
    first = plane.policy.evaluate(
        _request(plane, record, "read_vitals", (("vitals", True),), "req-a"),
        record, version)
    second = plane.policy.evaluate(
        _request(plane, record, "read_vitals", (("vitals", True),), "req-b"),
        record, version)
    assert (first.effect, first.winning_rule, first.precedence_trace) == \
        (second.effect, second.winning_rule, second.precedence_trace)


# -- triggers -----------------------------------------------------------------

def _denial(ts, agent="a"):
    return TelemetryEvent(kind="decision", timestamp=ts, agent_id=agent, effect="deny")


def test_repeated_denials_fires(plane):
    trigger = KillSwitchTrigger("t", "repeated_denials",
                                {"count": 3, "window_seconds": 60})
    plane.policy.triggers = [trigger]
    window = [_denial(0), _denial(5), _denial(10)]
    assert plane.policy.check_triggers("a", window) == [trigger]


def test_repeated_denials_below_threshold(plane):
    trigger = KillSwitchTrigger("t", "repeated_denials",
                                {"count": 3, "window_seconds": 60})
    plane.policy.triggers = [trigger]
    assert plane.policy.check_triggers("a", [_denial(0), _denial(5)]) == []


def test_denials_outside_window_do_not_fire(plane):
    trigger = KillSwitchTrigger("t", "repeated_denials",
                                {"count": 3, "window_seconds": 60})
    plane.policy.triggers = [trigger]
    window = [_denial(0), _denial(100), _denial(200)]
    assert plane.policy.check_triggers("a", window) == []


def test_other_agents_denials_ignored(plane):
    trigger = KillSwitchTrigger("t", "repeated_denials",
                                {"count": 2, "window_seconds": 60})
    plane.policy.triggers = [trigger]
    window = [_denial(0, "a"), _denial(1, "b"), _denial(2, "b")]
    assert plane.policy.check_triggers("a", window) == []
    assert plane.policy.check_triggers("b", window) == [trigger]


def test_disarmed_trigger_never_fires(plane):
    trigger = KillSwitchTrigger("t", "repeated_denials", {"count": 1}, armed=False)
    plane.policy.triggers = [trigger]
    assert plane.policy.check_triggers("a", [_denial(0)]) == []


def test_trigger_parameter_validation():
    with pytest.raises(ValueError):
        KillSwitchTrigger("t", "repeated_denials", {"count": 0})
    with pytest.raises(ValueError):
        KillSwitchTrigger("t", "weird_kind")


def test_trigger_kinds(plane):
    triggers = [
        KillSwitchTrigger("incidents", "incident_threshold",
                          {"min_severity": 2, "count": 2}),
        KillSwitchTrigger("drifted", "drift_detected"),
        KillSwitchTrigger("departed", "owner_revoked"),
        KillSwitchTrigger("manual", "manual"),
    ]
    plane.policy.triggers = triggers
    window = [
        TelemetryEvent("incident", 0, "a", severity=3),
        TelemetryEvent("incident", 1, "a", severity=2),
        TelemetryEvent("drift", 2, "a"),
        TelemetryEvent("owner_departed", 3, "a"),
        TelemetryEvent("manual_request", 4, "a"),
    ]
    assert plane.policy.check_triggers("a", window) == triggers
    # below-severity incidents never fire the incident trigger
    fired = plane.policy.check_triggers(
        "a", [TelemetryEvent("incident", 0, "a", severity=1)] * 5)
    assert fired == []


def test_mixed_window_matches_linear_scan_oracle(plane):
    rng = SplitMix64(8)
    triggers = [
        KillSwitchTrigger("denials", "repeated_denials",
                          {"count": 4, "window_seconds": 120}),
        KillSwitchTrigger("incidents", "incident_threshold",
                          {"min_severity": 2, "count": 3}),
        KillSwitchTrigger("drifted", "drift_detected"),
    ]
    plane.policy.triggers = triggers
    agents = [f"agt-{i}" for i in range(5)]
    window = []
    for _ in range(500):
        kind = ("decision", "incident", "drift")[rng.below(3)]
        agent = agents[rng.below(5)]
        ts = rng.below(1000)
        if kind == "decision":
            window.append(TelemetryEvent("decision", ts, agent,
                                         effect="deny" if rng.chance(0.4) else "allow"))
        elif kind == "incident":
            window.append(TelemetryEvent("incident", ts, agent,
                                         severity=1 + rng.below(3)))
        else:
            window.append(TelemetryEvent("drift", ts, agent))

    for agent in agents:
        mine = [e for e in window if e.agent_id == agent]
        denial_times = sorted(e.timestamp for e in mine
                              if e.kind == "decision" and e.effect == "deny")
        expect_denials = any(
            denial_times[i + 3] - denial_times[i] <= 120
            for i in range(len(denial_times) - 3))
        expect_incidents = sum(1 for e in mine
                               if e.kind == "incident" and e.severity >= 2) >= 3
        expect_drift = any(e.kind == "drift" for e in mine)
        expected = [t for t, fire in zip(
            triggers, (expect_denials, expect_incidents, expect_drift)) if fire]
        assert plane.policy.check_triggers(agent, window) == expected
