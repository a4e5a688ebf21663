from __future__ import annotations

import pytest

from fleetgov.clock import LogicalClock
from fleetgov.plane import ControlPlane
from fleetgov.policy import KillSwitchTrigger
from fleetgov.memory import RetentionClasses
from fleetgov.registry import AgentDraft, ApprovedBaseline, CapabilityCatalog, DomainClass

CATALOG_TEXT = """\
# test capability catalog
vitals_monitoring: read_vitals stream_vitals
medication_review: read_medications order_medication
claims_processing: read_claims submit_claim export_records
scheduling: read_schedule book_slot
records_release: read_notes export_records
"""

RETENTION_TEXT = """\
vitals: 30d
medications: 365d
claims: 180d
schedule: 30d
notes: 365d
"""

POLICY_TEXT = """\
rule ps-medication-human-gate
  class patient_safety
  subject *
  action order_medication
  resource phi:*
  effect require_human
  conditions human_approval_present

rule privacy-deny-phi-export
  class privacy
  subject *
  action export_records
  resource phi:*
  effect deny

rule clinical-allow-reads
  class clinical_outcome
  subject *
  action read_*
  resource *
  effect allow

rule admin-allow-operations
  class administrative
  subject *
  action *
  resource *
  effect allow
"""

TRIGGERS = (
    KillSwitchTrigger("trg-denials", "repeated_denials",
                      {"count": 3, "window_seconds": 3600}),
    KillSwitchTrigger("trg-drift", "drift_detected"),
)

OP = "op.test"


def make_plane(start: int = 1_000_000, seed: int = 7, audit_path=None,
               load_policy: bool = True, triggers=TRIGGERS) -> ControlPlane:
    plane = ControlPlane(
        catalog=CapabilityCatalog.parse(CATALOG_TEXT),
        retention=RetentionClasses.parse(RETENTION_TEXT),
        clock=LogicalClock(start),
        id_seed=seed,
        audit_path=audit_path,
        triggers=triggers,
    )
    if load_policy:
        plane.policy.load_policy(POLICY_TEXT, OP)
    return plane


@pytest.fixture
def plane() -> ControlPlane:
    return make_plane()


def draft(persona="sepsis-watch", domain=DomainClass.PATIENT_SAFETY,
          scope=("vitals_monitoring",), tools=("read_vitals",),
          data_scopes=("vitals",)) -> AgentDraft:
    return AgentDraft(
        persona=persona,
        domain_class=domain,
        scope_of_practice=frozenset(scope),
        allowed_tools=frozenset(tools),
        data_scopes=frozenset(data_scopes),
    )


def baseline(plane: ControlPlane, policy_version: int = 1) -> ApprovedBaseline:
    return ApprovedBaseline(
        policy_version=policy_version,
        model_id="model-x",
        prompt_hash=b"\x11" * 32,
        config_hash=b"\x22" * 32,
        approved_at=plane.clock.now(),
    )


def onboard(plane: ControlPlane, agent_draft: AgentDraft | None = None,
            lifespan: int = 90 * 86400, owner: str = "dr.a",
            override_duplicate: bool = False):
    """Register -> approve -> provision -> activate; returns the record."""
    record = plane.registry.register_agent(agent_draft or draft(), OP,
                                           override_duplicate=override_duplicate)
    plane.registry.approve_agent(record.agent_id, owner, "unit.icu",
                                 plane.clock.now() + lifespan, baseline(plane), OP)
    plane.lifecycle.transition(record.agent_id, "provision", OP)
    plane.lifecycle.transition(record.agent_id, "activate", OP)
    return record


def credential_for(plane: ControlPlane, record, ttl: int | None = None):
    claims = sorted(record.allowed_tools | record.data_scopes)
    if ttl is None:
        ttl = record.expiration - plane.clock.now()
    return plane.registry.issue_credential(record.agent_id, claims, ttl, OP)
