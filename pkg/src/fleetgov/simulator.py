"""Deterministic fleet simulator: sprawl scenarios driven end to end.

A scenario walks every agent through the full lifecycle narrative
(register, approve, provision, activate, credential, traffic) and
injects sprawl pathologies — duplicated capabilities, departed owners,
baseline drift, incidents, mid-run decommissions — on a seeded
splitmix64 stream. Identical configs produce byte-identical audit logs,
whether the scenario drives an in-process plane or a running service
over the wire (the driver abstraction below), because identifiers,
timestamps and every narrative choice derive from the seed and the
logical clock.

``governed=False`` records the same tool traffic as ungoverned evidence
(no mediation, no decisions) to demonstrate KPI degradation against the
governed baseline.

``replay`` rebuilds fleet state from events alone and is the
independent reconstruction used to cross-check live state.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Protocol

from .clock import LogicalClock
from .errors import GovernanceError, InvalidConfig
from .plane import ControlPlane, FleetState
from .policy import KillSwitchTrigger
from .registry import CapabilityCatalog
from .memory import RetentionClasses
from .rng import SplitMix64

# -- built-in scenario fixtures -------------------------------------------

SIM_CATALOG_TEXT = """\
# capability catalog used by simulated fleets
vitals_monitoring: read_vitals stream_vitals
medication_review: read_medications order_medication
claims_processing: read_claims submit_claim export_records
scheduling: read_schedule book_slot
records_release: read_notes export_records
"""

SIM_RETENTION_TEXT = """\
# retention classes (max TTL per data category)
vitals: 30d
medications: 365d
claims: 180d
schedule: 30d
notes: 365d
"""

SIM_POLICY_TEXT = """\
# baseline fleet policy
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

SIM_TRIGGERS = (
    KillSwitchTrigger("trg-repeated-denials", "repeated_denials",
                      {"count": 5, "window_seconds": 7200}),
    KillSwitchTrigger("trg-incident-high", "incident_threshold",
                      {"min_severity": 3, "count": 2}),
)

PHI_CATEGORIES = frozenset({"vitals", "medications", "notes"})

# (persona stem, domain class, capabilities, data scopes)
_ARCHETYPES = (
    ("sepsis-watch", "patient_safety", ("vitals_monitoring",), ("vitals",)),
    ("med-review", "clinical_outcome", ("medication_review",), ("medications",)),
    ("claims-bot", "administrative", ("claims_processing",), ("claims",)),
    ("slot-scheduler", "administrative", ("scheduling",), ("schedule",)),
    ("records-steward", "privacy", ("records_release",), ("notes",)),
)

_DECOMMISSION_PROB = 0.15       # fixed narrative constant, not a config knob
_MEMORY_PROB = 0.5
_VERDICT_DRAIN_PROB = 0.3
_UNSCOPED_READ_PROB = 0.3

SIM_OPERATOR = "sim"


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int
    n_agents: int
    duration: int                  # simulated seconds
    duplication_prob: float = 0.0
    orphan_prob: float = 0.0
    drift_prob: float = 0.0
    incident_prob: float = 0.0
    tool_call_rate: float = 2.0    # calls per agent per simulated hour
    governed: bool = True

    def validate(self) -> None:
        if self.n_agents < 1:
            raise InvalidConfig("n_agents must be >= 1")
        for name in ("duplication_prob", "orphan_prob", "drift_prob", "incident_prob"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise InvalidConfig(f"{name} must be in [0, 1], got {value}")
        if self.tool_call_rate < 0:
            raise InvalidConfig("tool_call_rate must be >= 0")
        if self.duration <= self.onboarding_end() + 1:
            raise InvalidConfig(
                f"duration {self.duration}s too short for {self.n_agents} agents "
                f"(needs > {self.onboarding_end() + 1}s)")

    def onboarding_end(self) -> int:
        return self.n_agents * 10

    @classmethod
    def from_json(cls, text: str) -> "ScenarioConfig":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InvalidConfig(f"scenario config is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise InvalidConfig("scenario config must be a JSON object")
        known = {"seed", "n_agents", "duration", "duplication_prob", "orphan_prob",
                 "drift_prob", "incident_prob", "tool_call_rate", "governed"}
        unknown = set(raw) - known
        if unknown:
            raise InvalidConfig(f"unknown scenario fields: {sorted(unknown)}")
        missing = {"seed", "n_agents", "duration"} - set(raw)
        if missing:
            raise InvalidConfig(f"missing scenario fields: {sorted(missing)}")
        config = cls(**raw)
        config.validate()
        return config

    @classmethod
    def load(cls, path: str | Path) -> "ScenarioConfig":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


@dataclass(frozen=True)
class ScenarioResult:
    event_count: int
    snapshot: dict[str, Any]
    log_digest: bytes
    chain_ok: bool


class ScenarioDriver(Protocol):
    """Transport abstraction: the same narrative drives an in-process plane
    or a remote service; every method mirrors one governance operation."""

    def advance(self, seconds: int) -> int: ...
    def now(self) -> int: ...
    def load_policy(self, document: str) -> int: ...
    def register(self, persona: str, domain_class: str, scope: list[str],
                 tools: list[str], data_scopes: list[str],
                 override_duplicate: bool = False) -> str: ...
    def approve(self, agent_id: str, owner: str, liability: str, expiration: int,
                baseline: dict[str, Any]) -> None: ...
    def transition(self, agent_id: str, event: str) -> str: ...
    def issue_credential(self, agent_id: str, scope: list[str], ttl: int) -> str: ...
    def mediate(self, agent_id: str, credential_id: str, tool: str,
                resources: list[list[Any]], workflow_id: str | None,
                intent: str) -> dict[str, Any]: ...
    def write_memory(self, agent_id: str, shard_key: str, category: str, phi: bool,
                     payload_hex: str, ttl: int, workflow_id: str | None) -> str | None: ...
    def read_memory(self, agent_id: str, shard_key: str,
                    workflow_id: str | None) -> int: ...
    def record_ungoverned_call(self, agent_id: str, tool: str,
                               resources: list[list[Any]], workflow_id: str | None,
                               intent: str) -> str: ...
    def record_ungoverned_read(self, agent_id: str, shard_key: str,
                               categories: list[str], phi_returned: bool, count: int,
                               workflow_id: str | None) -> None: ...
    def mark_owner_departed(self, agent_id: str) -> None: ...
    def detect_drift(self, agent_id: str, observed: dict[str, Any]) -> bool: ...
    def report_incident(self, agent_id: str, category: str, severity: int,
                        workflow_id: str | None) -> None: ...
    def open_conflict(self, agent_a: str, agent_b: str, contested: str,
                      claims: dict[str, dict[str, str]]) -> str: ...
    def resolve_conflict(self, case_id: str) -> str: ...
    def check_triggers(self, agent_id: str) -> list[str]: ...
    def fire_kill_switch(self, agent_id: str, trigger_id: str, reason: str) -> None: ...
    def submit_verdict(self, target_id: str, verdict: str, note: str) -> None: ...
    def decommission(self, agent_id: str, reason: str) -> None: ...
    def sweep_expired(self) -> list[str]: ...
    def expire_memories(self) -> int: ...
    def snapshot_kpis(self, start: int, end: int) -> dict[str, Any]: ...
    def event_count(self) -> int: ...
    def terminal_digest(self) -> bytes: ...
    def verify_chain(self) -> bool: ...


def build_sim_plane(config: ScenarioConfig,
                    audit_path: str | Path | None = None) -> ControlPlane:
    """Fresh in-process plane on a logical clock with seeded identifiers.

    No policy is loaded here: the scenario loads it through the driver so
    in-process and wire transports produce identical event sequences.
    """
    return ControlPlane(
        catalog=CapabilityCatalog.parse(SIM_CATALOG_TEXT),
        retention=RetentionClasses.parse(SIM_RETENTION_TEXT),
        clock=LogicalClock(0),
        id_seed=config.seed,
        audit_path=audit_path,
        triggers=SIM_TRIGGERS,
    )


class LocalDriver:
    """Drives a ControlPlane directly; the reference transport."""

    def __init__(self, plane: ControlPlane):
        self.plane = plane

    def advance(self, seconds: int) -> int:
        return self.plane.clock.advance(seconds)

    def now(self) -> int:
        return self.plane.clock.now()

    def load_policy(self, document):
        return self.plane.policy.load_policy(document, SIM_OPERATOR).version

    def register(self, persona, domain_class, scope, tools, data_scopes,
                 override_duplicate=False):
        from .registry import AgentDraft, DomainClass
        record = self.plane.registry.register_agent(AgentDraft(
            persona=persona,
            domain_class=DomainClass(domain_class),
            scope_of_practice=frozenset(scope),
            allowed_tools=frozenset(tools),
            data_scopes=frozenset(data_scopes),
        ), operator=SIM_OPERATOR, override_duplicate=override_duplicate)
        return record.agent_id

    def approve(self, agent_id, owner, liability, expiration, baseline):
        from .registry import ApprovedBaseline
        self.plane.registry.approve_agent(
            agent_id, owner, liability, expiration,
            ApprovedBaseline(
                policy_version=baseline["policy_version"],
                model_id=baseline["model_id"],
                prompt_hash=bytes.fromhex(baseline["prompt_hash"]),
                config_hash=bytes.fromhex(baseline["config_hash"]),
                approved_at=baseline["approved_at"],
            ), operator=SIM_OPERATOR)

    def transition(self, agent_id, event):
        return self.plane.lifecycle.transition(agent_id, event, SIM_OPERATOR).value

    def issue_credential(self, agent_id, scope, ttl):
        return self.plane.registry.issue_credential(
            agent_id, scope, ttl, SIM_OPERATOR).credential_id

    def mediate(self, agent_id, credential_id, tool, resources, workflow_id, intent):
        outcome = self.plane.mediator.mediate(
            agent_id, credential_id, tool,
            resources=[(c, bool(p)) for c, p in resources],
            workflow_id=workflow_id, intent=intent, channel=SIM_OPERATOR)
        return outcome.payload()

    def write_memory(self, agent_id, shard_key, category, phi, payload_hex, ttl,
                     workflow_id):
        return self.plane.write_memory(agent_id, shard_key, category, phi,
                                       bytes.fromhex(payload_hex), ttl,
                                       workflow_id=workflow_id)

    def read_memory(self, agent_id, shard_key, workflow_id):
        return len(self.plane.read_memory(agent_id, shard_key,
                                          workflow_id=workflow_id))

    def record_ungoverned_call(self, agent_id, tool, resources, workflow_id, intent):
        return self.plane.record_ungoverned_call(
            agent_id, tool, resources=[(c, bool(p)) for c, p in resources],
            workflow_id=workflow_id, intent=intent, channel=SIM_OPERATOR)

    def record_ungoverned_read(self, agent_id, shard_key, categories, phi_returned,
                               count, workflow_id):
        self.plane.record_ungoverned_read(agent_id, shard_key, categories,
                                          phi_returned, count, workflow_id=workflow_id)

    def mark_owner_departed(self, agent_id):
        self.plane.registry.mark_owner_departed(agent_id, SIM_OPERATOR)

    def detect_drift(self, agent_id, observed):
        converted = dict(observed)
        for key in ("prompt_hash", "config_hash"):
            if isinstance(converted.get(key), str):
                converted[key] = bytes.fromhex(converted[key])
        return self.plane.lifecycle.detect_drift(agent_id, converted,
                                                 SIM_OPERATOR) is not None

    def report_incident(self, agent_id, category, severity, workflow_id):
        self.plane.report_incident(agent_id, category, severity, SIM_OPERATOR,
                                   workflow_id=workflow_id)

    def open_conflict(self, agent_a, agent_b, contested, claims):
        from .mediation import Claim
        from .registry import DomainClass
        case = self.plane.mediator.open_conflict(
            agent_a, agent_b, contested,
            {aid: Claim(DomainClass(c["domain_class"]), c["objective"])
             for aid, c in claims.items()},
            SIM_OPERATOR)
        return case.case_id

    def resolve_conflict(self, case_id):
        return self.plane.mediator.resolve_conflict(case_id, SIM_OPERATOR).status

    def check_triggers(self, agent_id):
        return [t.trigger_id for t in self.plane.check_triggers(agent_id)]

    def fire_kill_switch(self, agent_id, trigger_id, reason):
        self.plane.fire_kill_switch(agent_id, trigger_id, reason, SIM_OPERATOR)

    def submit_verdict(self, target_id, verdict, note):
        self.plane.mediator.submit_human_verdict(target_id, SIM_OPERATOR, verdict, note)

    def decommission(self, agent_id, reason):
        self.plane.decommission(agent_id, reason, SIM_OPERATOR)

    def sweep_expired(self):
        return self.plane.lifecycle.sweep_expired()

    def expire_memories(self):
        return self.plane.memory.expire_memories()

    def snapshot_kpis(self, start, end):
        return self.plane.snapshot_kpis(start, end, SIM_OPERATOR).payload()

    def event_count(self):
        return len(self.plane.audit)

    def terminal_digest(self):
        return self.plane.audit.last_hash

    def verify_chain(self):
        return self.plane.audit.verify_chain().ok


def _rand_hash_hex(rng: SplitMix64) -> str:
    return "".join(f"{rng.next_u64():016x}" for _ in range(4))


@dataclass
class _SimAgent:
    agent_id: str
    persona: str
    domain_class: str
    capabilities: tuple[str, ...]
    tools: tuple[str, ...]
    data_scopes: tuple[str, ...]
    expiration: int
    credential_id: str = ""
    baseline: dict[str, Any] | None = None
    contained: bool = False        # sim-side mirror: suspended/decommissioned


def run_scenario(config: ScenarioConfig, driver: ScenarioDriver | None = None,
                 ) -> ScenarioResult:
    config.validate()
    if driver is None:
        driver = LocalDriver(build_sim_plane(config))
    rng = SplitMix64(config.seed + 1)   # id stream uses the seed itself
    catalog = CapabilityCatalog.parse(SIM_CATALOG_TEXT)
    agents: list[_SimAgent] = []
    pending: list[str] = []

    driver.load_policy(SIM_POLICY_TEXT)

    # -- onboarding wave ------------------------------------------------
    for index in range(config.n_agents):
        stem, domain, caps, scopes = _ARCHETYPES[index % len(_ARCHETYPES)]
        duplicate = index > 0 and rng.chance(config.duplication_prob)
        if duplicate:
            source = agents[rng.below(len(agents))]
            persona, domain = source.persona, source.domain_class
            caps = source.capabilities
            scopes = source.data_scopes
        else:
            persona = f"{stem}-{index:02d}"
        tools = tuple(sorted(catalog.tools_for(caps)))
        driver.advance(10 if index else 0)
        agent_id = driver.register(persona, domain, list(caps), list(tools),
                                   list(scopes), override_duplicate=duplicate)
        now = driver.now()
        lifespan = int(config.duration * (0.4 + 0.8 * rng.uniform()))
        expiration = now + max(lifespan, 3600)
        baseline = {
            "policy_version": 1,
            "model_id": f"model-{stem}-v{1 + rng.below(3)}",
            "prompt_hash": _rand_hash_hex(rng),
            "config_hash": _rand_hash_hex(rng),
            "approved_at": now,
        }
        driver.approve(agent_id, f"owner.{index:02d}", f"unit.{domain}", expiration,
                       baseline)
        driver.transition(agent_id, "provision")
        driver.transition(agent_id, "activate")
        credential_id = driver.issue_credential(
            agent_id, list(tools) + list(scopes), expiration - now)
        agents.append(_SimAgent(agent_id, persona, domain, caps, tools, scopes,
                                expiration, credential_id, baseline))

    # -- timeline ---------------------------------------------------------
    window_start = config.onboarding_end() + 1
    span = config.duration - window_start

    def draw_time() -> int:
        return window_start + int(rng.uniform() * span)

    actions: list[tuple[int, int, str, int]] = []
    sequence = 0

    calls_per_agent = round(config.tool_call_rate * config.duration / 3600.0)
    for index in range(config.n_agents):
        for _ in range(calls_per_agent):
            actions.append((draw_time(), sequence, "call", index))
            sequence += 1
    for index in range(config.n_agents):
        if rng.chance(config.orphan_prob):
            actions.append((draw_time(), sequence, "orphan", index))
            sequence += 1
        if rng.chance(config.drift_prob):
            actions.append((draw_time(), sequence, "drift", index))
            sequence += 1
        if rng.chance(config.incident_prob):
            actions.append((draw_time(), sequence, "incident", index))
            sequence += 1
        if rng.chance(_DECOMMISSION_PROB):
            actions.append((draw_time(), sequence, "decommission", index))
            sequence += 1
    if config.governed and config.n_agents >= 2:
        for _ in range(config.n_agents // 5 + 1):
            actions.append((draw_time(), sequence, "conflict", rng.below(config.n_agents)))
            sequence += 1
    actions.sort(key=lambda item: (item[0], item[1]))

    # -- execution ----------------------------------------------------------
    workflow_counter = 0
    for when, _seq, kind, index in actions:
        agent = agents[index]
        if when > driver.now():
            driver.advance(when - driver.now())
        if kind == "call":
            workflow_counter += 1
            workflow_id = f"wfl-{config.seed & 0xffff:04x}-{workflow_counter:05d}"
            tool = agent.tools[rng.below(len(agent.tools))]
            resources = [[category, category in PHI_CATEGORIES]
                         for category in agent.data_scopes]
            intent = f"routine {tool} pass {workflow_counter}"
            if config.governed:
                _governed_call(driver, rng, agent, tool, resources, workflow_id,
                               intent, pending)
            else:
                driver.record_ungoverned_call(agent.agent_id, tool, resources,
                                              workflow_id, intent)
                if rng.chance(_MEMORY_PROB):
                    _ungoverned_read(driver, rng, agent, workflow_id)
        elif kind == "orphan":
            if not agent.contained:
                driver.mark_owner_departed(agent.agent_id)
        elif kind == "drift":
            if not agent.contained:
                observed = dict(agent.baseline)
                observed["prompt_hash"] = _rand_hash_hex(rng)
                if rng.chance(0.5):
                    observed["model_id"] = agent.baseline["model_id"] + "-hotfix"
                observed.pop("approved_at", None)
                driver.detect_drift(agent.agent_id, observed)
        elif kind == "incident":
            if not agent.contained:
                category = ("tool_misuse", "phi_exposure", "unauthorized_action")[
                    rng.below(3)]
                driver.report_incident(agent.agent_id, category, 1 + rng.below(3), None)
        elif kind == "decommission":
            if not agent.contained:
                driver.decommission(agent.agent_id, "narrative retirement")
                agent.contained = True
        elif kind == "conflict":
            other = agents[(index + 1 + rng.below(config.n_agents - 1))
                           % config.n_agents]
            case_id = driver.open_conflict(
                agent.agent_id, other.agent_id, "shared-resource",
                {agent.agent_id: {"domain_class": agent.domain_class,
                                  "objective": f"{agent.persona} priority"},
                 other.agent_id: {"domain_class": other.domain_class,
                                  "objective": f"{other.persona} priority"}})
            status = driver.resolve_conflict(case_id)
            if status == "escalated":
                driver.submit_verdict(case_id,
                                      "allow" if rng.chance(0.5) else "deny",
                                      "tie broken by operator")

    # -- close out ------------------------------------------------------------
    if config.duration > driver.now():
        driver.advance(config.duration - driver.now())
    driver.sweep_expired()
    driver.expire_memories()
    snapshot = driver.snapshot_kpis(0, config.duration)
    return ScenarioResult(
        event_count=driver.event_count(),
        snapshot=snapshot,
        log_digest=driver.terminal_digest(),
        chain_ok=driver.verify_chain(),
    )


def _governed_call(driver, rng, agent, tool, resources, workflow_id, intent,
                   pending) -> None:
    if pending and rng.chance(_VERDICT_DRAIN_PROB):
        target = pending.pop(0)
        verdict = "allow" if rng.chance(0.5) else "deny"
        try:
            driver.submit_verdict(target, verdict, "routine oversight review")
        except GovernanceError:
            pass    # cancelled by a kill switch or decommission in the meantime
    outcome = driver.mediate(agent.agent_id, agent.credential_id, tool, resources,
                             workflow_id, intent)
    disposition = outcome["disposition"]
    if disposition == "pending_human":
        pending.append(outcome["request_id"])
    if disposition == "executed" and rng.chance(_MEMORY_PROB):
        shard = f"patient-{rng.below(40):03d}"
        category = agent.data_scopes[rng.below(len(agent.data_scopes))]
        payload = f"obs:{workflow_id}:{rng.next_u64():016x}".encode().hex()
        try:
            driver.write_memory(agent.agent_id, shard, category,
                                category in PHI_CATEGORIES, payload,
                                3600 * (1 + rng.below(24)), workflow_id)
            driver.read_memory(agent.agent_id, shard, workflow_id)
        except GovernanceError:
            pass    # agent contained between the decision and the write
    if disposition == "denied":
        fired = driver.check_triggers(agent.agent_id)
        if fired and not agent.contained:
            driver.fire_kill_switch(agent.agent_id, fired[0],
                                    "telemetry threshold met")
            agent.contained = True


def _ungoverned_read(driver, rng, agent, workflow_id) -> None:
    categories = list(agent.data_scopes)
    if rng.chance(_UNSCOPED_READ_PROB):
        foreign = ("medications", "vitals", "notes", "claims", "schedule")
        extra = foreign[rng.below(len(foreign))]
        if extra not in categories:
            categories.append(extra)
    phi_returned = any(c in PHI_CATEGORIES for c in categories)
    driver.record_ungoverned_read(agent.agent_id, f"patient-{rng.below(40):03d}",
                                  categories, phi_returned, len(categories),
                                  workflow_id)


def run_scenario_local(config: ScenarioConfig,
                       audit_path: str | Path | None = None,
                       ) -> tuple[ScenarioResult, ControlPlane]:
    """In-process run that also hands back the plane for state inspection."""
    plane = build_sim_plane(config, audit_path=audit_path)
    result = run_scenario(config, LocalDriver(plane))
    return result, plane


# -- event-log reconstruction ------------------------------------------------


def replay(events) -> FleetState:
    """Rebuild registry/credential/memory state from events alone.

    Independent of the live modules: only event payloads are consulted.
    A truncated event list yields the state as of the truncation point.
    """
    agents: dict[str, dict[str, Any]] = {}
    credentials: dict[str, dict[str, Any]] = {}
    memory: dict[str, dict[str, Any]] = {}
    for event in events:
        payload = event.payload
        kind = event.kind
        if kind == "registration":
            agents[payload["agent_id"]] = {
                "persona": payload["persona"],
                "domain_class": payload["domain_class"],
                "scope_of_practice": sorted(payload["scope_of_practice"]),
                "allowed_tools": sorted(payload["allowed_tools"]),
                "data_scopes": sorted(payload["data_scopes"]),
                "state": "Requested",
                "accountable_owner": None,
                "owner_active": True,
                "liability_owner": None,
                "expiration": None,
                "registered_at": payload["registered_at"],
                "baseline": None,
            }
        elif kind == "approval":
            agent = agents[payload["agent_id"]]
            if payload.get("action") == "approved":
                agent["accountable_owner"] = payload["accountable_owner"]
                agent["owner_active"] = True
                agent["liability_owner"] = payload["liability_owner"]
                agent["expiration"] = payload["expiration"]
                agent["state"] = "Approved"
            agent["baseline"] = dict(payload["baseline"])
        elif kind == "owner_departed":
            agents[payload["agent_id"]]["owner_active"] = False
        elif kind == "transition":
            agents[payload["agent_id"]]["state"] = payload["to"]
        elif kind == "credential_issued":
            credentials[payload["credential_id"]] = {
                "agent_id": payload["agent_id"],
                "issued_at": payload["issued_at"],
                "expires_at": payload["expires_at"],
                "status": "active",
                "revoked_at": None,
                "scope_claims": sorted(payload["scope_claims"]),
            }
        elif kind == "credential_revoked":
            credential = credentials[payload["credential_id"]]
            credential["status"] = "revoked"
            credential["revoked_at"] = payload["revoked_at"]
        elif kind == "memory_write":
            memory[payload["entry_id"]] = {
                "agent_id": payload["agent_id"],
                "shard_key": payload["shard_key"],
                "data_category": payload["data_category"],
                "phi": payload["phi"],
                "payload_digest": payload["payload_digest"],
                "created_at": payload["created_at"],
                "ttl": payload["ttl"],
                "frozen": False,
                "purged": False,
            }
        elif kind == "memory_purge":
            for purged in payload["purged"]:
                memory[purged["entry_id"]]["purged"] = True
        elif kind == "memory_freeze":
            for entry_id in payload["entry_ids"]:
                memory[entry_id]["frozen"] = True
    return FleetState(agents=agents, credentials=credentials, memory=memory)
