"""Governance KPI engine and maturity assessor.

``compute_snapshot`` is a pure function over an audit-event window; the
seven indicators and their exact denominators:

  ownership_coverage        owned / non-decommissioned agents, at window end
                            (owned = a named accountable owner on the record)
  median_revocation_latency per agent hit by a retirement or scope-change
                            trigger in the window (kill_switch, termination,
                            transition into Suspended/Decommissioned): last
                            credential revocation at/after the first trigger
                            minus the trigger time, 0 with no credentials;
                            median across affected agents, absent if none
  decision_coverage         request ids with a decision record / request ids
                            seen on decision or tool_call events
  orphan_count              Active agents with no owner, a departed owner,
                            or expiration at/before window end
  phi_minimization_rate     PHI-touching workflows whose memory reads all
                            stayed inside the reading agent's data scopes /
                            PHI-touching workflows (workflow = events
                            sharing a workflow_id)
  control_drift_rate        non-decommissioned agents with a drift finding
                            in the window not followed by a re-approval /
                            non-decommissioned agents
  incident_rate             incident events / (non-decommissioned agents x
                            window days); counted incident categories are
                            tool_misuse, phi_exposure, unauthorized_action

Empty denominators: coverage-style fractions default to 1.0 (nothing to
violate), rates to 0.0.

Maturity levels (thresholds are configuration defaults):

  1  always
  2  managed_identity + decision_logging features, ownership_coverage = 1.0,
     decision_coverage >= 0.95
  3  level 2 + policy_enforcement + shared_context_controls features,
     phi_minimization_rate >= 0.9
  4  level 3 + conflict_mediation feature, orphan_count = 0,
     control_drift_rate <= 0.05
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass, field
from typing import Any, Sequence

from .errors import WindowOutsideLog

INCIDENT_CATEGORIES = ("tool_misuse", "phi_exposure", "unauthorized_action")


@dataclass(frozen=True)
class KpiSnapshot:
    window_start: int
    window_end: int
    ownership_coverage: float
    median_revocation_latency: float | None
    decision_coverage: float
    orphan_count: int
    phi_minimization_rate: float
    control_drift_rate: float
    incident_rate: float
    computed_at: int

    def validate(self) -> None:
        for name in ("ownership_coverage", "decision_coverage",
                     "phi_minimization_rate", "control_drift_rate"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} out of [0, 1]: {value}")
        if self.orphan_count < 0 or self.incident_rate < 0:
            raise ValueError("counts and rates must be >= 0")
        if self.window_start >= self.window_end:
            raise ValueError("window start must precede end")

    def payload(self) -> dict[str, Any]:
        return {
            "window_start": self.window_start,
            "window_end": self.window_end,
            "ownership_coverage": self.ownership_coverage,
            "median_revocation_latency": self.median_revocation_latency,
            "decision_coverage": self.decision_coverage,
            "orphan_count": self.orphan_count,
            "phi_minimization_rate": self.phi_minimization_rate,
            "control_drift_rate": self.control_drift_rate,
            "incident_rate": self.incident_rate,
            "computed_at": self.computed_at,
        }

    def rows(self) -> list[tuple[str, str]]:
        """One KPI per row, for the flat table export."""
        def fmt(value):
            if value is None:
                return "-"
            if isinstance(value, float):
                return f"{value:.6f}"
            return str(value)
        return [
            ("ownership_coverage", fmt(self.ownership_coverage)),
            ("median_revocation_latency", fmt(self.median_revocation_latency)),
            ("decision_coverage", fmt(self.decision_coverage)),
            ("orphan_count", fmt(self.orphan_count)),
            ("phi_minimization_rate", fmt(self.phi_minimization_rate)),
            ("control_drift_rate", fmt(self.control_drift_rate)),
            ("incident_rate", fmt(self.incident_rate)),
        ]


@dataclass(frozen=True)
class FeatureFlags:
    managed_identity: bool = False
    decision_logging: bool = False
    policy_enforcement: bool = False
    shared_context_controls: bool = False
    conflict_mediation: bool = False

    NAMES = ("managed_identity", "decision_logging", "policy_enforcement",
             "shared_context_controls", "conflict_mediation")

    @classmethod
    def all_enabled(cls) -> "FeatureFlags":
        return cls(True, True, True, True, True)

    @classmethod
    def from_names(cls, names: Sequence[str]) -> "FeatureFlags":
        unknown = set(names) - set(cls.NAMES)
        if unknown:
            raise ValueError(f"unknown feature flags: {sorted(unknown)}")
        return cls(**{name: name in names for name in cls.NAMES})


@dataclass(frozen=True)
class MaturityThresholds:
    ownership_coverage: float = 1.0
    decision_coverage: float = 0.95
    phi_minimization_rate: float = 0.9
    control_drift_rate: float = 0.05


LEVEL_NAMES = {1: "Ad-hoc", 2: "Managed", 3: "Integrated", 4: "Optimized"}


@dataclass(frozen=True)
class MaturityAssessment:
    level: int
    evidence: tuple[dict[str, Any], ...]
    assessed_at: int

    @property
    def level_name(self) -> str:
        return LEVEL_NAMES[self.level]

    def payload(self) -> dict[str, Any]:
        return {
            "level": self.level,
            "level_name": self.level_name,
            "evidence": [dict(item) for item in self.evidence],
            "assessed_at": self.assessed_at,
        }


@dataclass
class _AgentView:
    state: str = "Requested"
    owner: str | None = None
    owner_active: bool = True
    expiration: int | None = None
    data_scopes: frozenset[str] = field(default_factory=frozenset)
    last_drift_seq: int = -1
    last_approval_seq: int = -1


def compute_snapshot(events: Sequence, start: int, end: int,
                     computed_at: int | None = None) -> KpiSnapshot:
    """Deterministic single pass over events with timestamp <= end."""
    if start >= end:
        raise WindowOutsideLog(f"window start {start} must precede end {end}")
    if not events:
        raise WindowOutsideLog("audit log is empty")
    if end < events[0].timestamp or start > events[-1].timestamp:
        raise WindowOutsideLog(
            f"window [{start}, {end}] does not intersect log "
            f"[{events[0].timestamp}, {events[-1].timestamp}]")

    agents: dict[str, _AgentView] = {}
    triggers: dict[str, int] = {}
    last_revocation: dict[str, int] = {}
    covered_requests: set[str] = set()
    seen_requests: set[str] = set()
    workflows: dict[str, dict[str, bool]] = {}
    incidents = 0

    def workflow(workflow_id: str) -> dict[str, bool]:
        return workflows.setdefault(workflow_id, {"phi": False, "violated": False})

    for event in events:
        if event.timestamp > end:
            continue
        payload = event.payload
        kind = event.kind
        in_window = event.timestamp >= start
        agent_id = payload.get("agent_id")

        if kind == "registration":
            agents[agent_id] = _AgentView(
                data_scopes=frozenset(payload["data_scopes"]))
        elif kind == "approval":
            view = agents[agent_id]
            view.last_approval_seq = event.seq
            if payload.get("action") == "approved":
                view.owner = payload["accountable_owner"]
                view.owner_active = True
                view.expiration = payload["expiration"]
                view.state = "Approved"
        elif kind == "owner_departed":
            agents[agent_id].owner_active = False
        elif kind == "transition":
            agents[agent_id].state = payload["to"]

        if in_window:
            if kind in ("kill_switch", "termination") or (
                    kind == "transition"
                    and payload["to"] in ("Suspended", "Decommissioned")):
                triggers.setdefault(agent_id, event.timestamp)
            elif kind == "credential_revoked":
                last_revocation[agent_id] = event.timestamp
            elif kind == "drift":
                agents[agent_id].last_drift_seq = event.seq
            elif kind == "incident":
                incidents += 1
            elif kind == "decision":
                request = payload["request"]
                covered_requests.add(request["request_id"])
                seen_requests.add(request["request_id"])
                if request.get("workflow_id") is not None \
                        and any(phi for _category, phi in request["resources"]):
                    workflow(request["workflow_id"])["phi"] = True
                elif request.get("workflow_id") is not None:
                    workflow(request["workflow_id"])
            elif kind == "tool_call":
                request = payload["request"]
                seen_requests.add(request["request_id"])
                if request.get("workflow_id") is not None \
                        and any(phi for _category, phi in request["resources"]):
                    workflow(request["workflow_id"])["phi"] = True
                elif request.get("workflow_id") is not None:
                    workflow(request["workflow_id"])
            elif kind == "memory_read":
                workflow_id = payload.get("workflow_id")
                if workflow_id is not None:
                    flow = workflow(workflow_id)
                    if payload["phi_returned"]:
                        flow["phi"] = True
                    returned = frozenset(payload["categories_returned"])
                    if not returned <= agents[agent_id].data_scopes:
                        flow["violated"] = True

    fleet = [view for view in agents.values() if view.state != "Decommissioned"]

    ownership = (sum(1 for v in fleet if v.owner is not None) / len(fleet)
                 if fleet else 1.0)

    latencies = []
    for agent_id, trigger_ts in triggers.items():
        revoked_at = last_revocation.get(agent_id)
        if revoked_at is not None and revoked_at >= trigger_ts:
            latencies.append(revoked_at - trigger_ts)
        else:
            latencies.append(0)
    median_latency = float(statistics.median(latencies)) if latencies else None

    coverage = (len(covered_requests & seen_requests) / len(seen_requests)
                if seen_requests else 1.0)

    orphans = 0
    for view in agents.values():
        if view.state != "Active":
            continue
        lapsed = view.expiration is not None and view.expiration <= end
        if view.owner is None or not view.owner_active or lapsed:
            orphans += 1

    phi_flows = [flow for flow in workflows.values() if flow["phi"]]
    phi_rate = (sum(1 for flow in phi_flows if not flow["violated"]) / len(phi_flows)
                if phi_flows else 1.0)

    drifted = sum(1 for view in fleet
                  if view.last_drift_seq > view.last_approval_seq)
    drift_rate = drifted / len(fleet) if fleet else 0.0

    days = (end - start) / 86400.0
    incident_rate = incidents / (len(fleet) * days) if fleet and days > 0 else 0.0

    snapshot = KpiSnapshot(
        window_start=start,
        window_end=end,
        ownership_coverage=ownership,
        median_revocation_latency=median_latency,
        decision_coverage=coverage,
        orphan_count=orphans,
        phi_minimization_rate=phi_rate,
        control_drift_rate=drift_rate,
        incident_rate=incident_rate,
        computed_at=end if computed_at is None else computed_at,
    )
    snapshot.validate()
    return snapshot


def assess_maturity(snapshot: KpiSnapshot, features: FeatureFlags,
                    thresholds: MaturityThresholds = MaturityThresholds(),
                    assessed_at: int | None = None) -> MaturityAssessment:
    """Highest level whose criteria (and all lower levels') pass."""
    evidence: list[dict[str, Any]] = []

    def criterion(level: int, name: str, passed: bool, measured: Any) -> bool:
        evidence.append({"level": level, "criterion": name,
                         "passed": bool(passed), "measured": measured})
        return bool(passed)

    # evaluate every criterion so the evidence is complete even when a
    # lower level already failed
    pass2 = all([
        criterion(2, "feature managed_identity", features.managed_identity,
                  features.managed_identity),
        criterion(2, "feature decision_logging", features.decision_logging,
                  features.decision_logging),
        criterion(2, f"ownership_coverage >= {thresholds.ownership_coverage}",
                  snapshot.ownership_coverage >= thresholds.ownership_coverage,
                  snapshot.ownership_coverage),
        criterion(2, f"decision_coverage >= {thresholds.decision_coverage}",
                  snapshot.decision_coverage >= thresholds.decision_coverage,
                  snapshot.decision_coverage),
    ])
    pass3 = all([
        criterion(3, "feature policy_enforcement", features.policy_enforcement,
                  features.policy_enforcement),
        criterion(3, "feature shared_context_controls",
                  features.shared_context_controls, features.shared_context_controls),
        criterion(3, f"phi_minimization_rate >= {thresholds.phi_minimization_rate}",
                  snapshot.phi_minimization_rate >= thresholds.phi_minimization_rate,
                  snapshot.phi_minimization_rate),
    ])
    pass4 = all([
        criterion(4, "feature conflict_mediation", features.conflict_mediation,
                  features.conflict_mediation),
        criterion(4, "orphan_count == 0", snapshot.orphan_count == 0,
                  snapshot.orphan_count),
        criterion(4, f"control_drift_rate <= {thresholds.control_drift_rate}",
                  snapshot.control_drift_rate <= thresholds.control_drift_rate,
                  snapshot.control_drift_rate),
    ])
    level = 1
    if pass2:
        level = 2
        if pass3:
            level = 3
            if pass4:
                level = 4
    return MaturityAssessment(
        level=level,
        evidence=tuple(evidence),
        assessed_at=snapshot.computed_at if assessed_at is None else assessed_at,
    )
