"""Governance control plane for autonomous agent fleets.

Layers: identity registry, policy-mediated tool calls, shard-scoped
bounded memory, runtime guardrails with kill switches, lifecycle
management with compliance-grade decommissioning — all evidenced in a
hash-chained audit log, measured by a seven-KPI engine with a maturity
assessor, and exercised end to end by a deterministic fleet simulator.
"""

from .audit import AuditEvent, AuditLog, verify_bundle, verify_log_file
from .clock import LogicalClock, WallClock, parse_duration
from .errors import GovernanceError
from .lifecycle import (
    KillReport,
    LifecycleEvent,
    LifecycleManager,
    LifecycleState,
    TerminationReport,
)
from .mediation import Claim, MediationOutcome, Mediator, ToolCallRequest
from .memory import MemoryEntry, MemoryStore, RetentionClasses
from .metrics import (
    FeatureFlags,
    KpiSnapshot,
    MaturityAssessment,
    MaturityThresholds,
    assess_maturity,
    compute_snapshot,
)
from .plane import ControlPlane, FleetState
from .policy import (
    DecisionRecord,
    KillSwitchTrigger,
    PolicyEngine,
    PolicyRule,
    PolicyVersion,
)
from .registry import (
    AgentDraft,
    AgentRecord,
    AgentRegistry,
    ApprovedBaseline,
    CapabilityCatalog,
    DomainClass,
    NhiCredential,
)
from .simulator import ScenarioConfig, ScenarioResult, replay, run_scenario

__version__ = "0.1.0"

__all__ = [
    "AuditEvent", "AuditLog", "verify_bundle", "verify_log_file",
    "LogicalClock", "WallClock", "parse_duration",
    "GovernanceError",
    "KillReport", "LifecycleEvent", "LifecycleManager", "LifecycleState",
    "TerminationReport",
    "Claim", "MediationOutcome", "Mediator", "ToolCallRequest",
    "MemoryEntry", "MemoryStore", "RetentionClasses",
    "FeatureFlags", "KpiSnapshot", "MaturityAssessment", "MaturityThresholds",
    "assess_maturity", "compute_snapshot",
    "ControlPlane", "FleetState",
    "DecisionRecord", "KillSwitchTrigger", "PolicyEngine", "PolicyRule",
    "PolicyVersion",
    "AgentDraft", "AgentRecord", "AgentRegistry", "ApprovedBaseline",
    "CapabilityCatalog", "DomainClass", "NhiCredential",
    "ScenarioConfig", "ScenarioResult", "replay", "run_scenario",
    "__version__",
]
