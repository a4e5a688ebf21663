"""Exception hierarchy for the control plane.

Every error carries a stable ``code`` string used by the wire API error
envelope and by the CLI exit diagnostics. Codes are snake_case and never
change once published.
"""

from __future__ import annotations


class GovernanceError(Exception):
    """Base class; ``code`` identifies the error category on the wire."""

    code = "governance_error"

    def __init__(self, message: str = "", *, detail: str | None = None):
        super().__init__(message or self.code)
        self.message = message or self.code
        self.detail = detail


# -- registry -----------------------------------------------------------

class UnknownAgent(GovernanceError):
    code = "unknown_agent"


class DuplicatePersonaInDomain(GovernanceError):
    code = "duplicate_persona_in_domain"


class LeastPrivilegeViolation(GovernanceError):
    code = "least_privilege_violation"


class MissingOwner(GovernanceError):
    code = "missing_owner"


class ExpirationInPast(GovernanceError):
    code = "expiration_in_past"


class AgentNotActive(GovernanceError):
    code = "agent_not_active"


class ScopeEscalation(GovernanceError):
    code = "scope_escalation"


class TtlBeyondExpiration(GovernanceError):
    code = "ttl_beyond_expiration"


# -- lifecycle ----------------------------------------------------------

class InvalidState(GovernanceError):
    code = "invalid_state"


class InvalidTransition(InvalidState):
    code = "invalid_transition"

    def __init__(self, state: str, event: str):
        super().__init__(f"no transition from state {state!r} on event {event!r}")
        self.state = state
        self.event = event


class NoBaseline(GovernanceError):
    code = "no_baseline"


# -- policy -------------------------------------------------------------

class ParseError(GovernanceError):
    code = "parse_error"

    def __init__(self, message: str, *, line: int | None = None, field: str | None = None):
        location = []
        if line is not None:
            location.append(f"line {line}")
        if field is not None:
            location.append(f"field {field!r}")
        prefix = ", ".join(location)
        super().__init__(f"{prefix}: {message}" if prefix else message)
        self.line = line
        self.field = field


class DuplicateRuleId(ParseError):
    code = "duplicate_rule_id"


class UnknownDomainClass(ParseError):
    code = "unknown_domain_class"


class UnknownPolicyVersion(GovernanceError):
    code = "unknown_policy_version"


# -- memory -------------------------------------------------------------

class ScopeViolation(GovernanceError):
    code = "scope_violation"


class TtlExceedsRetentionClass(GovernanceError):
    code = "ttl_exceeds_retention_class"


# -- mediation ----------------------------------------------------------

class UnknownTarget(GovernanceError):
    code = "unknown_target"


class AlreadyResolved(GovernanceError):
    code = "already_resolved"


# -- audit / metrics ----------------------------------------------------

class StorageFailure(GovernanceError):
    code = "storage_failure"


class RangeOutOfBounds(GovernanceError):
    code = "range_out_of_bounds"


class CorruptLog(GovernanceError):
    code = "corrupt_log"


class WindowOutsideLog(GovernanceError):
    code = "window_outside_log"


# -- configuration / service --------------------------------------------

class InvalidConfig(GovernanceError):
    code = "invalid_config"


class ConfigError(GovernanceError):
    code = "config_error"


class OperatorRequired(GovernanceError):
    code = "operator_required"


class UnknownOperator(GovernanceError):
    code = "unknown_operator"


def _subclasses(cls) -> list[type]:
    out = []
    for sub in cls.__subclasses__():
        out.append(sub)
        out.extend(_subclasses(sub))
    return out


def error_for_code(code: str, message: str, detail: str | None = None) -> GovernanceError:
    """Rebuild the typed error from a wire error envelope.

    Codes without a registered class (e.g. not_found, bad_request) come
    back as plain GovernanceError with the wire code preserved.
    """
    by_code = {sub.code: sub for sub in _subclasses(GovernanceError)}
    cls = by_code.get(code, GovernanceError)
    if cls is InvalidTransition:    # non-standard constructor
        error = GovernanceError(message, detail=detail)
    elif issubclass(cls, ParseError):
        error = cls(message)
    else:
        error = cls(message, detail=detail)
    error.code = code
    return error
