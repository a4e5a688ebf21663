"""Operator command line.

Works against a running service (``--server http://host:port``) or
directly on a local deployment (``--config service.json``, opening the
data directory in process). Machine-readable output via
``--format records`` (one JSON object per line); ``--format table``
prints aligned columns for humans.

Exit codes: 0 success, 1 governance error (category printed), 2 usage.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Any

from . import audit as audit_mod
from .clock import parse_duration
from .errors import GovernanceError
from .metrics import FeatureFlags
from .registry import AgentDraft, ApprovedBaseline, DomainClass
from .service import ServiceConfig, agent_view, build_plane, jsonable


def _print_records(rows: list[dict[str, Any]]) -> None:
    for row in rows:
        print(json.dumps(jsonable(row), sort_keys=True))


def _print_table(rows: list[dict[str, Any]]) -> None:
    if not rows:
        print("(empty)")
        return
    columns = list(rows[0].keys())
    rendered = [[_cell(row.get(col)) for col in columns] for row in rows]
    widths = [max(len(col), *(len(r[i]) for r in rendered))
              for i, col in enumerate(columns)]
    print("  ".join(col.ljust(widths[i]) for i, col in enumerate(columns)))
    for r in rendered:
        print("  ".join(r[i].ljust(widths[i]) for i in range(len(columns))))


def _cell(value: Any) -> str:
    if value is None:
        return "-"
    if isinstance(value, bytes):
        return value.hex()
    if isinstance(value, float):
        return f"{value:.6f}"
    if isinstance(value, (list, tuple)):
        return ",".join(str(v) for v in value)
    return str(value)


def _emit(rows: list[dict[str, Any]], fmt: str) -> None:
    if fmt == "records":
        _print_records(rows)
    else:
        _print_table(rows)


class _Backend:
    """Uniform surface over --server (wire) and --config (in-process)."""

    def __init__(self, args):
        self.operator = args.operator
        self.client = None
        self.plane = None
        if args.server:
            from .client import ServiceClient
            self.client = ServiceClient(args.server, args.operator)
        elif args.config:
            config = ServiceConfig.load(args.config)
            self.plane = build_plane(config)
        else:
            raise GovernanceError("pass --server URL or --config service.json")

    def close(self):
        if self.plane is not None:
            self.plane.close()

    # every accessor returns plain JSON-able dicts so output code is shared

    def register(self, draft: dict, override: bool):
        if self.client:
            return self.client.register(draft["persona"], draft["domain_class"],
                                        draft["scope"], draft["tools"],
                                        draft["data_scopes"], override)
        record = self.plane.registry.register_agent(AgentDraft(
            persona=draft["persona"],
            domain_class=DomainClass(draft["domain_class"]),
            scope_of_practice=frozenset(draft["scope"]),
            allowed_tools=frozenset(draft["tools"]),
            data_scopes=frozenset(draft["data_scopes"]),
        ), self.operator, override_duplicate=override)
        return agent_view(record)

    def approve(self, agent_id: str, owner: str, liability: str | None,
                expiration: int, baseline: dict):
        if self.client:
            return self.client.approve(agent_id, owner, liability, expiration, baseline)
        record = self.plane.registry.approve_agent(
            agent_id, owner, liability, expiration,
            ApprovedBaseline(
                policy_version=baseline["policy_version"],
                model_id=baseline["model_id"],
                prompt_hash=bytes.fromhex(baseline["prompt_hash"]),
                config_hash=bytes.fromhex(baseline["config_hash"]),
                approved_at=baseline["approved_at"],
            ), self.operator)
        return agent_view(record)

    def transition(self, agent_id: str, event: str):
        if self.client:
            return {"state": self.client.transition(agent_id, event)}
        state = self.plane.lifecycle.transition(agent_id, event, self.operator)
        return {"state": state.value}

    def kill(self, agent_id: str, trigger_id: str, reason: str):
        if self.client:
            return self.client.kill(agent_id, trigger_id, reason)
        report = self.plane.fire_kill_switch(agent_id, trigger_id, reason, self.operator)
        return jsonable(report.payload())

    def decommission(self, agent_id: str, reason: str):
        if self.client:
            return self.client.decommission(agent_id, reason)
        report = self.plane.decommission(agent_id, reason, self.operator)
        return jsonable(report.payload())

    def agents(self):
        if self.client:
            return self.client.agents()
        return [agent_view(r) for r in
                sorted(self.plane.registry.agents(), key=lambda r: r.agent_id)]

    def now(self) -> int:
        if self.client:
            return self.client.healthz()["now"]
        return self.plane.clock.now()

    def first_event_ts(self) -> int | None:
        if self.client:
            events = self.client.audit_events(limit=1)["events"]
            return events[0]["timestamp"] if events else None
        events = self.plane.audit.events()
        return events[0].timestamp if events else None

    def kpi(self, start: int, end: int):
        if self.client:
            return self.client.kpi(start, end)
        return self.plane.kpi(start, end).payload()

    def maturity(self, start: int, end: int, features: list[str] | None):
        if self.client:
            return self.client.maturity(start, end, features)
        flags = (FeatureFlags.all_enabled() if features is None
                 else FeatureFlags.from_names(features))
        return self.plane.assess(start, end, flags).payload()

    def pending(self):
        if self.client:
            return self.client.pending()
        return self.plane.mediator.pending()

    def verdict(self, target_id: str, verdict: str, note: str):
        if self.client:
            return self.client.verdict(target_id, verdict, note)
        return self.plane.mediator.submit_human_verdict(target_id, self.operator,
                                                        verdict, note)

    def verify_audit(self):
        if self.client:
            return self.client.verify_audit()
        result = self.plane.audit.verify_chain()
        return {"ok": result.ok, "first_bad_seq": result.first_bad_seq,
                "problem": result.problem,
                "terminal_hash": self.plane.audit.last_hash.hex()}

    def export_bundle(self, **filters) -> bytes:
        if self.client:
            return self.client.export_bundle(**filters)
        kinds = filters.get("kinds")
        return self.plane.audit.export_bundle(
            agent_id=filters.get("agent_id"),
            start=filters.get("start"), end=filters.get("end"),
            kinds=kinds.split(",") if kinds else None)


def _parse_window(backend: _Backend, text: str) -> tuple[int, int]:
    if text == "full":
        first = backend.first_event_ts()
        if first is None:
            raise GovernanceError("audit log is empty; no full window")
        end = backend.now()
        if end <= first:    # logical clock may not have moved yet
            end = first + 1
        return first, end
    start_text, sep, end_text = text.partition(":")
    if not sep:
        raise GovernanceError("window must be 'full' or 'START:END'")
    return int(start_text), int(end_text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fleetgov",
        description="Agent-fleet governance control plane",
    )
    parser.add_argument("--server", help="base URL of a running service")
    parser.add_argument("--config", help="service config JSON (in-process mode)")
    parser.add_argument("--operator",
                        default=os.environ.get("FLEETGOV_OPERATOR", "cli"),
                        help="operator identity recorded in the audit log")
    parser.add_argument("--format", choices=("table", "records"), default=None)
    # accepted before or after the subcommand
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("table", "records"), default=None)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_parser(name, **kwargs):
        return sub.add_parser(name, parents=[common], **kwargs)

    p = add_parser("register", help="register a new agent (state Requested)")
    p.add_argument("--persona", required=True)
    p.add_argument("--domain", required=True,
                   choices=[d.value for d in DomainClass])
    p.add_argument("--scope", required=True, help="comma-separated capability tags")
    p.add_argument("--tools", default="", help="comma-separated tool ids")
    p.add_argument("--data-scopes", default="", help="comma-separated data categories")
    p.add_argument("--override-duplicate", action="store_true")

    p = add_parser("approve", help="approve a Requested agent")
    p.add_argument("agent_id")
    p.add_argument("--owner", required=True)
    p.add_argument("--liability", default=None)
    p.add_argument("--expires-in", required=True, help="duration, e.g. 90d")
    p.add_argument("--model-id", default="model-unspecified")
    p.add_argument("--prompt-hash", default="00" * 32, help="64 hex chars")
    p.add_argument("--config-hash", default="00" * 32, help="64 hex chars")
    p.add_argument("--policy-version", type=int, default=1)

    p = add_parser("transition", help="drive a lifecycle event")
    p.add_argument("agent_id")
    p.add_argument("event", choices=("provision", "activate", "suspend",
                                     "reactivate"))

    p = add_parser("agents", help="list registry rows")

    p = add_parser("kill", help="fire the kill switch on an Active agent")
    p.add_argument("agent_id")
    p.add_argument("--trigger", default="manual")
    p.add_argument("--reason", required=True)

    p = add_parser("decommission", help="terminal teardown with evidence")
    p.add_argument("agent_id")
    p.add_argument("--reason", required=True)

    p = add_parser("kpi", help="compute the seven governance KPIs")
    p.add_argument("--window", default="full", help="'full' or 'START:END' seconds")

    p = add_parser("assess", help="maturity level from KPIs + enabled features")
    p.add_argument("--window", default="full")
    p.add_argument("--features", default=None,
                   help=f"comma-separated subset of {','.join(FeatureFlags.NAMES)} "
                        "(default: all)")

    p = add_parser("verify-audit", help="verify the hash chain (log or bundle)")
    p.add_argument("--bundle", help="verify an exported evidence bundle file")
    p.add_argument("--log", help="verify an audit log file directly")

    p = add_parser("export-bundle", help="export filtered evidence")
    p.add_argument("--out", required=True)
    p.add_argument("--agent")
    p.add_argument("--start", type=int)
    p.add_argument("--end", type=int)
    p.add_argument("--kinds", help="comma-separated event kinds")

    p = add_parser("simulate", help="run a deterministic fleet scenario")
    p.add_argument("--scenario", "--config", dest="scenario", required=True,
                   help="scenario config JSON")
    p.add_argument("--out", help="write snapshot table + digest to this file")
    p.add_argument("--audit-out", help="also persist the scenario audit log here")

    p = add_parser("pending", help="human oversight queue")
    p.add_argument("action", nargs="?", default="list",
                   choices=("list", "approve", "deny"))
    p.add_argument("target", nargs="?", help="request or case id")
    p.add_argument("--note", default="")

    p = add_parser("serve", help="run the HTTP service")
    p.add_argument("--config-file", dest="serve_config",
                   help="service config JSON (defaults to --config)")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _run(args)
    except GovernanceError as exc:
        print(f"error[{exc.code}]: {exc.message}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error[invalid_argument]: {exc}", file=sys.stderr)
        return 1


def _csv(text: str) -> list[str]:
    return [item for item in text.split(",") if item]


def _run(args) -> int:
    # commands that need no backend
    if args.command == "verify-audit" and (args.bundle or args.log):
        if args.bundle:
            result = audit_mod.verify_bundle(Path(args.bundle).read_bytes())
            if result.ok:
                print(f"ok  bundle records={result.count} "
                      f"terminal={result.header['log_terminal_hash'].hex()}")
                return 0
            print(f"corrupt  seq={result.first_bad_seq} problem={result.problem}")
            return 1
        result = audit_mod.verify_log_file(args.log)
        if result.ok:
            events = audit_mod.read_log_file(args.log)
            terminal = events[-1].hash.hex() if events else audit_mod.GENESIS.hex()
            print(f"ok  terminal={terminal}")
            return 0
        print(f"corrupt  seq={result.first_bad_seq} problem={result.problem}")
        return 1

    if args.command == "simulate":
        from .simulator import ScenarioConfig, run_scenario_local
        config = ScenarioConfig.load(args.scenario)
        result, plane = run_scenario_local(config, audit_path=args.audit_out)
        lines = [f"{name}\t{value}" for name, value in _snapshot_rows(result.snapshot)]
        lines.append(f"event_count\t{result.event_count}")
        lines.append(f"log_digest\t{result.log_digest.hex()}")
        lines.append(f"chain_ok\t{str(result.chain_ok).lower()}")
        text = "\n".join(lines) + "\n"
        if args.out:
            Path(args.out).write_text(text, encoding="utf-8")
        print(text, end="")
        plane.close()
        return 0 if result.chain_ok else 1

    if args.command == "serve":
        from .service import serve
        config_path = args.serve_config or args.config
        if not config_path:
            raise GovernanceError("serve needs --config-file (or global --config)")
        service = serve(ServiceConfig.load(config_path))
        host, port = service.config.listen_host, service.port
        print(f"listening on http://{host}:{port}  (Ctrl-C to stop)")
        try:
            while True:
                import time
                time.sleep(3600)
        except KeyboardInterrupt:
            service.stop()
        return 0

    backend = _Backend(args)
    try:
        return _run_with_backend(args, backend)
    finally:
        backend.close()


def _snapshot_rows(snapshot: dict[str, Any]) -> list[tuple[str, str]]:
    order = ("ownership_coverage", "median_revocation_latency", "decision_coverage",
             "orphan_count", "phi_minimization_rate", "control_drift_rate",
             "incident_rate")
    rows = []
    for name in order:
        value = snapshot.get(name)
        if value is None:
            rows.append((name, "-"))
        elif isinstance(value, float):
            rows.append((name, f"{value:.6f}"))
        else:
            rows.append((name, str(value)))
    return rows


def _run_with_backend(args, backend: _Backend) -> int:
    fmt = args.format or "table"

    if args.command == "register":
        agent = backend.register({
            "persona": args.persona,
            "domain_class": args.domain,
            "scope": _csv(args.scope),
            "tools": _csv(args.tools),
            "data_scopes": _csv(args.data_scopes),
        }, args.override_duplicate)
        _emit([agent], fmt)
        return 0

    if args.command == "approve":
        expiration = backend.now() + parse_duration(args.expires_in)
        agent = backend.approve(args.agent_id, args.owner, args.liability, expiration, {
            "policy_version": args.policy_version,
            "model_id": args.model_id,
            "prompt_hash": args.prompt_hash,
            "config_hash": args.config_hash,
            "approved_at": backend.now(),
        })
        _emit([agent], fmt)
        return 0

    if args.command == "transition":
        _emit([backend.transition(args.agent_id, args.event)], fmt)
        return 0

    if args.command == "agents":
        _emit(backend.agents(), fmt)
        return 0

    if args.command == "kill":
        _emit([backend.kill(args.agent_id, args.trigger, args.reason)], fmt)
        return 0

    if args.command == "decommission":
        _emit([backend.decommission(args.agent_id, args.reason)], fmt)
        return 0

    if args.command == "kpi":
        start, end = _parse_window(backend, args.window)
        snapshot = backend.kpi(start, end)
        if fmt == "records":
            _print_records([snapshot])
        else:
            # both forms: the structured record, then one KPI per row
            print(json.dumps(jsonable(snapshot), sort_keys=True))
            _print_table([{"kpi": name, "value": value}
                          for name, value in _snapshot_rows(snapshot)])
        return 0

    if args.command == "assess":
        start, end = _parse_window(backend, args.window)
        features = _csv(args.features) if args.features else None
        assessment = backend.maturity(start, end, features)
        if fmt == "records":
            _print_records([assessment])
        else:
            print(f"maturity level {assessment['level']} ({assessment['level_name']})")
            _print_table(assessment["evidence"])
        return 0

    if args.command == "verify-audit":
        result = backend.verify_audit()
        if result["ok"]:
            print(f"ok  terminal={result['terminal_hash']}")
            return 0
        print(f"corrupt  seq={result['first_bad_seq']} problem={result['problem']}")
        return 1

    if args.command == "export-bundle":
        bundle = backend.export_bundle(agent_id=args.agent, start=args.start,
                                       end=args.end, kinds=args.kinds)
        Path(args.out).write_bytes(bundle)
        verification = audit_mod.verify_bundle(bundle)
        print(f"wrote {args.out}  records={verification.count} "
              f"ok={str(verification.ok).lower()}")
        return 0 if verification.ok else 1

    if args.command == "pending":
        if args.action == "list":
            queue = backend.pending()
            rows = [{"kind": "request",
                     "id": item["request"]["request_id"],
                     "agent": item["request"]["agent_id"],
                     "tool": item["request"]["tool"],
                     "since": item["request"]["submitted_at"]}
                    for item in queue["requests"]]
            rows += [{"kind": "conflict", "id": case["case_id"],
                      "agent": ",".join(case["agents"]),
                      "tool": case["contested"], "since": "-"}
                     for case in queue["cases"]]
            _emit(rows, fmt)
            return 0
        if not args.target:
            raise GovernanceError("pending approve/deny needs a target id")
        verdict = "allow" if args.action == "approve" else "deny"
        _emit([backend.verdict(args.target, verdict, args.note)], fmt)
        return 0

    raise GovernanceError(f"unhandled command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
