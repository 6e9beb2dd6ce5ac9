"""Command-line entry points: serve the gateway, replay simulations, lint rules."""

from __future__ import annotations

import json
import sys

import click

from .case_studies import TEMPLATES
from .config import load_config
from .core import validate_rule
from .dsl import parse_rules
from .http_api import serve as serve_service
from .sim import CaptureSinkServer, ScenarioParseError, run_case_study, run_scenario


@click.group()
def main() -> None:
    """Rules-of-engagement gatekeeper for automated intrusion response."""


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="JSON config file; environment overrides it.")
@click.option("--evaluation-bind", default=None, help="host:port for the evaluate listener.")
@click.option("--management-bind", default=None, help="host:port for the management listener.")
@click.option("--sink-url", default=None, help="Execute-sink URL outputs are forwarded to.")
@click.option("--store-path", default=None, help="Journal file for the rule store.")
@click.option("--default-managed-system", default=None,
              help="Template used when requests omit managed_system.")
def serve(config_path: str | None, evaluation_bind: str | None,
          management_bind: str | None, sink_url: str | None,
          store_path: str | None, default_managed_system: str | None) -> None:
    """Run both listeners until interrupted."""
    config = load_config(config_path)
    if evaluation_bind:
        host, _, port = evaluation_bind.rpartition(":")
        config.evaluation_host, config.evaluation_port = host, int(port)
    if management_bind:
        host, _, port = management_bind.rpartition(":")
        config.management_host, config.management_port = host, int(port)
    if sink_url:
        config.sink_url = sink_url
    if store_path:
        config.store_path = store_path
    if default_managed_system:
        config.default_managed_system = default_managed_system
    serve_service(config)


@main.group()
def sim() -> None:
    """Replay the bundled case studies or scenario files."""


def _emit_transcript(transcript, json_out: bool) -> None:
    if json_out:
        click.echo(json.dumps(transcript.to_json(), indent=2))
    else:
        click.echo(transcript.render())
    if not transcript.ok:
        click.echo("golden mismatch:\n" + transcript.diff(), err=True)
        sys.exit(1)


def _sim_kwargs(service_url: str | None, embedded: bool, sink_bind: str | None) -> dict:
    if service_url and embedded:
        raise click.UsageError("--service-url and --embedded are mutually exclusive")
    if not service_url:
        return {}
    host, _, port = (sink_bind or "127.0.0.1:0").rpartition(":")
    sink = CaptureSinkServer(host or "127.0.0.1", int(port or 0)).start()
    return {"service_url": service_url, "sink": sink}


@sim.command("case-study")
@click.argument("case", type=click.Choice(("1", "2")))
@click.option("--service-url", default=None,
              help="Management URL of a running service (its sink must point at --sink-bind).")
@click.option("--embedded", is_flag=True, help="Run against an in-process gateway (default).")
@click.option("--sink-bind", default=None, help="host:port the capture sink listens on.")
@click.option("--json", "json_out", is_flag=True, help="Emit the transcript as JSON.")
def sim_case_study(case: str, service_url: str | None, embedded: bool,
                   sink_bind: str | None, json_out: bool) -> None:
    """Replay case study 1 (web) or 2 (network) and check its goldens."""
    kwargs = _sim_kwargs(service_url, embedded, sink_bind)
    sink = kwargs.get("sink")
    try:
        transcript = run_case_study(int(case), **kwargs)
    finally:
        if sink is not None:
            sink.stop()
    _emit_transcript(transcript, json_out)


@sim.command("scenario")
@click.argument("file", type=click.Path(exists=True, dir_okay=False))
@click.option("--service-url", default=None)
@click.option("--embedded", is_flag=True)
@click.option("--sink-bind", default=None)
@click.option("--json", "json_out", is_flag=True)
def sim_scenario(file: str, service_url: str | None, embedded: bool,
                 sink_bind: str | None, json_out: bool) -> None:
    """Execute a scenario file (templates, rules, requests, expected)."""
    kwargs = _sim_kwargs(service_url, embedded, sink_bind)
    sink = kwargs.get("sink")
    try:
        transcript = run_scenario(file, **kwargs)
    except ScenarioParseError as exc:
        raise click.ClickException(str(exc)) from None
    finally:
        if sink is not None:
            sink.stop()
    _emit_transcript(transcript, json_out)


@main.group()
def rules() -> None:
    """Author-side rule utilities."""


@rules.command("lint")
@click.argument("file", type=click.Path(exists=True, dir_okay=False))
@click.option("--managed-system", default=None,
              help="Validate against a bundled template (web, network, file).")
@click.option("--json", "json_out", is_flag=True)
def rules_lint(file: str, managed_system: str | None, json_out: bool) -> None:
    """Parse a rule file and report diagnostics (and template violations)."""
    text = open(file, encoding="utf-8").read()
    result = parse_rules(text, default_managed_system=managed_system or "")
    findings = [
        {
            "line": d.line,
            "column": d.column,
            "severity": d.severity,
            "message": d.message,
        }
        for d in result.diagnostics
    ]
    failed = bool(result.errors)
    if managed_system:
        template = TEMPLATES.get(managed_system)
        if template is None:
            raise click.ClickException(
                f"unknown managed system {managed_system!r}; bundled: "
                + ", ".join(sorted(TEMPLATES))
            )
        for rule in result.rules:
            report = validate_rule(rule, template)
            for violation in report.violations:
                failed = True
                findings.append(
                    {
                        "rule": rule.id.rendered,
                        "severity": "error",
                        "slot": violation.slot,
                        "message": violation.message,
                    }
                )
    if json_out:
        click.echo(json.dumps({"rules": len(result.rules), "findings": findings}, indent=2))
    else:
        click.echo(f"parsed {len(result.rules)} rule(s)")
        for finding in findings:
            where = finding.get("rule") or f"line {finding.get('line')}"
            click.echo(f"{finding['severity']}: {where}: {finding['message']}")
    if failed:
        sys.exit(1)


if __name__ == "__main__":
    main()
