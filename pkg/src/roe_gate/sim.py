"""Planner/executor simulation harness.

Stands in for both neighbors of the gateway: it plays the planner by
submitting proposed actions and the executor by capturing what the sink
receives, then renders an input-to-output transcript checked against
expected actions. Runs either against an in-process gateway (embedded) or
a running service over HTTP; both modes produce the same signatures.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Mapping, Sequence

import httpx

from .case_studies import CASE_STUDIES, CaseStudy
from .core import ManagedSystemTemplate, Rule
from .dsl import DocumentError, parse_rule_document, parse_rules, rule_to_document
from .engine import HandlerRegistry
from .service import Gateway
from .store import RuleStore

PENDING_EXPECTED = "pending"


class GoldenMismatchError(Exception):
    """A replay diverged from its expected outputs; carries a diff."""


class ScenarioParseError(Exception):
    pass


@dataclass(frozen=True)
class TranscriptStep:
    index: int
    request: Mapping
    expected: tuple[str, ...] | str
    actions: tuple[str, ...] | None
    payload: Mapping | None
    ok: bool

    def describe(self) -> str:
        body = self.request
        arrow = f"{body.get('IRS_ia')} {body.get('IRS_s')}->{body.get('IRS_t')}"
        actual = "pending" if self.actions is None else list(self.actions)
        expected = self.expected if isinstance(self.expected, str) else list(self.expected)
        verdict = "PASS" if self.ok else "FAIL"
        return f"[{verdict}] {arrow} => {actual} (expected {expected})"


@dataclass(frozen=True)
class Transcript:
    name: str
    mode: str
    steps: tuple[TranscriptStep, ...]

    @property
    def ok(self) -> bool:
        return all(step.ok for step in self.steps)

    def signature(self) -> tuple:
        """Transport-independent view: the action triple plus the outputs."""
        return tuple(
            (
                step.request.get("IRS_ia"),
                step.request.get("IRS_s"),
                step.request.get("IRS_t"),
                step.actions,
            )
            for step in self.steps
        )

    def render(self) -> str:
        lines = [f"{self.name} ({self.mode} mode)"]
        lines += [step.describe() for step in self.steps]
        lines.append("result: " + ("PASS" if self.ok else "FAIL"))
        return "\n".join(lines)

    def diff(self) -> str:
        lines = [step.describe() for step in self.steps if not step.ok]
        return "\n".join(lines) if lines else "no mismatches"

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "mode": self.mode,
            "ok": self.ok,
            "steps": [
                {
                    "index": step.index,
                    "request": dict(step.request),
                    "expected": step.expected
                    if isinstance(step.expected, str)
                    else list(step.expected),
                    "actions": None if step.actions is None else list(step.actions),
                    "payload": None if step.payload is None else dict(step.payload),
                    "ok": step.ok,
                }
                for step in self.steps
            ],
        }

    def assert_ok(self) -> "Transcript":
        if not self.ok:
            raise GoldenMismatchError(self.diff())
        return self


class CaptureSinkServer:
    """Tiny HTTP sink that records every payload the gateway forwards."""

    def __init__(self, host: str = "127.0.0.1", port: int = 0):
        self.host = host
        self.port = port
        self._records: list[dict] = []
        self._lock = threading.Lock()
        self._server: ThreadingHTTPServer | None = None
        self._thread: threading.Thread | None = None

    def start(self) -> "CaptureSinkServer":
        records = self._records
        lock = self._lock

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self) -> None:  # noqa: N802 (http.server API)
                length = int(self.headers.get("Content-Length", 0))
                body = self.rfile.read(length)
                try:
                    payload = json.loads(body)
                except json.JSONDecodeError:
                    self.send_response(400)
                    self.end_headers()
                    return
                with lock:
                    records.append(payload)
                self.send_response(204)
                self.end_headers()

            def log_message(self, *args: object) -> None:
                pass

        self._server = ThreadingHTTPServer((self.host, self.port), Handler)
        self.port = self._server.server_address[1]
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()
        return self

    @property
    def url(self) -> str:
        return f"http://{self.host}:{self.port}/sink"

    def records(self) -> list[dict]:
        with self._lock:
            return list(self._records)

    def wait_for(self, count: int, timeout: float = 15.0) -> bool:
        import time

        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            with self._lock:
                if len(self._records) >= count:
                    return True
            time.sleep(0.02)
        with self._lock:
            return len(self._records) >= count

    def stop(self) -> None:
        if self._server is not None:
            self._server.shutdown()
            self._server.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5.0)

    def __enter__(self) -> "CaptureSinkServer":
        return self.start()

    def __exit__(self, *exc_info: object) -> None:
        self.stop()


@dataclass(frozen=True)
class Scenario:
    name: str
    templates: tuple[ManagedSystemTemplate, ...]
    rules: tuple[Rule, ...]
    requests: tuple[dict, ...]
    expected: tuple[tuple[str, ...] | str, ...]


def load_scenario(source: str | Path | Mapping) -> Scenario:
    """Read a scenario document: templates + rules + requests + expected."""
    if isinstance(source, (str, Path)):
        try:
            document = json.loads(Path(source).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ScenarioParseError(f"cannot read scenario: {exc}") from None
        name = Path(source).stem
    else:
        document = dict(source)
        name = str(document.get("name", "scenario"))
    if not isinstance(document, Mapping):
        raise ScenarioParseError("scenario must be a JSON object")
    name = str(document.get("name", name))
    try:
        templates = tuple(
            ManagedSystemTemplate.from_document(doc)
            for doc in document.get("templates", ())
        )
    except (ValueError, TypeError) as exc:
        raise ScenarioParseError(f"bad template: {exc}") from None
    rules: list[Rule] = []
    try:
        for doc in document.get("rules", ()):
            rules.append(parse_rule_document(doc))
    except DocumentError as exc:
        raise ScenarioParseError(f"bad rule document: {exc}") from None
    if document.get("rules_text"):
        parsed = parse_rules(str(document["rules_text"]))
        if parsed.errors:
            first = parsed.errors[0]
            raise ScenarioParseError(
                f"rules_text line {first.line}: {first.message}"
            )
        rules.extend(parsed.rules)
    requests = document.get("requests", ())
    expected_raw = document.get("expected", ())
    if len(requests) != len(expected_raw):
        raise ScenarioParseError(
            f"{len(requests)} requests but {len(expected_raw)} expected entries"
        )
    expected: list[tuple[str, ...] | str] = []
    for entry in expected_raw:
        if entry == PENDING_EXPECTED:
            expected.append(PENDING_EXPECTED)
        elif isinstance(entry, Sequence) and not isinstance(entry, str):
            expected.append(tuple(str(a) for a in entry))
        else:
            raise ScenarioParseError(
                f"expected entries must be action lists or {PENDING_EXPECTED!r}"
            )
    for request in requests:
        if not isinstance(request, Mapping):
            raise ScenarioParseError("requests must be objects")
    return Scenario(
        name=name,
        templates=templates,
        rules=tuple(rules),
        requests=tuple(dict(r) for r in requests),
        expected=tuple(expected),
    )


def _default_system(templates: Sequence[ManagedSystemTemplate]) -> str | None:
    return templates[0].id if len(templates) == 1 else None


def _run_embedded(
    name: str,
    templates: Sequence[ManagedSystemTemplate],
    rules: Sequence[Rule],
    requests: Sequence[Mapping],
    expected: Sequence[tuple[str, ...] | str],
) -> Transcript:
    store = RuleStore()
    for template in templates:
        store.put_template(template)
    for rule in rules:
        store.create_rule(rule)
    captured: list[dict] = []
    gateway = Gateway(
        store,
        HandlerRegistry(),
        sink=captured.append,
        default_managed_system=_default_system(templates),
        workers=1,
        start_sweeper=False,
    )
    steps: list[TranscriptStep] = []
    try:
        for index, (body, want) in enumerate(zip(requests, expected)):
            before_sink = len(captured)
            before_pending = len(gateway.list_pending())
            gateway.submit_wire(dict(body), wait=True)
            delivered = captured[before_sink:]
            actions = tuple(delivered[0]["actions"]) if delivered else None
            payload = delivered[0] if delivered else None
            if want == PENDING_EXPECTED:
                ok = actions is None and len(gateway.list_pending()) == before_pending + 1
            else:
                ok = actions == want
            steps.append(TranscriptStep(index, dict(body), want, actions, payload, ok))
    finally:
        gateway.close()
        store.close()
    return Transcript(name=name, mode="embedded", steps=tuple(steps))


def _run_service(
    name: str,
    templates: Sequence[ManagedSystemTemplate],
    rules: Sequence[Rule],
    requests: Sequence[Mapping],
    expected: Sequence[tuple[str, ...] | str],
    service_url: str,
    sink: CaptureSinkServer,
) -> Transcript:
    with httpx.Client(timeout=10.0) as client:
        health = client.get(f"{service_url.rstrip('/')}/health")
        health.raise_for_status()
        evaluation_url = health.json().get("evaluation_url")
        if not evaluation_url:
            raise RuntimeError("service did not advertise its evaluation listener")
        for template in templates:
            response = client.put(
                f"{service_url.rstrip('/')}/templates/{template.id}",
                json=template.to_document(),
            )
            response.raise_for_status()
        for rule in rules:
            response = client.put(
                f"{service_url.rstrip('/')}/rules/{rule.id.rendered}",
                json=rule_to_document(rule),
            )
            response.raise_for_status()
        default_system = _default_system(templates)
        sent: list[tuple[dict, str]] = []
        for index, body in enumerate(requests):
            wire = dict(body)
            wire.setdefault("correlation_id", f"{name}-step-{index}")
            if default_system is not None:
                wire.setdefault("managed_system", default_system)
            response = client.post(f"{evaluation_url.rstrip('/')}/evaluate", json=wire)
            response.raise_for_status()
            sent.append((wire, response.json()["correlation_id"]))
        expect_deliveries = sum(1 for want in expected if want != PENDING_EXPECTED)
        sink.wait_for(expect_deliveries)
        by_correlation: dict[str, dict] = {}
        for payload in sink.records():
            echo = payload.get("input") or {}
            if isinstance(echo, Mapping) and echo.get("correlation_id"):
                by_correlation[str(echo["correlation_id"])] = payload
        pending_tokens = {
            item["token"]
            for item in client.get(f"{service_url.rstrip('/')}/pending").json()["pending"]
        }
    steps = []
    for index, ((wire, correlation_id), want) in enumerate(zip(sent, expected)):
        payload = by_correlation.get(correlation_id)
        actions = tuple(payload["actions"]) if payload else None
        if want == PENDING_EXPECTED:
            ok = payload is None and bool(pending_tokens)
        else:
            ok = actions == want
        steps.append(TranscriptStep(index, wire, want, actions, payload, ok))
    return Transcript(name=name, mode="service", steps=tuple(steps))


def run_case_study(
    case: int,
    *,
    service_url: str | None = None,
    sink: CaptureSinkServer | None = None,
) -> Transcript:
    """Replay one bundled case study and check it against its goldens."""
    study: CaseStudy | None = CASE_STUDIES.get(case)
    if study is None:
        raise ValueError(f"no case study {case}; choose from {sorted(CASE_STUDIES)}")
    name = f"case-study-{case}"
    if service_url is None:
        return _run_embedded(
            name, [study.template], study.rules, study.inputs, study.expected
        )
    if sink is None:
        raise ValueError("service mode needs a capture sink the service forwards to")
    return _run_service(
        name, [study.template], study.rules, study.inputs, study.expected,
        service_url, sink,
    )


def run_scenario(
    source: str | Path | Mapping,
    *,
    service_url: str | None = None,
    sink: CaptureSinkServer | None = None,
) -> Transcript:
    """Execute a scenario document step by step."""
    scenario = load_scenario(source)
    if service_url is None:
        return _run_embedded(
            scenario.name,
            scenario.templates,
            scenario.rules,
            scenario.requests,
            scenario.expected,
        )
    if sink is None:
        raise ValueError("service mode needs a capture sink the service forwards to")
    return _run_service(
        scenario.name,
        scenario.templates,
        scenario.rules,
        scenario.requests,
        scenario.expected,
        service_url,
        sink,
    )
