"""HTTP surface.

Two deliberately separate listeners: the evaluation listener serves exactly
one route (``POST /evaluate``, acknowledged with 202 and processed
asynchronously); the management listener carries rule/template/registry
CRUD, export/import, the confirmation queue, and the audit view. Keeping
the binds apart is what makes the management plane unreachable from the
planner/executor side.
"""

from __future__ import annotations

import threading
import time
from datetime import datetime

import uvicorn
from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import JSONResponse

from .config import ServiceConfig
from .core import (
    DuplicateIdError,
    MalformedInputError,
    ManagedSystemTemplate,
    RuleId,
    RuleIdRegistryEntry,
)
from .dsl import DocumentError, parse_rule_document
from .engine import HandlerRegistry
from .service import (
    AlreadyDecidedError,
    ExpiredError,
    Gateway,
    RetryPolicy,
    TokenNotFoundError,
    UnknownManagedSystemError,
)
from .store import (
    ConflictError,
    ExportBundle,
    NonEmptyStoreError,
    NotFoundError,
    RuleStore,
    UnsupportedFormatVersionError,
    ValidationFailedError,
)


def _http_error(exc: Exception) -> HTTPException:
    if isinstance(exc, (MalformedInputError, DocumentError)):
        return HTTPException(400, str(exc))
    if isinstance(exc, (NotFoundError, TokenNotFoundError)):
        return HTTPException(404, str(exc))
    if isinstance(exc, (ConflictError, NonEmptyStoreError, AlreadyDecidedError, DuplicateIdError)):
        return HTTPException(409, str(exc))
    if isinstance(exc, ExpiredError):
        return HTTPException(410, str(exc))
    if isinstance(exc, ValidationFailedError):
        return HTTPException(
            422,
            {
                "message": "validation failed",
                "violations": [
                    {"slot": v.slot, "message": v.message} for v in exc.report.violations
                ],
            },
        )
    if isinstance(exc, (UnknownManagedSystemError, UnsupportedFormatVersionError)):
        return HTTPException(422, str(exc))
    if isinstance(exc, ValueError):
        return HTTPException(400, str(exc))
    raise exc


async def _json_body(request: Request) -> dict:
    try:
        body = await request.json()
    except Exception:
        raise HTTPException(400, "request body must be JSON") from None
    if not isinstance(body, dict):
        raise HTTPException(400, "request body must be a JSON object")
    return body


def create_evaluation_app(gateway: Gateway) -> FastAPI:
    """The planner-facing listener; serves only the evaluate route."""
    app = FastAPI(openapi_url=None, docs_url=None, redoc_url=None)

    @app.post("/evaluate", status_code=202)
    async def evaluate_action(request: Request) -> dict:
        body = await _json_body(request)
        try:
            correlation_id = gateway.submit_wire(body)
        except (MalformedInputError, UnknownManagedSystemError) as exc:
            raise _http_error(exc) from None
        return {"correlation_id": correlation_id}

    return app


def create_management_app(gateway: Gateway) -> FastAPI:
    """Intranet-side listener: CRUD, export/import, confirmations, audit."""
    app = FastAPI(openapi_url=None, docs_url=None, redoc_url=None)
    store = gateway.store

    @app.get("/health")
    async def health() -> dict:
        return {
            "status": "ok",
            "store_version": store.version,
            "evaluation_url": gateway.evaluation_url,
        }

    # -- rules ---------------------------------------------------------

    @app.get("/rules")
    async def list_rules(include_deleted: bool = False) -> dict:
        return {"rules": [s.to_document() for s in store.list_rules(include_deleted)]}

    @app.post("/rules", status_code=201)
    async def create_rule(request: Request) -> dict:
        body = await _json_body(request)
        try:
            rule = parse_rule_document(
                body, default_managed_system=gateway.default_managed_system or ""
            )
            stored = store.create_rule(rule)
        except Exception as exc:
            raise _http_error(exc) from None
        return {"rule": stored.to_document()}

    @app.get("/rules/{rule_id}")
    async def read_rule(rule_id: str) -> dict:
        try:
            return {"rule": store.read_rule(rule_id).to_document()}
        except Exception as exc:
            raise _http_error(exc) from None

    @app.put("/rules/{rule_id}")
    async def put_rule(rule_id: str, request: Request) -> dict:
        body = await _json_body(request)
        body.setdefault("r_id", rule_id)
        try:
            rule = parse_rule_document(
                body, default_managed_system=gateway.default_managed_system or ""
            )
        except Exception as exc:
            raise _http_error(exc) from None
        if rule.id.rendered != rule_id:
            raise HTTPException(
                422, f"body id {rule.id.rendered!r} does not match path id {rule_id!r}"
            )
        try:
            stored = store.upsert_rule(rule)
        except Exception as exc:
            raise _http_error(exc) from None
        return {"rule": stored.to_document()}

    @app.delete("/rules/{rule_id}")
    async def delete_rule(rule_id: str) -> dict:
        try:
            return {"rule": store.delete_rule(rule_id).to_document()}
        except Exception as exc:
            raise _http_error(exc) from None

    # -- templates -----------------------------------------------------

    @app.get("/templates")
    async def list_templates() -> dict:
        return {"templates": [t.to_document() for t in store.list_templates()]}

    @app.post("/templates", status_code=201)
    async def create_template(request: Request) -> dict:
        body = await _json_body(request)
        try:
            template = ManagedSystemTemplate.from_document(body)
            if store.has_template(template.id):
                raise ConflictError(f"template {template.id!r} already exists")
            store.put_template(template)
        except Exception as exc:
            raise _http_error(exc) from None
        return {"template": template.to_document()}

    @app.get("/templates/{template_id}")
    async def read_template(template_id: str) -> dict:
        try:
            return {"template": store.get_template(template_id).to_document()}
        except Exception as exc:
            raise _http_error(exc) from None

    @app.put("/templates/{template_id}")
    async def put_template(template_id: str, request: Request) -> dict:
        body = await _json_body(request)
        body.setdefault("id", template_id)
        try:
            template = ManagedSystemTemplate.from_document(body)
            if template.id != template_id:
                raise HTTPException(422, f"body id does not match path id {template_id!r}")
            store.put_template(template)
        except HTTPException:
            raise
        except Exception as exc:
            raise _http_error(exc) from None
        return {"template": template.to_document()}

    @app.delete("/templates/{template_id}")
    async def delete_template(template_id: str) -> dict:
        try:
            return {"template": store.delete_template(template_id).to_document()}
        except Exception as exc:
            raise _http_error(exc) from None

    # -- action-id registry ---------------------------------------------

    @app.get("/registry")
    async def list_registry() -> dict:
        return {
            "registry": [
                {"id": e.id.rendered, "description": e.description}
                for e in store.registry_entries()
            ]
        }

    @app.post("/registry", status_code=201)
    async def add_registry_entry(request: Request) -> dict:
        body = await _json_body(request)
        try:
            entry = RuleIdRegistryEntry(
                RuleId.parse(str(body["id"])), str(body.get("description", ""))
            )
            store.add_registry_entry(entry)
        except KeyError:
            raise HTTPException(400, "registry entries need an 'id'") from None
        except Exception as exc:
            raise _http_error(exc) from None
        return {"entry": {"id": entry.id.rendered, "description": entry.description}}

    @app.delete("/registry/{entry_id}")
    async def remove_registry_entry(entry_id: str) -> dict:
        try:
            entry = store.remove_registry_entry(entry_id)
        except Exception as exc:
            raise _http_error(exc) from None
        return {"entry": {"id": entry.id.rendered, "description": entry.description}}

    # -- export / import -------------------------------------------------

    @app.get("/export")
    async def export_rules() -> JSONResponse:
        return JSONResponse(store.export_rules().to_document())

    @app.post("/import")
    async def import_rules(request: Request, replace: bool = False) -> dict:
        body = await _json_body(request)
        try:
            bundle = ExportBundle.from_document(body)
            report = store.import_rules(bundle, replace=replace)
        except Exception as exc:
            raise _http_error(exc) from None
        return {
            "report": {
                "rules_imported": report.rules_imported,
                "tombstones_imported": report.tombstones_imported,
                "templates_imported": report.templates_imported,
                "registry_imported": report.registry_imported,
                "replaced": report.replaced,
                "summary": report.describe(),
            }
        }

    # -- confirmation queue ----------------------------------------------

    @app.get("/pending")
    async def list_pending(include_decided: bool = False) -> dict:
        return {
            "pending": [i.to_document() for i in gateway.list_pending(include_decided)]
        }

    @app.post("/pending/{token}/decision")
    async def decide(token: str, request: Request) -> dict:
        body = await _json_body(request)
        decision = body.get("decision")
        operator = body.get("operator")
        if not isinstance(decision, str) or not isinstance(operator, str) or not operator:
            raise HTTPException(400, "decision body needs 'decision' and 'operator'")
        try:
            item = gateway.decide(token, decision, operator)
        except Exception as exc:
            raise _http_error(exc) from None
        return {"confirmation": item.to_document()}

    # -- audit ------------------------------------------------------------

    @app.get("/audit")
    async def audit(
        rule_id: str | None = None,
        constraint: str | None = None,
        since: str | None = None,
        until: str | None = None,
        event: str | None = None,
    ) -> dict:
        try:
            records = gateway.audit.records(
                rule_id=rule_id,
                constraint=constraint,
                since=datetime.fromisoformat(since) if since else None,
                until=datetime.fromisoformat(until) if until else None,
                event=event,
            )
        except ValueError as exc:
            raise HTTPException(400, str(exc)) from None
        return {"records": [r.to_document() for r in records]}

    return app


def build_gateway(
    config: ServiceConfig, handlers: HandlerRegistry | None = None
) -> Gateway:
    handlers = handlers or HandlerRegistry()
    store = RuleStore(config.store_path, handlers=handlers)
    return Gateway(
        store,
        handlers,
        sink=config.sink_url,
        default_managed_system=config.default_managed_system,
        confirmation_expiry_seconds=config.confirmation_expiry_seconds,
        sweep_interval_seconds=config.sweep_interval_seconds,
        retry_policy=RetryPolicy(
            attempts=config.sink_retry_attempts,
            backoff_seconds=config.sink_retry_backoff_seconds,
            backoff_cap_seconds=config.sink_retry_backoff_cap_seconds,
        ),
        sink_timeout_seconds=config.sink_timeout_seconds,
        workers=config.evaluation_workers,
    )


class _UvicornThread:
    def __init__(self, app: FastAPI, host: str, port: int):
        self._config = uvicorn.Config(app, host=host, port=port, log_level="warning")
        self.server = uvicorn.Server(self._config)
        self.thread = threading.Thread(target=self.server.run, daemon=True)

    def start(self, timeout: float = 10.0) -> None:
        self.thread.start()
        deadline = time.monotonic() + timeout
        while not self.server.started:
            if time.monotonic() > deadline:
                raise RuntimeError("listener failed to start")
            if not self.thread.is_alive():
                raise RuntimeError("listener thread exited during startup")
            time.sleep(0.01)

    @property
    def port(self) -> int:
        for server in self.server.servers:
            for sock in server.sockets:
                return sock.getsockname()[1]
        raise RuntimeError("listener has no bound socket")

    def stop(self) -> None:
        self.server.should_exit = True
        self.thread.join(timeout=10.0)


class ServiceRuntime:
    """Both listeners plus the gateway, started as one unit."""

    def __init__(self, config: ServiceConfig, handlers: HandlerRegistry | None = None):
        self.config = config
        self.gateway = build_gateway(config, handlers)
        self._evaluation = _UvicornThread(
            create_evaluation_app(self.gateway),
            config.evaluation_host,
            config.evaluation_port,
        )
        self._management = _UvicornThread(
            create_management_app(self.gateway),
            config.management_host,
            config.management_port,
        )

    def start(self, timeout: float = 10.0) -> "ServiceRuntime":
        self._evaluation.start(timeout)
        self._management.start(timeout)
        self.gateway.evaluation_url = self.evaluation_url
        return self

    @property
    def evaluation_url(self) -> str:
        return f"http://{self.config.evaluation_host}:{self._evaluation.port}"

    @property
    def management_url(self) -> str:
        return f"http://{self.config.management_host}:{self._management.port}"

    def stop(self) -> None:
        self._evaluation.stop()
        self._management.stop()
        self.gateway.close()
        self.gateway.store.close()

    def __enter__(self) -> "ServiceRuntime":
        return self.start()

    def __exit__(self, *exc_info: object) -> None:
        self.stop()


def serve(config: ServiceConfig) -> None:
    """Run the service until interrupted."""
    runtime = ServiceRuntime(config).start()
    print(f"evaluation listener on {runtime.evaluation_url}")
    print(f"management listener on {runtime.management_url}")
    try:
        while True:
            time.sleep(0.5)
    except KeyboardInterrupt:
        pass
    finally:
        runtime.stop()
