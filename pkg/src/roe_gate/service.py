"""Gateway orchestration.

Ties the pieces together for live traffic: accept a proposed action,
acknowledge immediately, evaluate against the current snapshot on a worker
pool, append an audit record, and either forward the output to the execute
sink (with bounded retry) or park it on the human-confirmation queue.
"""

from __future__ import annotations

import heapq
import threading
import time
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from enum import Enum
from typing import Callable, Mapping

import httpx

from .core import Constraint, IntermediateActionRequest, RuleId
from .engine import (
    FALLBACK_DENY_ACTION,
    EvaluationOutput,
    FinalActionKind,
    HandlerRegistry,
    evaluate,
    strip_return_prefix,
)
from .store import NotFoundError, RuleStore


class UnknownManagedSystemError(LookupError):
    def __init__(self, managed_system: str):
        self.managed_system = managed_system
        super().__init__(f"unknown managed system {managed_system!r}")


class TokenNotFoundError(LookupError):
    pass


class AlreadyDecidedError(Exception):
    pass


class ExpiredError(Exception):
    pass


def _now() -> datetime:
    return datetime.now(timezone.utc)


@dataclass(frozen=True)
class AuditRecord:
    """One append-only line of gatekeeper history."""

    event: str  # "evaluation" | "confirmation" | "delivery-failure"
    correlation_id: str
    request: IntermediateActionRequest | None
    matched_rule: RuleId | None
    constraint: Constraint | None
    actions: tuple[str, ...]
    timestamp: datetime
    operator: str | None = None
    decision: str | None = None
    log_message: str | None = None
    error: str | None = None

    def to_document(self) -> dict:
        return {
            "event": self.event,
            "correlation_id": self.correlation_id,
            "request": self.request.echo() if self.request else None,
            "matched_rule": self.matched_rule.rendered if self.matched_rule else None,
            "constraint": self.constraint.value if self.constraint else None,
            "actions": list(self.actions),
            "timestamp": self.timestamp.isoformat(),
            "operator": self.operator,
            "decision": self.decision,
            "log_message": self.log_message,
            "error": self.error,
        }


class AuditLog:
    """Append-only audit stream; readers get point-in-time copies."""

    def __init__(self) -> None:
        self._records: list[AuditRecord] = []
        self._lock = threading.Lock()

    def append(self, record: AuditRecord) -> None:
        with self._lock:
            self._records.append(record)

    def records(
        self,
        *,
        rule_id: str | None = None,
        constraint: Constraint | str | None = None,
        since: datetime | None = None,
        until: datetime | None = None,
        event: str | None = None,
    ) -> tuple[AuditRecord, ...]:
        if isinstance(constraint, str):
            constraint = Constraint.parse(constraint)
        with self._lock:
            records = list(self._records)
        out = []
        for record in records:
            if rule_id is not None and (
                record.matched_rule is None or record.matched_rule.rendered != rule_id
            ):
                continue
            if constraint is not None and record.constraint is not constraint:
                continue
            if since is not None and record.timestamp < since:
                continue
            if until is not None and record.timestamp > until:
                continue
            if event is not None and record.event != event:
                continue
            out.append(record)
        return tuple(out)

    def __len__(self) -> int:
        with self._lock:
            return len(self._records)


class ConfirmationStatus(Enum):
    PENDING = "pending"
    APPROVED = "approved"
    REJECTED = "rejected"
    EXPIRED = "expired"


@dataclass
class PendingConfirmation:
    """A decision awaiting a human operator; terminal states are immutable."""

    token: str
    request: IntermediateActionRequest
    rule_id: RuleId | None
    created_at: datetime
    expires_at: datetime
    status: ConfirmationStatus = ConfirmationStatus.PENDING
    decided_by: str | None = None
    decided_at: datetime | None = None

    def to_document(self) -> dict:
        return {
            "token": self.token,
            "request": self.request.echo(),
            "rule_id": self.rule_id.rendered if self.rule_id else None,
            "created_at": self.created_at.isoformat(),
            "expires_at": self.expires_at.isoformat(),
            "status": self.status.value,
            "decided_by": self.decided_by,
            "decided_at": self.decided_at.isoformat() if self.decided_at else None,
        }


@dataclass(frozen=True)
class RetryPolicy:
    attempts: int = 8
    backoff_seconds: float = 0.1
    backoff_cap_seconds: float = 2.0

    def delay(self, failures: int) -> float:
        return min(self.backoff_cap_seconds, self.backoff_seconds * (2 ** max(failures - 1, 0)))


@dataclass
class _Delivery:
    correlation_id: str
    payload: dict
    request: IntermediateActionRequest | None
    failures: int = 0


class HttpSinkTransport:
    """POSTs outputs to the execute sink; raises on any non-2xx response."""

    def __init__(self, url: str, timeout: float = 5.0):
        self.url = url
        self._client = httpx.Client(timeout=timeout)

    def __call__(self, payload: dict) -> None:
        response = self._client.post(self.url, json=payload)
        response.raise_for_status()

    def close(self) -> None:
        self._client.close()


class SinkForwarder:
    """Fire-and-forget delivery with bounded exponential backoff.

    Local callable transports deliver synchronously (they cannot be
    unavailable); HTTP transports run on a background thread so caller
    latency never depends on the sink.
    """

    def __init__(
        self,
        transport: Callable[[dict], None],
        *,
        policy: RetryPolicy | None = None,
        synchronous: bool = False,
        on_failure: Callable[[_Delivery, Exception], None] | None = None,
        on_delivered: Callable[[_Delivery], None] | None = None,
    ):
        self._transport = transport
        self._policy = policy or RetryPolicy()
        self._synchronous = synchronous
        self._on_failure = on_failure
        self._on_delivered = on_delivered
        self._queue: list[tuple[float, int, _Delivery]] = []
        self._seq = 0
        self._cond = threading.Condition()
        self._closed = False
        self._inflight = 0
        self._thread: threading.Thread | None = None
        if not synchronous:
            self._thread = threading.Thread(
                target=self._run, name="roe-sink-forwarder", daemon=True
            )
            self._thread.start()

    def enqueue(self, delivery: _Delivery) -> None:
        if self._synchronous:
            try:
                self._transport(delivery.payload)
            except Exception as exc:
                if self._on_failure:
                    self._on_failure(delivery, exc)
                return
            if self._on_delivered:
                self._on_delivered(delivery)
            return
        with self._cond:
            self._seq += 1
            heapq.heappush(self._queue, (time.monotonic(), self._seq, delivery))
            self._cond.notify()

    def pending_count(self) -> int:
        with self._cond:
            return len(self._queue) + self._inflight

    def _run(self) -> None:
        while True:
            with self._cond:
                while not self._queue and not self._closed:
                    self._cond.wait(timeout=0.5)
                if self._closed and not self._queue:
                    return
                due, _, delivery = self._queue[0]
                wait = due - time.monotonic()
                if wait > 0:
                    self._cond.wait(timeout=wait)
                    continue
                heapq.heappop(self._queue)
                self._inflight += 1
            try:
                self._transport(delivery.payload)
            except Exception as exc:
                delivery.failures += 1
                if delivery.failures >= self._policy.attempts:
                    if self._on_failure:
                        self._on_failure(delivery, exc)
                    with self._cond:
                        self._inflight -= 1
                        self._cond.notify_all()
                else:
                    retry_at = time.monotonic() + self._policy.delay(delivery.failures)
                    with self._cond:
                        self._seq += 1
                        heapq.heappush(self._queue, (retry_at, self._seq, delivery))
                        self._inflight -= 1
                        self._cond.notify_all()
            else:
                if self._on_delivered:
                    self._on_delivered(delivery)
                with self._cond:
                    self._inflight -= 1
                    self._cond.notify_all()

    def drain(self, timeout: float = 10.0) -> bool:
        deadline = time.monotonic() + timeout
        with self._cond:
            while self._queue or self._inflight:
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    return False
                self._cond.wait(timeout=min(remaining, 0.1))
        return True

    def close(self) -> None:
        with self._cond:
            self._closed = True
            self._cond.notify_all()
        if self._thread is not None:
            self._thread.join(timeout=5.0)


class Gateway:
    """The evaluation front door shared by the HTTP service and the
    embedded harness."""

    def __init__(
        self,
        store: RuleStore,
        handlers: HandlerRegistry | None = None,
        *,
        sink: Callable[[dict], None] | str | None = None,
        default_managed_system: str | None = None,
        confirmation_expiry_seconds: float = 900.0,
        sweep_interval_seconds: float = 1.0,
        retry_policy: RetryPolicy | None = None,
        sink_timeout_seconds: float = 5.0,
        workers: int = 4,
        clock: Callable[[], datetime] | None = None,
        token_factory: Callable[[], str] | None = None,
        start_sweeper: bool = True,
    ):
        self.store = store
        self.handlers = handlers or HandlerRegistry()
        self.audit = AuditLog()
        self.evaluation_url: str | None = None
        self._default_managed_system = default_managed_system
        self._expiry = timedelta(seconds=confirmation_expiry_seconds)
        self._clock = clock or _now
        self._token_factory = token_factory
        self._pending: dict[str, PendingConfirmation] = {}
        self._plock = threading.RLock()
        self._transport: HttpSinkTransport | None = None
        if sink is None:
            self._forwarder = None
        elif isinstance(sink, str):
            self._transport = HttpSinkTransport(sink, timeout=sink_timeout_seconds)
            self._forwarder = SinkForwarder(
                self._transport,
                policy=retry_policy,
                on_failure=self._audit_delivery_failure,
            )
        else:
            self._forwarder = SinkForwarder(
                sink,
                policy=retry_policy,
                synchronous=True,
                on_failure=self._audit_delivery_failure,
            )
        self._executor = ThreadPoolExecutor(
            max_workers=workers, thread_name_prefix="roe-eval"
        )
        self._inflight = 0
        self._icond = threading.Condition()
        self._sweeper: threading.Thread | None = None
        self._sweep_stop = threading.Event()
        if start_sweeper and sweep_interval_seconds > 0:
            self._sweeper = threading.Thread(
                target=self._sweep_loop,
                args=(sweep_interval_seconds,),
                name="roe-confirmation-sweeper",
                daemon=True,
            )
            self._sweeper.start()

    # ------------------------------------------------------------------
    # evaluation path

    @property
    def default_managed_system(self) -> str | None:
        return self._default_managed_system

    def submit_wire(self, payload: Mapping, *, wait: bool = False) -> str:
        request = IntermediateActionRequest.from_wire(
            payload, default_managed_system=self._default_managed_system
        )
        return self.submit(request, wait=wait)

    def submit(self, request: IntermediateActionRequest, *, wait: bool = False) -> str:
        if not request.correlation_id:
            request = _with_correlation(request, uuid.uuid4().hex)
        if not self.store.has_template(request.managed_system):
            raise UnknownManagedSystemError(request.managed_system)
        if wait:
            self._process(request)
        else:
            with self._icond:
                self._inflight += 1
            self._executor.submit(self._safe_process, request)
        return request.correlation_id

    def _safe_process(self, request: IntermediateActionRequest) -> None:
        try:
            self._process(request)
        except Exception as exc:  # defensive: workers must never die silently
            self.audit.append(
                AuditRecord(
                    event="evaluation",
                    correlation_id=request.correlation_id,
                    request=request,
                    matched_rule=None,
                    constraint=None,
                    actions=(),
                    timestamp=self._clock(),
                    error=f"evaluation failed: {exc}",
                )
            )
        finally:
            with self._icond:
                self._inflight -= 1
                self._icond.notify_all()

    def _process(self, request: IntermediateActionRequest) -> EvaluationOutput:
        snapshot = self.store.snapshot()
        output = evaluate(
            request,
            snapshot,
            self.handlers,
            now=self._clock(),
            token_factory=self._token_factory,
        )
        self.audit.append(
            AuditRecord(
                event="evaluation",
                correlation_id=request.correlation_id,
                request=request,
                matched_rule=output.matched_rule,
                constraint=output.constraint,
                actions=output.actions,
                timestamp=output.decided_at,
                log_message=output.final.log_message,
                error=output.error,
            )
        )
        if output.final.kind == FinalActionKind.PENDING_CONFIRMATION:
            token = output.final.confirmation_token or uuid.uuid4().hex
            item = PendingConfirmation(
                token=token,
                request=request,
                rule_id=output.matched_rule,
                created_at=output.decided_at,
                expires_at=output.decided_at + self._expiry,
            )
            with self._plock:
                self._pending[token] = item
            return output
        self._deliver(request, output.to_wire())
        return output

    def _deliver(self, request: IntermediateActionRequest | None, payload: dict) -> None:
        if self._forwarder is None:
            return
        correlation = request.correlation_id if request else ""
        self._forwarder.enqueue(_Delivery(correlation, payload, request))

    def _audit_delivery_failure(self, delivery: _Delivery, exc: Exception) -> None:
        self.audit.append(
            AuditRecord(
                event="delivery-failure",
                correlation_id=delivery.correlation_id,
                request=delivery.request,
                matched_rule=None,
                constraint=None,
                actions=tuple(delivery.payload.get("actions", ())),
                timestamp=self._clock(),
                error=str(exc),
            )
        )

    # ------------------------------------------------------------------
    # confirmation queue

    def list_pending(self, include_decided: bool = False) -> tuple[PendingConfirmation, ...]:
        self._sweep_once()
        with self._plock:
            items = [
                i
                for i in self._pending.values()
                if include_decided or i.status is ConfirmationStatus.PENDING
            ]
        return tuple(sorted(items, key=lambda i: i.created_at))

    def get_pending(self, token: str) -> PendingConfirmation:
        with self._plock:
            item = self._pending.get(token)
            if item is None:
                raise TokenNotFoundError(f"no confirmation with token {token!r}")
            return item

    def decide(self, token: str, decision: str, operator: str) -> PendingConfirmation:
        decision = decision.strip().lower()
        if decision not in ("approved", "rejected"):
            raise ValueError(f"decision must be 'approved' or 'rejected', got {decision!r}")
        with self._plock:
            item = self._pending.get(token)
            if item is None:
                raise TokenNotFoundError(f"no confirmation with token {token!r}")
            now = self._clock()
            if item.status is ConfirmationStatus.PENDING and now >= item.expires_at:
                self._expire(item)
            if item.status is ConfirmationStatus.EXPIRED:
                raise ExpiredError(f"confirmation {token!r} expired; deny already forwarded")
            if item.status is not ConfirmationStatus.PENDING:
                raise AlreadyDecidedError(
                    f"confirmation {token!r} already {item.status.value}"
                )
            item.status = (
                ConfirmationStatus.APPROVED
                if decision == "approved"
                else ConfirmationStatus.REJECTED
            )
            item.decided_by = operator
            item.decided_at = now
        if item.status is ConfirmationStatus.APPROVED:
            actions: tuple[str, ...] = (item.request.ia,)
        else:
            actions = (self._standard_deny(item.request.managed_system),)
        self._deliver(item.request, {"actions": list(actions), "input": item.request.echo()})
        self.audit.append(
            AuditRecord(
                event="confirmation",
                correlation_id=item.request.correlation_id,
                request=item.request,
                matched_rule=item.rule_id,
                constraint=Constraint.REQUIRE_CONFIRMATION,
                actions=actions,
                timestamp=item.decided_at or self._clock(),
                operator=operator,
                decision=item.status.value,
            )
        )
        return item

    def _standard_deny(self, managed_system: str) -> str:
        try:
            template = self.store.get_template(managed_system)
        except NotFoundError:
            return FALLBACK_DENY_ACTION
        return strip_return_prefix(template.standard_deny_action)

    def _expire(self, item: PendingConfirmation) -> None:
        with self._plock:
            if item.status is not ConfirmationStatus.PENDING:
                return
            item.status = ConfirmationStatus.EXPIRED
            item.decided_at = self._clock()
        actions = (self._standard_deny(item.request.managed_system),)
        self._deliver(item.request, {"actions": list(actions), "input": item.request.echo()})
        self.audit.append(
            AuditRecord(
                event="confirmation",
                correlation_id=item.request.correlation_id,
                request=item.request,
                matched_rule=item.rule_id,
                constraint=Constraint.REQUIRE_CONFIRMATION,
                actions=actions,
                timestamp=item.decided_at or self._clock(),
                decision=ConfirmationStatus.EXPIRED.value,
            )
        )

    def _sweep_once(self) -> None:
        now = self._clock()
        with self._plock:
            due = [
                i
                for i in self._pending.values()
                if i.status is ConfirmationStatus.PENDING and now >= i.expires_at
            ]
        for item in due:
            self._expire(item)

    def _sweep_loop(self, interval: float) -> None:
        while not self._sweep_stop.wait(interval):
            self._sweep_once()

    # ------------------------------------------------------------------
    # lifecycle

    def drain(self, timeout: float = 10.0) -> bool:
        """Wait until queued evaluations and deliveries settle (test aid)."""
        deadline = time.monotonic() + timeout
        with self._icond:
            while self._inflight:
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    return False
                self._icond.wait(timeout=min(remaining, 0.1))
        if self._forwarder is not None:
            return self._forwarder.drain(timeout=max(deadline - time.monotonic(), 0.0))
        return True

    def close(self) -> None:
        self._sweep_stop.set()
        if self._sweeper is not None:
            self._sweeper.join(timeout=5.0)
        self._executor.shutdown(wait=True)
        if self._forwarder is not None:
            self._forwarder.close()
        if self._transport is not None:
            self._transport.close()

    def __enter__(self) -> "Gateway":
        return self

    def __exit__(self, *exc_info: object) -> None:
        self.close()


def _with_correlation(
    request: IntermediateActionRequest, correlation_id: str
) -> IntermediateActionRequest:
    return IntermediateActionRequest(
        ia=request.ia,
        s=request.s,
        t=request.t,
        managed_system=request.managed_system,
        correlation_id=correlation_id,
        raw=request.raw,
    )
