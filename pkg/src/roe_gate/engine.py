"""Evaluation engine.

Given a proposed action and an immutable rule-set snapshot: find every rule
whose match side covers the request, resolve conflicts toward the most
restrictive rule, apply its constraint, and emit the final action. A
request nothing matches is denied with the managed system's standard deny
action — the allow-list posture.
"""

from __future__ import annotations

import ipaddress
import re
import uuid
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Callable, Iterable, Mapping, Sequence

from .core import (
    Constraint,
    IntermediateActionRequest,
    ManagedSystemTemplate,
    Rule,
    RuleId,
    ScopeMatchKind,
    restrictiveness_rank,
)

# Deny payload used when a request cannot even be routed to a template.
FALLBACK_DENY_ACTION = "denied"
# Rendered action for a decision parked on the confirmation queue; kept
# token-free so evaluation stays deterministic.
PENDING_ACTION = "pending-confirmation"


class BadPatternError(ValueError):
    """A rule pattern failed to compile; carries the offending rule id."""

    def __init__(self, rule_id: RuleId, slot: str, detail: str):
        self.rule_id = rule_id
        self.slot = slot
        super().__init__(f"rule {rule_id.rendered}: bad {slot} pattern: {detail}")


class FinalActionKind:
    PASS_THROUGH = "pass-through"
    DENY = "deny"
    PASS_THROUGH_WITH_LOG = "pass-through-with-log"
    PENDING_CONFIRMATION = "pending-confirmation"


@dataclass(frozen=True)
class FinalAction:
    """Outcome of applying a constraint to a proposed action."""

    kind: str
    action: str
    log_message: str | None = None
    confirmation_token: str | None = None

    @staticmethod
    def pass_through(ia: str) -> "FinalAction":
        return FinalAction(FinalActionKind.PASS_THROUGH, ia)

    @staticmethod
    def deny(action: str) -> "FinalAction":
        if not action:
            raise ValueError("deny actions must carry a non-empty action string")
        return FinalAction(FinalActionKind.DENY, action)

    @staticmethod
    def pass_through_with_log(ia: str, log_message: str) -> "FinalAction":
        return FinalAction(FinalActionKind.PASS_THROUGH_WITH_LOG, ia, log_message=log_message)

    @staticmethod
    def pending_confirmation(token: str) -> "FinalAction":
        return FinalAction(
            FinalActionKind.PENDING_CONFIRMATION, PENDING_ACTION, confirmation_token=token
        )

    def render(self) -> str:
        """Wire string for the outbound actions list."""
        if self.kind == FinalActionKind.DENY:
            return strip_return_prefix(self.action)
        if self.kind == FinalActionKind.PENDING_CONFIRMATION:
            return PENDING_ACTION
        return self.action


def strip_return_prefix(action: str) -> str:
    """Stored deny payloads read ``return 404``; the wire carries ``404``."""
    if action.lower().startswith("return "):
        return action[len("return ") :]
    return action


Handler = Callable[[IntermediateActionRequest, Rule, FinalAction], FinalAction]


class HandlerRegistry:
    """Named decision transforms applied after the constraint, for rules that
    need processing beyond pattern matching."""

    def __init__(self) -> None:
        self._handlers: dict[str, Handler] = {}

    def register(self, name: str, handler: Handler) -> None:
        if name in self._handlers:
            raise ValueError(f"handler {name!r} already registered")
        self._handlers[name] = handler

    def get(self, name: str) -> Handler | None:
        return self._handlers.get(name)

    def names(self) -> frozenset[str]:
        return frozenset(self._handlers)

    def __contains__(self, name: object) -> bool:
        return name in self._handlers

    def __len__(self) -> int:
        return len(self._handlers)


class _TargetView:
    """Parses a request target as an address/network once per evaluation."""

    __slots__ = ("text", "_done", "address", "network")

    def __init__(self, text: str):
        self.text = text
        self._done = False
        self.address = None
        self.network = None

    def resolve(self) -> None:
        if self._done:
            return
        self._done = True
        try:
            self.address = ipaddress.ip_address(self.text)
        except ValueError:
            try:
                self.network = ipaddress.ip_network(self.text, strict=False)
            except ValueError:
                pass


@dataclass(frozen=True)
class CompiledRule:
    """A rule with its patterns compiled for repeated matching."""

    rule: Rule
    source_regex: re.Pattern | None  # None means match-all
    scope_kind: ScopeMatchKind
    scope_prefix: str | None = None
    scope_network: object | None = None
    scope_regex: re.Pattern | None = None

    def matches(self, request: IntermediateActionRequest,
                target: _TargetView | None = None) -> bool:
        if self.rule.verb != request.ia:
            return False
        if self.source_regex is not None and not self.source_regex.fullmatch(request.s):
            return False
        if self.scope_kind is ScopeMatchKind.PATH_PREFIX:
            return _path_prefix_match(self.scope_prefix or "", request.t)
        if self.scope_kind is ScopeMatchKind.IP_OR_CIDR:
            view = target or _TargetView(request.t)
            view.resolve()
            return _network_match(self.scope_network, view)
        return self.scope_regex is not None and bool(self.scope_regex.fullmatch(request.t))


def _path_prefix_match(scope: str, target: str) -> bool:
    # A prefix only matches up to a path-segment boundary: "/admin" covers
    # "/admin" and "/admin/user" but not "/administrator".
    if target == scope:
        return True
    if not target.startswith(scope):
        return False
    return scope.endswith("/") or target[len(scope)] == "/"


def _network_match(network: object, view: _TargetView) -> bool:
    try:
        if view.address is not None:
            return view.address in network  # type: ignore[operator]
        if view.network is not None:
            return view.network.subnet_of(network)  # type: ignore[attr-defined]
    except (TypeError, ValueError):
        return False
    return False


def _compile_rule(rule: Rule, template: ManagedSystemTemplate) -> CompiledRule:
    if rule.source_pattern in ("any", "*"):
        source_regex = None
    else:
        try:
            source_regex = re.compile(rule.source_pattern)
        except re.error as exc:
            raise BadPatternError(rule.id, "source", str(exc)) from None
    kind = template.scope_match_kind
    if kind is ScopeMatchKind.PATH_PREFIX:
        return CompiledRule(rule, source_regex, kind, scope_prefix=rule.scope_pattern)
    if kind is ScopeMatchKind.IP_OR_CIDR:
        try:
            network = ipaddress.ip_network(rule.scope_pattern, strict=False)
        except ValueError as exc:
            raise BadPatternError(rule.id, "scope", str(exc)) from None
        return CompiledRule(rule, source_regex, kind, scope_network=network)
    try:
        scope_regex = re.compile(rule.scope_pattern)
    except re.error as exc:
        raise BadPatternError(rule.id, "scope", str(exc)) from None
    return CompiledRule(rule, source_regex, kind, scope_regex=scope_regex)


def match_rule(
    request: IntermediateActionRequest, rule: Rule, template: ManagedSystemTemplate
) -> bool:
    """Does the rule's match side cover the request?

    Source patterns are anchored regular expressions with ``any``/``*`` as
    match-all; verbs compare by exact token equality; scopes follow the
    template's scope matching kind.
    """
    return _compile_rule(rule, template).matches(request)


@dataclass(frozen=True)
class RuleSetSnapshot:
    """Immutable, versioned view of the rule base used for evaluation."""

    version: int
    templates: Mapping[str, ManagedSystemTemplate]
    compiled: tuple[CompiledRule, ...]
    by_system: Mapping[str, tuple[CompiledRule, ...]]

    @property
    def rules(self) -> tuple[Rule, ...]:
        return tuple(c.rule for c in self.compiled)

    def rules_for(self, managed_system: str) -> tuple[CompiledRule, ...]:
        return self.by_system.get(managed_system, ())

    def __len__(self) -> int:
        return len(self.compiled)


def build_snapshot(
    rules: Iterable[Rule],
    templates: Mapping[str, ManagedSystemTemplate] | Iterable[ManagedSystemTemplate],
    *,
    version: int = 1,
) -> RuleSetSnapshot:
    """Compile rules once into an immutable snapshot.

    Raises ``BadPatternError`` naming the rule whose pattern fails to
    compile, and ``LookupError`` for a rule whose managed system has no
    template.
    """
    if isinstance(templates, Mapping):
        template_map = dict(templates)
    else:
        template_map = {t.id: t for t in templates}
    compiled: list[CompiledRule] = []
    by_system: dict[str, list[CompiledRule]] = {}
    for rule in rules:
        template = template_map.get(rule.managed_system)
        if template is None:
            raise LookupError(
                f"rule {rule.id.rendered}: no template for managed system "
                f"{rule.managed_system!r}"
            )
        item = _compile_rule(rule, template)
        compiled.append(item)
        by_system.setdefault(rule.managed_system, []).append(item)
    return RuleSetSnapshot(
        version=version,
        templates=template_map,
        compiled=tuple(compiled),
        by_system={k: tuple(v) for k, v in by_system.items()},
    )


def resolve_conflict(matched: Sequence[Rule]) -> Rule:
    """Pick the winner among matched rules.

    Order: highest restrictiveness rank, then longest literal scope pattern,
    then lexicographically smallest rendered id. Invariant under permutation
    of the input.
    """
    if not matched:
        raise ValueError("resolve_conflict needs at least one matched rule")
    return sorted(
        matched,
        key=lambda r: (
            -restrictiveness_rank(r.constraint),
            -len(r.scope_pattern),
            r.id.rendered,
        ),
    )[0]


def _default_token() -> str:
    return uuid.uuid4().hex


def apply_constraint(
    rule: Rule,
    request: IntermediateActionRequest,
    template: ManagedSystemTemplate,
    handlers: HandlerRegistry | None = None,
    *,
    now: datetime | None = None,
    token_factory: Callable[[], str] | None = None,
) -> FinalAction:
    """Turn the winning rule's constraint into a final action.

    Deny prefers the rule's own final action and falls back to the
    template's standard deny action. A failing (or missing) handler
    fail-safes to the standard deny action.
    """
    now = now or datetime.now(timezone.utc)
    if rule.constraint is Constraint.ALLOW:
        action = FinalAction.pass_through(request.ia)
    elif rule.constraint is Constraint.ALLOW_WITH_LOG:
        log_message = (
            f"{rule.id.rendered} allowed {request.ia} "
            f"{request.s}->{request.t} at {now.isoformat()}"
        )
        action = FinalAction.pass_through_with_log(request.ia, log_message)
    elif rule.constraint is Constraint.REQUIRE_CONFIRMATION:
        token = (token_factory or _default_token)()
        action = FinalAction.pending_confirmation(token)
    else:
        action = FinalAction.deny(rule.final_action or template.standard_deny_action)
    if rule.handler:
        handler = handlers.get(rule.handler) if handlers is not None else None
        if handler is None:
            return FinalAction.deny(template.standard_deny_action)
        try:
            transformed = handler(request, rule, action)
        except Exception:
            return FinalAction.deny(template.standard_deny_action)
        if not isinstance(transformed, FinalAction):
            return FinalAction.deny(template.standard_deny_action)
        action = transformed
    return action


@dataclass(frozen=True)
class EvaluationOutput:
    """Final action list plus the echoed original input."""

    actions: tuple[str, ...]
    input: IntermediateActionRequest
    matched_rule: RuleId | None
    decided_at: datetime
    final: FinalAction
    constraint: Constraint | None = None
    error: str | None = None

    def to_wire(self) -> dict:
        return {"actions": list(self.actions), "input": self.input.echo()}


def evaluate(
    request: IntermediateActionRequest,
    snapshot: RuleSetSnapshot,
    handlers: HandlerRegistry | None = None,
    *,
    now: datetime | None = None,
    token_factory: Callable[[], str] | None = None,
) -> EvaluationOutput:
    """Evaluate one proposed action against a snapshot.

    Deterministic for a fixed (request, snapshot, handlers) triple up to
    timestamps and confirmation tokens; an unknown managed system denies
    with a generic action and an error tag rather than faulting.
    """
    now = now or datetime.now(timezone.utc)
    template = snapshot.templates.get(request.managed_system)
    if template is None:
        final = FinalAction.deny(FALLBACK_DENY_ACTION)
        return EvaluationOutput(
            actions=(final.render(),),
            input=request,
            matched_rule=None,
            decided_at=now,
            final=final,
            error=f"unknown managed system {request.managed_system!r}",
        )
    target = _TargetView(request.t)
    matched = [
        item for item in snapshot.rules_for(request.managed_system)
        if item.matches(request, target)
    ]
    if not matched:
        final = FinalAction.deny(template.standard_deny_action)
        return EvaluationOutput(
            actions=(final.render(),),
            input=request,
            matched_rule=None,
            decided_at=now,
            final=final,
        )
    winner = resolve_conflict([item.rule for item in matched])
    final = apply_constraint(
        winner, request, template, handlers, now=now, token_factory=token_factory
    )
    return EvaluationOutput(
        actions=(final.render(),),
        input=request,
        matched_rule=winner.id,
        decided_at=now,
        final=final,
        constraint=winner.constraint,
    )
