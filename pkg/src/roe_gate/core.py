"""Core vocabulary for the rules-of-engagement gateway.

A rule pairs a match side (source pattern, action verb, resource scope)
with a consequence side (constraint, replacement final action, optional
handler). Managed-system templates pin the concrete verb vocabulary, the
scope matching semantics, and the standard deny action used when nothing
matches; the meta-template fixes the slot schema that every template, and
therefore every rule, must follow.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Mapping

__all__ = [
    "Constraint",
    "DuplicateIdError",
    "IntermediateActionRequest",
    "MalformedInputError",
    "ManagedSystemTemplate",
    "MetaTemplate",
    "META_TEMPLATE",
    "Rule",
    "RuleId",
    "RuleIdRegistry",
    "RuleIdRegistryEntry",
    "RuleViolation",
    "ScopeMatchKind",
    "SlotSpec",
    "SourceKind",
    "ValidationReport",
    "VERB_KINDS",
    "register_action_id",
    "restrictiveness_rank",
    "validate_rule",
    "validate_template",
]


class DuplicateIdError(Exception):
    """An action id was registered twice."""


class MalformedInputError(ValueError):
    """A proposed-action payload is missing or malforms a required field."""


class Constraint(Enum):
    """Consequence applied to a proposed action when its rule wins."""

    ALLOW = "allow"
    ALLOW_WITH_LOG = "allowWithLog"
    REQUIRE_CONFIRMATION = "requireConfirmation"
    DENY = "deny"

    @classmethod
    def parse(cls, token: str) -> "Constraint":
        """Case-insensitive lookup of the wire token for a constraint."""
        try:
            return _CONSTRAINT_TOKENS[token.strip().lower()]
        except (KeyError, AttributeError):
            raise ValueError(f"unknown constraint {token!r}") from None


_CONSTRAINT_TOKENS = {c.value.lower(): c for c in Constraint}

# Total restrictiveness order: deny is strictly greatest, allow strictly
# least; the two intermediate constraints fail toward more human oversight.
_RESTRICTIVENESS = {
    Constraint.ALLOW: 0,
    Constraint.ALLOW_WITH_LOG: 1,
    Constraint.REQUIRE_CONFIRMATION: 2,
    Constraint.DENY: 3,
}


def restrictiveness_rank(constraint: Constraint) -> int:
    """Position of a constraint in the restrictiveness order (allow=0 .. deny=3)."""
    return _RESTRICTIVENESS[constraint]


_ID_TOKEN = re.compile(r"[A-Z0-9]+")
_ID_SEPARATORS = re.compile(r"[-_]")


@dataclass(frozen=True)
class RuleId:
    """Rule identifier: a category plus one or more subcategory tokens.

    Rendered as hyphen-joined uppercase tokens, e.g. ``WEB-FE-XSS-1``.
    ``parse`` is lenient about token case so that authoring mistakes can be
    reported by ``validate_rule`` as slot violations instead of crashes.
    """

    category: str
    subcategories: tuple[str, ...]

    @classmethod
    def parse(cls, text: str) -> "RuleId":
        tokens = _ID_SEPARATORS.split(text.strip())
        if len(tokens) < 2 or any(not t for t in tokens):
            raise ValueError(
                f"rule id must be category plus at least one subcategory: {text!r}"
            )
        return cls(tokens[0], tuple(tokens[1:]))

    @property
    def rendered(self) -> str:
        return "-".join((self.category, *self.subcategories))

    @property
    def well_formed(self) -> bool:
        """True when every token matches the uppercase token grammar."""
        return all(
            _ID_TOKEN.fullmatch(t) for t in (self.category, *self.subcategories)
        )

    def __str__(self) -> str:
        return self.rendered


class SourceKind(Enum):
    USERNAME = "username"
    IP = "IP"
    ANY = "any"

    @classmethod
    def parse(cls, token: str) -> "SourceKind":
        for kind in cls:
            if kind.value.lower() == token.strip().lower():
                return kind
        raise ValueError(f"unknown source kind {token!r}")


class ScopeMatchKind(Enum):
    PATH_PREFIX = "path-prefix"
    IP_OR_CIDR = "ip-or-cidr"
    REGEX = "regex"

    @classmethod
    def parse(cls, token: str) -> "ScopeMatchKind":
        for kind in cls:
            if kind.value == token.strip().lower():
                return kind
        raise ValueError(f"unknown scope match kind {token!r}")


VERB_KINDS = ("create", "read", "update", "delete", "other")


@dataclass(frozen=True)
class ManagedSystemTemplate:
    """Per-managed-system concretization of the meta-template.

    ``verb_vocabulary`` maps the abstract verb kinds to the concrete tokens
    rules may use (e.g. ``{"read": ("GET",)}`` for a web system, or TCP
    state-transition tokens for a network fabric).
    """

    id: str
    verb_vocabulary: Mapping[str, tuple[str, ...]]
    source_kinds: tuple[SourceKind, ...]
    scope_match_kind: ScopeMatchKind
    standard_deny_action: str

    def verbs(self) -> frozenset[str]:
        return frozenset(t for tokens in self.verb_vocabulary.values() for t in tokens)

    def to_document(self) -> dict:
        return {
            "id": self.id,
            "verb_vocabulary": {k: list(v) for k, v in self.verb_vocabulary.items()},
            "source_kinds": [k.value for k in self.source_kinds],
            "scope_match_kind": self.scope_match_kind.value,
            "standard_deny_action": self.standard_deny_action,
        }

    @classmethod
    def from_document(cls, doc: Mapping) -> "ManagedSystemTemplate":
        try:
            return cls(
                id=str(doc["id"]),
                verb_vocabulary={
                    str(kind): tuple(str(t) for t in tokens)
                    for kind, tokens in doc["verb_vocabulary"].items()
                },
                source_kinds=tuple(SourceKind.parse(k) for k in doc["source_kinds"]),
                scope_match_kind=ScopeMatchKind.parse(doc["scope_match_kind"]),
                standard_deny_action=str(doc["standard_deny_action"]),
            )
        except KeyError as exc:
            raise ValueError(f"template document missing key {exc.args[0]!r}") from None


@dataclass(frozen=True)
class SlotSpec:
    name: str
    kind: str
    optional: bool = False


@dataclass(frozen=True)
class MetaTemplate:
    """The fixed seven-slot schema every managed-system template follows."""

    slots: tuple[SlotSpec, ...]

    def slot_names(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.slots)


META_TEMPLATE = MetaTemplate(
    slots=(
        SlotSpec("id", "category-subcategory identifier"),
        SlotSpec("source", "source kind: username | IP | any"),
        SlotSpec("verb", "verb kind: create | read | update | delete | other"),
        SlotSpec("scope", "target resource scope"),
        SlotSpec("constraint", "allow | deny | allowWithLog | requireConfirmation"),
        SlotSpec("final_action", "replacement action payload"),
        SlotSpec("handler", "registered handler name", optional=True),
    )
)


def validate_template(template: ManagedSystemTemplate) -> list[str]:
    """Check a managed-system template against the meta-template slot kinds."""
    problems: list[str] = []
    if not template.id or not template.id.strip():
        problems.append("template id is empty")
    seen: set[str] = set()
    for kind, tokens in template.verb_vocabulary.items():
        if kind not in VERB_KINDS:
            problems.append(f"unknown verb kind {kind!r}")
        for token in tokens:
            if not token:
                problems.append(f"empty verb token under kind {kind!r}")
            elif token in seen:
                problems.append(f"duplicate verb token {token!r}")
            seen.add(token)
    if not seen:
        problems.append("verb vocabulary is empty")
    if not template.source_kinds:
        problems.append("no source kinds declared")
    if not template.standard_deny_action:
        problems.append("standard deny action is empty")
    return problems


@dataclass(frozen=True)
class Rule:
    """One rule of engagement.

    The match side is (source_pattern, verb, scope_pattern); the consequence
    side is (constraint, final_action, handler). ``final_action`` carries the
    deny/alternate action payload, e.g. ``"return 404"``.
    """

    id: RuleId
    source_pattern: str
    verb: str
    scope_pattern: str
    constraint: Constraint
    final_action: str = ""
    handler: str | None = None
    managed_system: str = ""
    created: str = ""
    author: str = ""


@dataclass(frozen=True)
class RuleIdRegistryEntry:
    id: RuleId
    description: str


class RuleIdRegistry:
    """Dictionary of known action ids and their descriptions."""

    def __init__(self, entries: tuple[RuleIdRegistryEntry, ...] = ()):
        self._entries: dict[str, RuleIdRegistryEntry] = {}
        for entry in entries:
            self.register(entry)

    def register(self, entry: RuleIdRegistryEntry) -> None:
        key = entry.id.rendered
        if key in self._entries:
            raise DuplicateIdError(f"action id {key!r} already registered")
        self._entries[key] = entry

    def remove(self, rule_id: "RuleId | str") -> RuleIdRegistryEntry:
        key = rule_id.rendered if isinstance(rule_id, RuleId) else rule_id
        try:
            return self._entries.pop(key)
        except KeyError:
            raise KeyError(f"action id {key!r} not registered") from None

    def get(self, rule_id: "RuleId | str") -> RuleIdRegistryEntry | None:
        key = rule_id.rendered if isinstance(rule_id, RuleId) else rule_id
        return self._entries.get(key)

    def covers(self, rule_id: RuleId) -> bool:
        """True when the id, or one of its dash-prefixes, is registered."""
        tokens = (rule_id.category, *rule_id.subcategories)
        for cut in range(len(tokens), 1, -1):
            if "-".join(tokens[:cut]) in self._entries:
                return True
        return False

    def entries(self) -> tuple[RuleIdRegistryEntry, ...]:
        return tuple(self._entries.values())

    def __contains__(self, rule_id: object) -> bool:
        key = rule_id.rendered if isinstance(rule_id, RuleId) else rule_id
        return key in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self) -> Iterator[RuleIdRegistryEntry]:
        return iter(self._entries.values())


def register_action_id(
    entry: RuleIdRegistryEntry, registry: RuleIdRegistry
) -> RuleIdRegistry:
    """Add an action-id definition to the registry; duplicate ids are errors."""
    registry.register(entry)
    return registry


@dataclass(frozen=True)
class RuleViolation:
    slot: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[RuleViolation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok

    def describe(self) -> str:
        if self.ok:
            return "ok"
        return "; ".join(f"{v.slot}: {v.message}" for v in self.violations)


def validate_rule(
    rule: Rule,
    template: ManagedSystemTemplate,
    registry: RuleIdRegistry | None = None,
    handlers: object = None,
) -> ValidationReport:
    """Validate a rule against its managed-system template.

    Violations are data, not faults; each names the offending slot. The
    optional ``registry`` enables a stricter authoring check: with a
    non-empty registry, the rule id (or a dash-prefix of it) must be a
    registered action id. ``handlers`` is any container of known handler
    names; a rule naming a handler outside it is rejected here so that
    handler lookups never fail at evaluation time.
    """
    violations: list[RuleViolation] = []
    if not rule.id.well_formed:
        violations.append(
            RuleViolation(
                "id",
                f"{rule.id.rendered!r} does not match the "
                "CATEGORY-SUBCATEGORY uppercase token grammar",
            )
        )
    if not rule.source_pattern:
        violations.append(RuleViolation("source", "source pattern is empty"))
    if not rule.verb:
        violations.append(RuleViolation("verb", "verb is empty"))
    elif rule.verb not in template.verbs():
        allowed = ", ".join(sorted(template.verbs()))
        violations.append(
            RuleViolation(
                "verb",
                f"{rule.verb!r} is not in the {template.id!r} vocabulary ({allowed})",
            )
        )
    if not rule.scope_pattern:
        violations.append(RuleViolation("scope", "scope pattern is empty"))
    if rule.constraint is Constraint.ALLOW and rule.final_action:
        violations.append(
            RuleViolation("final_action", "allow rules must leave the final action empty")
        )
    if rule.constraint is Constraint.DENY and not rule.final_action:
        violations.append(
            RuleViolation("final_action", "deny rules must carry a final action")
        )
    if rule.handler is not None:
        if not rule.handler:
            violations.append(RuleViolation("handler", "handler name is empty"))
        elif handlers is None or rule.handler not in handlers:
            violations.append(
                RuleViolation("handler", f"handler {rule.handler!r} is not registered")
            )
    if registry is not None and len(registry) and not registry.covers(rule.id):
        violations.append(
            RuleViolation(
                "id",
                f"{rule.id.rendered!r} is not covered by the action-id registry",
            )
        )
    return ValidationReport(tuple(violations))


# Wire keys for the proposed-action payload.
WIRE_ACTION_KEY = "IRS_ia"
WIRE_SOURCE_KEY = "IRS_s"
WIRE_TARGET_KEY = "IRS_t"


@dataclass(frozen=True)
class IntermediateActionRequest:
    """A planner-proposed action awaiting gatekeeping.

    ``raw`` keeps the payload exactly as received so outputs can echo the
    original input without reconstruction.
    """

    ia: str
    s: str
    t: str
    managed_system: str = ""
    correlation_id: str = ""
    raw: Mapping[str, object] | None = field(default=None, compare=False, repr=False)

    def __post_init__(self) -> None:
        for name, value in (("ia", self.ia), ("s", self.s), ("t", self.t)):
            if not isinstance(value, str) or not value:
                raise MalformedInputError(f"request field {name!r} must be a non-empty string")

    @classmethod
    def from_wire(
        cls, payload: Mapping, *, default_managed_system: str | None = None
    ) -> "IntermediateActionRequest":
        if not isinstance(payload, Mapping):
            raise MalformedInputError("request body must be an object")
        values = {}
        for key in (WIRE_ACTION_KEY, WIRE_SOURCE_KEY, WIRE_TARGET_KEY):
            value = payload.get(key)
            if value is None:
                raise MalformedInputError(f"missing required key {key!r}")
            if not isinstance(value, str) or not value:
                raise MalformedInputError(f"key {key!r} must be a non-empty string")
            values[key] = value
        managed_system = payload.get("managed_system") or default_managed_system or ""
        correlation_id = payload.get("correlation_id") or ""
        if not isinstance(managed_system, str) or not isinstance(correlation_id, str):
            raise MalformedInputError("managed_system and correlation_id must be strings")
        return cls(
            ia=values[WIRE_ACTION_KEY],
            s=values[WIRE_SOURCE_KEY],
            t=values[WIRE_TARGET_KEY],
            managed_system=managed_system,
            correlation_id=correlation_id,
            raw=dict(payload),
        )

    def echo(self) -> dict:
        """The original input, verbatim when it arrived over the wire."""
        if self.raw is not None:
            return dict(self.raw)
        return {
            WIRE_ACTION_KEY: self.ia,
            WIRE_SOURCE_KEY: self.s,
            WIRE_TARGET_KEY: self.t,
        }
