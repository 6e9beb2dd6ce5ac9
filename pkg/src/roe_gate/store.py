"""Versioned rule base.

An embedded, single-writer store holding rules, managed-system templates,
and the action-id registry. Mutations append to a JSON-lines journal and
are fsynced before acknowledgment; deletes are tombstones so per-id
revisions stay strictly increasing across a rule's whole history. Readers
work off immutable snapshots, so evaluation never observes a half-applied
mutation.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Mapping

from .core import (
    ManagedSystemTemplate,
    Rule,
    RuleId,
    RuleIdRegistry,
    RuleIdRegistryEntry,
    RuleViolation,
    ValidationReport,
    validate_rule,
    validate_template,
)
from .dsl import parse_rule_document, rule_to_document
from .engine import RuleSetSnapshot, build_snapshot

FORMAT_VERSION = 1


class StoreError(Exception):
    pass


class NotFoundError(StoreError):
    pass


class ConflictError(StoreError):
    pass


class ValidationFailedError(StoreError):
    def __init__(self, report: ValidationReport):
        self.report = report
        super().__init__(report.describe())


class UnsupportedFormatVersionError(StoreError):
    def __init__(self, version: object):
        self.version = version
        super().__init__(f"unsupported export format version {version!r}")


class NonEmptyStoreError(StoreError):
    pass


def _now() -> datetime:
    return datetime.now(timezone.utc)


@dataclass(frozen=True)
class StoredRule:
    rule: Rule
    revision: int
    deleted: bool
    updated_at: datetime

    def to_document(self) -> dict:
        doc = rule_to_document(self.rule)
        doc["revision"] = self.revision
        doc["deleted"] = self.deleted
        doc["updated_at"] = self.updated_at.isoformat()
        return doc

    @classmethod
    def from_document(cls, doc: Mapping) -> "StoredRule":
        payload = dict(doc)
        revision = int(payload.pop("revision"))
        deleted = bool(payload.pop("deleted"))
        updated_at = datetime.fromisoformat(payload.pop("updated_at"))
        return cls(parse_rule_document(payload), revision, deleted, updated_at)


@dataclass(frozen=True)
class ExportBundle:
    """Self-describing export of the whole store, tombstones included."""

    format_version: int
    exported_at: datetime
    templates: tuple[ManagedSystemTemplate, ...]
    registry: tuple[RuleIdRegistryEntry, ...]
    rules: tuple[StoredRule, ...]

    def to_document(self) -> dict:
        return {
            "format_version": self.format_version,
            "exported_at": self.exported_at.isoformat(),
            "templates": [t.to_document() for t in self.templates],
            "registry": [
                {"id": e.id.rendered, "description": e.description} for e in self.registry
            ],
            "rules": [r.to_document() for r in self.rules],
        }

    @classmethod
    def from_document(cls, doc: Mapping) -> "ExportBundle":
        version = doc.get("format_version")
        if version != FORMAT_VERSION:
            raise UnsupportedFormatVersionError(version)
        return cls(
            format_version=FORMAT_VERSION,
            exported_at=datetime.fromisoformat(doc["exported_at"]),
            templates=tuple(
                ManagedSystemTemplate.from_document(t) for t in doc.get("templates", ())
            ),
            registry=tuple(
                RuleIdRegistryEntry(RuleId.parse(e["id"]), e["description"])
                for e in doc.get("registry", ())
            ),
            rules=tuple(StoredRule.from_document(r) for r in doc.get("rules", ())),
        )


@dataclass(frozen=True)
class ImportReport:
    rules_imported: int
    tombstones_imported: int
    templates_imported: int
    registry_imported: int
    replaced: bool

    def describe(self) -> str:
        return (
            f"{self.rules_imported} imported"
            f" ({self.templates_imported} templates, "
            f"{self.registry_imported} registry entries)"
        )


class RuleStore:
    """Single-writer, multi-reader rule base with snapshot isolation.

    ``path=None`` keeps everything in memory; with a path, every mutation is
    journaled and replayed on open. ``handlers`` is any container of known
    handler names used during rule validation.
    """

    def __init__(
        self,
        path: str | Path | None = None,
        *,
        handlers: object = None,
        clock: Callable[[], datetime] | None = None,
    ):
        self._path = Path(path) if path else None
        self._handlers = handlers
        self._clock = clock or _now
        self._lock = threading.RLock()
        self._rules: dict[str, StoredRule] = {}
        self._templates: dict[str, ManagedSystemTemplate] = {}
        self._registry = RuleIdRegistry()
        self._version = 0
        self._snapshot: RuleSetSnapshot | None = None
        self._journal = None
        if self._path is not None:
            self._open_journal()

    # ------------------------------------------------------------------
    # persistence

    def _open_journal(self) -> None:
        assert self._path is not None
        if self._path.exists():
            with self._path.open("r", encoding="utf-8") as handle:
                for line in handle:
                    line = line.strip()
                    if not line:
                        continue
                    self._apply(json.loads(line))
                    self._version += 1
        self._path.parent.mkdir(parents=True, exist_ok=True)
        self._journal = self._path.open("a", encoding="utf-8")

    def _apply(self, op: Mapping) -> None:
        kind = op["op"]
        if kind == "rule":
            stored = StoredRule.from_document(op["doc"])
            self._rules[stored.rule.id.rendered] = stored
        elif kind == "template":
            template = ManagedSystemTemplate.from_document(op["doc"])
            self._templates[template.id] = template
        elif kind == "template-delete":
            self._templates.pop(op["id"], None)
        elif kind == "registry":
            self._registry.register(
                RuleIdRegistryEntry(RuleId.parse(op["doc"]["id"]), op["doc"]["description"])
            )
        elif kind == "registry-delete":
            self._registry.remove(op["id"])
        elif kind == "clear":
            self._rules.clear()
            self._templates.clear()
            self._registry = RuleIdRegistry()
        else:
            raise StoreError(f"unknown journal op {kind!r}")

    def _commit(self, op: dict) -> None:
        # Caller holds the lock and has already mutated in-memory state.
        if self._journal is not None:
            self._journal.write(json.dumps(op) + "\n")
            self._journal.flush()
            os.fsync(self._journal.fileno())
        self._version += 1
        self._snapshot = None

    def close(self) -> None:
        with self._lock:
            if self._journal is not None:
                self._journal.close()
                self._journal = None

    # ------------------------------------------------------------------
    # rules

    @staticmethod
    def _key(rule_id: RuleId | str) -> str:
        return rule_id.rendered if isinstance(rule_id, RuleId) else rule_id

    def _validate(self, rule: Rule) -> None:
        template = self._templates.get(rule.managed_system)
        if template is None:
            report = ValidationReport(
                (
                    RuleViolation(
                        "managed_system",
                        f"no template for managed system {rule.managed_system!r}",
                    ),
                )
            )
            raise ValidationFailedError(report)
        report = validate_rule(rule, template, handlers=self._handlers)
        if not report.ok:
            raise ValidationFailedError(report)

    def create_rule(self, rule: Rule) -> StoredRule:
        with self._lock:
            key = rule.id.rendered
            existing = self._rules.get(key)
            if existing is not None and not existing.deleted:
                raise ConflictError(f"rule {key!r} already exists")
            self._validate(rule)
            revision = (existing.revision if existing else 0) + 1
            stored = StoredRule(rule, revision, False, self._clock())
            self._rules[key] = stored
            self._commit({"op": "rule", "doc": stored.to_document()})
            return stored

    def read_rule(self, rule_id: RuleId | str) -> StoredRule:
        key = self._key(rule_id)
        with self._lock:
            stored = self._rules.get(key)
            if stored is None or stored.deleted:
                raise NotFoundError(f"rule {key!r} not found")
            return stored

    def update_rule(self, rule_id: RuleId | str, rule: Rule) -> StoredRule:
        key = self._key(rule_id)
        with self._lock:
            existing = self._rules.get(key)
            if existing is None or existing.deleted:
                raise NotFoundError(f"rule {key!r} not found")
            if rule.id.rendered != key:
                report = ValidationReport(
                    (RuleViolation("id", f"body id {rule.id.rendered!r} does not match {key!r}"),)
                )
                raise ValidationFailedError(report)
            self._validate(rule)
            stored = StoredRule(rule, existing.revision + 1, False, self._clock())
            self._rules[key] = stored
            self._commit({"op": "rule", "doc": stored.to_document()})
            return stored

    def delete_rule(self, rule_id: RuleId | str) -> StoredRule:
        key = self._key(rule_id)
        with self._lock:
            existing = self._rules.get(key)
            if existing is None or existing.deleted:
                raise NotFoundError(f"rule {key!r} not found")
            stored = StoredRule(existing.rule, existing.revision + 1, True, self._clock())
            self._rules[key] = stored
            self._commit({"op": "rule", "doc": stored.to_document()})
            return stored

    def upsert_rule(self, rule: Rule) -> StoredRule:
        with self._lock:
            existing = self._rules.get(rule.id.rendered)
            if existing is not None and not existing.deleted:
                return self.update_rule(rule.id, rule)
            return self.create_rule(rule)

    def list_rules(self, include_deleted: bool = False) -> tuple[StoredRule, ...]:
        with self._lock:
            items = [
                s for s in self._rules.values() if include_deleted or not s.deleted
            ]
        return tuple(sorted(items, key=lambda s: s.rule.id.rendered))

    # ------------------------------------------------------------------
    # templates

    def put_template(self, template: ManagedSystemTemplate) -> ManagedSystemTemplate:
        problems = validate_template(template)
        with self._lock:
            violations = [RuleViolation("template", p) for p in problems]
            if not violations and template.id in self._templates:
                # Replacing a template must not orphan rules already saved
                # against it.
                for stored in self._rules.values():
                    if stored.deleted or stored.rule.managed_system != template.id:
                        continue
                    report = validate_rule(stored.rule, template, handlers=self._handlers)
                    if not report.ok:
                        violations.append(
                            RuleViolation(
                                "template",
                                f"rule {stored.rule.id.rendered} would become invalid: "
                                f"{report.describe()}",
                            )
                        )
            if violations:
                raise ValidationFailedError(ValidationReport(tuple(violations)))
            self._templates[template.id] = template
            self._commit({"op": "template", "doc": template.to_document()})
            return template

    def get_template(self, template_id: str) -> ManagedSystemTemplate:
        with self._lock:
            template = self._templates.get(template_id)
            if template is None:
                raise NotFoundError(f"template {template_id!r} not found")
            return template

    def has_template(self, template_id: str) -> bool:
        with self._lock:
            return template_id in self._templates

    def delete_template(self, template_id: str) -> ManagedSystemTemplate:
        with self._lock:
            template = self._templates.get(template_id)
            if template is None:
                raise NotFoundError(f"template {template_id!r} not found")
            for stored in self._rules.values():
                if not stored.deleted and stored.rule.managed_system == template_id:
                    raise ConflictError(
                        f"template {template_id!r} still referenced by rule "
                        f"{stored.rule.id.rendered}"
                    )
            del self._templates[template_id]
            self._commit({"op": "template-delete", "id": template_id})
            return template

    def list_templates(self) -> tuple[ManagedSystemTemplate, ...]:
        with self._lock:
            return tuple(sorted(self._templates.values(), key=lambda t: t.id))

    # ------------------------------------------------------------------
    # action-id registry

    def add_registry_entry(self, entry: RuleIdRegistryEntry) -> RuleIdRegistryEntry:
        with self._lock:
            self._registry.register(entry)
            self._commit(
                {
                    "op": "registry",
                    "doc": {"id": entry.id.rendered, "description": entry.description},
                }
            )
            return entry

    def remove_registry_entry(self, entry_id: RuleId | str) -> RuleIdRegistryEntry:
        key = self._key(entry_id)
        with self._lock:
            try:
                entry = self._registry.remove(key)
            except KeyError:
                raise NotFoundError(f"action id {key!r} not registered") from None
            self._commit({"op": "registry-delete", "id": key})
            return entry

    def registry_entries(self) -> tuple[RuleIdRegistryEntry, ...]:
        with self._lock:
            return self._registry.entries()

    # ------------------------------------------------------------------
    # snapshots and export

    @property
    def version(self) -> int:
        with self._lock:
            return self._version

    def snapshot(self) -> RuleSetSnapshot:
        with self._lock:
            if self._snapshot is None:
                live = [s.rule for s in self._rules.values() if not s.deleted]
                self._snapshot = build_snapshot(
                    live, dict(self._templates), version=self._version
                )
            return self._snapshot

    def export_rules(self) -> ExportBundle:
        with self._lock:
            return ExportBundle(
                format_version=FORMAT_VERSION,
                exported_at=self._clock(),
                templates=self.list_templates(),
                registry=self._registry.entries(),
                rules=tuple(
                    sorted(self._rules.values(), key=lambda s: s.rule.id.rendered)
                ),
            )

    def import_rules(self, bundle: ExportBundle, *, replace: bool = False) -> ImportReport:
        if bundle.format_version != FORMAT_VERSION:
            raise UnsupportedFormatVersionError(bundle.format_version)
        with self._lock:
            populated = bool(self._rules or self._templates or len(self._registry))
            if populated and not replace:
                raise NonEmptyStoreError(
                    "store already holds data; pass replace=True to overwrite"
                )
            # Validate the whole bundle before touching state.
            incoming = {t.id: t for t in bundle.templates}
            for template in bundle.templates:
                problems = validate_template(template)
                if problems:
                    raise ValidationFailedError(
                        ValidationReport(
                            tuple(RuleViolation("template", p) for p in problems)
                        )
                    )
            for stored in bundle.rules:
                if stored.deleted:
                    continue
                template = incoming.get(stored.rule.managed_system)
                if template is None:
                    raise ValidationFailedError(
                        ValidationReport(
                            (
                                RuleViolation(
                                    "managed_system",
                                    f"rule {stored.rule.id.rendered} references missing "
                                    f"template {stored.rule.managed_system!r}",
                                ),
                            )
                        )
                    )
                report = validate_rule(stored.rule, template, handlers=self._handlers)
                if not report.ok:
                    raise ValidationFailedError(report)
            if populated and replace:
                self._rules.clear()
                self._templates.clear()
                self._registry = RuleIdRegistry()
                self._commit({"op": "clear"})
            for template in bundle.templates:
                self._templates[template.id] = template
                self._commit({"op": "template", "doc": template.to_document()})
            for entry in bundle.registry:
                self._registry.register(entry)
                self._commit(
                    {
                        "op": "registry",
                        "doc": {"id": entry.id.rendered, "description": entry.description},
                    }
                )
            live = tombstones = 0
            for stored in bundle.rules:
                self._rules[stored.rule.id.rendered] = stored
                self._commit({"op": "rule", "doc": stored.to_document()})
                if stored.deleted:
                    tombstones += 1
                else:
                    live += 1
            return ImportReport(
                rules_imported=live,
                tombstones_imported=tombstones,
                templates_imported=len(bundle.templates),
                registry_imported=len(bundle.registry),
                replaced=populated and replace,
            )
