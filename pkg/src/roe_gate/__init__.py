"""roe-gate: a rules-of-engagement gatekeeper for automated intrusion response.

Sits between a response planner and its executor: every proposed
intermediate action is checked against an administrator-authored rule base
and replaced by the constrained final action. Unmatched actions are denied.
"""

from .core import (
    Constraint,
    IntermediateActionRequest,
    ManagedSystemTemplate,
    MetaTemplate,
    META_TEMPLATE,
    Rule,
    RuleId,
    RuleIdRegistry,
    RuleIdRegistryEntry,
    ScopeMatchKind,
    SourceKind,
    ValidationReport,
    register_action_id,
    restrictiveness_rank,
    validate_rule,
    validate_template,
)
from .dsl import (
    ParseDiagnostic,
    ParseResult,
    emit_rules,
    parse_rule_document,
    parse_rules,
    rule_to_document,
)
from .engine import (
    EvaluationOutput,
    FinalAction,
    HandlerRegistry,
    RuleSetSnapshot,
    apply_constraint,
    build_snapshot,
    evaluate,
    match_rule,
    resolve_conflict,
)
from .service import AuditRecord, Gateway, PendingConfirmation
from .store import ExportBundle, RuleStore, StoredRule

__version__ = "0.1.0"

__all__ = [
    "AuditRecord",
    "Constraint",
    "EvaluationOutput",
    "ExportBundle",
    "FinalAction",
    "Gateway",
    "HandlerRegistry",
    "IntermediateActionRequest",
    "ManagedSystemTemplate",
    "MetaTemplate",
    "META_TEMPLATE",
    "ParseDiagnostic",
    "ParseResult",
    "PendingConfirmation",
    "Rule",
    "RuleId",
    "RuleIdRegistry",
    "RuleIdRegistryEntry",
    "RuleSetSnapshot",
    "RuleStore",
    "ScopeMatchKind",
    "SourceKind",
    "StoredRule",
    "ValidationReport",
    "apply_constraint",
    "build_snapshot",
    "emit_rules",
    "evaluate",
    "match_rule",
    "parse_rule_document",
    "parse_rules",
    "register_action_id",
    "resolve_conflict",
    "restrictiveness_rank",
    "rule_to_document",
    "validate_rule",
    "validate_template",
]
