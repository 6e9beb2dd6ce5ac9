"""Brute-force reference evaluation used to cross-check the engine.

Deliberately re-derives matching, conflict resolution, and action
rendering from first principles: every rule is tested independently and
the winner picked with an explicit pairwise comparator. Shares only the
data types with the package under test.
"""

from __future__ import annotations

import ipaddress
import re

from roe_gate.core import IntermediateActionRequest, ManagedSystemTemplate, Rule

_RANK = {"allow": 0, "allowWithLog": 1, "requireConfirmation": 2, "deny": 3}
_FALLBACK_DENY = "denied"
_PENDING = "pending-confirmation"

_regex_cache: dict[str, re.Pattern] = {}


def _regex(pattern: str) -> re.Pattern:
    compiled = _regex_cache.get(pattern)
    if compiled is None:
        compiled = re.compile(pattern)
        _regex_cache[pattern] = compiled
    return compiled


def _matches(request: IntermediateActionRequest, rule: Rule,
             template: ManagedSystemTemplate) -> bool:
    if rule.verb != request.ia:
        return False
    if rule.source_pattern not in ("any", "*"):
        if _regex(rule.source_pattern).fullmatch(request.s) is None:
            return False
    kind = template.scope_match_kind.value
    if kind == "path-prefix":
        scope, target = rule.scope_pattern, request.t
        if target == scope:
            return True
        if not target.startswith(scope):
            return False
        return scope.endswith("/") or target[len(scope)] == "/"
    if kind == "ip-or-cidr":
        try:
            network = ipaddress.ip_network(rule.scope_pattern, strict=False)
        except ValueError:
            return False
        try:
            return ipaddress.ip_address(request.t) in network
        except ValueError:
            pass
        except TypeError:
            return False
        try:
            return ipaddress.ip_network(request.t, strict=False).subnet_of(network)
        except (ValueError, TypeError):
            return False
    return _regex(rule.scope_pattern).fullmatch(request.t) is not None


def _beats(challenger: Rule, incumbent: Rule) -> bool:
    left = _RANK[challenger.constraint.value]
    right = _RANK[incumbent.constraint.value]
    if left != right:
        return left > right
    if len(challenger.scope_pattern) != len(incumbent.scope_pattern):
        return len(challenger.scope_pattern) > len(incumbent.scope_pattern)
    return challenger.id.rendered < incumbent.id.rendered


def _strip(action: str) -> str:
    return action[len("return "):] if action.lower().startswith("return ") else action


def _action_for(rule: Rule, request: IntermediateActionRequest,
                template: ManagedSystemTemplate) -> str:
    token = rule.constraint.value
    if token in ("allow", "allowWithLog"):
        return request.ia
    if token == "requireConfirmation":
        return _PENDING
    return _strip(rule.final_action or template.standard_deny_action)


def oracle_evaluate(
    request: IntermediateActionRequest,
    rules: list[Rule] | tuple[Rule, ...],
    templates: dict[str, ManagedSystemTemplate],
) -> tuple[tuple[str, ...], str | None]:
    """Returns (actions, matched rule id) the way a naive re-implementation would."""
    template = templates.get(request.managed_system)
    if template is None:
        return (_FALLBACK_DENY,), None
    matched = [
        rule for rule in rules
        if rule.managed_system == request.managed_system
        and _matches(request, rule, template)
    ]
    if not matched:
        return (_strip(template.standard_deny_action),), None
    best = matched[0]
    for rule in matched[1:]:
        if _beats(rule, best):
            best = rule
    return (_action_for(best, request, template),), best.id.rendered
