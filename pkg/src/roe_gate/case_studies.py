"""Bundled demonstration systems.

Two managed systems ship with the harness: a web application whose verbs
are HTTP methods and whose standard refusal is a 404, and a network
infrastructure fabric whose verbs are TCP state-transition tokens and whose
standard refusal closes the connection. Each carries two deny rules and two
canned planner inputs with the outputs they must produce.
"""

from __future__ import annotations

from dataclasses import dataclass

from .core import (
    Constraint,
    ManagedSystemTemplate,
    Rule,
    RuleId,
    ScopeMatchKind,
    SourceKind,
)

RULE_CREATED = "10/23/2022 09:00:00"
RULE_AUTHOR = "ANL"

WEB_TEMPLATE = ManagedSystemTemplate(
    id="web",
    verb_vocabulary={
        "create": ("POST",),
        "read": ("GET",),
        "update": ("PUT",),
        "delete": ("DELETE",),
    },
    source_kinds=(SourceKind.IP, SourceKind.ANY),
    scope_match_kind=ScopeMatchKind.PATH_PREFIX,
    standard_deny_action="return 404",
)

NETWORK_TEMPLATE = ManagedSystemTemplate(
    id="network",
    verb_vocabulary={
        "create": ("SYN", "ADD"),
        "delete": ("CLOSED", "FIN"),
    },
    source_kinds=(SourceKind.IP, SourceKind.ANY),
    scope_match_kind=ScopeMatchKind.IP_OR_CIDR,
    standard_deny_action="return CLOSED",
)

# A plain file-system flavored template used by scenario files exercising
# path conflicts.
FILE_TEMPLATE = ManagedSystemTemplate(
    id="file",
    verb_vocabulary={
        "create": ("create",),
        "read": ("read",),
        "update": ("update",),
        "delete": ("delete",),
    },
    source_kinds=(SourceKind.USERNAME, SourceKind.IP, SourceKind.ANY),
    scope_match_kind=ScopeMatchKind.PATH_PREFIX,
    standard_deny_action="Permission Denied",
)

TEMPLATES = {t.id: t for t in (WEB_TEMPLATE, NETWORK_TEMPLATE, FILE_TEMPLATE)}

WEB_RULES = (
    Rule(
        id=RuleId.parse("WEB-FE-XSS-1"),
        source_pattern="any",
        verb="DELETE",
        scope_pattern="/",
        constraint=Constraint.DENY,
        final_action="return 404",
        managed_system="web",
        created=RULE_CREATED,
        author=RULE_AUTHOR,
    ),
    Rule(
        id=RuleId.parse("WEB-FE-XSS-2"),
        source_pattern="any",
        verb="GET",
        scope_pattern="/admin",
        constraint=Constraint.DENY,
        final_action="return 404",
        managed_system="web",
        created=RULE_CREATED,
        author=RULE_AUTHOR,
    ),
)

NETWORK_RULES = (
    Rule(
        id=RuleId.parse("NET-L3-DDOS"),
        source_pattern="any",
        verb="SYN",
        scope_pattern="10.10.10.20",
        constraint=Constraint.DENY,
        final_action="return CLOSED",
        managed_system="network",
        created=RULE_CREATED,
        author=RULE_AUTHOR,
    ),
    Rule(
        id=RuleId.parse("NET-L3-FW"),
        source_pattern="any",
        verb="ADD",
        scope_pattern="10.10.10.10",
        constraint=Constraint.DENY,
        final_action="return CLOSED",
        managed_system="network",
        created=RULE_CREATED,
        author=RULE_AUTHOR,
    ),
)

# The same four rules in the block text format, as a rule file would carry
# them (without the routing key, which the loader supplies).
RULE_TEXTS = {
    "WEB-FE-XSS-1": (
        'rule WEB-FE-XSS-1 {\n'
        '    meta:\n'
        f'        created = "{RULE_CREATED}"\n'
        f'        author = "{RULE_AUTHOR}"\n'
        '        constraint = "deny"\n'
        '        alt_action = "return 404"\n'
        '    strings:\n'
        '        $source = "*"\n'
        '        $int_action = "DELETE"\n'
        '        $scope = "/"\n'
        '    condition:\n'
        '        $source and $int_action and $scope\n'
        '}\n'
    ),
    "WEB-FE-XSS-2": (
        'rule WEB-FE-XSS-2 {\n'
        '    meta:\n'
        f'        created = "{RULE_CREATED}"\n'
        f'        author = "{RULE_AUTHOR}"\n'
        '        constraint = "deny"\n'
        '        alt_action = "return 404"\n'
        '    strings:\n'
        '        $source = "*"\n'
        '        $int_action = "GET"\n'
        '        $scope = "/admin"\n'
        '    condition:\n'
        '        $source and $int_action and $scope\n'
        '}\n'
    ),
    "NET-L3-DDOS": (
        'rule NET-L3-DDOS {\n'
        '    meta:\n'
        f'        created = "{RULE_CREATED}"\n'
        f'        author = "{RULE_AUTHOR}"\n'
        '        constraint = "deny"\n'
        '        alt_action = "return CLOSED"\n'
        '    strings:\n'
        '        $source = "*"\n'
        '        $int_action = "SYN"\n'
        '        $scope = "10.10.10.20"\n'
        '    condition:\n'
        '        $source and $int_action and $scope\n'
        '}\n'
    ),
    "NET-L3-FW": (
        'rule NET-L3-FW {\n'
        '    meta:\n'
        f'        created = "{RULE_CREATED}"\n'
        f'        author = "{RULE_AUTHOR}"\n'
        '        constraint = "deny"\n'
        '        alt_action = "return CLOSED"\n'
        '    strings:\n'
        '        $source = "*"\n'
        '        $int_action = "ADD"\n'
        '        $scope = "10.10.10.10"\n'
        '    condition:\n'
        '        $source and $int_action and $scope\n'
        '}\n'
    ),
}


@dataclass(frozen=True)
class CaseStudy:
    number: int
    template: ManagedSystemTemplate
    rules: tuple[Rule, ...]
    inputs: tuple[dict, ...]
    expected: tuple[tuple[str, ...], ...]


CASE_STUDIES = {
    1: CaseStudy(
        number=1,
        template=WEB_TEMPLATE,
        rules=WEB_RULES,
        inputs=(
            {"IRS_ia": "DELETE", "IRS_s": "1.2.3.4", "IRS_t": "/products"},
            {"IRS_ia": "GET", "IRS_s": "1.2.3.4", "IRS_t": "/admin/user"},
        ),
        expected=(("404",), ("404",)),
    ),
    2: CaseStudy(
        number=2,
        template=NETWORK_TEMPLATE,
        rules=NETWORK_RULES,
        inputs=(
            {"IRS_ia": "SYN", "IRS_s": "1.2.3.4", "IRS_t": "10.10.10.20"},
            {"IRS_ia": "ADD", "IRS_s": "1.2.3.4", "IRS_t": "10.10.10.10"},
        ),
        expected=(("CLOSED",), ("CLOSED",)),
    ),
}

# A two-rule path conflict on a file-flavored system: the broader deny must
# beat the narrower allow, so the delete under /users/admin is refused.
CONFLICT_SCENARIO = {
    "name": "deny-beats-allow-on-path-overlap",
    "templates": [FILE_TEMPLATE.to_document()],
    "rules": [
        {
            "r_id": "FS-USERS-1",
            "r_s": "any",
            "r_v": "delete",
            "r_scope": "/users",
            "r_c": "deny",
            "r_a": "Permission Denied",
            "managed_system": "file",
        },
        {
            "r_id": "FS-USERS-2",
            "r_s": "any",
            "r_v": "delete",
            "r_scope": "/users/admin",
            "r_c": "allow",
            "r_a": "",
            "managed_system": "file",
        },
    ],
    "requests": [
        {"IRS_ia": "delete", "IRS_s": "1.2.3.4", "IRS_t": "/users/admin"},
    ],
    "expected": [["Permission Denied"]],
}
