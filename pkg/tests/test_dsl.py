import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from roe_gate.case_studies import (
    NETWORK_RULES,
    RULE_TEXTS,
    WEB_RULES,
)
from roe_gate.core import Constraint, Rule, RuleId
from roe_gate.dsl import (
    BadConstraintError,
    MissingKeyError,
    UnknownKeyError,
    UnrepresentableCharacterError,
    emit_rules,
    parse_rule_document,
    parse_rules,
    rule_to_document,
)

ALL_BUNDLED_RULES = WEB_RULES + NETWORK_RULES

# The network demo as a rule author would actually type it: underscored
# names, tags on the headers, and the second rule missing its constraint
# metadata entirely.
TWO_RULE_TEXT = """
rule NET_L3_DDOS: NET_L3_DDOS {
    meta:
    created="10/23/202209:00:00"
    author="ANL"
    constraint="deny"
    alt_action="return CLOSED"

    strings:
    $source="*"
    $int_action="SYN"
    $scope="10.10.10.20"

    condition:
    $source
    and $int_action and $scope}
rule NET_L3_FW: NET_L3_FW {
    meta:
    created="10/23/202209:00:00"
    author="ANL"

    strings:
    $source="*"
    $int_action="ADD"
    $scope="10.10.10.20"

    condition:
    $source
    and $int_action and $scope}
"""


class TestParseRules:
    def test_web_delete_rule(self):
        rules, diagnostics = parse_rules(RULE_TEXTS["WEB-FE-XSS-1"])
        assert diagnostics == ()
        (rule,) = rules
        assert rule.id.rendered == "WEB-FE-XSS-1"
        assert rule.verb == "DELETE"
        assert rule.scope_pattern == "/"
        assert rule.constraint is Constraint.DENY
        assert rule.final_action == "return 404"
        assert rule.source_pattern == "any"  # "*" normalizes

    def test_empty_text(self):
        result = parse_rules("")
        assert result.rules == ()
        assert result.diagnostics == ()

    def test_two_rule_text_with_tags_and_missing_constraint(self):
        result = parse_rules(TWO_RULE_TEXT)
        assert [r.id.rendered for r in result.rules] == ["NET-L3-DDOS", "NET-L3-FW"]
        assert [r.scope_pattern for r in result.rules] == ["10.10.10.20", "10.10.10.20"]
        assert result.errors == ()
        # The missing constraint defaults toward deny, with a warning.
        assert result.rules[1].constraint is Constraint.DENY
        assert any("constraint" in d.message for d in result.warnings)

    def test_all_bundled_texts_parse_clean(self):
        for rule_id, text in RULE_TEXTS.items():
            result = parse_rules(text)
            assert result.diagnostics == (), rule_id
            assert result.rules[0].id.rendered == rule_id

    def test_parsed_texts_equal_bundled_rules(self):
        for rule in ALL_BUNDLED_RULES:
            result = parse_rules(
                RULE_TEXTS[rule.id.rendered],
                default_managed_system=rule.managed_system,
            )
            assert result.rules == (rule,)

    def test_malformed_block_is_skipped_not_fatal(self):
        text = "rule BAD-1 { meta: }\n" + RULE_TEXTS["NET-L3-DDOS"]
        result = parse_rules(text)
        assert [r.id.rendered for r in result.rules] == ["NET-L3-DDOS"]
        assert result.errors

    def test_unknown_meta_key_warns(self):
        text = RULE_TEXTS["WEB-FE-XSS-1"].replace(
            'author = "ANL"', 'author = "ANL"\n        severity = "high"'
        )
        result = parse_rules(text)
        assert result.errors == ()
        assert any("unknown meta key" in d.message for d in result.warnings)
        assert len(result.rules) == 1

    def test_wrong_condition_is_an_error(self):
        text = RULE_TEXTS["WEB-FE-XSS-1"].replace(
            "$source and $int_action and $scope", "$source and $scope and $int_action"
        )
        result = parse_rules(text)
        assert result.rules == ()
        assert result.errors

    def test_bad_constraint_token_is_an_error(self):
        text = RULE_TEXTS["WEB-FE-XSS-1"].replace('"deny"', '"blackhole"')
        result = parse_rules(text)
        assert result.rules == ()
        assert any("unknown constraint" in d.message for d in result.errors)

    def test_single_quoted_strings_and_comments(self):
        text = (
            "// block comment next\n"
            "/* spanning\n   two lines */\n"
            "rule APP-X-1 {\n"
            "    meta: constraint = 'allowWithLog'\n"
            "    strings:\n"
            "        $source = 'any'\n"
            "        $int_action = 'GET'\n"
            "        $scope = '/'\n"
            "    condition: $source and $int_action and $scope\n"
            "}\n"
        )
        result = parse_rules(text)
        assert result.diagnostics == ()
        assert result.rules[0].constraint is Constraint.ALLOW_WITH_LOG

    def test_escapes_in_strings(self):
        text = (
            "rule APP-X-2 {\n"
            '    meta: constraint = "deny" alt_action = "say \\"no\\""\n'
            "    strings:\n"
            '        $source = "a\\\\b"\n'
            '        $int_action = "GET"\n'
            '        $scope = "/tab\\there"\n'
            "    condition: $source and $int_action and $scope\n"
            "}\n"
        )
        result = parse_rules(text)
        assert result.errors == ()
        rule = result.rules[0]
        assert rule.final_action == 'say "no"'
        assert rule.source_pattern == "a\\b"
        assert rule.scope_pattern == "/tab\there"

    def test_garbage_never_raises(self):
        for garbage in ("}{{{", "rule", 'rule X "', "rule A-B { meta:", "\x00\x01"):
            result = parse_rules(garbage)
            assert result.rules == ()
            assert result.errors


class TestEmitRules:
    def test_emit_empty(self):
        assert emit_rules([]) == ""

    def test_round_trip_bundled_rules(self):
        text = emit_rules(list(ALL_BUNDLED_RULES))
        result = parse_rules(text)
        assert result.diagnostics == ()
        assert result.rules == ALL_BUNDLED_RULES

    def test_emit_then_parse_single_rule(self):
        rule = WEB_RULES[1]
        reparsed, diagnostics = parse_rules(emit_rules([rule]))
        assert diagnostics == ()
        assert reparsed == (rule,)

    def test_unrepresentable_character(self):
        rule = Rule(
            id=RuleId.parse("APP-X-3"),
            source_pattern="any",
            verb="GET",
            scope_pattern="/a\x07b",
            constraint=Constraint.DENY,
            final_action="return 404",
        )
        with pytest.raises(UnrepresentableCharacterError):
            emit_rules([rule])


_ID_TOKENS = st.text(alphabet="ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789", min_size=1, max_size=4)
_SAFE_TEXT = st.text(
    alphabet=st.characters(blacklist_categories=("Cc", "Cs")), max_size=12
)
_VERBS = st.sampled_from(("GET", "POST", "PUT", "DELETE", "SYN", "ADD", "read", "delete"))
_SCOPES = st.sampled_from(("/", "/admin", "/users/admin", "10.10.10.20", "10.0.0.0/8"))
_SOURCES = st.sampled_from(("any", "1.2.3.4", r"[a-z]+", 'sr"c', "a\\b"))


@st.composite
def generated_rules(draw):
    constraint = draw(st.sampled_from(Constraint))
    if constraint is Constraint.DENY:
        final_action = draw(st.sampled_from(("return 404", "return CLOSED", "refuse")))
    elif constraint is Constraint.ALLOW:
        final_action = ""
    else:
        final_action = draw(st.sampled_from(("", "flagged")))
    return Rule(
        id=RuleId(draw(_ID_TOKENS), tuple(draw(st.lists(_ID_TOKENS, min_size=1, max_size=3)))),
        source_pattern=draw(_SOURCES),
        verb=draw(_VERBS),
        scope_pattern=draw(_SCOPES),
        constraint=constraint,
        final_action=final_action,
        handler=draw(st.sampled_from((None, "escalate", "notify"))),
        managed_system=draw(st.sampled_from(("", "web", "network"))),
        created=draw(_SAFE_TEXT),
        author=draw(_SAFE_TEXT),
    )


@settings(max_examples=200)
@given(st.lists(generated_rules(), max_size=6))
def test_round_trip_property(rules):
    text = emit_rules(rules)
    result = parse_rules(text)
    assert result.errors == ()
    assert result.rules == tuple(rules)


class TestRuleDocuments:
    def test_web_rule_document(self):
        rule = parse_rule_document(
            {
                "r_id": "WEB-FE-XSS-1",
                "r_s": "any",
                "r_v": "DELETE",
                "r_scope": "/",
                "r_c": "deny",
                "r_a": "return 404",
            }
        )
        assert rule.id.rendered == "WEB-FE-XSS-1"
        assert rule.constraint is Constraint.DENY
        assert rule.final_action == "return 404"

    def test_network_rule_document(self):
        rule = parse_rule_document(
            json.dumps(
                {
                    "r_id": "NET-L3-DDOS",
                    "r_s": "any",
                    "r_v": "SYN",
                    "r_scope": "10.10.10.20",
                    "r_c": "deny",
                    "r_a": "return CLOSED",
                }
            )
        )
        assert rule.scope_pattern == "10.10.10.20"
        assert rule.final_action == "return CLOSED"

    def test_missing_constraint_key(self):
        doc = {"r_id": "A-B", "r_s": "any", "r_v": "GET", "r_scope": "/", "r_a": ""}
        with pytest.raises(MissingKeyError) as excinfo:
            parse_rule_document(doc)
        assert excinfo.value.key == "r_c"

    def test_unknown_key(self):
        doc = {
            "r_id": "A-B", "r_s": "any", "r_v": "GET", "r_scope": "/",
            "r_c": "allow", "r_a": "", "priority": "1",
        }
        with pytest.raises(UnknownKeyError):
            parse_rule_document(doc)

    def test_bad_constraint(self):
        doc = {
            "r_id": "A-B", "r_s": "any", "r_v": "GET", "r_scope": "/",
            "r_c": "maybe", "r_a": "",
        }
        with pytest.raises(BadConstraintError):
            parse_rule_document(doc)

    def test_star_source_normalizes(self):
        doc = {
            "r_id": "A-B", "r_s": "*", "r_v": "GET", "r_scope": "/",
            "r_c": "allow", "r_a": "",
        }
        assert parse_rule_document(doc).source_pattern == "any"

    def test_document_round_trip(self):
        for rule in ALL_BUNDLED_RULES:
            assert parse_rule_document(rule_to_document(rule)) == rule
