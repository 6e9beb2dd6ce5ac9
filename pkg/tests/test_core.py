import dataclasses
from itertools import combinations, product

import pytest

from roe_gate.case_studies import NETWORK_TEMPLATE, WEB_RULES, WEB_TEMPLATE
from roe_gate.core import (
    Constraint,
    DuplicateIdError,
    IntermediateActionRequest,
    MalformedInputError,
    ManagedSystemTemplate,
    META_TEMPLATE,
    Rule,
    RuleId,
    RuleIdRegistry,
    RuleIdRegistryEntry,
    ScopeMatchKind,
    SourceKind,
    register_action_id,
    restrictiveness_rank,
    validate_rule,
    validate_template,
)
from roe_gate.dsl import parse_rule_document, rule_to_document


class TestConstraint:
    def test_deny_outranks_allow(self):
        assert restrictiveness_rank(Constraint.DENY) > restrictiveness_rank(Constraint.ALLOW)

    def test_extreme_ranks(self):
        assert restrictiveness_rank(Constraint.ALLOW) == 0
        assert restrictiveness_rank(Constraint.DENY) == 3

    def test_all_pairs_strictly_ordered(self):
        # Exhaustive: every unordered pair of the four constraints compares
        # strictly one way or the other.
        pairs = list(combinations(Constraint, 2))
        assert len(pairs) == 6
        for a, b in pairs:
            assert restrictiveness_rank(a) != restrictiveness_rank(b)

    def test_rank_antisymmetric_and_transitive(self):
        for a, b in product(Constraint, Constraint):
            if restrictiveness_rank(a) < restrictiveness_rank(b):
                assert not restrictiveness_rank(b) < restrictiveness_rank(a)
        for a, b, c in product(Constraint, repeat=3):
            if (
                restrictiveness_rank(a) < restrictiveness_rank(b)
                and restrictiveness_rank(b) < restrictiveness_rank(c)
            ):
                assert restrictiveness_rank(a) < restrictiveness_rank(c)

    def test_parse_tokens_case_insensitive(self):
        assert Constraint.parse("deny") is Constraint.DENY
        assert Constraint.parse("ALLOWWITHLOG") is Constraint.ALLOW_WITH_LOG
        assert Constraint.parse("requireConfirmation") is Constraint.REQUIRE_CONFIRMATION
        with pytest.raises(ValueError):
            Constraint.parse("block")


class TestRuleId:
    def test_parse_and_render(self):
        rule_id = RuleId.parse("WEB-FE-XSS-1")
        assert rule_id.category == "WEB"
        assert rule_id.subcategories == ("FE", "XSS", "1")
        assert rule_id.rendered == "WEB-FE-XSS-1"
        assert rule_id.well_formed

    def test_underscores_normalize_to_hyphens(self):
        assert RuleId.parse("NET_L3_DDOS").rendered == "NET-L3-DDOS"

    def test_single_token_rejected(self):
        with pytest.raises(ValueError):
            RuleId.parse("WEBFE")

    def test_lowercase_parses_but_is_not_well_formed(self):
        assert not RuleId.parse("web-fe-1").well_formed


class TestRegistry:
    def test_register_two_entries(self):
        registry = RuleIdRegistry()
        register_action_id(
            RuleIdRegistryEntry(RuleId.parse("NET-L4-DDOS"), "DDos Attack."), registry
        )
        assert len(registry) == 1
        register_action_id(
            RuleIdRegistryEntry(RuleId.parse("WEB-FE-SQL"), "Layer 7 SQL Injection."),
            registry,
        )
        assert len(registry) == 2
        assert "NET-L4-DDOS" in registry

    def test_duplicate_id_rejected(self):
        registry = RuleIdRegistry()
        entry = RuleIdRegistryEntry(RuleId.parse("NET-L4-DDOS"), "DDos Attack.")
        register_action_id(entry, registry)
        with pytest.raises(DuplicateIdError):
            register_action_id(entry, registry)

    def test_covers_accepts_prefixes(self):
        registry = RuleIdRegistry()
        registry.register(RuleIdRegistryEntry(RuleId.parse("WEB-FE-XSS"), "XSS"))
        assert registry.covers(RuleId.parse("WEB-FE-XSS-1"))
        assert not registry.covers(RuleId.parse("NET-L3-DDOS"))


class TestValidateRule:
    def test_bundled_web_rule_is_ok(self):
        report = validate_rule(WEB_RULES[0], WEB_TEMPLATE)
        assert report.ok
        assert report.describe() == "ok"

    def test_verb_outside_vocabulary(self):
        rule = dataclasses.replace(WEB_RULES[0], verb="SYN")
        report = validate_rule(rule, WEB_TEMPLATE)
        assert not report.ok
        assert [v.slot for v in report.violations] == ["verb"]

    def test_lowercase_id_violates_grammar(self):
        rule = dataclasses.replace(WEB_RULES[0], id=RuleId.parse("web-fe-1"))
        report = validate_rule(rule, WEB_TEMPLATE)
        assert any(v.slot == "id" for v in report.violations)

    def test_allow_must_not_carry_final_action(self):
        rule = dataclasses.replace(
            WEB_RULES[1], constraint=Constraint.ALLOW, final_action="return 200"
        )
        report = validate_rule(rule, WEB_TEMPLATE)
        assert any(v.slot == "final_action" for v in report.violations)

    def test_deny_must_carry_final_action(self):
        rule = dataclasses.replace(WEB_RULES[1], final_action="")
        report = validate_rule(rule, WEB_TEMPLATE)
        assert any(v.slot == "final_action" for v in report.violations)

    def test_unknown_handler_fails_at_validation(self):
        rule = dataclasses.replace(WEB_RULES[0], handler="quarantine")
        report = validate_rule(rule, WEB_TEMPLATE, handlers=set())
        assert any(v.slot == "handler" for v in report.violations)
        assert validate_rule(rule, WEB_TEMPLATE, handlers={"quarantine"}).ok

    def test_registry_coverage_is_optional_but_enforced_when_given(self):
        registry = RuleIdRegistry()
        registry.register(RuleIdRegistryEntry(RuleId.parse("WEB-FE-XSS"), "XSS"))
        assert validate_rule(WEB_RULES[0], WEB_TEMPLATE, registry).ok
        other = RuleIdRegistry()
        other.register(RuleIdRegistryEntry(RuleId.parse("NET-L4-DDOS"), "DDoS"))
        report = validate_rule(WEB_RULES[0], WEB_TEMPLATE, other)
        assert any(v.slot == "id" for v in report.violations)

    def test_validation_stable_across_serialization(self):
        for rule in WEB_RULES:
            assert validate_rule(rule, WEB_TEMPLATE).ok
            reparsed = parse_rule_document(rule_to_document(rule))
            assert validate_rule(reparsed, WEB_TEMPLATE).ok
            assert reparsed == rule


class TestTemplates:
    def test_bundled_templates_conform_to_meta_template(self):
        assert validate_template(WEB_TEMPLATE) == []
        assert validate_template(NETWORK_TEMPLATE) == []

    def test_meta_template_has_seven_slots(self):
        assert META_TEMPLATE.slot_names() == (
            "id", "source", "verb", "scope", "constraint", "final_action", "handler",
        )

    def test_unknown_verb_kind(self):
        template = dataclasses.replace(
            WEB_TEMPLATE, verb_vocabulary={"browse": ("GET",)}
        )
        assert any("unknown verb kind" in p for p in validate_template(template))

    def test_duplicate_verb_tokens(self):
        template = dataclasses.replace(
            WEB_TEMPLATE, verb_vocabulary={"create": ("POST",), "update": ("POST",)}
        )
        assert any("duplicate verb token" in p for p in validate_template(template))

    def test_empty_deny_action(self):
        template = dataclasses.replace(WEB_TEMPLATE, standard_deny_action="")
        assert any("deny action" in p for p in validate_template(template))

    def test_document_round_trip(self):
        doc = NETWORK_TEMPLATE.to_document()
        assert ManagedSystemTemplate.from_document(doc) == NETWORK_TEMPLATE
        assert doc["scope_match_kind"] == ScopeMatchKind.IP_OR_CIDR.value
        assert "IP" in doc["source_kinds"]


class TestFieldCoverage:
    def test_rule_carries_the_seven_slots(self):
        names = {f.name for f in dataclasses.fields(Rule)}
        assert {
            "id", "source_pattern", "verb", "scope_pattern",
            "constraint", "final_action", "handler",
        } <= names

    def test_request_carries_the_input_triple(self):
        names = {f.name for f in dataclasses.fields(IntermediateActionRequest)}
        assert {"ia", "s", "t"} <= names


class TestIntermediateActionRequest:
    def test_from_wire(self):
        request = IntermediateActionRequest.from_wire(
            {"IRS_ia": "DELETE", "IRS_s": "1.2.3.4", "IRS_t": "/products"},
            default_managed_system="web",
        )
        assert (request.ia, request.s, request.t) == ("DELETE", "1.2.3.4", "/products")
        assert request.managed_system == "web"
        assert request.echo() == {
            "IRS_ia": "DELETE", "IRS_s": "1.2.3.4", "IRS_t": "/products",
        }

    def test_explicit_managed_system_wins_over_default(self):
        request = IntermediateActionRequest.from_wire(
            {"IRS_ia": "GET", "IRS_s": "x", "IRS_t": "/a", "managed_system": "network"},
            default_managed_system="web",
        )
        assert request.managed_system == "network"

    @pytest.mark.parametrize("missing", ["IRS_ia", "IRS_s", "IRS_t"])
    def test_missing_key_rejected(self, missing):
        body = {"IRS_ia": "GET", "IRS_s": "1.2.3.4", "IRS_t": "/a"}
        del body[missing]
        with pytest.raises(MalformedInputError):
            IntermediateActionRequest.from_wire(body)

    def test_empty_field_rejected(self):
        with pytest.raises(MalformedInputError):
            IntermediateActionRequest(ia="", s="1.2.3.4", t="/a")

    def test_source_kind_tokens(self):
        assert SourceKind.parse("ip") is SourceKind.IP
        assert SourceKind.parse("any") is SourceKind.ANY
