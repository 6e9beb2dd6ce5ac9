"""Rule text formats.

Two interchangeable representations of a rule:

* a restricted YARA-style block grammar::

      rule NAME (":" TAG)? "{"
          meta:      (KEY = STRING)+
          strings:   $source = STRING  $int_action = STRING  $scope = STRING
          condition: $source and $int_action and $scope
      "}"

  The match side lives in the three named strings, the consequence side in
  the ``constraint`` / ``alt_action`` / ``handler`` meta keys.

* a flat document with keys ``r_id, r_s, r_v, r_scope, r_c, r_a`` plus the
  optional ``r_h``, ``managed_system``, ``created``, ``author``.

Parsing is total: malformed blocks produce diagnostics, never faults.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Iterator, Mapping

from .core import Constraint, Rule, RuleId

SEVERITY_ERROR = "error"
SEVERITY_WARNING = "warning"

_META_KEYS = ("created", "author", "constraint", "alt_action", "handler", "managed_system")
_STRING_VARS = ("$source", "$int_action", "$scope")

_REQUIRED_DOC_KEYS = ("r_id", "r_s", "r_v", "r_scope", "r_c", "r_a")
_OPTIONAL_DOC_KEYS = ("r_h", "managed_system", "created", "author")


class DocumentError(ValueError):
    """A rule document cannot be mapped onto a rule."""


class MissingKeyError(DocumentError):
    def __init__(self, key: str):
        self.key = key
        super().__init__(f"missing key {key!r}")


class UnknownKeyError(DocumentError):
    def __init__(self, key: str):
        self.key = key
        super().__init__(f"unknown key {key!r}")


class BadConstraintError(DocumentError):
    def __init__(self, value: object):
        self.value = value
        super().__init__(f"bad constraint {value!r}")


class UnrepresentableCharacterError(ValueError):
    """A pattern contains a character the rule text format cannot carry."""


@dataclass(frozen=True)
class ParseDiagnostic:
    line: int
    column: int
    message: str
    severity: str = SEVERITY_ERROR


@dataclass(frozen=True)
class ParseResult:
    rules: tuple[Rule, ...]
    diagnostics: tuple[ParseDiagnostic, ...]

    @property
    def errors(self) -> tuple[ParseDiagnostic, ...]:
        return tuple(d for d in self.diagnostics if d.severity == SEVERITY_ERROR)

    @property
    def warnings(self) -> tuple[ParseDiagnostic, ...]:
        return tuple(d for d in self.diagnostics if d.severity == SEVERITY_WARNING)

    def __iter__(self) -> Iterator:
        # Allows ``rules, diagnostics = parse_rules(text)``.
        return iter((self.rules, self.diagnostics))


@dataclass(frozen=True)
class _Token:
    kind: str  # NAME | VAR | STRING | PUNCT | EOF
    text: str
    line: int
    column: int


_NAME_RE = re.compile(r"[A-Za-z0-9_][A-Za-z0-9_-]*")
_VAR_RE = re.compile(r"\$[A-Za-z_][A-Za-z0-9_]*")
_ESCAPES = {"\\": "\\", '"': '"', "'": "'", "n": "\n", "r": "\r", "t": "\t"}
_UNESCAPES = {"\\": "\\\\", '"': '\\"', "\n": "\\n", "\r": "\\r", "\t": "\\t"}


class _Lexer:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.line = 1
        self.column = 1
        self.diagnostics: list[ParseDiagnostic] = []

    def _advance(self, count: int) -> None:
        chunk = self.text[self.pos : self.pos + count]
        newlines = chunk.count("\n")
        if newlines:
            self.line += newlines
            self.column = count - chunk.rfind("\n")
        else:
            self.column += count
        self.pos += count

    def _diag(self, message: str, severity: str = SEVERITY_ERROR) -> None:
        self.diagnostics.append(ParseDiagnostic(self.line, self.column, message, severity))

    def _skip_trivia(self) -> None:
        while self.pos < len(self.text):
            ch = self.text[self.pos]
            if ch in " \t\r\n":
                self._advance(1)
            elif self.text.startswith("//", self.pos):
                end = self.text.find("\n", self.pos)
                self._advance((end if end != -1 else len(self.text)) - self.pos)
            elif self.text.startswith("/*", self.pos):
                end = self.text.find("*/", self.pos + 2)
                if end == -1:
                    self._diag("unterminated comment")
                    self._advance(len(self.text) - self.pos)
                else:
                    self._advance(end + 2 - self.pos)
            else:
                return

    def _string(self) -> _Token:
        quote = self.text[self.pos]
        line, column = self.line, self.column
        self._advance(1)
        parts: list[str] = []
        while self.pos < len(self.text):
            ch = self.text[self.pos]
            if ch == quote:
                self._advance(1)
                return _Token("STRING", "".join(parts), line, column)
            if ch == "\n":
                break
            if ch == "\\":
                escape = self.text[self.pos + 1 : self.pos + 2]
                if escape in _ESCAPES:
                    parts.append(_ESCAPES[escape])
                    self._advance(2)
                    continue
                self._diag(f"unknown escape '\\{escape}'", SEVERITY_WARNING)
                parts.append(escape)
                self._advance(2)
                continue
            parts.append(ch)
            self._advance(1)
        self._diag("unterminated string")
        return _Token("STRING", "".join(parts), line, column)

    def tokens(self) -> list[_Token]:
        out: list[_Token] = []
        while True:
            self._skip_trivia()
            if self.pos >= len(self.text):
                out.append(_Token("EOF", "", self.line, self.column))
                return out
            ch = self.text[self.pos]
            line, column = self.line, self.column
            if ch in "{}:=":
                out.append(_Token("PUNCT", ch, line, column))
                self._advance(1)
            elif ch in "\"'":
                out.append(self._string())
            elif ch == "$":
                match = _VAR_RE.match(self.text, self.pos)
                if match:
                    out.append(_Token("VAR", match.group(), line, column))
                    self._advance(len(match.group()))
                else:
                    self._diag("stray '$'")
                    self._advance(1)
            else:
                match = _NAME_RE.match(self.text, self.pos)
                if match:
                    out.append(_Token("NAME", match.group(), line, column))
                    self._advance(len(match.group()))
                else:
                    self._diag(f"unexpected character {ch!r}")
                    self._advance(1)


class _ParseAbort(Exception):
    def __init__(self, diagnostic: ParseDiagnostic):
        self.diagnostic = diagnostic


class _Parser:
    def __init__(self, tokens: list[_Token], diagnostics: list[ParseDiagnostic],
                 default_managed_system: str):
        self.tokens = tokens
        self.pos = 0
        self.diagnostics = diagnostics
        self.default_managed_system = default_managed_system

    def _peek(self, ahead: int = 0) -> _Token:
        return self.tokens[min(self.pos + ahead, len(self.tokens) - 1)]

    def _next(self) -> _Token:
        token = self._peek()
        if token.kind != "EOF":
            self.pos += 1
        return token

    def _abort(self, token: _Token, message: str) -> "_ParseAbort":
        return _ParseAbort(ParseDiagnostic(token.line, token.column, message))

    def _expect(self, kind: str, text: str | None = None, what: str | None = None) -> _Token:
        token = self._peek()
        if token.kind != kind or (text is not None and token.text != text):
            wanted = what or (text if text is not None else kind.lower())
            found = token.text or "end of input"
            raise self._abort(token, f"expected {wanted}, found {found!r}")
        return self._next()

    def _warn(self, token: _Token, message: str) -> None:
        self.diagnostics.append(
            ParseDiagnostic(token.line, token.column, message, SEVERITY_WARNING)
        )

    def _recover(self) -> None:
        # Skip to the next plausible rule header at brace depth zero.
        depth = 0
        while True:
            token = self._peek()
            if token.kind == "EOF":
                return
            if token.kind == "NAME" and token.text == "rule" and depth <= 0:
                return
            self._next()
            if token.kind == "PUNCT" and token.text == "{":
                depth += 1
            elif token.kind == "PUNCT" and token.text == "}":
                depth -= 1

    def parse(self) -> list[Rule]:
        rules: list[Rule] = []
        while self._peek().kind != "EOF":
            token = self._peek()
            if not (token.kind == "NAME" and token.text == "rule"):
                self.diagnostics.append(
                    ParseDiagnostic(
                        token.line,
                        token.column,
                        f"expected 'rule', found {token.text!r}",
                    )
                )
                self._next()
                self._recover()
                continue
            try:
                rule = self._rule_block()
            except _ParseAbort as abort:
                self.diagnostics.append(abort.diagnostic)
                self._recover()
                continue
            if rule is not None:
                rules.append(rule)
        return rules

    def _rule_block(self) -> Rule | None:
        self._expect("NAME", "rule")
        name = self._expect("NAME", what="rule name")
        if self._peek().kind == "PUNCT" and self._peek().text == ":":
            self._next()
            self._expect("NAME", what="rule tag")
        self._expect("PUNCT", "{")
        meta = self._meta_section()
        strings = self._strings_section()
        self._condition_section()
        self._expect("PUNCT", "}")
        return self._build_rule(name, meta, strings)

    def _meta_section(self) -> dict[str, tuple[_Token, str]]:
        self._expect("NAME", "meta")
        self._expect("PUNCT", ":")
        entries: dict[str, tuple[_Token, str]] = {}
        while self._peek().kind == "NAME" and self._peek(1).text == "=":
            key = self._next()
            self._next()  # "="
            value = self._expect("STRING", what="a quoted value")
            if key.text not in _META_KEYS:
                self._warn(key, f"unknown meta key {key.text!r} ignored")
                continue
            if key.text in entries:
                self._warn(key, f"duplicate meta key {key.text!r}; last value wins")
            entries[key.text] = (key, value.text)
        if not entries:
            raise self._abort(self._peek(), "meta section needs at least one key")
        return entries

    def _strings_section(self) -> dict[str, str]:
        self._expect("NAME", "strings")
        self._expect("PUNCT", ":")
        values: dict[str, str] = {}
        for expected in _STRING_VARS:
            var = self._expect("VAR", what=expected)
            if var.text != expected:
                raise self._abort(var, f"expected {expected}, found {var.text!r}")
            self._expect("PUNCT", "=")
            value = self._expect("STRING", what="a quoted pattern")
            values[expected] = value.text
        return values

    def _condition_section(self) -> None:
        self._expect("NAME", "condition")
        self._expect("PUNCT", ":")
        for index, expected in enumerate(_STRING_VARS):
            if index:
                self._expect("NAME", "and")
            var = self._expect("VAR", what=expected)
            if var.text != expected:
                raise self._abort(var, f"condition must name {expected}, found {var.text!r}")

    def _build_rule(
        self,
        name: _Token,
        meta: dict[str, tuple[_Token, str]],
        strings: dict[str, str],
    ) -> Rule | None:
        try:
            rule_id = RuleId.parse(name.text)
        except ValueError as exc:
            self.diagnostics.append(ParseDiagnostic(name.line, name.column, str(exc)))
            return None
        constraint_entry = meta.get("constraint")
        if constraint_entry is None:
            self._warn(name, "no constraint metadata; defaulting to deny")
            constraint = Constraint.DENY
        else:
            token, value = constraint_entry
            try:
                constraint = Constraint.parse(value)
            except ValueError as exc:
                self.diagnostics.append(ParseDiagnostic(token.line, token.column, str(exc)))
                return None

        def meta_value(key: str, default: str = "") -> str:
            entry = meta.get(key)
            return entry[1] if entry else default

        return Rule(
            id=rule_id,
            source_pattern=_normalize_source(strings["$source"]),
            verb=strings["$int_action"],
            scope_pattern=strings["$scope"],
            constraint=constraint,
            final_action=meta_value("alt_action"),
            handler=meta_value("handler") or None,
            managed_system=meta_value("managed_system", self.default_managed_system),
            created=meta_value("created"),
            author=meta_value("author"),
        )


def _normalize_source(pattern: str) -> str:
    return "any" if pattern in ("any", "*") else pattern


def parse_rules(text: str, default_managed_system: str = "") -> ParseResult:
    """Parse rule text into rules plus diagnostics; never raises."""
    lexer = _Lexer(text)
    tokens = lexer.tokens()
    diagnostics = list(lexer.diagnostics)
    parser = _Parser(tokens, diagnostics, default_managed_system)
    rules = parser.parse()
    return ParseResult(tuple(rules), tuple(diagnostics))


def _quote(value: str) -> str:
    parts = []
    for ch in value:
        if ch in _UNESCAPES:
            parts.append(_UNESCAPES[ch])
        elif ch == "'":
            parts.append("\\'")
        elif ord(ch) < 0x20:
            raise UnrepresentableCharacterError(
                f"control character {ch!r} cannot appear in rule text"
            )
        else:
            parts.append(ch)
    return '"' + "".join(parts) + '"'


def emit_rules(rules: list[Rule] | tuple[Rule, ...]) -> str:
    """Render rules as rule text; ``parse_rules`` inverts it field-for-field."""
    blocks = [_emit_rule(rule) for rule in rules]
    return "\n\n".join(blocks) + ("\n" if blocks else "")


def _emit_rule(rule: Rule) -> str:
    meta: list[tuple[str, str]] = []
    if rule.created:
        meta.append(("created", rule.created))
    if rule.author:
        meta.append(("author", rule.author))
    meta.append(("constraint", rule.constraint.value))
    if rule.final_action:
        meta.append(("alt_action", rule.final_action))
    if rule.handler:
        meta.append(("handler", rule.handler))
    if rule.managed_system:
        meta.append(("managed_system", rule.managed_system))
    lines = [f"rule {rule.id.rendered} {{", "    meta:"]
    lines += [f"        {key} = {_quote(value)}" for key, value in meta]
    lines.append("    strings:")
    lines.append(f"        $source = {_quote(_normalize_source(rule.source_pattern))}")
    lines.append(f"        $int_action = {_quote(rule.verb)}")
    lines.append(f"        $scope = {_quote(rule.scope_pattern)}")
    lines.append("    condition:")
    lines.append("        $source and $int_action and $scope")
    lines.append("}")
    return "\n".join(lines)


def parse_rule_document(
    document: str | Mapping, *, default_managed_system: str = ""
) -> Rule:
    """Map a seven-key rule document onto a rule.

    Accepts either the JSON text or an already-decoded mapping. ``"any"``
    and ``"*"`` sources both normalize to the match-all pattern.
    """
    if isinstance(document, str):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise DocumentError(f"rule document is not valid JSON: {exc}") from None
    if not isinstance(document, Mapping):
        raise DocumentError("rule document must be an object")
    for key in document:
        if key not in _REQUIRED_DOC_KEYS and key not in _OPTIONAL_DOC_KEYS:
            raise UnknownKeyError(str(key))
    for key in _REQUIRED_DOC_KEYS:
        if key not in document:
            raise MissingKeyError(key)
    values: dict[str, str] = {}
    for key in (*_REQUIRED_DOC_KEYS, *_OPTIONAL_DOC_KEYS):
        if key in document:
            value = document[key]
            if not isinstance(value, str):
                raise DocumentError(f"key {key!r} must be a string")
            values[key] = value
    try:
        rule_id = RuleId.parse(values["r_id"])
    except ValueError as exc:
        raise DocumentError(str(exc)) from None
    try:
        constraint = Constraint.parse(values["r_c"])
    except ValueError:
        raise BadConstraintError(values["r_c"]) from None
    return Rule(
        id=rule_id,
        source_pattern=_normalize_source(values["r_s"]),
        verb=values["r_v"],
        scope_pattern=values["r_scope"],
        constraint=constraint,
        final_action=values["r_a"],
        handler=values.get("r_h") or None,
        managed_system=values.get("managed_system", default_managed_system),
        created=values.get("created", ""),
        author=values.get("author", ""),
    )


def rule_to_document(rule: Rule) -> dict:
    """Render a rule as the seven-key document (optional keys when set)."""
    doc = {
        "r_id": rule.id.rendered,
        "r_s": rule.source_pattern,
        "r_v": rule.verb,
        "r_scope": rule.scope_pattern,
        "r_c": rule.constraint.value,
        "r_a": rule.final_action,
    }
    if rule.handler:
        doc["r_h"] = rule.handler
    if rule.managed_system:
        doc["managed_system"] = rule.managed_system
    if rule.created:
        doc["created"] = rule.created
    if rule.author:
        doc["author"] = rule.author
    return doc
