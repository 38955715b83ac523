"""Per-language lexers built from token rules plus collected terminals.

Scanning is maximal munch over the union of the grammar's token rules, the
predefined IDENT/STRING rules (unless switched off or overridden), and every
terminal text appearing in a production body.  Ties go to terminals first,
then to token rules in declaration order, which is what reserves keywords:
``client`` lexes as the keyword under a grammar that uses it as a terminal
and as a plain IDENT under any other grammar's lexer.

Whitespace and ``//`` / ``/* */`` comments are always skipped; the
``nodefaulttokens`` option only drops the predefined token classes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable

from .diagnostics import (Diagnostic, DiagnosticSink, SourceError, SourcePos,
                          error, warning)
from .grammar import (ConstantGroup, Terminal, TokenDef, TokenRef,
                      TokenValueKind, iter_body)
from .linking import LinkedGrammar
from .token_patterns import (PatAlt, PatLit, PatRange, PatRep, PatSeq,
                             TokenPattern)

_UNQUOTE_KEY = "__unquote__"

_STRING_ESCAPES = {"n": "\n", "t": "\t", "r": "\r", "\\": "\\", '"': '"',
                   "'": "'", "0": "\0"}


def _unquote(raw: str) -> str:
    body = raw[1:-1]
    out: list[str] = []
    i = 0
    while i < len(body):
        if body[i] == "\\" and i + 1 < len(body):
            out.append(_STRING_ESCAPES.get(body[i + 1], body[i + 1]))
            i += 2
        else:
            out.append(body[i])
            i += 1
    return "".join(out)


def _default_ident() -> TokenDef:
    letter = PatAlt((PatRange("a", "z"), PatRange("A", "Z")))
    rest = PatAlt((PatRange("a", "z"), PatRange("A", "Z"),
                   PatRange("0", "9"), PatLit("_")))
    return TokenDef(name="IDENT",
                    pattern=TokenPattern(PatSeq((letter, PatRep(rest, "*")))))


def _default_string() -> TokenDef:
    # any printable char except quote/backslash, or a backslash escape pair
    plain = PatAlt((PatRange(" ", "!"), PatRange("#", "["),
                    PatRange("]", "~"), PatLit("\t")))
    escape = PatSeq((PatLit("\\"), PatRange(" ", "~")))
    body = PatRep(PatAlt((plain, escape)), "*")
    return TokenDef(name="STRING",
                    pattern=TokenPattern(PatSeq((PatLit('"'), body, PatLit('"')))),
                    value_kind=TokenValueKind.STRING,
                    converter_key=_UNQUOTE_KEY)


class ConverterRegistry:
    """Host-language token conversions, registered under string keys."""

    def __init__(self):
        self._converters: dict[str, Callable[[str], Any]] = {}

    def register(self, key: str, fn: Callable[[str], Any]) -> None:
        self._converters[key] = fn

    def get(self, key: str) -> Callable[[str], Any] | None:
        return self._converters.get(key)


@dataclass(frozen=True)
class Lexeme:
    kind: str        # token name, or the terminal text itself
    raw: str
    value: Any
    pos: SourcePos
    start: int       # character offsets into the scanned text
    end: int


@dataclass
class LexerSpec:
    """Immutable scanning table for one language component."""

    token_rules: list[TokenDef]
    reserved_terminals: frozenset[str]
    defaults_enabled: bool
    converters: dict[str, Callable[[str], Any]] = field(default_factory=dict)
    warnings: list[Diagnostic] = field(default_factory=list)

    @property
    def keywords(self) -> frozenset[str]:
        """Reserved terminals that would otherwise scan as IDENT."""
        ident = next((r for r in self.token_rules if r.name == "IDENT"), None)
        if ident is None:
            return frozenset()
        return frozenset(t for t in self.reserved_terminals
                         if ident.pattern.fullmatch(t))

    def convert(self, rule: TokenDef, raw: str, pos: SourcePos) -> Any:
        try:
            if rule.converter_key is not None:
                return self.converters[rule.converter_key](raw)
            if rule.value_kind is TokenValueKind.INT:
                return int(raw)
            if rule.value_kind is TokenValueKind.FLOAT:
                return float(raw)
            return raw
        except Exception as exc:
            raise SourceError(error(
                f"conversion of {rule.name} value {raw!r} failed: {exc}", pos))


def collect_terminals(linked: LinkedGrammar) -> frozenset[str]:
    terminals: set[str] = set()
    for prod in linked.productions.values():
        if prod.body is None:
            continue
        for element in iter_body(prod.body):
            if isinstance(element, Terminal):
                terminals.add(element.text)
            elif isinstance(element, ConstantGroup):
                terminals.update(element.constants)
    return frozenset(terminals)


def build_lexer(linked: LinkedGrammar,
                converters: ConverterRegistry | None = None) -> LexerSpec:
    """Assemble the lexer of a linked grammar.

    Raises:
        SourceError: uncompilable or empty-matching patterns, references to
            undefined token classes, or missing custom converters.
    """
    sink = DiagnosticSink()
    warnings: list[Diagnostic] = []
    rules: list[TokenDef] = list(linked.tokens.values())
    defined = {r.name for r in rules}
    if linked.options.default_tokens_enabled:
        if "IDENT" not in defined:
            rules.append(_default_ident())
            defined.add("IDENT")
        if "STRING" not in defined:
            rules.append(_default_string())
            defined.add("STRING")

    resolved: dict[str, Callable[[str], Any]] = {_UNQUOTE_KEY: _unquote}
    for rule in rules:
        try:
            _ = rule.pattern.regex
        except Exception as exc:
            sink.error(f"token {rule.name} pattern does not compile: {exc}",
                       rule.pos)
            continue
        if rule.pattern.regex.fullmatch(""):
            sink.error(f"token {rule.name} may match the empty string",
                       rule.pos)
        if (rule.value_kind is TokenValueKind.CUSTOM
                and rule.converter_key not in resolved):
            fn = converters.get(rule.converter_key) if converters else None
            if fn is None:
                sink.error(
                    f"token {rule.name} needs converter "
                    f"'{rule.converter_key}' which is not registered", rule.pos)
            else:
                resolved[rule.converter_key] = fn

    for prod in linked.productions.values():
        if prod.body is None:
            continue
        for element in iter_body(prod.body):
            if isinstance(element, TokenRef) and element.target not in defined:
                sink.error(
                    f"production '{prod.name}' references token "
                    f"'{element.target}' but no rule defines it", element.pos)

    _warn_overlaps(rules, warnings)
    sink.raise_if_errors()
    return LexerSpec(token_rules=rules,
                     reserved_terminals=collect_terminals(linked),
                     defaults_enabled=linked.options.default_tokens_enabled,
                     converters=resolved,
                     warnings=warnings)


def _warn_overlaps(rules: list[TokenDef], warnings: list[Diagnostic]) -> None:
    """Sampling heuristic: texts of an earlier rule also matched by a later one."""
    from random import Random
    rng = Random(0)
    for i, first in enumerate(rules):
        try:
            samples = {first.pattern.sample(rng) for _ in range(10)}
        except Exception:
            continue
        for second in rules[i + 1:]:
            hits = [s for s in sorted(samples) if second.pattern.fullmatch(s)]
            if hits:
                warnings.append(warning(
                    f"token patterns {first.name} and {second.name} overlap "
                    f"(e.g. {hits[0]!r}); {first.name} wins by declaration "
                    "order", second.pos))


# ---------------------------------------------------------------------------
# Scanning
# ---------------------------------------------------------------------------

class Scanner:
    """Maximal-munch scanner; produces one lexeme at a time.

    Keeps character offsets so a parser can hand the input over to another
    language's scanner mid-stream and resume afterwards.
    """

    def __init__(self, spec: LexerSpec, text: str, file: str = "<input>",
                 offset: int = 0, line: int = 1, col: int = 1):
        self.spec = spec
        self.text = text
        self.file = file
        self.offset = offset
        self.line = line
        self.col = col

    def _advance_pos(self, chunk: str) -> None:
        newlines = chunk.count("\n")
        if newlines:
            self.line += newlines
            self.col = len(chunk) - chunk.rfind("\n")
        else:
            self.col += len(chunk)

    def skip_trivia(self) -> None:
        text, n = self.text, len(self.text)
        while self.offset < n:
            ch = text[self.offset]
            if ch in " \t\r\n":
                self._advance_pos(ch)
                self.offset += 1
            elif text.startswith("//", self.offset):
                end = text.find("\n", self.offset)
                end = n if end < 0 else end
                self._advance_pos(text[self.offset:end])
                self.offset = end
            elif text.startswith("/*", self.offset):
                end = text.find("*/", self.offset + 2)
                if end < 0:
                    raise SourceError(error(
                        "unterminated block comment",
                        SourcePos(self.file, self.line, self.col)))
                self._advance_pos(text[self.offset:end + 2])
                self.offset = end + 2
            else:
                return

    def next_lexeme(self) -> Lexeme | None:
        """The next lexeme, or None at end of input.

        Raises:
            SourceError: unscannable character or failing value conversion.
        """
        self.skip_trivia()
        if self.offset >= len(self.text):
            return None
        pos = SourcePos(self.file, self.line, self.col)
        start = self.offset

        best_terminal = ""
        for terminal in self.spec.reserved_terminals:
            if (len(terminal) > len(best_terminal)
                    and self.text.startswith(terminal, start)):
                best_terminal = terminal

        best_rule: TokenDef | None = None
        best_rule_len = 0
        for rule in self.spec.token_rules:
            length = rule.pattern.match_length(self.text, start)
            if length > best_rule_len:
                best_rule = rule
                best_rule_len = length

        if not best_terminal and best_rule is None:
            raise SourceError(error(
                f"unscannable character {self.text[start]!r}", pos))

        if len(best_terminal) >= best_rule_len:
            raw = best_terminal
            lexeme = Lexeme(kind=raw, raw=raw, value=raw, pos=pos,
                            start=start, end=start + len(raw))
        else:
            raw = self.text[start:start + best_rule_len]
            value = self.spec.convert(best_rule, raw, pos)
            lexeme = Lexeme(kind=best_rule.name, raw=raw, value=value, pos=pos,
                            start=start, end=start + best_rule_len)
        self._advance_pos(raw)
        self.offset = lexeme.end
        return lexeme


def tokenize(spec: LexerSpec, text: str, file: str = "<input>") -> list[Lexeme]:
    """Scan a whole character stream into lexemes.

    Raises:
        SourceError: with position, on unscannable input or conversion failure.
    """
    scanner = Scanner(spec, text, file)
    out: list[Lexeme] = []
    while True:
        lexeme = scanner.next_lexeme()
        if lexeme is None:
            return out
        out.append(lexeme)
