"""Hand-written parser for ``.mcg`` grammar files, plus the pretty-printer.

The grammar file schema::

    package a.b;                          // optional header

    grammar Name extends a.b.Super {      // extends clause optional

      options {
        compileunit ShopSystem;           // enables packaged model loading
        nodefaulttokens;                  // drop the predefined IDENT/STRING
        lookahead 3;
      }

      token NUMBER = ('0'..'9')+ : int;

      ShopSystem = name:IDENT (Client | PremiumClient)*;
      PremiumClient extends Client = "premiumclient" name:IDENT;
      interface Order;
      abstract Payment = amount:NUMBER;
      external StatementCash /shop.IStatementCash;
      ast Order = clientName:IDENT;

      association ClientOrder Client 1 <-> * Order.orderingClient;

      syn outstanding : /float;
    }

Files are UTF-8 with ``//`` line and ``/* */`` block comments.
"""

from __future__ import annotations

from dataclasses import dataclass

from .attributes import AttrDirection, AttributeDecl
from .diagnostics import SourceError, SourcePos, error
from .grammar import (Alternative, AssociationDef, AstAugmentation, Block,
                      BodyElement, CardRange, Cardinality, ConstantGroup,
                      GrammarDef, GrammarOptions, NonterminalRef,
                      ProductionDef, ProductionKind, Sequence, Terminal,
                      TokenDef, TokenRef, TokenValueKind, is_token_name)
from .token_patterns import (PatAlt, PatLit, PatRange, PatRep, PatSeq,
                             PatternNode, TokenPattern)

_PUNCT = ("<->", "->", "..", "{", "}", "(", ")", "[", "]", ";", ":", "=",
          "|", "?", "*", "+", ",", ".", "/")

_ESCAPES = {"n": "\n", "t": "\t", "r": "\r", "\\": "\\", "'": "'", '"': '"',
            "0": "\0"}

_BUILTIN_CONVERSIONS = {
    "string": TokenValueKind.STRING,
    "int": TokenValueKind.INT,
    "float": TokenValueKind.FLOAT,
}


@dataclass
class _Tok:
    kind: str  # ident | string | char | number | punct | eof
    text: str
    line: int
    col: int


def _scan(text: str, file: str) -> list[_Tok]:
    toks: list[_Tok] = []
    i, line, col = 0, 1, 1
    n = len(text)

    def fail(message: str):
        raise SourceError(error(message, SourcePos(file, line, col)))

    while i < n:
        ch = text[i]
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if text.startswith("//", i):
            while i < n and text[i] != "\n":
                i += 1
            continue
        if text.startswith("/*", i):
            end = text.find("*/", i + 2)
            if end < 0:
                fail("unterminated block comment")
            skipped = text[i:end + 2]
            line += skipped.count("\n")
            col = (len(skipped) - skipped.rfind("\n")
                   if "\n" in skipped else col + len(skipped))
            i = end + 2
            continue
        if ch.isalpha() or ch == "_":
            start = i
            while i < n and (text[i].isalnum() or text[i] == "_"):
                i += 1
            toks.append(_Tok("ident", text[start:i], line, col))
            col += i - start
            continue
        if ch.isdigit():
            start = i
            while i < n and text[i].isdigit():
                i += 1
            toks.append(_Tok("number", text[start:i], line, col))
            col += i - start
            continue
        if ch in "\"'":
            quote = ch
            start_line, start_col = line, col
            i += 1
            col += 1
            value = []
            while i < n and text[i] != quote:
                if text[i] == "\n":
                    fail("unterminated literal")
                if text[i] == "\\":
                    if i + 1 >= n:
                        fail("dangling escape")
                    esc = text[i + 1]
                    if esc not in _ESCAPES:
                        fail(f"unknown escape '\\{esc}'")
                    value.append(_ESCAPES[esc])
                    i += 2
                    col += 2
                else:
                    value.append(text[i])
                    i += 1
                    col += 1
            if i >= n:
                line, col = start_line, start_col
                fail("unterminated literal")
            i += 1
            col += 1
            kind = "string" if quote == '"' else "char"
            if kind == "char" and len(value) != 1:
                line, col = start_line, start_col
                fail("character literal must hold exactly one character")
            toks.append(_Tok(kind, "".join(value), start_line, start_col))
            continue
        for punct in _PUNCT:
            if text.startswith(punct, i):
                toks.append(_Tok("punct", punct, line, col))
                i += len(punct)
                col += len(punct)
                break
        else:
            fail(f"unexpected character {ch!r}")
    toks.append(_Tok("eof", "", line, col))
    return toks


class _Parser:
    def __init__(self, toks: list[_Tok], file: str):
        self.toks = toks
        self.file = file
        self.i = 0

    # -- token plumbing -----------------------------------------------------

    def cur(self) -> _Tok:
        return self.toks[self.i]

    def pos(self) -> SourcePos:
        t = self.cur()
        return SourcePos(self.file, t.line, t.col)

    def at(self, kind: str, text: str | None = None) -> bool:
        t = self.cur()
        return t.kind == kind and (text is None or t.text == text)

    def at_word(self, word: str) -> bool:
        return self.at("ident", word)

    def advance(self) -> _Tok:
        t = self.toks[self.i]
        if t.kind != "eof":
            self.i += 1
        return t

    def expect(self, kind: str, text: str | None = None) -> _Tok:
        if not self.at(kind, text):
            t = self.cur()
            want = text if text is not None else kind
            raise SourceError(error(
                f"expected {want!r}, found {t.text or t.kind!r}", self.pos()))
        return self.advance()

    def expect_word(self, word: str) -> _Tok:
        return self.expect("ident", word)

    def ident(self) -> str:
        return self.expect("ident").text

    def qualified_name(self) -> str:
        parts = [self.ident()]
        while self.at("punct", "."):
            self.advance()
            parts.append(self.ident())
        return ".".join(parts)

    # -- file structure -----------------------------------------------------

    def parse_file(self) -> GrammarDef:
        package = ""
        if self.at_word("package"):
            self.advance()
            package = self.qualified_name()
            self.expect("punct", ";")
        header_pos = self.pos()
        self.expect_word("grammar")
        name = self.ident()
        supers: list[str] = []
        if self.at_word("extends"):
            self.advance()
            supers.append(self.qualified_name())
            while self.at("punct", ","):
                self.advance()
                supers.append(self.qualified_name())
        self.expect("punct", "{")
        g = GrammarDef(package=package, name=name, supers=supers,
                       pos=header_pos)
        while not self.at("punct", "}"):
            if self.at("eof"):
                raise SourceError(error("missing '}' at end of grammar",
                                        self.pos()))
            self.parse_item(g)
        self.expect("punct", "}")
        self.expect("eof")
        return g

    def parse_item(self, g: GrammarDef) -> None:
        if self.at_word("options"):
            self.parse_options(g)
        elif self.at_word("token"):
            g.tokens.append(self.parse_token())
        elif self.at_word("association"):
            g.associations.append(self.parse_association())
        elif self.at_word("ast"):
            g.ast_augmentations.append(self.parse_ast_augmentation())
        elif self.at_word("syn") or self.at_word("inh"):
            g.attribute_decls.append(self.parse_attribute_decl(g))
        else:
            g.productions.append(self.parse_production())

    def parse_options(self, g: GrammarDef) -> None:
        self.expect_word("options")
        self.expect("punct", "{")
        while not self.at("punct", "}"):
            pos = self.pos()
            word = self.ident()
            if word == "compileunit":
                g.options.compile_unit_start = self.ident()
            elif word == "nodefaulttokens":
                g.options.default_tokens_enabled = False
            elif word == "lookahead":
                value = int(self.expect("number").text)
                if value < 1:
                    raise SourceError(error("lookahead must be positive", pos))
                g.options.lookahead_k = value
            else:
                raise SourceError(error(f"unknown option '{word}'", pos))
            self.expect("punct", ";")
        self.expect("punct", "}")

    def parse_token(self) -> TokenDef:
        pos = self.pos()
        self.expect_word("token")
        name = self.ident()
        self.expect("punct", "=")
        pattern = self.parse_pattern_alt()
        value_kind = TokenValueKind.STRING
        converter_key = None
        if self.at("punct", ":"):
            self.advance()
            key = self.qualified_name()
            if key in _BUILTIN_CONVERSIONS:
                value_kind = _BUILTIN_CONVERSIONS[key]
            else:
                value_kind = TokenValueKind.CUSTOM
                converter_key = key
        self.expect("punct", ";")
        return TokenDef(name=name, pattern=TokenPattern(pattern),
                        value_kind=value_kind, converter_key=converter_key,
                        pos=pos)

    # restricted regex subset: literals, ranges, |, (), ? * +
    def parse_pattern_alt(self) -> PatternNode:
        branches = [self.parse_pattern_seq()]
        while self.at("punct", "|"):
            self.advance()
            branches.append(self.parse_pattern_seq())
        if len(branches) == 1:
            return branches[0]
        return PatAlt(tuple(branches))

    def parse_pattern_seq(self) -> PatternNode:
        parts = [self.parse_pattern_rep()]
        while self.at("char") or self.at("string") or self.at("punct", "("):
            parts.append(self.parse_pattern_rep())
        if len(parts) == 1:
            return parts[0]
        return PatSeq(tuple(parts))

    def parse_pattern_rep(self) -> PatternNode:
        atom = self.parse_pattern_atom()
        if self.at("punct", "?") or self.at("punct", "*") or self.at("punct", "+"):
            op = self.advance().text
            return PatRep(atom, op)
        return atom

    def parse_pattern_atom(self) -> PatternNode:
        if self.at("char"):
            lo = self.advance().text
            if self.at("punct", ".."):
                pos = self.pos()
                self.advance()
                hi = self.expect("char").text
                if lo > hi:
                    raise SourceError(error(
                        f"empty character range '{lo}'..'{hi}'", pos))
                return PatRange(lo, hi)
            return PatLit(lo)
        if self.at("string"):
            return PatLit(self.advance().text)
        if self.at("punct", "("):
            self.advance()
            inner = self.parse_pattern_alt()
            self.expect("punct", ")")
            return inner
        raise SourceError(error(
            f"expected a token pattern, found {self.cur().text!r}", self.pos()))

    def parse_association(self) -> AssociationDef:
        pos = self.pos()
        self.expect_word("association")
        name = self.ident()
        source_type = self.ident()
        source_role = None
        if self.at("punct", "."):
            self.advance()
            source_role = self.ident()
        source_card = self.parse_card_range()
        if self.at("punct", "<->"):
            directed = False
        elif self.at("punct", "->"):
            directed = True
        else:
            raise SourceError(error("expected '->' or '<->'", self.pos()))
        self.advance()
        target_card = self.parse_card_range()
        target_type = self.ident()
        target_role = None
        if self.at("punct", "."):
            self.advance()
            target_role = self.ident()
        self.expect("punct", ";")
        return AssociationDef(
            name=name, source_type=source_type, target_type=target_type,
            source_card=source_card, target_card=target_card,
            source_role=source_role, target_role=target_role,
            directed=directed, pos=pos)

    def parse_card_range(self) -> CardRange:
        pos = self.pos()
        if self.at("punct", "*"):
            self.advance()
            return CardRange(0, None)
        lo = int(self.expect("number").text)
        if self.at("punct", ".."):
            self.advance()
            if self.at("punct", "*"):
                self.advance()
                return CardRange(lo, None)
            hi = int(self.expect("number").text)
            if hi < lo:
                raise SourceError(error(f"empty range {lo}..{hi}", pos))
            return CardRange(lo, hi)
        return CardRange(lo, lo)

    def parse_ast_augmentation(self) -> AstAugmentation:
        pos = self.pos()
        self.expect_word("ast")
        target = self.ident()
        self.expect("punct", "=")
        body = self.parse_body()
        self.expect("punct", ";")
        return AstAugmentation(target=target, body=body, pos=pos)

    def parse_attribute_decl(self, g: GrammarDef) -> AttributeDecl:
        pos = self.pos()
        direction = (AttrDirection.SYNTHESIZED if self.ident() == "syn"
                     else AttrDirection.INHERITED)
        name = self.ident()
        self.expect("punct", ":")
        if self.at("punct", "/"):
            self.advance()
        value_kind = self.qualified_name()
        self.expect("punct", ";")
        return AttributeDecl(name=name, direction=direction,
                             value_kind=value_kind,
                             owning_grammar=g.qualified_name, pos=pos)

    def parse_production(self) -> ProductionDef:
        pos = self.pos()
        kind = ProductionKind.NODE
        if self.at_word("interface"):
            self.advance()
            kind = ProductionKind.INTERFACE
        elif self.at_word("abstract"):
            self.advance()
            kind = ProductionKind.ABSTRACT
        elif self.at_word("external"):
            self.advance()
            kind = ProductionKind.EXTERNAL
        name = self.ident()
        prod = ProductionDef(name=name, kind=kind, pos=pos)
        while True:
            if self.at_word("extends"):
                self.advance()
                prod.extends_list.extend(self.name_list())
            elif self.at_word("implements"):
                self.advance()
                prod.implements_list.extend(self.name_list())
            elif self.at_word("astextends"):
                self.advance()
                prod.ast_extends_list.extend(self.name_list())
            elif self.at_word("astimplements"):
                self.advance()
                prod.ast_implements_list.extend(self.name_list())
            else:
                break
        if self.at("punct", "/"):
            self.advance()
            prod.required_contract = self.qualified_name()
        if self.at("punct", "="):
            self.advance()
            prod.body = self.parse_body()
        self.expect("punct", ";")
        return prod

    def name_list(self) -> list[str]:
        names = [self.ident()]
        while self.at("punct", ","):
            self.advance()
            names.append(self.ident())
        return names

    # -- rule bodies --------------------------------------------------------

    def parse_body(self) -> BodyElement:
        return self.parse_alternative()

    def parse_alternative(self) -> BodyElement:
        pos = self.pos()
        branches = [self.parse_sequence()]
        while self.at("punct", "|"):
            self.advance()
            branches.append(self.parse_sequence())
        if len(branches) == 1:
            return branches[0]
        return Alternative(branches, pos=pos)

    def parse_sequence(self) -> BodyElement:
        pos = self.pos()
        items: list[BodyElement] = []
        while not (self.at("punct", ";") or self.at("punct", ")")
                   or self.at("punct", "|") or self.at("eof")):
            items.append(self.parse_element())
        if len(items) == 1:
            return items[0]
        return Sequence(items, pos=pos)

    def parse_element(self) -> BodyElement:
        pos = self.pos()
        label = None
        if (self.at("ident") and self.toks[self.i + 1].kind == "punct"
                and self.toks[self.i + 1].text == ":"):
            label = self.advance().text
            self.advance()
        if self.at("string"):
            text = self.advance().text
            if label is not None:
                raise SourceError(error(
                    "a plain terminal cannot carry a label; use [\"...\"] to "
                    "lift it into the abstract syntax", pos))
            return Terminal(text, card=self.parse_card_suffix(), pos=pos)
        if self.at("punct", "["):
            self.advance()
            constants = [self.expect("string").text]
            while self.at("punct", "|"):
                self.advance()
                constants.append(self.expect("string").text)
            self.expect("punct", "]")
            group = ConstantGroup(constants=constants, label=label, pos=pos)
            card = self.parse_card_suffix()
            if card is not Cardinality.ONE:
                return Block(group, card=card, pos=pos)
            return group
        if self.at("punct", "("):
            if label is not None:
                raise SourceError(error("blocks cannot carry a label", pos))
            self.advance()
            inner = self.parse_alternative()
            self.expect("punct", ")")
            card = self.parse_card_suffix()
            if card is Cardinality.ONE:
                return inner  # plain grouping, no structure of its own
            return Block(inner, card=card, pos=pos)
        if self.at("ident"):
            target = self.advance().text
            card = self.parse_card_suffix()
            if is_token_name(target):
                return TokenRef(target, label=label, card=card, pos=pos)
            return NonterminalRef(target, label=label, card=card, pos=pos)
        raise SourceError(error(
            f"expected a rule element, found {self.cur().text or 'end of file'!r}",
            self.pos()))

    def parse_card_suffix(self) -> Cardinality:
        if self.at("punct", "?"):
            self.advance()
            return Cardinality.OPTIONAL
        if self.at("punct", "*"):
            self.advance()
            return Cardinality.STAR
        if self.at("punct", "+"):
            self.advance()
            return Cardinality.PLUS
        return Cardinality.ONE


def parse_grammar(text: str, file: str = "<grammar>") -> GrammarDef:
    """Parse one grammar file.

    Raises:
        SourceError: on any syntax error, with position and message; no
            partial grammar escapes.
    """
    return _Parser(_scan(text, file), file).parse_file()


# ---------------------------------------------------------------------------
# Pretty-printer (canonical form; re-parses to an equal grammar)
# ---------------------------------------------------------------------------

def _quote(text: str) -> str:
    escaped = (text.replace("\\", "\\\\").replace('"', '\\"')
               .replace("\n", "\\n").replace("\t", "\\t"))
    return f'"{escaped}"'


def print_body(body: BodyElement) -> str:
    if isinstance(body, Sequence):
        return " ".join(_print_nested(i) for i in body.items)
    if isinstance(body, Alternative):
        return " | ".join(
            f"({print_body(b)})" if isinstance(b, Alternative) else print_body(b)
            for b in body.branches)
    if isinstance(body, Block):
        return f"({print_body(body.inner)}){body.card.value}"
    if isinstance(body, (NonterminalRef, TokenRef)):
        label = f"{body.label}:" if body.label else ""
        return f"{label}{body.target}{body.card.value}"
    if isinstance(body, Terminal):
        return f"{_quote(body.text)}{body.card.value}"
    if isinstance(body, ConstantGroup):
        label = f"{body.label}:" if body.label else ""
        return label + "[" + " | ".join(_quote(c) for c in body.constants) + "]"
    raise TypeError(f"not a body element: {body!r}")


def _print_nested(element: BodyElement) -> str:
    if isinstance(element, (Alternative, Sequence)):
        return f"({print_body(element)})"
    return print_body(element)


def print_grammar(g: GrammarDef) -> str:
    """Render a grammar back to canonical ``.mcg`` text."""
    out: list[str] = []
    if g.package:
        out.append(f"package {g.package};")
        out.append("")
    header = f"grammar {g.name}"
    if g.supers:
        header += " extends " + ", ".join(g.supers)
    out.append(header + " {")
    opts = g.options
    if (opts.compile_unit_start or not opts.default_tokens_enabled
            or opts.lookahead_k != 3):
        out.append("  options {")
        if opts.compile_unit_start:
            out.append(f"    compileunit {opts.compile_unit_start};")
        if not opts.default_tokens_enabled:
            out.append("    nodefaulttokens;")
        if opts.lookahead_k != 3:
            out.append(f"    lookahead {opts.lookahead_k};")
        out.append("  }")
    for tok in g.tokens:
        suffix = ""
        if tok.value_kind is TokenValueKind.CUSTOM:
            suffix = f" : {tok.converter_key}"
        elif tok.value_kind is not TokenValueKind.STRING:
            suffix = f" : {tok.value_kind.value}"
        out.append(f"  token {tok.name} = {tok.pattern}{suffix};")
    for prod in g.productions:
        parts = []
        if prod.kind is not ProductionKind.NODE:
            parts.append(prod.kind.value)
        parts.append(prod.name)
        if prod.extends_list:
            parts.append("extends " + ", ".join(prod.extends_list))
        if prod.implements_list:
            parts.append("implements " + ", ".join(prod.implements_list))
        if prod.ast_extends_list:
            parts.append("astextends " + ", ".join(prod.ast_extends_list))
        if prod.ast_implements_list:
            parts.append("astimplements " + ", ".join(prod.ast_implements_list))
        if prod.required_contract:
            parts.append(f"/{prod.required_contract}")
        line = "  " + " ".join(parts)
        if prod.body is not None:
            line += " = " + print_body(prod.body)
        out.append(line + ";")
    for aug in g.ast_augmentations:
        out.append(f"  ast {aug.target} = {print_body(aug.body)};")
    for assoc in g.associations:
        src = assoc.source_type + (f".{assoc.source_role}" if assoc.source_role else "")
        tgt = assoc.target_type + (f".{assoc.target_role}" if assoc.target_role else "")
        arrow = "->" if assoc.directed else "<->"
        out.append(f"  association {assoc.name} {src} {assoc.source_card} "
                   f"{arrow} {assoc.target_card} {tgt};")
    for decl in g.attribute_decls:
        out.append(f"  {decl.direction.value} {decl.name} : /{decl.value_kind};")
    out.append("}")
    return "\n".join(out) + "\n"
