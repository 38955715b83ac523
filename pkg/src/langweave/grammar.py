"""In-memory model of one grammar module.

A grammar file (``.mcg``) declares productions, token rules, associations,
abstract-syntax augmentations, attribute declarations, and options.  The
model here is the direct result of parsing one file; cross-grammar
resolution (inheritance, overriding) happens later in :mod:`linking`.

Naming conventions enforced on grammar authors:

* token names are ALL_CAPS with at least two characters (``IDENT``, ``NUMBER``),
* production names are capitalized but not all-caps (``ShopSystem``, ``A``).

The convention is what lets a rule body reference inherited tokens that are
not visible at parse time: any ALL_CAPS reference is a token reference.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterator, Union

from .diagnostics import Diagnostic, DiagnosticSink, SourcePos

if TYPE_CHECKING:
    from .attributes import AttributeDecl

GRAMMAR_FILE_EXTENSION = ".mcg"

_TOKEN_NAME_RE = re.compile(r"[A-Z][A-Z0-9_]+")
_IDENTIFIER_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


def is_token_name(name: str) -> bool:
    """ALL_CAPS names of length >= 2 denote token classes."""
    return bool(_TOKEN_NAME_RE.fullmatch(name))


def decapitalize(name: str) -> str:
    """Lower-case the first character; used for derived attribute/role names."""
    if name and name[0].isupper():
        return name[0].lower() + name[1:]
    return name


def element_attr_name(element) -> str | None:
    """The abstract-syntax attribute an element is stored under.

    Labels are de-capitalized into field-style names; unlabeled references
    use the de-capitalized target name.
    """
    if isinstance(element, (NonterminalRef, TokenRef)):
        return (decapitalize(element.label) if element.label
                else decapitalize(element.target))
    if isinstance(element, ConstantGroup):
        return element.attr_name()
    return None


def sanitize_identifier(text: str) -> str | None:
    """Turn a terminal text into an identifier, or None if impossible."""
    cleaned = "".join(ch for ch in text if ch.isalnum() or ch == "_")
    if cleaned and _IDENTIFIER_RE.fullmatch(cleaned):
        return cleaned
    return None


class Cardinality(enum.Enum):
    ONE = ""
    OPTIONAL = "?"
    STAR = "*"
    PLUS = "+"


@dataclass(frozen=True)
class CardRange:
    """Association-end cardinality: exactly-one, unbounded, or lo..hi."""

    lo: int
    hi: int | None  # None = unbounded

    def __post_init__(self):
        if self.lo < 0 or (self.hi is not None and self.hi < self.lo):
            raise ValueError(f"invalid cardinality range {self.lo}..{self.hi}")

    def contains(self, n: int) -> bool:
        return n >= self.lo and (self.hi is None or n <= self.hi)

    def __str__(self) -> str:
        if self.lo == 1 and self.hi == 1:
            return "1"
        if self.lo == 0 and self.hi is None:
            return "*"
        return f"{self.lo}..{'*' if self.hi is None else self.hi}"


EXACTLY_ONE = CardRange(1, 1)
UNBOUNDED = CardRange(0, None)


# ---------------------------------------------------------------------------
# Rule bodies
# ---------------------------------------------------------------------------

@dataclass
class Sequence:
    items: list[BodyElement]
    pos: SourcePos | None = None


@dataclass
class Alternative:
    branches: list[BodyElement]
    pos: SourcePos | None = None


@dataclass
class Block:
    inner: BodyElement
    card: Cardinality = Cardinality.ONE
    pos: SourcePos | None = None


@dataclass
class NonterminalRef:
    target: str
    label: str | None = None
    card: Cardinality = Cardinality.ONE
    pos: SourcePos | None = None


@dataclass
class TokenRef:
    target: str
    label: str | None = None
    card: Cardinality = Cardinality.ONE
    pos: SourcePos | None = None


@dataclass
class Terminal:
    text: str
    card: Cardinality = Cardinality.ONE
    pos: SourcePos | None = None


@dataclass
class ConstantGroup:
    """Bracketed constants lifted into the abstract syntax.

    A single constant becomes a boolean attribute; several constants become
    an enumeration attribute and then require a label.
    """

    constants: list[str]
    label: str | None = None
    pos: SourcePos | None = None

    def attr_name(self) -> str | None:
        if self.label is not None:
            return decapitalize(self.label)
        if len(self.constants) == 1:
            return sanitize_identifier(self.constants[0])
        return None


BodyElement = Union[Sequence, Alternative, Block, NonterminalRef, TokenRef,
                    Terminal, ConstantGroup]


def iter_body(body: BodyElement) -> Iterator[BodyElement]:
    """Yield every element of a body tree, preorder."""
    yield body
    if isinstance(body, Sequence):
        for item in body.items:
            yield from iter_body(item)
    elif isinstance(body, Alternative):
        for branch in body.branches:
            yield from iter_body(branch)
    elif isinstance(body, Block):
        yield from iter_body(body.inner)


# ---------------------------------------------------------------------------
# Declarations
# ---------------------------------------------------------------------------

class ProductionKind(enum.Enum):
    NODE = "node"
    INTERFACE = "interface"
    ABSTRACT = "abstract"
    EXTERNAL = "external"


@dataclass
class ProductionDef:
    name: str
    kind: ProductionKind = ProductionKind.NODE
    extends_list: list[str] = field(default_factory=list)
    implements_list: list[str] = field(default_factory=list)
    ast_extends_list: list[str] = field(default_factory=list)
    ast_implements_list: list[str] = field(default_factory=list)
    body: BodyElement | None = None
    required_contract: str | None = None  # the /Iface annotation on externals
    pos: SourcePos | None = None
    # Filled by linking: qualified name of the supergrammar whose equally
    # named production this one overrides.
    overrides: str | None = None


class TokenValueKind(enum.Enum):
    STRING = "string"
    INT = "int"
    FLOAT = "float"
    CUSTOM = "custom"


@dataclass
class TokenDef:
    name: str
    pattern: "TokenPattern"
    value_kind: TokenValueKind = TokenValueKind.STRING
    converter_key: str | None = None
    pos: SourcePos | None = None


@dataclass
class AssociationDef:
    """A non-composition edge between two rule types.

    ``target_role`` names the reference attribute stored on the target type
    (pointing at source instances); ``source_role`` the one on the source
    type.  Omitted roles default to the de-capitalized opposite type name.
    The cardinality written next to a side bounds how many instances of that
    side each opposite instance may link.
    """

    name: str
    source_type: str
    target_type: str
    source_card: CardRange = EXACTLY_ONE
    target_card: CardRange = UNBOUNDED
    source_role: str | None = None
    target_role: str | None = None
    directed: bool = False
    pos: SourcePos | None = None


@dataclass
class AstAugmentation:
    """An ``ast Name = body;`` declaration: abstract-syntax-only attributes."""

    target: str
    body: BodyElement
    pos: SourcePos | None = None


@dataclass
class GrammarOptions:
    compile_unit_start: str | None = None
    default_tokens_enabled: bool = True
    lookahead_k: int = 3


@dataclass
class GrammarDef:
    package: str
    name: str
    supers: list[str] = field(default_factory=list)
    productions: list[ProductionDef] = field(default_factory=list)
    tokens: list[TokenDef] = field(default_factory=list)
    associations: list[AssociationDef] = field(default_factory=list)
    ast_augmentations: list[AstAugmentation] = field(default_factory=list)
    attribute_decls: list["AttributeDecl"] = field(default_factory=list)
    options: GrammarOptions = field(default_factory=GrammarOptions)
    pos: SourcePos | None = None

    @property
    def qualified_name(self) -> str:
        return f"{self.package}.{self.name}" if self.package else self.name

    def production(self, name: str) -> ProductionDef | None:
        for prod in self.productions:
            if prod.name == name:
                return prod
        return None

    def token(self, name: str) -> TokenDef | None:
        for tok in self.tokens:
            if tok.name == name:
                return tok
        return None


# ---------------------------------------------------------------------------
# Local validation
# ---------------------------------------------------------------------------

def validate_grammar(g: GrammarDef) -> list[Diagnostic]:
    """Check local well-formedness of a single grammar module.

    Cross-grammar facts (unresolved supers, inherited overrides) are the
    linking step's business and are not reported here.
    """
    sink = DiagnosticSink()

    seen_productions: dict[str, ProductionDef] = {}
    for prod in g.productions:
        if prod.name in seen_productions:
            sink.error(f"duplicate production '{prod.name}'", prod.pos)
        seen_productions[prod.name] = prod
        if is_token_name(prod.name):
            sink.error(
                f"production name '{prod.name}' is all-caps; that form is "
                "reserved for token classes", prod.pos)
        if prod.kind is ProductionKind.EXTERNAL and prod.body is not None:
            sink.error(
                f"external production '{prod.name}' must not define a body",
                prod.pos)
        if prod.required_contract and prod.kind is not ProductionKind.EXTERNAL:
            sink.error(
                f"contract annotation on '{prod.name}' is only allowed on "
                "external productions", prod.pos)
        if prod.body is not None:
            _validate_body(prod.name, prod.body, sink)
        if prod.kind in (ProductionKind.INTERFACE, ProductionKind.ABSTRACT):
            _validate_dispatch_body(prod, sink)

    seen_tokens: dict[str, TokenDef] = {}
    for tok in g.tokens:
        if tok.name in seen_tokens:
            sink.error(f"duplicate token '{tok.name}'", tok.pos)
        seen_tokens[tok.name] = tok
        if tok.name in seen_productions:
            sink.error(
                f"token '{tok.name}' collides with a production name", tok.pos)
        if not is_token_name(tok.name):
            sink.error(
                f"token name '{tok.name}' must be all-caps with at least two "
                "characters", tok.pos)
        if tok.value_kind is TokenValueKind.CUSTOM and not tok.converter_key:
            sink.error(
                f"token '{tok.name}' has a custom value kind but no converter",
                tok.pos)

    seen_assocs: set[str] = set()
    for assoc in g.associations:
        if assoc.name in seen_assocs:
            sink.error(f"duplicate association '{assoc.name}'", assoc.pos)
        seen_assocs.add(assoc.name)

    if g.options.compile_unit_start is not None:
        start = seen_productions.get(g.options.compile_unit_start)
        if start is not None and start.kind is not ProductionKind.NODE:
            sink.error(
                f"compileunit start '{g.options.compile_unit_start}' must be "
                "an ordinary production", start.pos)
        if start is not None and start.body is not None:
            names = {element_attr_name(e) for e in iter_body(start.body)}
            if "name" not in names:
                sink.error(
                    f"compileunit start '{start.name}' must declare a 'name' "
                    "attribute so instances can be addressed by qualified "
                    "name", start.pos)

    seen_attrs: set[str] = set()
    for decl in g.attribute_decls:
        if decl.name in seen_attrs:
            sink.error(f"duplicate attribute declaration '{decl.name}'", decl.pos)
        seen_attrs.add(decl.name)

    return sink.items


def _validate_body(prod_name: str, body: BodyElement, sink: DiagnosticSink) -> None:
    for element in iter_body(body):
        if isinstance(element, ConstantGroup):
            if len(element.constants) > 1 and element.label is None:
                sink.error(
                    f"constant group with {len(element.constants)} alternatives "
                    f"in '{prod_name}' needs a label", element.pos)
            elif element.attr_name() is None:
                sink.error(
                    f"constant '{element.constants[0]}' in '{prod_name}' cannot "
                    "be turned into an attribute name; add a label", element.pos)
        elif isinstance(element, (NonterminalRef, TokenRef)):
            if element.label is not None and not _IDENTIFIER_RE.fullmatch(element.label):
                sink.error(
                    f"invalid label '{element.label}' in '{prod_name}'",
                    element.pos)


def _validate_dispatch_body(prod: ProductionDef, sink: DiagnosticSink) -> None:
    """Interface/abstract bodies, when given, list implementor alternatives."""
    if prod.body is None:
        return
    branches = (prod.body.branches if isinstance(prod.body, Alternative)
                else [prod.body])
    for branch in branches:
        if not isinstance(branch, NonterminalRef) or branch.card is not Cardinality.ONE:
            sink.error(
                f"{prod.kind.value} production '{prod.name}' may only list "
                "plain nonterminal alternatives as its body", prod.pos)
            return


# ---------------------------------------------------------------------------
# Structure dumps (round-trip comparison, content addressing)
# ---------------------------------------------------------------------------

def body_to_dict(body: BodyElement | None) -> object:
    if body is None:
        return None
    if isinstance(body, Sequence):
        return {"seq": [body_to_dict(i) for i in body.items]}
    if isinstance(body, Alternative):
        return {"alt": [body_to_dict(b) for b in body.branches]}
    if isinstance(body, Block):
        return {"block": body_to_dict(body.inner), "card": body.card.value}
    if isinstance(body, NonterminalRef):
        return {"nt": body.target, "label": body.label, "card": body.card.value}
    if isinstance(body, TokenRef):
        return {"token": body.target, "label": body.label, "card": body.card.value}
    if isinstance(body, Terminal):
        return {"terminal": body.text, "card": body.card.value}
    if isinstance(body, ConstantGroup):
        return {"constants": list(body.constants), "label": body.label}
    raise TypeError(f"not a body element: {body!r}")


def grammar_to_dict(g: GrammarDef) -> dict:
    """Position-free structural dump; equal dumps mean equal grammars."""
    return {
        "package": g.package,
        "name": g.name,
        "supers": list(g.supers),
        "productions": [
            {
                "name": p.name,
                "kind": p.kind.value,
                "extends": list(p.extends_list),
                "implements": list(p.implements_list),
                "astextends": list(p.ast_extends_list),
                "astimplements": list(p.ast_implements_list),
                "body": body_to_dict(p.body),
                "contract": p.required_contract,
            }
            for p in g.productions
        ],
        "tokens": [
            {
                "name": t.name,
                "pattern": str(t.pattern),
                "valueKind": t.value_kind.value,
                "converterKey": t.converter_key,
            }
            for t in g.tokens
        ],
        "associations": [
            {
                "name": a.name,
                "source": a.source_type,
                "target": a.target_type,
                "sourceCard": str(a.source_card),
                "targetCard": str(a.target_card),
                "sourceRole": a.source_role,
                "targetRole": a.target_role,
                "directed": a.directed,
            }
            for a in g.associations
        ],
        "ast": [
            {"target": a.target, "body": body_to_dict(a.body)}
            for a in g.ast_augmentations
        ],
        "attributes": [
            {"name": d.name, "direction": d.direction.value,
             "valueKind": d.value_kind}
            for d in g.attribute_decls
        ],
        "options": {
            "compileunit": g.options.compile_unit_start,
            "defaultTokens": g.options.default_tokens_enabled,
            "lookahead": g.options.lookahead_k,
        },
    }


def grammars_equal(a: GrammarDef, b: GrammarDef) -> bool:
    return grammar_to_dict(a) == grammar_to_dict(b)
