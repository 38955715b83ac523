"""Abstract-syntax derivation: from a linked grammar to a typed metamodel.

Every production becomes exactly one type.  Rule bodies determine the
attributes: nonterminals map to compositions, token classes to value
attributes, bracketed constants to boolean/enum attributes.  Alternatives
and blocks are flattened; multiplicities come from an occurrence analysis
over all derivations of the body.  Subtypes repeat no attribute their
supertype already carries.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .diagnostics import DiagnosticSink, SourceError, error
from .grammar import (Alternative, Block, BodyElement, CardRange, Cardinality,
                      ConstantGroup, NonterminalRef, ProductionKind, Sequence,
                      Terminal, TokenRef, decapitalize)
from .linking import LinkedGrammar, element_attr_name

UNBOUNDED_OCCURS = None  # max_occurs value for unbounded attributes


@dataclass(frozen=True)
class AttrDef:
    """One attribute slot of a derived type."""

    name: str
    kind: str  # composition | token | boolean | enum
    target: str | None = None       # composition target type
    value_type: str | None = None   # token value kind
    values: tuple[str, ...] | None = None  # enum constants
    min_occurs: int = 1
    max_occurs: int | None = 1      # None = unbounded

    @property
    def is_list(self) -> bool:
        return self.max_occurs is None or self.max_occurs > 1

    def same_shape(self, other: "AttrDef") -> bool:
        """Name-and-kind equality, the attribute-subtraction criterion."""
        return (self.name == other.name and self.kind == other.kind
                and self.target == other.target
                and self.value_type == other.value_type
                and self.values == other.values)


@dataclass
class NodeTypeDef:
    name: str
    super_type: str | None = None
    implemented_interfaces: list[str] = field(default_factory=list)
    is_abstract: bool = False
    attributes: list[AttrDef] = field(default_factory=list)
    source_grammar: str = ""
    # flattened-alternative exclusivity: each entry lists the per-branch
    # attribute-name groups of one alternative; at most one group may be
    # populated on an instance
    exclusive_groups: list[list[list[str]]] = field(default_factory=list)


@dataclass
class InterfaceDef:
    name: str
    extends_list: list[str] = field(default_factory=list)
    declared_attributes: list[AttrDef] = field(default_factory=list)
    source_grammar: str = ""


@dataclass
class AssocEdge:
    name: str
    source: str
    target: str
    source_role: str
    target_role: str
    source_card: CardRange
    target_card: CardRange
    directed: bool


@dataclass
class Metamodel:
    node_types: list[NodeTypeDef] = field(default_factory=list)
    interfaces: list[InterfaceDef] = field(default_factory=list)
    associations: list[AssocEdge] = field(default_factory=list)

    def __post_init__(self):
        self._index: dict[str, object] | None = None
        self._index_size = -1

    def _ensure_index(self) -> dict[str, object]:
        size = len(self.node_types) + len(self.interfaces)
        if self._index is None or self._index_size != size:
            self._index = {}
            for t in self.node_types:
                self._index[t.name] = t
            for i in self.interfaces:
                self._index[i.name] = i
            self._index_size = size
        return self._index

    def lookup(self, name: str):
        return self._ensure_index().get(name)

    def node_type(self, name: str) -> NodeTypeDef | None:
        entry = self.lookup(name)
        return entry if isinstance(entry, NodeTypeDef) else None

    def interface(self, name: str) -> InterfaceDef | None:
        entry = self.lookup(name)
        return entry if isinstance(entry, InterfaceDef) else None

    def dispatch_chain(self, type_name: str) -> list[str]:
        """Exact type, then the supertype chain, then interfaces in
        declaration order (each followed by the interfaces it extends)."""
        chain: list[str] = []
        interfaces: list[str] = []
        seen: set[str] = set()
        name: str | None = type_name
        while name is not None and name not in seen:
            seen.add(name)
            chain.append(name)
            entry = self.lookup(name)
            if isinstance(entry, NodeTypeDef):
                interfaces.extend(entry.implemented_interfaces)
                name = entry.super_type
            else:
                break
        queue = list(interfaces)
        while queue:
            iname = queue.pop(0)
            if iname in seen:
                continue
            seen.add(iname)
            chain.append(iname)
            idef = self.interface(iname)
            if idef is not None:
                queue.extend(idef.extends_list)
        return chain

    def is_subtype(self, sub: str, sup: str) -> bool:
        return sup in self.dispatch_chain(sub)

    def subtype_closure(self, name: str) -> set[str]:
        """All type names whose instances may stand where ``name`` is expected."""
        return {t.name for t in self.node_types if self.is_subtype(t.name, name)} | (
            {name} if self.lookup(name) is not None else set())

    def all_attributes(self, type_name: str) -> dict[str, AttrDef]:
        """Own plus inherited attributes, supertype slots first."""
        merged: dict[str, AttrDef] = {}
        chain: list[NodeTypeDef] = []
        name: str | None = type_name
        while name is not None:
            t = self.node_type(name)
            if t is None:
                break
            chain.append(t)
            name = t.super_type
        for t in reversed(chain):
            for attr in t.attributes:
                merged[attr.name] = attr
        return merged


# ---------------------------------------------------------------------------
# Occurrence analysis
# ---------------------------------------------------------------------------

def _combine_card(occ: tuple[int, int | None],
                  card: Cardinality) -> tuple[int, int | None]:
    lo, hi = occ
    if card is Cardinality.ONE:
        return lo, hi
    if card is Cardinality.OPTIONAL:
        return 0, hi
    nonzero = hi is None or hi > 0
    if card is Cardinality.STAR:
        return 0, UNBOUNDED_OCCURS if nonzero else 0
    # PLUS: one pass is mandatory, further passes are unbounded
    return lo, UNBOUNDED_OCCURS if nonzero else 0


def _count(body: BodyElement, matches) -> tuple[int, int | None]:
    if isinstance(body, Sequence):
        lo = hi = 0
        for item in body.items:
            ilo, ihi = _count(item, matches)
            lo += ilo
            hi = None if hi is None or ihi is None else hi + ihi
        return lo, hi
    if isinstance(body, Alternative):
        los, his = [], []
        for branch in body.branches:
            blo, bhi = _count(branch, matches)
            los.append(blo)
            his.append(bhi)
        hi = None if any(h is None for h in his) else max(his)
        return min(los), hi
    if isinstance(body, Block):
        return _combine_card(_count(body.inner, matches), body.card)
    if isinstance(body, (NonterminalRef, TokenRef)):
        base = (1, 1) if matches(body) else (0, 0)
        return _combine_card(base, body.card)
    if isinstance(body, (Terminal, ConstantGroup)):
        base = (1, 1) if matches(body) else (0, 0)
        if isinstance(body, Terminal):
            return _combine_card(base, body.card)
        return base
    raise TypeError(f"not a body element: {body!r}")


def occurrence_analysis(body: BodyElement,
                        element: tuple[str | None, str]) -> tuple[int, int | None]:
    """Minimum and maximum occurrences of a (label, target) reference over
    all derivations of ``body``; ``None`` means unbounded.

    Equally labeled references to the same target count as one element, so
    constant-separated lists like ``A:X ("," A:X)*`` unify.
    """
    label, target = element

    def matches(e) -> bool:
        return (isinstance(e, (NonterminalRef, TokenRef))
                and e.target == target and e.label == label)

    return _count(body, matches)


# ---------------------------------------------------------------------------
# Metamodel derivation
# ---------------------------------------------------------------------------

def derive_metamodel(linked: LinkedGrammar) -> Metamodel:
    """Derive the typed abstract-syntax model of a linked grammar set.

    Raises:
        SourceError: on inheritance cycles, unknown association endpoints,
            or attribute name conflicts inside one production.
    """
    sink = DiagnosticSink()
    order = _inheritance_order(linked, sink)
    sink.raise_if_errors()

    metamodel = Metamodel()
    for name in order:
        prod = linked.productions[name]
        grammar = linked.provenance.get(name, linked.name)
        if prod.kind is ProductionKind.INTERFACE:
            metamodel.interfaces.append(InterfaceDef(
                name=name,
                extends_list=list(dict.fromkeys(
                    prod.extends_list + prod.ast_extends_list)),
                declared_attributes=_augmented_attrs(linked, name, sink),
                source_grammar=grammar,
            ))
            continue
        super_type = _pick_super_type(prod, linked, metamodel, sink)
        attrs: list[AttrDef] = []
        groups: list[list[list[str]]] = []
        if prod.body is not None and prod.kind is not ProductionKind.INTERFACE:
            own_is_dispatch = prod.kind is ProductionKind.ABSTRACT
            if not own_is_dispatch:
                attrs, groups = _body_attributes(prod.name, prod.body, linked, sink)
        attrs.extend(_augmented_attrs(linked, name, sink, seen=attrs))
        node = NodeTypeDef(
            name=name,
            super_type=super_type,
            implemented_interfaces=list(dict.fromkeys(
                prod.implements_list + prod.ast_implements_list)),
            is_abstract=prod.kind in (ProductionKind.ABSTRACT,
                                      ProductionKind.EXTERNAL),
            attributes=attrs,
            source_grammar=grammar,
            exclusive_groups=groups,
        )
        metamodel.node_types.append(node)

    # restore declaration order (derivation ran in inheritance order)
    decl_index = {name: i for i, name in enumerate(linked.productions)}
    metamodel.node_types.sort(key=lambda t: decl_index[t.name])
    metamodel.interfaces.sort(key=lambda i: decl_index[i.name])

    _subtract_inherited(metamodel, sink)
    _derive_associations(linked, metamodel, sink)
    sink.raise_if_errors()
    return metamodel


def _inheritance_order(linked: LinkedGrammar, sink: DiagnosticSink) -> list[str]:
    """Topological order over extends/implements edges; cycles are errors."""
    state: dict[str, int] = {}
    order: list[str] = []

    def visit(name: str, trail: tuple[str, ...]) -> None:
        if state.get(name) == 2:
            return
        if state.get(name) == 1:
            cycle = trail[trail.index(name):] + (name,)
            sink.error("inheritance cycle: " + " -> ".join(cycle),
                       linked.productions[name].pos)
            return
        state[name] = 1
        prod = linked.productions[name]
        for target in (*prod.extends_list, *prod.implements_list,
                       *prod.ast_extends_list, *prod.ast_implements_list):
            if target in linked.productions:
                visit(target, trail + (name,))
        state[name] = 2
        order.append(name)

    for name in linked.productions:
        visit(name, ())
    return order


def _pick_super_type(prod, linked: LinkedGrammar, metamodel: Metamodel,
                     sink: DiagnosticSink) -> str | None:
    candidates = [t for t in (*prod.extends_list, *prod.ast_extends_list)
                  if linked.production(t) is not None
                  and linked.production(t).kind is not ProductionKind.INTERFACE]
    if not candidates:
        return None
    best = candidates[0]
    for other in candidates[1:]:
        if metamodel.is_subtype(other, best):
            best = other
        elif not metamodel.is_subtype(best, other):
            sink.error(
                f"'{prod.name}' would need unrelated supertypes '{best}' and "
                f"'{other}'", prod.pos)
    return best


def _body_attributes(prod_name: str, body: BodyElement, linked: LinkedGrammar,
                     sink: DiagnosticSink) -> tuple[list[AttrDef], list[list[list[str]]]]:
    elements: dict[str, list] = {}
    order: list[str] = []
    for element in _attr_elements(body):
        name = element_attr_name(element)
        if name is None:
            continue  # already reported by validate_grammar
        if name not in elements:
            elements[name] = []
            order.append(name)
        elements[name].append(element)

    attrs: list[AttrDef] = []
    for name in order:
        group = elements[name]
        kind_tags = {_element_kind(e, linked) for e in group}
        if len(kind_tags) != 1:
            sink.error(
                f"attribute '{name}' of '{prod_name}' is derived from "
                "elements of different kinds; rename one", group[0].pos)
            continue
        lo, hi = _count(body, lambda e, g=group: any(e is m for m in g))
        kind = kind_tags.pop()
        attrs.append(_make_attr(name, kind, lo, hi))
    return attrs, _exclusive_groups(body)


def _attr_elements(body: BodyElement):
    """Leaf elements that surface as attributes, in body order."""
    if isinstance(body, (NonterminalRef, TokenRef, ConstantGroup)):
        yield body
    elif isinstance(body, Sequence):
        for item in body.items:
            yield from _attr_elements(item)
    elif isinstance(body, Alternative):
        for branch in body.branches:
            yield from _attr_elements(branch)
    elif isinstance(body, Block):
        yield from _attr_elements(body.inner)


def _element_kind(element, linked: LinkedGrammar):
    if isinstance(element, NonterminalRef):
        return ("composition", element.target)
    if isinstance(element, TokenRef):
        tok = linked.tokens.get(element.target)
        value = tok.value_kind.value if tok is not None else "string"
        if tok is not None and tok.converter_key:
            value = f"custom:{tok.converter_key}"
        return ("token", value)
    if isinstance(element, ConstantGroup):
        if len(element.constants) == 1:
            return ("boolean",)
        return ("enum", tuple(element.constants))
    raise TypeError(element)


def _make_attr(name: str, kind: tuple, lo: int, hi: int | None) -> AttrDef:
    hi_norm = hi if hi is None else max(hi, 1)
    if kind[0] == "composition":
        return AttrDef(name, "composition", target=kind[1],
                       min_occurs=lo, max_occurs=hi_norm)
    if kind[0] == "token":
        return AttrDef(name, "token", value_type=kind[1],
                       min_occurs=lo, max_occurs=hi_norm)
    if kind[0] == "boolean":
        return AttrDef(name, "boolean", min_occurs=lo, max_occurs=hi_norm)
    return AttrDef(name, "enum", values=kind[1],
                   min_occurs=lo, max_occurs=hi_norm)


def _exclusive_groups(body: BodyElement) -> list[list[list[str]]]:
    """Alternatives not under repetition: at most one branch fills its attrs."""
    groups: list[list[list[str]]] = []

    def walk(element: BodyElement, repeated: bool) -> None:
        if isinstance(element, Alternative):
            if not repeated and len(element.branches) > 1:
                branch_attrs = []
                for branch in element.branches:
                    names = sorted({element_attr_name(e)
                                    for e in _attr_elements(branch)
                                    if element_attr_name(e) is not None})
                    branch_attrs.append(names)
                flattened = [n for names in branch_attrs for n in names]
                if (len(set(flattened)) == len(flattened)
                        and sum(1 for names in branch_attrs if names) > 1):
                    groups.append(branch_attrs)
            for branch in element.branches:
                walk(branch, repeated)
        elif isinstance(element, Sequence):
            for item in element.items:
                walk(item, repeated)
        elif isinstance(element, Block):
            walk(element.inner,
                 repeated or element.card in (Cardinality.STAR, Cardinality.PLUS))

    walk(body, False)
    return groups


def _augmented_attrs(linked: LinkedGrammar, target: str, sink: DiagnosticSink,
                     seen: list[AttrDef] | None = None) -> list[AttrDef]:
    attrs: list[AttrDef] = []
    existing = {a.name for a in (seen or [])}
    for aug in linked.ast_augmentations:
        if aug.target != target:
            continue
        derived, _ = _body_attributes(f"ast {target}", aug.body, linked, sink)
        for attr in derived:
            if attr.name not in existing:
                attrs.append(attr)
                existing.add(attr.name)
    return attrs


def _subtract_inherited(metamodel: Metamodel, sink: DiagnosticSink) -> None:
    """Drop subtype attributes the supertype chain already defines."""
    done: set[str] = set()

    def process(t: NodeTypeDef) -> None:
        if t.name in done:
            return
        done.add(t.name)
        if t.super_type is None:
            return
        super_t = metamodel.node_type(t.super_type)
        if super_t is None:
            return
        process(super_t)
        inherited = metamodel.all_attributes(t.super_type)
        kept: list[AttrDef] = []
        for attr in t.attributes:
            other = inherited.get(attr.name)
            if other is not None and attr.same_shape(other):
                continue
            if other is not None:
                sink.warning(
                    f"attribute '{attr.name}' of '{t.name}' shadows an "
                    f"incompatible attribute of '{t.super_type}'")
            kept.append(attr)
        t.attributes = kept

    for t in metamodel.node_types:
        process(t)


def _derive_associations(linked: LinkedGrammar, metamodel: Metamodel,
                         sink: DiagnosticSink) -> None:
    for assoc in linked.associations:
        for endpoint in (assoc.source_type, assoc.target_type):
            if metamodel.lookup(endpoint) is None:
                sink.error(
                    f"association '{assoc.name}' endpoint '{endpoint}' is not "
                    "a known type", assoc.pos)
        if metamodel.lookup(assoc.source_type) is None or \
                metamodel.lookup(assoc.target_type) is None:
            continue
        edge = AssocEdge(
            name=assoc.name,
            source=assoc.source_type,
            target=assoc.target_type,
            source_role=assoc.source_role or decapitalize(assoc.target_type),
            target_role=assoc.target_role or decapitalize(assoc.source_type),
            source_card=assoc.source_card,
            target_card=assoc.target_card,
            directed=assoc.directed,
        )
        for type_name, role in ((edge.target, edge.target_role),
                                (edge.source, edge.source_role)):
            entry = metamodel.lookup(type_name)
            if isinstance(entry, NodeTypeDef):
                if role in metamodel.all_attributes(type_name):
                    sink.warning(
                        f"association role '{role}' shadows an attribute of "
                        f"'{type_name}'", assoc.pos)
        metamodel.associations.append(edge)


# ---------------------------------------------------------------------------
# Expanded EBNF view
# ---------------------------------------------------------------------------

def emit_ebnf(linked: LinkedGrammar) -> str:
    """Plain EBNF with inheritance resolved into alternatives.

    Each subtype appends an alternative to its super-production; interface
    productions list their implementors.  External nonterminals stay
    undefined (bottom nonterminals of a grammar fragment).
    """
    lines: list[str] = []
    for name, prod in linked.productions.items():
        if prod.kind is ProductionKind.EXTERNAL:
            continue
        own, variants = linked.parse_alternatives(name)
        parts: list[str] = []
        if own is not None:
            parts.append(_ebnf_body(own))
        parts.extend(variants)
        if not parts:
            continue
        lines.append(f"{name} ::= " + " | ".join(parts))
    return "\n".join(lines) + "\n"


def _ebnf_body(body: BodyElement, nested: bool = False) -> str:
    if isinstance(body, Sequence):
        text = " ".join(_ebnf_body(i, nested=True) for i in body.items)
        return f"({text})" if nested and len(body.items) > 1 else text
    if isinstance(body, Alternative):
        text = " | ".join(_ebnf_body(b) for b in body.branches)
        return f"({text})" if nested else text
    if isinstance(body, Block):
        inner = _ebnf_body(body.inner)
        return f"({inner}){body.card.value}"
    if isinstance(body, (NonterminalRef, TokenRef)):
        return f"{body.target}{body.card.value}"
    if isinstance(body, Terminal):
        return f"\"{body.text}\"{body.card.value}"
    if isinstance(body, ConstantGroup):
        if len(body.constants) == 1:
            return f"\"{body.constants[0]}\""
        return "(" + " | ".join(f'"{c}"' for c in body.constants) + ")"
    raise TypeError(f"not a body element: {body!r}")


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

def _attr_to_dict(attr: AttrDef) -> dict:
    entry: dict = {"name": attr.name, "kind": attr.kind}
    if attr.target is not None:
        entry["target"] = attr.target
    if attr.value_type is not None:
        entry["valueType"] = attr.value_type
    if attr.values is not None:
        entry["values"] = list(attr.values)
    entry["minOccurs"] = attr.min_occurs
    entry["maxOccurs"] = "unbounded" if attr.max_occurs is None else attr.max_occurs
    return entry


def metamodel_to_dict(m: Metamodel) -> dict:
    return {
        "types": [
            {
                "name": t.name,
                "superType": t.super_type,
                "implements": list(t.implemented_interfaces),
                "isAbstract": t.is_abstract,
                "sourceGrammar": t.source_grammar,
                "attributes": [_attr_to_dict(a) for a in t.attributes],
                "exclusive": t.exclusive_groups,
            }
            for t in m.node_types
        ],
        "interfaces": [
            {
                "name": i.name,
                "extends": list(i.extends_list),
                "declaredAttributes": [_attr_to_dict(a)
                                       for a in i.declared_attributes],
                "sourceGrammar": i.source_grammar,
            }
            for i in m.interfaces
        ],
        "associations": [
            {
                "name": a.name,
                "source": a.source,
                "target": a.target,
                "sourceRole": a.source_role,
                "targetRole": a.target_role,
                "sourceCard": str(a.source_card),
                "targetCard": str(a.target_card),
                "directed": a.directed,
            }
            for a in m.associations
        ],
    }


def _attr_from_dict(entry: dict) -> AttrDef:
    max_occurs = entry["maxOccurs"]
    return AttrDef(
        name=entry["name"],
        kind=entry["kind"],
        target=entry.get("target"),
        value_type=entry.get("valueType"),
        values=tuple(entry["values"]) if "values" in entry else None,
        min_occurs=entry["minOccurs"],
        max_occurs=None if max_occurs == "unbounded" else max_occurs,
    )


def _card_from_str(text: str) -> CardRange:
    if text == "*":
        return CardRange(0, None)
    if ".." in text:
        lo, hi = text.split("..")
        return CardRange(int(lo), None if hi == "*" else int(hi))
    return CardRange(int(text), int(text))


def metamodel_from_json(text: str) -> Metamodel:
    data = json.loads(text)
    m = Metamodel()
    for entry in data["types"]:
        m.node_types.append(NodeTypeDef(
            name=entry["name"],
            super_type=entry["superType"],
            implemented_interfaces=list(entry["implements"]),
            is_abstract=entry["isAbstract"],
            attributes=[_attr_from_dict(a) for a in entry["attributes"]],
            source_grammar=entry.get("sourceGrammar", ""),
            exclusive_groups=entry.get("exclusive", []),
        ))
    for entry in data["interfaces"]:
        m.interfaces.append(InterfaceDef(
            name=entry["name"],
            extends_list=list(entry["extends"]),
            declared_attributes=[_attr_from_dict(a)
                                 for a in entry["declaredAttributes"]],
            source_grammar=entry.get("sourceGrammar", ""),
        ))
    for entry in data["associations"]:
        m.associations.append(AssocEdge(
            name=entry["name"],
            source=entry["source"],
            target=entry["target"],
            source_role=entry["sourceRole"],
            target_role=entry["targetRole"],
            source_card=_card_from_str(entry["sourceCard"]),
            target_card=_card_from_str(entry["targetCard"]),
            directed=entry["directed"],
        ))
    return m


def emit_metamodel_report(m: Metamodel, format: str = "structured-json") -> str:
    """Serialize the metamodel; json output re-loads loss-free."""
    if format in ("structured-json", "json"):
        return json.dumps(metamodel_to_dict(m), indent=2, sort_keys=False) + "\n"
    if format in ("graph-dot", "dot"):
        return _emit_dot(m)
    raise SourceError(error(f"unknown metamodel report format '{format}'"))


def _emit_dot(m: Metamodel) -> str:
    lines = ["digraph metamodel {", "  node [shape=record];"]
    for t in m.node_types:
        attrs = "\\l".join(
            f"{a.name}: {a.target or a.value_type or a.kind}"
            + ("[]" if a.is_list else "")
            for a in t.attributes)
        style = " (abstract)" if t.is_abstract else ""
        lines.append(f'  "{t.name}" [label="{{{t.name}{style}|{attrs}\\l}}"];')
    for i in m.interfaces:
        attrs = "\\l".join(f"{a.name}: {a.value_type or a.kind}"
                           for a in i.declared_attributes)
        lines.append(f'  "{i.name}" [label="{{<<interface>> {i.name}|{attrs}\\l}}"];')
    for t in m.node_types:
        if t.super_type:
            lines.append(f'  "{t.name}" -> "{t.super_type}" [arrowhead=empty];')
        for iface in t.implemented_interfaces:
            lines.append(
                f'  "{t.name}" -> "{iface}" [arrowhead=empty, style=dashed];')
        for attr in t.attributes:
            if attr.kind == "composition":
                lines.append(
                    f'  "{t.name}" -> "{attr.target}" '
                    f'[arrowtail=diamond, dir=both, label="{attr.name}"];')
    for i in m.interfaces:
        for ext in i.extends_list:
            lines.append(f'  "{i.name}" -> "{ext}" [arrowhead=empty, style=dashed];')
    for a in m.associations:
        style = "" if a.directed else ", dir=none"
        lines.append(
            f'  "{a.target}" -> "{a.source}" [label="{a.name}", '
            f'style=bold{style}];')
    lines.append("}")
    return "\n".join(lines) + "\n"
