"""Inheritance linking: merge a grammar with all of its supergrammars.

Every production and token class of every (transitive) supergrammar is
copied into the linked result.  An equally named production in an extending
grammar overrides the inherited one; a bodyless override keeps the inherited
body and only adds interfaces/supertypes.  When two unrelated supergrammars
contribute the same production name, the extending grammar must reconcile
them with a definition that contains all of their attributes, otherwise the
clash is reported naming both origins.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .diagnostics import DiagnosticSink, SourceError
from .grammar import (Alternative, AssociationDef, AstAugmentation,
                      BodyElement, ConstantGroup, GrammarDef, GrammarOptions,
                      NonterminalRef, ProductionDef, ProductionKind, TokenDef,
                      TokenRef, element_attr_name, grammar_to_dict, iter_body)

__all__ = ["LinkedGrammar", "link_inheritance", "element_attr_name"]


def _attr_signature(body: BodyElement | None,
                    tokens: dict[str, TokenDef]) -> frozenset:
    """Name+kind fingerprint of a body, used by the multi-super clash test."""
    if body is None:
        return frozenset()
    entries = set()
    for element in iter_body(body):
        name = element_attr_name(element)
        if name is None:
            continue
        if isinstance(element, NonterminalRef):
            entries.add((name, ("composition", element.target)))
        elif isinstance(element, TokenRef):
            tok = tokens.get(element.target)
            kind = tok.value_kind.value if tok else "string"
            entries.add((name, ("token", kind)))
        elif isinstance(element, ConstantGroup):
            if len(element.constants) == 1:
                entries.add((name, ("boolean",)))
            else:
                entries.add((name, ("enum", tuple(element.constants))))
    return frozenset(entries)


@dataclass
class LinkedGrammar:
    """One grammar with all inherited declarations resolved in.

    Immutable after linking; shared by the lexer builder, the metamodel
    derivation, and the parser.
    """

    name: str  # qualified name of the most-derived grammar
    productions: dict[str, ProductionDef] = field(default_factory=dict)
    tokens: dict[str, TokenDef] = field(default_factory=dict)
    associations: list[AssociationDef] = field(default_factory=list)
    ast_augmentations: list[AstAugmentation] = field(default_factory=list)
    attribute_decls: list = field(default_factory=list)
    options: GrammarOptions = field(default_factory=GrammarOptions)
    provenance: dict[str, str] = field(default_factory=dict)
    grammar_order: list[str] = field(default_factory=list)

    def __post_init__(self):
        self._variants: dict[str, list[str]] | None = None

    def production(self, name: str) -> ProductionDef | None:
        return self.productions.get(name)

    def direct_variants(self, name: str) -> list[str]:
        """Productions that extend or implement ``name``, in declaration order.

        These become the extra parsing alternatives of ``name`` (§-style
        "adds an additional alternative"); ast-only relations do not count.
        """
        if self._variants is None:
            variants: dict[str, list[str]] = {}
            for prod in self.productions.values():
                for target in (*prod.extends_list, *prod.implements_list):
                    variants.setdefault(target, []).append(prod.name)
            self._variants = variants
        return self._variants.get(name, [])

    def parse_alternatives(self, name: str) -> tuple[BodyElement | None, list[str]]:
        """(own body to parse, variant production names) for a nonterminal.

        Interface/abstract productions never instantiate themselves: an
        explicit body is an alternative list of variant references.
        """
        prod = self.productions[name]
        if prod.kind is ProductionKind.EXTERNAL:
            return None, []
        variants = list(self.direct_variants(name))
        if prod.kind in (ProductionKind.INTERFACE, ProductionKind.ABSTRACT):
            if prod.body is not None:
                listed = []
                branches = (prod.body.branches
                            if isinstance(prod.body, Alternative) else [prod.body])
                for branch in branches:
                    if isinstance(branch, NonterminalRef):
                        listed.append(branch.target)
                listed.extend(v for v in variants if v not in listed)
                return None, listed
            return None, variants
        return prod.body, variants


def _linearize(root: GrammarDef, registry: dict[str, GrammarDef],
               sink: DiagnosticSink) -> list[GrammarDef]:
    """Supergrammars first, depth-first left-to-right, each grammar once."""
    order: list[GrammarDef] = []
    seen: set[str] = set()
    in_stack: set[str] = set()

    def visit(g: GrammarDef) -> None:
        qname = g.qualified_name
        if qname in seen:
            return
        if qname in in_stack:
            sink.error(f"grammar inheritance cycle through '{qname}'", g.pos)
            return
        in_stack.add(qname)
        for super_name in g.supers:
            super_g = _resolve(super_name, registry)
            if super_g is None:
                sink.error(f"unknown supergrammar '{super_name}' of '{qname}'",
                           g.pos)
                continue
            visit(super_g)
        in_stack.discard(qname)
        seen.add(qname)
        order.append(g)

    visit(root)
    return order


def _resolve(name: str, registry: dict[str, GrammarDef]) -> GrammarDef | None:
    if name in registry:
        return registry[name]
    # tolerate a bare name when it is unambiguous
    matches = [g for q, g in registry.items()
               if q == name or q.endswith("." + name)]
    if len(matches) == 1:
        return matches[0]
    return None


def _extends_transitively(sub: str, super_: str,
                          registry: dict[str, GrammarDef]) -> bool:
    if sub == super_:
        return True
    g = registry.get(sub)
    if g is None:
        return False
    return any(
        _extends_transitively(_resolve(s, registry).qualified_name, super_,
                              registry)
        for s in g.supers if _resolve(s, registry) is not None)


def _production_fingerprint(prod: ProductionDef) -> object:
    wrapper = GrammarDef(package="", name="_", productions=[prod])
    return grammar_to_dict(wrapper)["productions"][0]


def _merge_override(incoming: ProductionDef, existing: ProductionDef,
                    origin: str) -> ProductionDef:
    merged = replace(incoming)
    merged.extends_list = list(incoming.extends_list)
    merged.implements_list = list(incoming.implements_list)
    merged.ast_extends_list = list(incoming.ast_extends_list)
    merged.ast_implements_list = list(incoming.ast_implements_list)
    if merged.body is None:
        merged.body = existing.body
        if merged.kind is ProductionKind.NODE:
            merged.kind = existing.kind
        if merged.required_contract is None:
            merged.required_contract = existing.required_contract
    for name in existing.extends_list:
        if name not in merged.extends_list:
            merged.extends_list.append(name)
    for name in existing.implements_list:
        if name not in merged.implements_list:
            merged.implements_list.append(name)
    for name in existing.ast_extends_list:
        if name not in merged.ast_extends_list:
            merged.ast_extends_list.append(name)
    for name in existing.ast_implements_list:
        if name not in merged.ast_implements_list:
            merged.ast_implements_list.append(name)
    merged.overrides = origin
    return merged


def link_inheritance(grammars, root: GrammarDef | str | None = None) -> LinkedGrammar:
    """Link one grammar with its supergrammars.

    Args:
        grammars: all grammar modules needed for resolution.
        root: the most-derived grammar (object or qualified name).  Defaults
            to the unique grammar no other one extends.

    Raises:
        SourceError: unresolvable supers, inheritance cycles, irreconcilable
            same-name productions, or dangling references after linking.
    """
    grammars = list(grammars)
    registry = {g.qualified_name: g for g in grammars}
    sink = DiagnosticSink()

    root_g = _pick_root(grammars, registry, root, sink)
    sink.raise_if_errors()
    order = _linearize(root_g, registry, sink)
    sink.raise_if_errors()

    linked = LinkedGrammar(name=root_g.qualified_name,
                           grammar_order=[g.qualified_name for g in order])

    # names with several unreconciled definitions: name -> list of origins
    contested: dict[str, list[str]] = {}
    token_contested: dict[str, list[str]] = {}

    for g in order:
        qname = g.qualified_name
        for prod in g.productions:
            existing = linked.productions.get(prod.name)
            if existing is None:
                linked.productions[prod.name] = replace(prod)
                linked.provenance[prod.name] = qname
                continue
            origin = linked.provenance[prod.name]
            if _extends_transitively(qname, origin, registry):
                pending = contested.pop(prod.name, None)
                if pending is not None:
                    # several unrelated supergrammars defined this name; the
                    # override must carry a body containing all their elements
                    if prod.body is None:
                        sink.error(
                            f"clashing inherited productions '{prod.name}' "
                            f"from {' and '.join(pending)}: the override in "
                            f"{qname} must define a body containing all of "
                            "their elements", prod.pos)
                    else:
                        new_sig = _attr_signature(prod.body, linked.tokens)
                        for other in pending:
                            other_sig = _attr_signature(
                                registry[other].production(prod.name).body,
                                linked.tokens)
                            if not other_sig <= new_sig:
                                sink.error(
                                    f"production '{prod.name}' in {qname} "
                                    f"does not contain all elements of the "
                                    f"version inherited from {other}",
                                    prod.pos)
                merged = _merge_override(prod, existing, origin)
                if pending is not None:
                    for other in pending:
                        other_prod = registry[other].production(prod.name)
                        for attr in ("extends_list", "implements_list",
                                     "ast_extends_list", "ast_implements_list"):
                            for name in getattr(other_prod, attr):
                                if name not in getattr(merged, attr):
                                    getattr(merged, attr).append(name)
                linked.productions[prod.name] = merged
                linked.provenance[prod.name] = qname
            elif (_production_fingerprint(prod)
                  == _production_fingerprint(existing)):
                pass  # same definition via different paths
            else:
                contested.setdefault(prod.name, [origin]).append(qname)
        for tok in g.tokens:
            existing_tok = linked.tokens.get(tok.name)
            if existing_tok is None:
                linked.tokens[tok.name] = tok
                linked.provenance[f"token:{tok.name}"] = qname
                continue
            origin = linked.provenance[f"token:{tok.name}"]
            same = (str(existing_tok.pattern) == str(tok.pattern)
                    and existing_tok.value_kind == tok.value_kind
                    and existing_tok.converter_key == tok.converter_key)
            if _extends_transitively(qname, origin, registry):
                linked.tokens[tok.name] = tok
                linked.provenance[f"token:{tok.name}"] = qname
                token_contested.pop(tok.name, None)
            elif not same:
                token_contested.setdefault(tok.name, [origin]).append(qname)
        for assoc in g.associations:
            linked.associations = [a for a in linked.associations
                                   if a.name != assoc.name]
            linked.associations.append(assoc)
        linked.ast_augmentations.extend(g.ast_augmentations)
        linked.attribute_decls.extend(g.attribute_decls)

    for name, origins in contested.items():
        sink.error(
            f"clashing inherited productions '{name}' from "
            f"{' and '.join(origins)}; redefine it in "
            f"{root_g.qualified_name}")
    for name, origins in token_contested.items():
        sink.error(
            f"clashing inherited token '{name}' from {' and '.join(origins)}; "
            f"override it in {root_g.qualified_name}")

    linked.options = _merge_options(order)
    _check_references(linked, sink)
    sink.raise_if_errors()
    return linked


def _pick_root(grammars, registry, root, sink) -> GrammarDef:
    if isinstance(root, GrammarDef):
        return root
    if isinstance(root, str):
        g = _resolve(root, registry)
        if g is None:
            sink.error(f"unknown grammar '{root}'")
            return grammars[0]
        return g
    extended = set()
    for g in grammars:
        for s in g.supers:
            resolved = _resolve(s, registry)
            if resolved is not None:
                extended.add(resolved.qualified_name)
    candidates = [g for g in grammars if g.qualified_name not in extended]
    if len(candidates) == 1:
        return candidates[0]
    return grammars[-1]


def _merge_options(order: list[GrammarDef]) -> GrammarOptions:
    merged = GrammarOptions()
    for g in order:  # supers first; the most-derived grammar wins
        if g.options.compile_unit_start is not None:
            merged.compile_unit_start = g.options.compile_unit_start
        if not g.options.default_tokens_enabled:
            merged.default_tokens_enabled = False
        merged.lookahead_k = g.options.lookahead_k
    return merged


def _check_references(linked: LinkedGrammar, sink: DiagnosticSink) -> None:
    for prod in linked.productions.values():
        for target in (*prod.extends_list, *prod.implements_list,
                       *prod.ast_extends_list, *prod.ast_implements_list):
            if target not in linked.productions:
                sink.error(
                    f"'{prod.name}' refers to unknown production '{target}'",
                    prod.pos)
        if prod.kind is ProductionKind.NODE and prod.body is None:
            sink.error(f"production '{prod.name}' has no body", prod.pos)
        if prod.body is None:
            continue
        for element in iter_body(prod.body):
            if (isinstance(element, NonterminalRef)
                    and element.target not in linked.productions):
                sink.error(
                    f"'{prod.name}' references unknown nonterminal "
                    f"'{element.target}'", element.pos)
    for aug in linked.ast_augmentations:
        if aug.target not in linked.productions:
            sink.error(
                f"ast augmentation targets unknown production '{aug.target}'",
                aug.pos)
