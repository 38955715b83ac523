"""Language components and their composition at configuration time.

A :class:`LanguageComponent` packages a linked grammar, its lexer, its
derived metamodel, and the decision analysis; it is the deployable unit.
Components stay stand-alone: embedding another language into an external
nonterminal produces a new composed component and leaves the originals (and
their content-addressed artifacts) untouched, so rebuilding one side never
forces re-deriving the other.

Composition is declared in a JSON document::

    {
      "components": [
        {"name": "shop", "grammars": ["shop.mcg"], "start": "ShopSystem"}
      ],
      "embeddings": [
        {"host": "shop", "external": "StatementCash",
         "candidates": [{"component": "pay", "start": "Statement"}],
         "selection": {"kind": "by-attribute", "attr": "lang",
                        "cases": {"Pay": 0}, "default": 1},
         "contract": {"name": "shop.IStatementCash",
                       "requiredAttrs": ["amount"]}}
      ]
    }
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from .diagnostics import (Diagnostic, DiagnosticSink, SourceError, error,
                          warning)
from .grammar import (GrammarDef, NonterminalRef, ProductionKind, TokenRef,
                      iter_body, validate_grammar)
from .grammar_parser import parse_grammar
from .lexer import ConverterRegistry, LexerSpec, build_lexer
from .linking import LinkedGrammar, link_inheritance
from .metamodel import (Metamodel, derive_metamodel, metamodel_to_dict)
from .parsing import DecisionTable, analyze_llk

# re-exported composition operation (the inheritance half lives in linking)
__all__ = [
    "link_inheritance", "LanguageComponent", "EmbeddingBinding",
    "SelectionRule", "Contract", "build_component", "bind_embedding",
    "compose_check", "load_composition_config",
]


@dataclass
class SelectionRule:
    """How to pick among several embedded-language candidates."""

    kind: str  # fixed | by-attribute | by-first-token
    index: int = 0
    attr_name: str | None = None
    cases: dict[str, int] = field(default_factory=dict)
    default: int | None = None

    @staticmethod
    def fixed(index: int = 0) -> "SelectionRule":
        return SelectionRule(kind="fixed", index=index)

    @staticmethod
    def by_attribute(attr_name: str, cases: dict[str, int],
                     default: int | None = None) -> "SelectionRule":
        return SelectionRule(kind="by-attribute", attr_name=attr_name,
                             cases=dict(cases), default=default)

    @staticmethod
    def by_first_token(cases: dict[str, int],
                       default: int | None = None) -> "SelectionRule":
        return SelectionRule(kind="by-first-token", cases=dict(cases),
                             default=default)


@dataclass
class Contract:
    """A named capability: attributes the embedded start type must offer."""

    name: str
    required_attrs: list[str] = field(default_factory=list)


@dataclass
class EmbeddingBinding:
    external_nt: str
    candidates: list[tuple["LanguageComponent", str]]
    selection: SelectionRule | None = None
    required_contract: Contract | None = None


@dataclass
class LanguageComponent:
    """A deployable language: linked grammar, lexer, metamodel, decisions."""

    name: str
    linked: LinkedGrammar
    lexer: LexerSpec
    metamodel: Metamodel
    start_rules: set[str]
    decision_table: DecisionTable | None = None
    embeddings: dict[str, EmbeddingBinding] = field(default_factory=dict)
    resolver_config: object = None  # links.ResolverRegistry, configured later

    def default_start(self) -> str:
        if self.linked.options.compile_unit_start:
            return self.linked.options.compile_unit_start
        if self.start_rules:
            for name in self.linked.productions:
                if name in self.start_rules:
                    return name
        for name, prod in self.linked.productions.items():
            if prod.kind is ProductionKind.NODE:
                return name
        return next(iter(self.linked.productions))

    def effective_metamodel(self) -> Metamodel:
        """Host metamodel merged with every embedded component's, type names
        checked disjoint."""
        if not self.embeddings:
            return self.metamodel
        merged = Metamodel(node_types=list(self.metamodel.node_types),
                           interfaces=list(self.metamodel.interfaces),
                           associations=list(self.metamodel.associations))
        seen = {t.name for t in merged.node_types} | \
               {i.name for i in merged.interfaces}
        sink = DiagnosticSink()
        for binding in self.embeddings.values():
            for candidate, _ in binding.candidates:
                sub = candidate.effective_metamodel()
                for entry in (*sub.node_types, *sub.interfaces):
                    if entry.name in seen:
                        existing = merged.lookup(entry.name)
                        if _same_type_entry(existing, entry):
                            continue
                        sink.error(
                            f"embedded component '{candidate.name}' redefines "
                            f"type '{entry.name}'; component type names must "
                            "be disjoint (qualify one of the grammars)")
                        continue
                    seen.add(entry.name)
                    if hasattr(entry, "super_type"):
                        merged.node_types.append(entry)
                    else:
                        merged.interfaces.append(entry)
                merged.associations.extend(
                    a for a in sub.associations
                    if all(a.name != b.name for b in merged.associations))
        sink.raise_if_errors()
        return merged

    def allowed_external_types(self) -> dict[str, set[str]]:
        """external type name -> start types embeddings may splice there."""
        allowed: dict[str, set[str]] = {}
        for external, binding in self.embeddings.items():
            starts = {start for _, start in binding.candidates}
            allowed.setdefault(external, set()).update(starts)
        return allowed

    # -- content addressing --------------------------------------------------

    def artifact_dict(self) -> dict:
        from .grammar import body_to_dict
        return {
            "grammar": {
                "name": self.linked.name,
                "order": list(self.linked.grammar_order),
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
                        "overrides": p.overrides,
                    }
                    for p in self.linked.productions.values()
                ],
                "tokens": [
                    {"name": t.name, "pattern": str(t.pattern),
                     "valueKind": t.value_kind.value,
                     "converterKey": t.converter_key}
                    for t in self.linked.tokens.values()
                ],
            },
            "lexer": {
                "rules": [r.name for r in self.lexer.token_rules],
                "reserved": sorted(self.lexer.reserved_terminals),
            },
            "metamodel": metamodel_to_dict(self.metamodel),
            "lookahead": self.decision_table.k if self.decision_table else None,
            "startRules": sorted(self.start_rules),
        }

    def artifact_bytes(self) -> bytes:
        return json.dumps(self.artifact_dict(), indent=None,
                          sort_keys=True).encode("utf-8")

    @property
    def content_hash(self) -> str:
        return hashlib.sha256(self.artifact_bytes()).hexdigest()


def _same_type_entry(a, b) -> bool:
    m_a = Metamodel(node_types=[a] if hasattr(a, "super_type") else [],
                    interfaces=[] if hasattr(a, "super_type") else [a])
    m_b = Metamodel(node_types=[b] if hasattr(b, "super_type") else [],
                    interfaces=[] if hasattr(b, "super_type") else [b])
    return metamodel_to_dict(m_a) == metamodel_to_dict(m_b)


# ---------------------------------------------------------------------------
# Building and composing
# ---------------------------------------------------------------------------

def build_component(sources, name: str | None = None,
                    root: str | GrammarDef | None = None,
                    converters: ConverterRegistry | None = None,
                    k: int | None = None,
                    start_rules: set[str] | None = None) -> LanguageComponent:
    """Build a stand-alone component from grammar sources.

    Args:
        sources: GrammarDef objects, grammar texts, or (text, filename)
            pairs; all supergrammars must be among them.
        root: the most-derived grammar when several are given.

    Raises:
        SourceError: grammar syntax errors, local validation errors, linking
            failures, lexer construction failures, or left recursion.
    """
    defs: list[GrammarDef] = []
    for source in sources:
        if isinstance(source, GrammarDef):
            defs.append(source)
        elif isinstance(source, tuple):
            defs.append(parse_grammar(source[0], source[1]))
        else:
            defs.append(parse_grammar(source))
    sink = DiagnosticSink()
    for g in defs:
        sink.extend(validate_grammar(g))
    sink.raise_if_errors()

    linked = link_inheritance(defs, root=root)
    lexer = build_lexer(linked, converters)
    metamodel = derive_metamodel(linked)
    table = analyze_llk(linked, k)
    if table.errors:
        raise SourceError(table.diagnostics)
    starts = set(start_rules) if start_rules else {
        linked.options.compile_unit_start or next(iter(linked.productions))}
    return LanguageComponent(
        name=name or linked.name,
        linked=linked,
        lexer=lexer,
        metamodel=metamodel,
        start_rules=starts,
        decision_table=table,
    )


def bind_embedding(host: LanguageComponent,
                   bindings: list[EmbeddingBinding]) -> LanguageComponent:
    """Bind embedded languages into the host's external nonterminals.

    Returns a new composed component; the host stays untouched.

    Raises:
        SourceError: unknown external nonterminals, contract violations, or
            metamodel type-name collisions.
    """
    sink = DiagnosticSink()
    merged = dict(host.embeddings)
    for binding in bindings:
        prod = host.linked.production(binding.external_nt)
        if prod is None or prod.kind is not ProductionKind.EXTERNAL:
            sink.error(
                f"'{binding.external_nt}' is not an external nonterminal of "
                f"component '{host.name}'")
            continue
        if not binding.candidates:
            sink.error(f"binding for '{binding.external_nt}' lists no "
                       "candidates")
            continue
        if len(binding.candidates) > 1 and binding.selection is None:
            sink.error(
                f"binding for '{binding.external_nt}' has "
                f"{len(binding.candidates)} candidates but no selection rule")
        contract = binding.required_contract
        if prod.required_contract and contract is None:
            sink.error(
                f"external '{binding.external_nt}' requires contract "
                f"'{prod.required_contract}' but the binding provides none")
        if contract is not None:
            if prod.required_contract and contract.name != prod.required_contract:
                sink.error(
                    f"external '{binding.external_nt}' requires contract "
                    f"'{prod.required_contract}', binding provides "
                    f"'{contract.name}'")
            for candidate, start in binding.candidates:
                available = candidate.metamodel.all_attributes(start)
                for required in contract.required_attrs:
                    if required not in available:
                        sink.error(
                            f"candidate '{candidate.name}' start type "
                            f"'{start}' lacks attribute '{required}' required "
                            f"by contract '{contract.name}'")
        for candidate, start in binding.candidates:
            if candidate.metamodel.lookup(start) is None:
                sink.error(
                    f"candidate '{candidate.name}' has no start type "
                    f"'{start}'")
        merged[binding.external_nt] = binding
    sink.raise_if_errors()
    composed = replace(host, embeddings=merged)
    composed.effective_metamodel()  # raises on type-name collisions
    return composed


def compose_check(component: LanguageComponent) -> list[Diagnostic]:
    """Whole-composition sanity gate run before parsing."""
    sink = DiagnosticSink()
    reachable = _reachable_productions(component.linked, component.start_rules)
    for name in sorted(reachable):
        prod = component.linked.production(name)
        if prod is None or prod.kind is not ProductionKind.EXTERNAL:
            continue
        binding = component.embeddings.get(name)
        if binding is None:
            sink.error(
                f"external nonterminal '{name}' is reachable from the start "
                f"rules of '{component.name}' but not bound")
            continue
        if len(binding.candidates) > 1 and (
                binding.selection is None or binding.selection.kind == "fixed"):
            sink.warning(
                f"binding for '{name}' has {len(binding.candidates)} "
                "candidates but a fixed selection; only the first candidate "
                "is reachable")
        if (binding.selection is not None
                and binding.selection.kind == "by-attribute"):
            _check_attribute_selection(component, name, binding, sink)
        for candidate, start in binding.candidates:
            table = candidate.decision_table
            if table is not None and table.errors:
                sink.error(
                    f"embedded component '{candidate.name}' fails its own "
                    "decision analysis")
            if start not in candidate.linked.productions:
                sink.error(
                    f"embedded component '{candidate.name}' has no production "
                    f"'{start}'")
            sink.extend(compose_check(candidate))
    return sink.items


def _reachable_productions(linked: LinkedGrammar, starts) -> set[str]:
    queue = [s for s in starts if s in linked.productions]
    seen: set[str] = set()
    while queue:
        name = queue.pop()
        if name in seen:
            continue
        seen.add(name)
        own, variants = linked.parse_alternatives(name)
        queue.extend(variants)
        if own is not None:
            for element in iter_body(own):
                if isinstance(element, NonterminalRef):
                    queue.append(element.target)
    return seen


def _check_attribute_selection(component: LanguageComponent, external: str,
                               binding: EmbeddingBinding,
                               sink: DiagnosticSink) -> None:
    """The selection attribute must be parsed before the external slot."""
    attr = binding.selection.attr_name
    from .linking import element_attr_name
    for prod in component.linked.productions.values():
        if prod.body is None:
            continue
        leaves = [e for e in iter_body(prod.body)
                  if isinstance(e, (NonterminalRef, TokenRef))]
        for index, leaf in enumerate(leaves):
            if isinstance(leaf, NonterminalRef) and leaf.target == external:
                before = {element_attr_name(l) for l in leaves[:index]}
                if attr not in before:
                    sink.error(
                        f"selection for '{external}' in production "
                        f"'{prod.name}' reads attribute '{attr}' which is not "
                        "parsed before the external nonterminal", leaf.pos)
    if any(binding.selection.cases.get(v, -1) >= len(binding.candidates)
           for v in binding.selection.cases):
        sink.error(f"selection for '{external}' maps to a candidate index "
                   "out of range")


# ---------------------------------------------------------------------------
# Configuration files
# ---------------------------------------------------------------------------

def _selection_from_dict(data: dict | None) -> SelectionRule | None:
    if data is None:
        return None
    kind = data["kind"]
    if kind == "fixed":
        return SelectionRule.fixed(data.get("index", 0))
    if kind == "by-attribute":
        return SelectionRule.by_attribute(
            data["attr"], {str(k): v for k, v in data.get("cases", {}).items()},
            data.get("default"))
    if kind == "by-first-token":
        return SelectionRule.by_first_token(
            {str(k): v for k, v in data.get("cases", {}).items()},
            data.get("default"))
    raise SourceError(error(f"unknown selection kind '{kind}'"))


def load_composition_config(config: dict | str | Path,
                            base_dir: str | Path | None = None,
                            converters: ConverterRegistry | None = None
                            ) -> tuple[dict[str, LanguageComponent], dict]:
    """Build and compose all components named in a configuration document.

    Returns the component map (hosts replaced by their composed versions)
    and the raw configuration dict for downstream consumers.
    """
    if isinstance(config, (str, Path)):
        path = Path(config)
        base_dir = base_dir or path.parent
        data = json.loads(path.read_text(encoding="utf-8"))
    else:
        data = config
    base = Path(base_dir) if base_dir is not None else Path(".")

    components: dict[str, LanguageComponent] = {}
    for entry in data.get("components", []):
        sources = []
        for grammar_path in entry["grammars"]:
            full = base / grammar_path
            sources.append((full.read_text(encoding="utf-8"), str(full)))
        starts = {entry["start"]} if "start" in entry else None
        components[entry["name"]] = build_component(
            sources, name=entry["name"], converters=converters,
            k=entry.get("lookahead"), start_rules=starts)

    grouped: dict[str, list[EmbeddingBinding]] = {}
    for entry in data.get("embeddings", []):
        host_name = entry["host"]
        if host_name not in components:
            raise SourceError(error(f"embedding refers to unknown host "
                                    f"component '{host_name}'"))
        candidates = []
        for cand in entry["candidates"]:
            cand_name = cand["component"]
            if cand_name not in components:
                raise SourceError(error(
                    f"embedding refers to unknown component '{cand_name}'"))
            candidate = components[cand_name]
            candidates.append(
                (candidate, cand.get("start", candidate.default_start())))
        contract = None
        if "contract" in entry:
            contract = Contract(entry["contract"]["name"],
                                list(entry["contract"].get("requiredAttrs", [])))
        grouped.setdefault(host_name, []).append(EmbeddingBinding(
            external_nt=entry["external"],
            candidates=candidates,
            selection=_selection_from_dict(entry.get("selection")),
            required_contract=contract,
        ))
    for host_name, bindings in grouped.items():
        components[host_name] = bind_embedding(components[host_name], bindings)
    return components, data
