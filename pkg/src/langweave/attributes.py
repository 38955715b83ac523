"""Demand-driven attribute evaluation over parsed models.

Grammars declare synthesized/inherited attributes (``syn outstanding: /float;``);
the computations themselves are host-language callbacks registered under
string keys at configuration time.  When languages are composed, differently
named attributes of different grammars can be unified under one virtual
attribute, so client code can evaluate a single name across a mixed tree.

Virtual-map files (``.amap``) use a small dialect::

    Unpaid {
        shop.ShopSystemLang.outstanding = /shop.OutstandingCalc;
        mini.StatsLang.sum = /mini.SumCalc;
    }
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from typing import Any, Callable

from .diagnostics import (Diagnostic, DiagnosticSink, SourceError, SourcePos,
                          error)


class AttrDirection(enum.Enum):
    SYNTHESIZED = "syn"
    INHERITED = "inh"


@dataclass
class AttributeDecl:
    """One ``syn``/``inh`` attribute declaration inside a grammar."""

    name: str
    direction: AttrDirection
    value_kind: str  # "float", "int", "string", or a custom type name
    owning_grammar: str = ""
    pos: SourcePos | None = None


@dataclass
class VirtualAttributeMap:
    """Unifies per-grammar attributes under one virtual name."""

    name: str
    # (grammar qualified name, attribute name, calculator key)
    bindings: list[tuple[str, str, str]] = field(default_factory=list)


class EvalContext:
    """Handed to calculators; recursive pulls route back through the engine."""

    def __init__(self, registry: "CalculatorRegistry"):
        self.registry = registry

    def eval(self, node, attr_name: str) -> Any:
        return self.registry.evaluate(node, attr_name)


class CalculatorRegistry:
    """Calculators, declared attributes, virtual maps, and the value cache.

    Write-once at configuration time, then shared read-only between
    evaluations; the cache is the only mutable part and serves one model run.
    """

    def __init__(self):
        self._calculators: dict[str, dict[str, Callable]] = {}
        self._attr_bindings: dict[tuple[str, str], str] = {}
        self._declared: dict[str, dict[str, AttributeDecl]] = {}
        self._virtual: dict[str, dict[str, tuple[str, str]]] = {}
        self.cache: dict[tuple[int, str, str], Any] = {}
        self._in_progress: list[tuple[int, str, str]] = []
        self.use_cache = True

    # -- configuration ------------------------------------------------------

    def declare(self, grammar: str, decl: AttributeDecl) -> None:
        decl.owning_grammar = grammar
        self._declared.setdefault(grammar, {})[decl.name] = decl

    def declared(self, grammar: str, attr: str) -> AttributeDecl | None:
        return self._declared.get(grammar, {}).get(attr)

    def register(self, key: str, type_name: str, fn: Callable) -> None:
        """Register the calculation for one node type under a calculator key."""
        self._calculators.setdefault(key, {})[type_name] = fn

    def bind_attribute(self, grammar: str, attr: str, key: str) -> None:
        self._attr_bindings[(grammar, attr)] = key

    def has_calculator_key(self, key: str) -> bool:
        return key in self._calculators

    # -- evaluation ---------------------------------------------------------

    def evaluate(self, node, attr_name: str) -> Any:
        grammar = self._owning_grammar(node)
        resolved = self._resolve(grammar, attr_name, node)
        concrete_attr, key = resolved
        cache_key = (node.node_id, grammar, concrete_attr)
        if self.use_cache and cache_key in self.cache:
            return self.cache[cache_key]
        if cache_key in self._in_progress:
            cycle = self._in_progress[self._in_progress.index(cache_key):]
            path = " -> ".join(f"{g}.{a}@node{n}" for n, g, a in cycle)
            self._in_progress.clear()
            raise SourceError(error(
                f"cyclic attribute dependency: {path} -> "
                f"{grammar}.{concrete_attr}@node{node.node_id}", node.pos))
        fn = self._dispatch(key, node)
        self._in_progress.append(cache_key)
        try:
            value = fn(node, EvalContext(self))
        finally:
            if self._in_progress and self._in_progress[-1] == cache_key:
                self._in_progress.pop()
        if self.use_cache:
            self.cache[cache_key] = value
        return value

    def _owning_grammar(self, node) -> str:
        meta = getattr(node, "meta", None)
        if meta is not None:
            entry = meta.lookup(node.type_name)
            if entry is not None and entry.source_grammar:
                return entry.source_grammar
        raise SourceError(error(
            f"cannot determine the owning grammar of node type "
            f"'{node.type_name}'", getattr(node, "pos", None)))

    def _resolve(self, grammar: str, attr_name: str, node) -> tuple[str, str]:
        if self.declared(grammar, attr_name) is not None:
            key = self._attr_bindings.get((grammar, attr_name))
            if key is None:
                raise SourceError(error(
                    f"attribute '{attr_name}' of grammar '{grammar}' has no "
                    "calculator bound", node.pos))
            return attr_name, key
        binding = self._virtual.get(attr_name, {}).get(grammar)
        if binding is not None:
            return binding
        raise SourceError(error(
            f"attribute '{attr_name}' is not declared for grammar '{grammar}' "
            "and no virtual attribute covers it", node.pos))

    def _dispatch(self, key: str, node) -> Callable:
        fns = self._calculators.get(key, {})
        meta = getattr(node, "meta", None)
        chain = (meta.dispatch_chain(node.type_name) if meta is not None
                 else [node.type_name])
        for type_name in chain:
            if type_name in fns:
                return fns[type_name]
        raise SourceError(error(
            f"no calculator under key '{key}' for node type "
            f"'{node.type_name}' or any of its supertypes", node.pos))

    # -- virtual attributes -------------------------------------------------

    def register_virtual_resolved(self, vmap: VirtualAttributeMap) -> None:
        table = self._virtual.setdefault(vmap.name, {})
        for grammar, attr, key in vmap.bindings:
            table[grammar] = (attr, key)


def register_virtual(vmap: VirtualAttributeMap,
                     registry: CalculatorRegistry) -> list[Diagnostic]:
    """Validate and install a virtual attribute; diagnostics block installation."""
    sink = DiagnosticSink()
    if not vmap.bindings:
        sink.error(f"virtual attribute '{vmap.name}' has no bindings")
        return sink.items
    kinds: set[str] = set()
    for grammar, attr, key in vmap.bindings:
        decl = registry.declared(grammar, attr)
        if decl is None:
            sink.error(
                f"virtual '{vmap.name}' refers to undeclared attribute "
                f"'{grammar}.{attr}'")
            continue
        kinds.add(decl.value_kind)
        if not registry.has_calculator_key(key):
            sink.error(
                f"virtual '{vmap.name}' refers to unregistered calculator "
                f"'{key}'")
    if len(kinds) > 1:
        sink.error(
            f"virtual '{vmap.name}' mixes value kinds {sorted(kinds)}")
    if not sink.items:
        registry.register_virtual_resolved(vmap)
    return sink.items


def eval_attribute(node, attr_name: str, registry: CalculatorRegistry,
                   virtual_maps: tuple = (), use_cache: bool = True) -> Any:
    """Evaluate ``attr_name`` on ``node``, demand-driven with memoization.

    ``virtual_maps`` may carry additional maps applied for this call only;
    they must already validate against the registry.
    """
    for vmap in virtual_maps:
        diags = register_virtual(vmap, registry)
        if diags:
            raise SourceError(diags)
    previous = registry.use_cache
    registry.use_cache = use_cache
    try:
        return registry.evaluate(node, attr_name)
    finally:
        registry.use_cache = previous


# ---------------------------------------------------------------------------
# The .amap dialect
# ---------------------------------------------------------------------------

_AMAP_COMMENT = re.compile(r"//[^\n]*")
_AMAP_HEAD = re.compile(r"\s*([A-Za-z_][\w]*)\s*\{")
_AMAP_BINDING = re.compile(
    r"\s*([A-Za-z_][\w.]*)\.([A-Za-z_]\w*)\s*=\s*/([A-Za-z_][\w.]*)\s*;")


def parse_virtual_map(text: str, file: str = "<amap>") -> list[VirtualAttributeMap]:
    """Read ``Name { grammar.attr = /calculatorKey; ... }`` blocks."""
    stripped = _AMAP_COMMENT.sub("", text)
    maps: list[VirtualAttributeMap] = []
    pos = 0
    while True:
        head = _AMAP_HEAD.match(stripped, pos)
        if head is None:
            if stripped[pos:].strip():
                line = stripped.count("\n", 0, pos) + 1
                raise SourceError(error(
                    "malformed virtual-attribute map", SourcePos(file, line, 1)))
            break
        vmap = VirtualAttributeMap(head.group(1))
        pos = head.end()
        while True:
            binding = _AMAP_BINDING.match(stripped, pos)
            if binding is None:
                break
            vmap.bindings.append(
                (binding.group(1), binding.group(2), binding.group(3)))
            pos = binding.end()
        closing = re.compile(r"\s*\}").match(stripped, pos)
        if closing is None:
            line = stripped.count("\n", 0, pos) + 1
            raise SourceError(error(
                f"virtual attribute '{vmap.name}' is missing '}}'",
                SourcePos(file, line, 1)))
        pos = closing.end()
        maps.append(vmap)
    return maps
