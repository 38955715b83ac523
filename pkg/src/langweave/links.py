"""Symbol tables and post-parse association linking.

Parsing yields the spanning composition tree; the non-compositional edges
declared as associations are established afterwards by name resolution, so
forward references work naturally.  The default resolver reads a key
attribute from the node holding the reference (``<role>Name`` when present,
else the de-capitalized opposite type plus ``Name``), looks the name up in
the symbol table, and writes the link in both directions for bidirectional
associations.  Per-association resolvers can be registered to replace the
default.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

from .ast_nodes import AstNode, iter_tree
from .diagnostics import Diagnostic, DiagnosticSink, SourceError, SourcePos, error
from .grammar import decapitalize
from .metamodel import AssocEdge, Metamodel


@dataclass(frozen=True)
class SymbolEntry:
    type_name: str
    qualified_name: str
    node_id: int
    pos: SourcePos | None


@dataclass
class SymbolTable:
    """Names of one root set; flat (per-file unique) or hierarchical (dotted)."""

    scheme: str = "flat"  # flat | hierarchical
    entries: dict[tuple[str, str], SymbolEntry] = field(default_factory=dict)
    roots: list[AstNode] = field(default_factory=list)
    diagnostics: list[Diagnostic] = field(default_factory=list)
    _nodes: dict[int, AstNode] = field(default_factory=dict)

    def define(self, type_name: str, qualified_name: str, node: AstNode) -> None:
        key = (type_name, qualified_name)
        if key in self.entries:
            previous = self.entries[key]
            where = f"; first defined at {previous.pos}" if previous.pos else ""
            self.diagnostics.append(error(
                f"duplicate {type_name} '{qualified_name}'{where}", node.pos))
            return
        self.entries[key] = SymbolEntry(type_name, qualified_name,
                                        node.node_id, node.pos)
        self._nodes[node.node_id] = node

    def lookup(self, type_name: str, qualified_name: str) -> AstNode | None:
        entry = self.entries.get((type_name, qualified_name))
        return self._nodes.get(entry.node_id) if entry else None

    def node_by_id(self, node_id: int) -> AstNode | None:
        return self._nodes.get(node_id)

    def count(self, type_name: str) -> int:
        return sum(1 for t, _ in self.entries if t == type_name)


def build_symbols(roots: list[AstNode], scheme: str = "flat",
                  key_attr: dict[str, str] | None = None) -> SymbolTable:
    """Register every named node of the given trees.

    ``key_attr`` maps a type name to its defining attribute; the default is
    the attribute ``name``.  Duplicates land in ``table.diagnostics`` with
    both positions.
    """
    if scheme not in ("flat", "hierarchical"):
        raise SourceError(error(f"unknown symbol scheme '{scheme}'"))
    key_attr = key_attr or {}
    table = SymbolTable(scheme=scheme, roots=list(roots))
    for root in roots:
        _register(table, root, prefix="", key_attr=key_attr)
    return table


def _register(table: SymbolTable, node: AstNode, prefix: str,
              key_attr: dict[str, str]) -> None:
    attr = key_attr.get(node.type_name, "name")
    name = node.attrs.get(attr)
    qualified = prefix
    if isinstance(name, str) and name:
        qualified = f"{prefix}.{name}" if prefix and table.scheme == "hierarchical" \
            else name
        if table.scheme == "hierarchical":
            table.define(node.type_name, qualified, node)
        else:
            table.define(node.type_name, name, node)
    # register the node under every supertype too, so lookups by an
    # interface or superclass find subtype instances
    if isinstance(name, str) and name and node.meta is not None:
        seen_name = qualified if table.scheme == "hierarchical" else name
        for ancestor in node.meta.dispatch_chain(node.type_name)[1:]:
            key = (ancestor, seen_name)
            if key not in table.entries:
                table.entries[key] = SymbolEntry(ancestor, seen_name,
                                                 node.node_id, node.pos)
            elif table.entries[key].node_id != node.node_id:
                previous = table.entries[key]
                where = f"; first defined at {previous.pos}" if previous.pos else ""
                table.diagnostics.append(error(
                    f"duplicate {ancestor} '{seen_name}'{where}", node.pos))
    next_prefix = qualified if table.scheme == "hierarchical" else prefix
    for child in node.children():
        _register(table, child, next_prefix, key_attr)


@dataclass
class LinkReport:
    established: int = 0
    errors: list[tuple[str, AstNode, str, SourcePos | None]] = field(
        default_factory=list)

    def error_messages(self) -> list[str]:
        return [f"{assoc}: {message}" for assoc, _, message, _ in self.errors]


class ResolverRegistry:
    """Custom resolution callbacks, one per association name.

    A resolver receives (source node, symbol table) and returns the node ids
    of the targets it resolves; returning None falls back to the default.
    """

    def __init__(self):
        self._resolvers: dict[str, Callable] = {}

    def register(self, association: str, fn: Callable) -> None:
        self._resolvers[association] = fn

    def get(self, association: str) -> Callable | None:
        return self._resolvers.get(association)


def _key_attribute(node: AstNode, edge: AssocEdge) -> tuple[str, object] | None:
    role_key = f"{edge.target_role}Name"
    if role_key in node.attrs:
        return role_key, node.attrs[role_key]
    type_key = f"{decapitalize(edge.source)}Name"
    if type_key in node.attrs:
        return type_key, node.attrs[type_key]
    return None


def establish_links(roots: list[AstNode], metamodel: Metamodel,
                    table: SymbolTable,
                    resolvers: ResolverRegistry | None = None) -> LinkReport:
    """Resolve every association over the given trees.

    Runs after parsing so forward references resolve; re-running replaces
    all previously established links (idempotent).  Unresolved names and
    cardinality violations are collected in the report, never silently
    dropped.
    """
    report = LinkReport()
    nodes_by_type: dict[str, list[AstNode]] = {}
    all_nodes: list[AstNode] = []
    for root in roots:
        for node in iter_tree(root):
            nodes_by_type.setdefault(node.type_name, []).append(node)
            all_nodes.append(node)
            table._nodes.setdefault(node.node_id, node)

    for edge in metamodel.associations:
        holders = [n for n in all_nodes
                   if metamodel.is_subtype(n.type_name, edge.target)]
        sources = [n for n in all_nodes
                   if metamodel.is_subtype(n.type_name, edge.source)]
        for node in holders:
            node.links.pop(edge.target_role, None)
        for node in sources:
            node.links.pop(edge.source_role, None)
        custom = resolvers.get(edge.name) if resolvers else None
        failed: set[int] = set()
        for node in holders:
            targets = _resolve_one(node, edge, table, custom, report)
            if targets is None:
                failed.add(node.node_id)
                continue
            node.links[edge.target_role] = targets
            report.established += 1
            if not edge.directed:
                for target in targets:
                    target.links.setdefault(edge.source_role, []).append(node)
        _verify_cardinalities(edge, holders, sources, report, failed)
    return report


def _resolve_one(node: AstNode, edge: AssocEdge, table: SymbolTable,
                 custom, report: LinkReport) -> list[AstNode] | None:
    if custom is not None:
        ids = custom(node, table)
        if ids is not None:
            targets = [table.node_by_id(i) for i in ids]
            missing = [i for i, t in zip(ids, targets) if t is None]
            if missing:
                report.errors.append(
                    (edge.name, node, f"resolver returned unknown node ids "
                     f"{missing}", node.pos))
                return None
            return list(targets)
    key = _key_attribute(node, edge)
    if key is None:
        report.errors.append(
            (edge.name, node,
             f"no key attribute ('{edge.target_role}Name' or "
             f"'{decapitalize(edge.source)}Name') on {node.type_name}",
             node.pos))
        return None
    _, value = key
    names = value if isinstance(value, list) else [value]
    targets: list[AstNode] = []
    for name in names:
        target = table.lookup(edge.source, str(name))
        if target is None:
            report.errors.append(
                (edge.name, node, f"unresolved {edge.source} '{name}'",
                 node.pos))
            return None
        targets.append(target)
    return targets


def _verify_cardinalities(edge: AssocEdge, holders: list[AstNode],
                          sources: list[AstNode], report: LinkReport,
                          failed: set[int]) -> None:
    for node in holders:
        if node.node_id in failed:  # already reported as unresolved
            continue
        count = len(node.links.get(edge.target_role, []))
        if not edge.source_card.contains(count):
            report.errors.append(
                (edge.name, node,
                 f"{node.type_name} links {count} {edge.source} node(s) via "
                 f"'{edge.target_role}', allowed {edge.source_card}",
                 node.pos))
    if edge.directed:
        return
    for node in sources:
        count = len(node.links.get(edge.source_role, []))
        if not edge.target_card.contains(count):
            report.errors.append(
                (edge.name, node,
                 f"{node.type_name} links {count} {edge.target} node(s) via "
                 f"'{edge.source_role}', allowed {edge.target_card}",
                 node.pos))


def navigate(node: AstNode, role: str) -> list[AstNode]:
    """Linked nodes for a role; composition attributes and association links
    are indistinguishable to the caller.

    Raises:
        SourceError: when the node's type has neither an attribute nor an
            association role of that name.
    """
    if role in node.links:
        return list(node.links[role])
    if role in node.attrs:
        value = node.attrs[role]
        if isinstance(value, AstNode):
            return [value]
        if isinstance(value, list):
            return [v for v in value if isinstance(v, AstNode)]
    declared = (node.meta.all_attributes(node.type_name)
                if node.meta is not None else {})
    if role in declared:
        return []
    raise SourceError(error(
        f"'{node.type_name}' has no role or attribute '{role}'", node.pos))
