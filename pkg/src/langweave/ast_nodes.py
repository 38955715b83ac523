"""Generic typed instance nodes produced by parsing.

A node stores its metamodel type name, an attribute map (scalars, child
nodes, or ordered lists of either), association links established after
parsing, and the source position of its first consumed lexeme.  Composition
children form a tree; association links turn the whole structure into an
arbitrary graph with that tree embedded.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Iterator

from .diagnostics import Diagnostic, DiagnosticSink, SourcePos
from .metamodel import AttrDef, Metamodel


@dataclass(eq=False)
class AstNode:
    type_name: str
    attrs: dict[str, Any] = field(default_factory=dict)
    links: dict[str, list["AstNode"]] = field(default_factory=dict)
    pos: SourcePos | None = None
    node_id: int = 0
    parent: "AstNode | None" = field(default=None, repr=False)
    meta: Metamodel | None = field(default=None, repr=False)

    def get(self, name: str, default: Any = None) -> Any:
        return self.attrs.get(name, default)

    def attr_order(self) -> list[str]:
        """Attribute declaration order when the metamodel is known, else
        insertion order; extra (hand-set) attributes keep insertion order."""
        if self.meta is not None and self.meta.node_type(self.type_name):
            declared = list(self.meta.all_attributes(self.type_name))
            extras = [k for k in self.attrs if k not in declared]
            return [k for k in declared if k in self.attrs] + extras
        return list(self.attrs)

    def children(self) -> Iterator["AstNode"]:
        """Composition children: attribute declaration order, then list order."""
        for name in self.attr_order():
            value = self.attrs[name]
            if isinstance(value, AstNode):
                yield value
            elif isinstance(value, list):
                for item in value:
                    if isinstance(item, AstNode):
                        yield item

    def __repr__(self) -> str:  # keep parse failures readable
        keys = ", ".join(self.attrs)
        return f"AstNode({self.type_name}#{self.node_id}: {keys})"


def iter_tree(root: AstNode) -> Iterator[AstNode]:
    yield root
    for child in root.children():
        yield from iter_tree(child)


def set_parents(root: AstNode) -> AstNode:
    for node in iter_tree(root):
        for child in node.children():
            child.parent = node
    return root


def attach_metamodel(root: AstNode, meta: Metamodel) -> AstNode:
    for node in iter_tree(root):
        node.meta = meta
    return root


def structural_equal(a: AstNode, b: AstNode, widen: Metamodel | None = None) -> bool:
    """Tree equality ignoring positions, ids, and links.

    With ``widen`` given, ``a``'s type may be a subtype of ``b``'s type in
    that metamodel (used to compare sub-language parses against the
    super-language tree).
    """
    if a.type_name != b.type_name:
        if widen is None or not widen.is_subtype(a.type_name, b.type_name):
            return False
    if set(a.attrs) != set(b.attrs):
        return False
    for key, left in a.attrs.items():
        right = b.attrs[key]
        if isinstance(left, AstNode) and isinstance(right, AstNode):
            if not structural_equal(left, right, widen):
                return False
        elif isinstance(left, list) and isinstance(right, list):
            if len(left) != len(right):
                return False
            for li, ri in zip(left, right):
                if isinstance(li, AstNode) and isinstance(ri, AstNode):
                    if not structural_equal(li, ri, widen):
                        return False
                elif li != ri:
                    return False
        elif left != right:
            return False
    return True


# ---------------------------------------------------------------------------
# JSON serialization
# ---------------------------------------------------------------------------

def _node_to_dict(node: AstNode) -> dict:
    doc: dict[str, Any] = {"type": node.type_name, "id": node.node_id}
    if node.pos is not None:
        doc["pos"] = {"file": node.pos.file, "line": node.pos.line,
                      "col": node.pos.column}
    attrs: dict[str, Any] = {}
    for name in node.attr_order():
        value = node.attrs[name]
        if isinstance(value, AstNode):
            attrs[name] = _node_to_dict(value)
        elif isinstance(value, list):
            attrs[name] = [_node_to_dict(v) if isinstance(v, AstNode) else v
                           for v in value]
        else:
            attrs[name] = value
    for role in sorted(node.links):
        targets = node.links[role]
        refs = [{"$ref": t.node_id} for t in targets]
        attrs[role] = refs[0] if len(refs) == 1 else refs
    doc["attrs"] = attrs
    return doc


def to_json(root: AstNode) -> str:
    """Deterministic AST document with children inlined and links as $ref."""
    return json.dumps(_node_to_dict(root), indent=2) + "\n"


def _is_ref(value) -> bool:
    return isinstance(value, dict) and set(value) == {"$ref"}


def _node_from_dict(doc: dict, by_id: dict[int, AstNode],
                    pending: list) -> AstNode:
    pos = None
    if "pos" in doc:
        pos = SourcePos(doc["pos"]["file"], doc["pos"]["line"], doc["pos"]["col"])
    node = AstNode(type_name=doc["type"], node_id=doc["id"], pos=pos)
    by_id[node.node_id] = node
    for name, value in doc["attrs"].items():
        if _is_ref(value):
            pending.append((node, name, [value["$ref"]]))
        elif isinstance(value, list) and value and all(_is_ref(v) for v in value):
            pending.append((node, name, [v["$ref"] for v in value]))
        elif isinstance(value, dict):
            node.attrs[name] = _node_from_dict(value, by_id, pending)
        elif isinstance(value, list):
            node.attrs[name] = [
                _node_from_dict(v, by_id, pending) if isinstance(v, dict) else v
                for v in value]
        else:
            node.attrs[name] = value
    return node


def from_json(text: str) -> AstNode:
    """Rebuild a tree (including links) from its JSON document."""
    by_id: dict[int, AstNode] = {}
    pending: list = []
    root = _node_from_dict(json.loads(text), by_id, pending)
    for node, role, ids in pending:
        node.links[role] = [by_id[i] for i in ids]
    return set_parents(root)


def resolve_path(root: AstNode, path: str) -> Any:
    """Navigate ``attr[index].attr...`` from the root; '' or '.' is the root."""
    if path in ("", "."):
        return root
    current: Any = root
    for segment in path.split("."):
        name, index = segment, None
        if segment.endswith("]") and "[" in segment:
            name, rest = segment.split("[", 1)
            index = int(rest[:-1])
        if not isinstance(current, AstNode):
            raise KeyError(f"cannot navigate into scalar at '{segment}'")
        if name in current.attrs:
            current = current.attrs[name]
        elif name in current.links:
            current = current.links[name]
        else:
            raise KeyError(f"node {current.type_name} has no attribute or "
                           f"role '{name}'")
        if index is not None:
            current = current[index]
    return current


# ---------------------------------------------------------------------------
# Metamodel conformance
# ---------------------------------------------------------------------------

def _populated(value) -> bool:
    if value is None or value is False:
        return False
    if isinstance(value, list):
        return len(value) > 0
    return True


def check_conformance(root: AstNode, metamodel: Metamodel,
                      allowed_external: dict[str, set[str]] | None = None
                      ) -> list[Diagnostic]:
    """Verify a tree against the derived metamodel.

    ``allowed_external`` maps an external nonterminal's type name to the
    start types an embedded language may splice into that slot.
    """
    sink = DiagnosticSink()
    allowed_external = allowed_external or {}
    parents: dict[int, int] = {}

    for node in iter_tree(root):
        type_def = metamodel.node_type(node.type_name)
        if type_def is None:
            sink.error(f"unknown node type '{node.type_name}'", node.pos)
            continue
        if type_def.is_abstract:
            sink.error(f"abstract type '{node.type_name}' instantiated",
                       node.pos)
        declared = metamodel.all_attributes(node.type_name)
        for name in node.attrs:
            if name not in declared:
                sink.error(f"'{node.type_name}' has no attribute '{name}'",
                           node.pos)
        for name, attr in declared.items():
            _check_attr(node, name, attr, metamodel, allowed_external, sink)
        _check_exclusive(node, metamodel, sink)
        for child in node.children():
            if child.node_id in parents and parents[child.node_id] != node.node_id:
                sink.error(
                    f"node {child.node_id} has more than one composition "
                    "parent", child.pos)
            parents[child.node_id] = node.node_id
    return sink.items


def _check_attr(node: AstNode, name: str, attr: AttrDef, metamodel: Metamodel,
                allowed_external: dict[str, set[str]],
                sink: DiagnosticSink) -> None:
    value = node.attrs.get(name)
    if attr.is_list:
        if value is None:
            sink.error(f"'{node.type_name}.{name}' must be a (possibly empty) "
                       "list", node.pos)
            return
        if not isinstance(value, list):
            sink.error(f"'{node.type_name}.{name}' must be a list", node.pos)
            return
        count = len(value)
        items = value
    else:
        if attr.kind == "boolean":
            if not isinstance(value, bool):
                sink.error(f"'{node.type_name}.{name}' must be a boolean",
                           node.pos)
                return
            count = 1 if value else 0
            items = []
        else:
            count = 0 if value is None else 1
            items = [] if value is None else [value]
    if count < attr.min_occurs and attr.kind != "boolean":
        sink.error(
            f"'{node.type_name}.{name}' needs at least {attr.min_occurs} "
            f"value(s), found {count}", node.pos)
    if attr.max_occurs is not None and count > attr.max_occurs:
        sink.error(
            f"'{node.type_name}.{name}' allows at most {attr.max_occurs} "
            f"value(s), found {count}", node.pos)
    for item in items:
        if attr.kind == "composition":
            if not isinstance(item, AstNode):
                sink.error(f"'{node.type_name}.{name}' must hold nodes",
                           node.pos)
            elif not _composition_ok(item.type_name, attr.target, metamodel,
                                     allowed_external):
                sink.error(
                    f"'{node.type_name}.{name}' holds a {item.type_name}, "
                    f"expected {attr.target}", item.pos)
        elif attr.kind == "enum":
            if item not in attr.values:
                sink.error(
                    f"'{node.type_name}.{name}' value {item!r} not in "
                    f"{list(attr.values)}", node.pos)
        elif attr.kind == "token":
            if isinstance(item, AstNode):
                sink.error(f"'{node.type_name}.{name}' must hold scalar "
                           "values", node.pos)


def _composition_ok(child_type: str, target: str | None, metamodel: Metamodel,
                    allowed_external: dict[str, set[str]]) -> bool:
    if target is None:
        return False
    if metamodel.is_subtype(child_type, target):
        return True
    for start in allowed_external.get(target, ()):
        if metamodel.is_subtype(child_type, start):
            return True
    return False


def _check_exclusive(node: AstNode, metamodel: Metamodel,
                     sink: DiagnosticSink) -> None:
    name: str | None = node.type_name
    while name is not None:
        type_def = metamodel.node_type(name)
        if type_def is None:
            break
        for group in type_def.exclusive_groups:
            filled = sum(
                1 for branch in group
                if any(_populated(node.attrs.get(attr)) for attr in branch))
            if filled > 1:
                sink.error(
                    f"'{node.type_name}' fills {filled} branches of an "
                    "alternative; at most one may have values", node.pos)
        name = type_def.super_type
