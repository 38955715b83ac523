"""Compositional visitors over the spanning composition tree.

A traversal is a preorder run: for each node, every unit's ``visit`` (or
``own_visit``, which additionally skips the children), then the children in
attribute declaration order, then every unit's ``end_visit``.  Units are
written per language fragment and combined at configuration time, so an
algorithm for a composed language is the set of its fragments' units.

Handlers receive ``(node, ctl)`` and steer the run through the control
object: ``ctl.fail()`` latches failure (traversal continues), logic
``ctl.stop_traverse()`` aborts the whole run, ``ctl.stop_traverse_children()``
skips the current node's children (``end_visit`` still fires), and
``ctl.start_traverse(child)`` recurses explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

from .ast_nodes import AstNode
from .diagnostics import SourceError, error

Handler = Callable[[AstNode, "TraversalControl"], None]


@dataclass
class _Handlers:
    visit: Handler | None = None
    end_visit: Handler | None = None
    own_visit: Handler | None = None


class VisitorUnit:
    """Handlers of one concrete visitor, keyed by node type name.

    Dispatch picks the most specific match: the exact type first, then the
    supertype chain, then implemented interfaces in declaration order.
    """

    def __init__(self, name: str = ""):
        self.name = name
        self._handlers: dict[str, _Handlers] = {}

    def on(self, type_name: str, visit: Handler | None = None,
           end_visit: Handler | None = None,
           own_visit: Handler | None = None) -> "VisitorUnit":
        if visit is not None and own_visit is not None:
            raise ValueError(
                f"unit {self.name or id(self)} defines both visit and "
                f"own_visit for '{type_name}'")
        entry = self._handlers.setdefault(type_name, _Handlers())
        if visit is not None:
            if entry.own_visit is not None:
                raise ValueError(
                    f"'{type_name}' already has own_visit in this unit")
            entry.visit = visit
        if end_visit is not None:
            entry.end_visit = end_visit
        if own_visit is not None:
            if entry.visit is not None:
                raise ValueError(
                    f"'{type_name}' already has visit in this unit")
            entry.own_visit = own_visit
        return self

    def handlers_for(self, node: AstNode) -> _Handlers | None:
        chain = (node.meta.dispatch_chain(node.type_name)
                 if node.meta is not None else [node.type_name])
        for type_name in chain:
            if type_name in self._handlers:
                return self._handlers[type_name]
        return None


@dataclass
class VisitorSet:
    """Ordered visitor units plus the shared run state."""

    units: list[VisitorUnit] = field(default_factory=list)

    def add(self, unit: VisitorUnit) -> "VisitorSet":
        self.units.append(unit)
        return self


class TraversalControl:
    def __init__(self):
        self.failed = False
        self.stopped = False
        self._skip_children = False
        self._walker: Callable[[AstNode], None] | None = None

    def fail(self) -> None:
        """Latch failure; the run continues unless also stopped."""
        self.failed = True

    def stop_traverse(self) -> None:
        self.stopped = True

    def stop_traverse_children(self) -> None:
        self._skip_children = True

    def start_traverse(self, node: AstNode) -> None:
        """Explicitly traverse a child subtree right now."""
        if self._walker is not None and not self.stopped:
            self._walker(node)


def traverse(root: AstNode, visitors: VisitorSet) -> bool:
    """Run all units over the tree; False iff any handler failed.

    Raises:
        SourceError: a handler exception, annotated with the node position.
    """
    ctl = TraversalControl()

    def walk(node: AstNode) -> None:
        if ctl.stopped:
            return
        skip_children = False
        for unit in visitors.units:
            handlers = unit.handlers_for(node)
            if handlers is None:
                continue
            ctl._skip_children = False
            fn = handlers.own_visit or handlers.visit
            if fn is not None:
                _invoke(fn, node, ctl)
            if handlers.own_visit is not None or ctl._skip_children:
                skip_children = True
            if ctl.stopped:
                return
        if not skip_children:
            for child in node.children():
                walk(child)
                if ctl.stopped:
                    return
        for unit in visitors.units:
            handlers = unit.handlers_for(node)
            if handlers is not None and handlers.end_visit is not None:
                _invoke(handlers.end_visit, node, ctl)
                if ctl.stopped:
                    return

    ctl._walker = walk
    walk(root)
    return not ctl.failed


def _invoke(fn: Handler, node: AstNode, ctl: TraversalControl) -> None:
    try:
        fn(node, ctl)
    except SourceError:
        raise
    except Exception as exc:
        raise SourceError(error(
            f"visitor handler failed on {node.type_name}: {exc}",
            node.pos)) from exc
