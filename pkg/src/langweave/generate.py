"""Random sentence generation and grammar-driven unparsing.

The generator samples sentences of a component's language (used heavily by
the round-trip and conservativity checks); the unparser renders a parsed
tree back to a sentence that re-parses to a structurally equal tree.  Both
walk the rule bodies of the linked grammar, so flattened attribute lists are
consumed in their per-attribute order.
"""

from __future__ import annotations

from random import Random
from typing import TYPE_CHECKING

from .ast_nodes import AstNode
from .diagnostics import SourceError, error
from .grammar import (Alternative, Block, BodyElement, Cardinality,
                      ConstantGroup, NonterminalRef, ProductionKind, Sequence,
                      Terminal, TokenDef, TokenRef, TokenValueKind)
from .linking import element_attr_name

if TYPE_CHECKING:
    from .composition import LanguageComponent

_INF = 10 ** 9


class GenerationError(Exception):
    pass


# ---------------------------------------------------------------------------
# Sentence generation
# ---------------------------------------------------------------------------

class SentenceGenerator:
    def __init__(self, component: "LanguageComponent", rng: Random,
                 max_budget: int = 60):
        self.component = component
        self.linked = component.linked
        self.rng = rng
        self.max_budget = max_budget
        self._sizes = self._minimal_sizes()

    def sentence(self, start: str | None = None) -> str:
        name = start or self.component.default_start()
        self._budget = self.max_budget
        return " ".join(self._expand(name))

    # -- minimal derivation sizes (for bounded recursion) --------------------

    def _minimal_sizes(self) -> dict[str, int]:
        sizes = {name: _INF for name in self.linked.productions}
        changed = True
        while changed:
            changed = False
            for name in self.linked.productions:
                best = _INF
                for option in self._options(name):
                    if isinstance(option, str):
                        best = min(best, sizes[option])
                    else:
                        best = min(best, self._body_size(option, sizes))
                value = best + 1 if best < _INF else _INF
                if value < sizes[name]:
                    sizes[name] = value
                    changed = True
        return sizes

    def _options(self, name: str) -> list:
        """Expansion options of a nonterminal: its body and/or its variants."""
        prod = self.linked.productions[name]
        if prod.kind is ProductionKind.EXTERNAL:
            return []
        own, variants = self.linked.parse_alternatives(name)
        options: list = []
        if own is not None:
            options.append(own)
        options.extend(variants)
        return options

    def _body_size(self, body: BodyElement, sizes: dict[str, int]) -> int:
        card = getattr(body, "card", Cardinality.ONE)
        if card in (Cardinality.OPTIONAL, Cardinality.STAR):
            return 0
        if isinstance(body, Sequence):
            return sum(self._body_size(i, sizes) for i in body.items)
        if isinstance(body, Alternative):
            return min(self._body_size(b, sizes) for b in body.branches)
        if isinstance(body, Block):
            return self._body_size(body.inner, sizes)
        if isinstance(body, NonterminalRef):
            return sizes.get(body.target, _INF)
        return 0

    # -- expansion ------------------------------------------------------------

    def _expand(self, name: str) -> list[str]:
        self._budget -= 1
        prod = self.linked.productions[name]
        if prod.kind is ProductionKind.EXTERNAL:
            return self._expand_external(name)
        options = self._options(name)
        if not options:
            raise GenerationError(f"'{name}' has no expandable alternatives")
        if self._budget <= 0:
            sizes = self._sizes
            options.sort(key=lambda o: sizes[o] if isinstance(o, str)
                         else self._body_size(o, sizes))
            choice = options[0]
        else:
            choice = self.rng.choice(options)
        if isinstance(choice, str):
            return self._expand(choice)
        return self._emit(choice)

    def _expand_external(self, name: str) -> list[str]:
        binding = self.component.embeddings.get(name)
        if binding is None:
            raise GenerationError(f"external nonterminal '{name}' is unbound")
        if binding.selection is not None and binding.selection.kind == "by-attribute":
            raise GenerationError(
                "generation across attribute-selected embeddings is not "
                "supported")
        candidate, start = binding.candidates[0]
        sub = SentenceGenerator(candidate, self.rng, max(self.max_budget // 4, 8))
        text = sub.sentence(start)
        return text.split(" ") if text else []

    def _emit(self, body: BodyElement) -> list[str]:
        card = getattr(body, "card", Cardinality.ONE)
        if isinstance(body, (Sequence, Alternative, ConstantGroup)):
            card = Cardinality.ONE
        counts = {Cardinality.ONE: 1,
                  Cardinality.OPTIONAL: self.rng.randint(0, 1),
                  Cardinality.STAR: self._rep_count(0),
                  Cardinality.PLUS: self._rep_count(1)}
        out: list[str] = []
        for _ in range(counts[card]):
            out.extend(self._emit_once(body))
        return out

    def _rep_count(self, minimum: int) -> int:
        if self._budget <= 0:
            return minimum
        count = minimum
        while count < minimum + 3 and self.rng.random() < 0.4:
            count += 1
        return count

    def _emit_once(self, body: BodyElement) -> list[str]:
        if isinstance(body, Sequence):
            out: list[str] = []
            for item in body.items:
                out.extend(self._emit(item))
            return out
        if isinstance(body, Alternative):
            if self._budget <= 0:
                sizes = self._sizes
                branch = min(body.branches,
                             key=lambda b: self._body_size(b, sizes))
            else:
                branch = self.rng.choice(body.branches)
            return self._emit(branch)
        if isinstance(body, Block):
            return self._emit(body.inner)
        if isinstance(body, Terminal):
            return [body.text]
        if isinstance(body, ConstantGroup):
            return [self.rng.choice(body.constants)]
        if isinstance(body, TokenRef):
            return [self._sample_token(body.target)]
        if isinstance(body, NonterminalRef):
            return self._expand(body.target)
        raise TypeError(f"not a body element: {body!r}")

    def _sample_token(self, token_name: str) -> str:
        rule = next((r for r in self.component.lexer.token_rules
                     if r.name == token_name), None)
        if rule is None:
            raise GenerationError(f"no token rule '{token_name}'")
        reserved = self.component.lexer.reserved_terminals
        for _ in range(50):
            sample = rule.pattern.sample(self.rng)
            if sample and sample not in reserved:
                return sample
        raise GenerationError(
            f"could not sample a non-reserved {token_name} text")


def generate_sentence(component: "LanguageComponent", rng: Random,
                      start: str | None = None, max_budget: int = 60) -> str:
    return SentenceGenerator(component, rng, max_budget).sentence(start)


# ---------------------------------------------------------------------------
# Unparsing
# ---------------------------------------------------------------------------

class _Queues:
    """Per-attribute value queues with cheap snapshot/rollback."""

    def __init__(self, node: AstNode):
        self.values: dict[str, list] = {}
        for name, value in node.attrs.items():
            self.values[name] = value if isinstance(value, list) else [value]
        self.taken: dict[str, int] = {name: 0 for name in self.values}

    def peek(self, name: str):
        queue = self.values.get(name)
        if queue is None:
            return None
        index = self.taken[name]
        return queue[index] if index < len(queue) else None

    def take(self, name: str):
        value = self.peek(name)
        self.taken[name] += 1
        return value

    def snapshot(self) -> dict[str, int]:
        return dict(self.taken)

    def restore(self, snap: dict[str, int]) -> None:
        self.taken = dict(snap)

    def consumed_since(self, snap: dict[str, int]) -> bool:
        return self.taken != snap

    def leftovers(self) -> list[str]:
        out = []
        for name, queue in self.values.items():
            remaining = queue[self.taken[name]:]
            if any(v is not False for v in remaining):
                out.append(name)
        return out


class Unparser:
    """Renders trees back to concrete syntax, driven by the rule bodies."""

    def __init__(self, component: "LanguageComponent"):
        self.components_by_type = _type_owners(component)

    def unparse(self, node: AstNode) -> str:
        return " ".join(self._node_tokens(node))

    def _node_tokens(self, node: AstNode) -> list[str]:
        owner = self.components_by_type.get(node.type_name)
        if owner is None:
            raise SourceError(error(
                f"no component defines type '{node.type_name}'", node.pos))
        prod = owner.linked.production(node.type_name)
        if prod is None or prod.body is None:
            raise SourceError(error(
                f"type '{node.type_name}' has no concrete syntax", node.pos))
        queues = _Queues(node)
        tokens = self._attempt(prod.body, queues, owner)
        if tokens is None:
            raise SourceError(error(
                f"cannot render a {node.type_name} from its attributes",
                node.pos))
        leftovers = queues.leftovers()
        if leftovers:
            raise SourceError(error(
                f"attributes {leftovers} of {node.type_name} were not "
                "consumed by its rule body", node.pos))
        return tokens

    def _attempt(self, body: BodyElement, queues: _Queues,
                 owner) -> list[str] | None:
        card = getattr(body, "card", Cardinality.ONE)
        if isinstance(body, (Sequence, Alternative, ConstantGroup)):
            card = Cardinality.ONE
        if card is Cardinality.ONE:
            return self._attempt_once(body, queues, owner)
        if card is Cardinality.OPTIONAL:
            snap = queues.snapshot()
            result = self._attempt_once(body, queues, owner)
            if result is None:
                queues.restore(snap)
                return []
            return result
        out: list[str] = []
        count = 0
        while True:
            snap = queues.snapshot()
            result = self._attempt_once(body, queues, owner)
            if result is None or not queues.consumed_since(snap):
                queues.restore(snap)
                break
            out.extend(result)
            count += 1
        if card is Cardinality.PLUS and count == 0:
            return None
        return out

    def _attempt_once(self, body: BodyElement, queues: _Queues,
                      owner) -> list[str] | None:
        if isinstance(body, Sequence):
            snap = queues.snapshot()
            out: list[str] = []
            for item in body.items:
                part = self._attempt(item, queues, owner)
                if part is None:
                    queues.restore(snap)
                    return None
                out.extend(part)
            return out
        if isinstance(body, Alternative):
            for branch in body.branches:
                snap = queues.snapshot()
                result = self._attempt(branch, queues, owner)
                if result is not None:
                    return result
                queues.restore(snap)
            return None
        if isinstance(body, Block):
            return self._attempt(body.inner, queues, owner)
        if isinstance(body, Terminal):
            return [body.text]
        if isinstance(body, ConstantGroup):
            name = element_attr_name(body)
            value = queues.peek(name)
            if len(body.constants) == 1:
                if value is True:
                    queues.take(name)
                    return [body.constants[0]]
                return None
            if isinstance(value, str) and value in body.constants:
                queues.take(name)
                return [value]
            return None
        if isinstance(body, TokenRef):
            name = element_attr_name(body)
            if queues.peek(name) is None:
                return None
            value = queues.take(name)
            return [self._render_token(body.target, value, owner)]
        if isinstance(body, NonterminalRef):
            name = element_attr_name(body)
            value = queues.peek(name)
            if not isinstance(value, AstNode):
                return None
            queues.take(name)
            return self._node_tokens(value)
        raise TypeError(f"not a body element: {body!r}")

    def _render_token(self, token_name: str, value, owner) -> str:
        rule: TokenDef | None = next(
            (r for r in owner.lexer.token_rules if r.name == token_name), None)
        if rule is not None and rule.converter_key == "__unquote__":
            escaped = (str(value).replace("\\", "\\\\").replace('"', '\\"')
                       .replace("\n", "\\n").replace("\t", "\\t"))
            return f'"{escaped}"'
        if rule is not None and rule.value_kind is TokenValueKind.CUSTOM:
            raise SourceError(error(
                f"token {token_name} uses a custom conversion and cannot be "
                "rendered back; register data in string form instead"))
        return str(value)


def _type_owners(component: "LanguageComponent",
                 seen: set[int] | None = None) -> dict:
    seen = seen if seen is not None else set()
    if id(component) in seen:
        return {}
    seen.add(id(component))
    owners = {name: component for name in component.linked.productions}
    for binding in component.embeddings.values():
        for candidate, _ in binding.candidates:
            for name, owner in _type_owners(candidate, seen).items():
                owners.setdefault(name, owner)
    return owners


def unparse(node: AstNode, component: "LanguageComponent") -> str:
    """Pretty-print a tree to a sentence that re-parses structurally equal."""
    return Unparser(component).unparse(node)
