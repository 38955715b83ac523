"""Independent oracles: brute-force enumeration checks for the engine.

Everything here recomputes expected results from first principles, by paths
disjoint from the implementation under test: derivation enumeration for
occurrence counts, sentential-form expansion for FIRST_k sets, a plain tree
walk for visitor call sequences, and a minimal EBNF reader.
"""

from __future__ import annotations

import re
from collections import Counter
from random import Random

from langweave.ast_nodes import AstNode
from langweave.grammar import (Alternative, Block, Cardinality, ConstantGroup,
                               GrammarDef, NonterminalRef, ProductionDef,
                               ProductionKind, Sequence, Terminal, TokenRef)
from langweave.linking import LinkedGrammar

# ---------------------------------------------------------------------------
# Occurrence counting by derivation enumeration (repetition truncated)
# ---------------------------------------------------------------------------


def enumerate_derivation_counts(body, truncate: int = 2,
                                cap: int = 300_000) -> list[Counter]:
    """All derivations of a body as Counters of matched leaf elements.

    Star/plus repetitions are expanded 0..truncate / 1..truncate times; every
    repetition re-derives the inner element independently.
    """
    budget = [cap]

    def combine(lists: list[list[Counter]]) -> list[Counter]:
        acc = [Counter()]
        for options in lists:
            nxt = []
            for base in acc:
                for extra in options:
                    budget[0] -= 1
                    if budget[0] < 0:
                        raise RuntimeError("derivation enumeration exploded")
                    nxt.append(base + extra)
            acc = nxt
        return acc

    def derive_once(element) -> list[Counter]:
        if isinstance(element, Sequence):
            return combine([derive(item) for item in element.items])
        if isinstance(element, Alternative):
            out: list[Counter] = []
            for branch in element.branches:
                out.extend(derive(branch))
            return out
        if isinstance(element, Block):
            return derive(element.inner)
        if isinstance(element, (NonterminalRef, TokenRef, ConstantGroup)):
            return [Counter({id(element): 1})]
        if isinstance(element, Terminal):
            return [Counter()]
        raise TypeError(element)

    def derive(element) -> list[Counter]:
        card = getattr(element, "card", Cardinality.ONE)
        if isinstance(element, (Sequence, Alternative, ConstantGroup)):
            card = Cardinality.ONE
        if card is Cardinality.ONE:
            return derive_once(element)
        if card is Cardinality.OPTIONAL:
            return [Counter()] + derive_once(element)
        low = 1 if card is Cardinality.PLUS else 0
        out: list[Counter] = []
        for reps in range(low, truncate + 1):
            out.extend(combine([derive_once(element)] * reps) if reps
                       else [Counter()])
        return out

    return derive(body)


def oracle_occurrence(body, label, target,
                      truncate: int = 2) -> tuple[int, int]:
    """(min, truncated max) occurrences of the (label, target) element."""
    matching = [id(e) for e in _leaves(body)
                if isinstance(e, (NonterminalRef, TokenRef))
                and e.label == label and e.target == target]
    counts = []
    for derivation in enumerate_derivation_counts(body, truncate):
        counts.append(sum(derivation.get(m, 0) for m in matching))
    return min(counts), max(counts)


def _leaves(body):
    if isinstance(body, (NonterminalRef, TokenRef, ConstantGroup, Terminal)):
        yield body
    elif isinstance(body, Sequence):
        for item in body.items:
            yield from _leaves(item)
    elif isinstance(body, Alternative):
        for branch in body.branches:
            yield from _leaves(branch)
    elif isinstance(body, Block):
        yield from _leaves(body.inner)


# ---------------------------------------------------------------------------
# FIRST_k by sentential-form expansion
# ---------------------------------------------------------------------------


def _plain_cfg(linked: LinkedGrammar) -> dict[str, list[tuple]]:
    """Lower rule bodies to a plain CFG; blocks become helper nonterminals.

    Symbols are ("t", kind) and ("n", name).
    """
    rules: dict[str, list[tuple]] = {}
    counter = [0]

    def fresh(base: str) -> str:
        counter[0] += 1
        return f"{base}%{counter[0]}"

    def lower(element, owner: str) -> tuple:
        card = getattr(element, "card", Cardinality.ONE)
        if isinstance(element, (Sequence, Alternative, ConstantGroup)):
            card = Cardinality.ONE
        base = lower_once(element, owner)
        if card is Cardinality.ONE:
            return base
        helper = fresh(owner)
        if card is Cardinality.OPTIONAL:
            rules[helper] = [(), base]
        elif card is Cardinality.STAR:
            rules[helper] = [(), base + (("n", helper),)]
        else:
            rules[helper] = [base, base + (("n", helper),)]
        return (("n", helper),)

    def lower_once(element, owner: str) -> tuple:
        if isinstance(element, Sequence):
            out: tuple = ()
            for item in element.items:
                out += lower(item, owner)
            return out
        if isinstance(element, Alternative):
            helper = fresh(owner)
            rules[helper] = [lower(b, owner) for b in element.branches]
            return (("n", helper),)
        if isinstance(element, Block):
            return lower(element.inner, owner)
        if isinstance(element, Terminal):
            return (("t", element.text),)
        if isinstance(element, TokenRef):
            return (("t", element.target),)
        if isinstance(element, ConstantGroup):
            helper = fresh(owner)
            rules[helper] = [(("t", c),) for c in element.constants]
            return (("n", helper),)
        if isinstance(element, NonterminalRef):
            return (("n", element.target),)
        raise TypeError(element)

    for name in linked.productions:
        own, variants = linked.parse_alternatives(name)
        alternatives: list[tuple] = []
        if own is not None:
            alternatives.append(lower(own, name))
        alternatives.extend((("n", v),) for v in variants)
        rules[name] = alternatives
    return rules


def brute_first_k(linked: LinkedGrammar, name: str, k: int,
                  max_states: int = 500_000) -> frozenset:
    """All terminal prefixes of length <= k derivable from ``name``.

    Sequences shorter than k are complete derivations.  Independent of the
    engine: plain breadth-first sentential-form expansion with minimum-length
    pruning.
    """
    rules = _plain_cfg(linked)
    min_len = {n: 10 ** 9 for n in rules}
    changed = True
    while changed:
        changed = False
        for n, alternatives in rules.items():
            for alt in alternatives:
                total = 0
                for kind, value in alt:
                    total += 1 if kind == "t" else min_len[value]
                    if total >= 10 ** 9:
                        total = 10 ** 9
                        break
                if total < min_len[n]:
                    min_len[n] = total
                    changed = True

    def prune(rest: tuple, have: int) -> tuple:
        total = have
        for index, (kind, value) in enumerate(rest):
            if total >= k:
                return rest[:index]
            total += 1 if kind == "t" else min_len.get(value, 0)
        return rest

    results: set[tuple] = set()
    start = ((), (("n", name),))
    frontier = [start]
    seen = {start}
    states = 0
    while frontier:
        prefix, rest = frontier.pop()
        states += 1
        if states > max_states:
            raise RuntimeError("sentential-form expansion exploded")
        while rest and rest[0][0] == "t" and len(prefix) < k:
            prefix += (rest[0][1],)
            rest = rest[1:]
        if len(prefix) == k or not rest:
            results.add(prefix)
            continue
        head = rest[0][1]
        for alt in rules[head]:
            nxt = (prefix, prune(alt + rest[1:], len(prefix)))
            if nxt not in seen:
                seen.add(nxt)
                frontier.append(nxt)
    return frozenset(results)


# ---------------------------------------------------------------------------
# Visitor call-sequence oracle
# ---------------------------------------------------------------------------


def expected_call_sequence(root: AstNode) -> list[tuple[str, int]]:
    """(phase, node_id) preorder/postorder interleaving of a plain walk."""
    out: list[tuple[str, int]] = []

    def walk(node: AstNode) -> None:
        out.append(("visit", node.node_id))
        for value in node.attrs.values():
            if isinstance(value, AstNode):
                walk(value)
            elif isinstance(value, list):
                for item in value:
                    if isinstance(item, AstNode):
                        walk(item)
        out.append(("end", node.node_id))

    walk(root)
    return out


def random_tree(rng: Random, max_depth: int = 4,
                type_pool: tuple[str, ...] = ("A", "B", "C")) -> AstNode:
    ids = [0]

    def build(depth: int) -> AstNode:
        ids[0] += 1
        node = AstNode(type_name=rng.choice(type_pool), node_id=ids[0])
        node.attrs["tag"] = rng.randint(0, 9)
        if depth < max_depth:
            for name in ("left", "items", "right"):
                roll = rng.random()
                if roll < 0.3:
                    node.attrs[name] = build(depth + 1)
                elif roll < 0.55:
                    node.attrs[name] = [build(depth + 1)
                                        for _ in range(rng.randint(1, 3))]
        return node

    return build(0)


# ---------------------------------------------------------------------------
# A minimal EBNF reader (for the emitted-view re-parse property)
# ---------------------------------------------------------------------------

_EBNF_TOKEN = re.compile(r"::=|[()|?*+]|\"(?:[^\"\\]|\\.)*\"|[A-Za-z_]\w*")


def parse_ebnf(text: str) -> dict[str, list]:
    """name -> flat alternative lists of symbol strings (quoted = terminal)."""
    productions: dict[str, list] = {}
    for line in text.splitlines():
        if not line.strip():
            continue
        tokens = _EBNF_TOKEN.findall(line)
        if len(tokens) < 2 or tokens[1] != "::=":
            raise ValueError(f"not an EBNF production: {line!r}")
        name = tokens[0]
        depth = 0
        for tok in tokens[2:]:
            depth += tok == "("
            depth -= tok == ")"
        if depth != 0:
            raise ValueError(f"unbalanced parentheses: {line!r}")
        productions[name] = tokens[2:]
    return productions


def ebnf_vocabulary(productions: dict[str, list]) -> tuple[set, set]:
    """(nonterminal-or-token names, quoted terminals) of the EBNF text,
    counting both defined productions and every right-hand-side use."""
    names: set[str] = set(productions)
    terminals: set[str] = set()
    for symbols in productions.values():
        for symbol in symbols:
            if symbol.startswith('"'):
                terminals.add(symbol[1:-1])
            elif symbol not in ("::=", "(", ")", "|", "?", "*", "+"):
                names.add(symbol)
    return names, terminals


# ---------------------------------------------------------------------------
# Random inputs for the property suites
# ---------------------------------------------------------------------------


def _seq(items: list):
    return items[0] if len(items) == 1 else Sequence(items)


def random_body(rng: Random, depth: int = 4):
    """A random rule body over a small pool of targets and labels."""
    targets = ["A", "B", "C", "D"]
    tokens = ["IDENT", "NUMBER"]
    labels = [None, None, "x", "y"]

    def element(level: int):
        choices = ["nt", "token", "terminal"]
        if level < depth:
            choices += ["block", "alt", "seq"]
        kind = rng.choice(choices)
        card = rng.choice([Cardinality.ONE, Cardinality.ONE,
                           Cardinality.OPTIONAL, Cardinality.STAR,
                           Cardinality.PLUS])
        if kind == "nt":
            return NonterminalRef(rng.choice(targets),
                                  label=rng.choice(labels), card=card)
        if kind == "token":
            return TokenRef(rng.choice(tokens), label=rng.choice(labels),
                            card=card)
        if kind == "terminal":
            return Terminal(rng.choice(["k1", "k2", ","]), card=card)
        if kind == "block":
            inner = element(level + 1)
            if card is Cardinality.ONE or isinstance(inner, Block):
                return inner
            return Block(inner, card=card)
        if kind == "alt":
            return Alternative([element(level + 1)
                                for _ in range(rng.randint(2, 3))])
        return _seq([element(level + 1) for _ in range(rng.randint(2, 3))])

    return _seq([element(1) for _ in range(rng.randint(1, 3))])


def random_dag_grammar(rng: Random, productions: int = 8) -> GrammarDef:
    """A random grammar without recursion: references only point forward."""
    terminal_pool = ["ta", "tb", "tc", "td", "te"]
    names = [f"Rule{i}" for i in range(productions)]

    def element(owner: int, level: int):
        later = names[owner + 1:]
        choices = ["terminal", "terminal", "token"]
        if later:
            choices.append("nt")
        if level < 3:
            choices += ["block", "alt"]
        kind = rng.choice(choices)
        card = rng.choice([Cardinality.ONE] * 3 + [Cardinality.OPTIONAL,
                                                   Cardinality.STAR,
                                                   Cardinality.PLUS])
        if kind == "terminal":
            return Terminal(rng.choice(terminal_pool), card=card)
        if kind == "token":
            return TokenRef("IDENT", card=card,
                            label=f"v{rng.randint(0, 5)}")
        if kind == "nt":
            return NonterminalRef(rng.choice(later), card=card,
                                  label=f"n{rng.randint(0, 5)}")
        if kind == "block":
            inner = _seq([element(owner, level + 1)
                          for _ in range(rng.randint(1, 2))])
            if card is Cardinality.ONE or isinstance(inner, Block):
                return inner
            return Block(inner, card=card)
        return Alternative([_seq([element(owner, level + 1)
                                  for _ in range(rng.randint(1, 2))])
                            for _ in range(rng.randint(2, 3))])

    prods = []
    for index, name in enumerate(names):
        body = _seq([element(index, 1) for _ in range(rng.randint(1, 3))])
        prods.append(ProductionDef(name=name, kind=ProductionKind.NODE,
                                   body=body))
    return GrammarDef(package="fuzz", name=f"G{rng.randint(0, 10**6)}",
                      productions=prods)


def inject_left_recursion(g: GrammarDef, rng: Random,
                          indirect: bool) -> GrammarDef:
    """Mutate a copy so some production becomes left-recursive."""
    import copy
    mutated = copy.deepcopy(g)
    victim = rng.choice(mutated.productions)
    if not indirect:
        victim.body = Alternative([
            Sequence([NonterminalRef(victim.name), Terminal("ta")]),
            victim.body,
        ])
        return mutated
    helper = ProductionDef(
        name="LRHelper", kind=ProductionKind.NODE,
        body=Sequence([NonterminalRef(victim.name), Terminal("tb")]))
    mutated.productions.append(helper)
    victim.body = Alternative([
        Sequence([NonterminalRef("LRHelper"), Terminal("ta")]),
        victim.body,
    ])
    return mutated
