"""LL(k) decision analysis and the interpretive recursive-descent parser.

The parser walks the linked grammar directly instead of running generated
code, which is what lets independently built components combine at
configuration time.  Decisions are taken by FIRST-set pruning plus bounded
backtracking with memoization: branches are tried in declaration order and
the first succeeding one wins.  ``analyze_llk`` reports every spot where
that tie-break can trigger, and refuses left-recursive grammars.

Reaching an external nonterminal switches to the selected embedded
component's lexer at the current character, runs its parser from its start
rule, splices the subtree into the host attribute slot, and resumes the host
lexer at the first unconsumed character.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any

from .ast_nodes import AstNode, attach_metamodel, set_parents
from .diagnostics import (Diagnostic, SourceError, SourcePos, error, warning)
from .grammar import (Alternative, Block, BodyElement, Cardinality,
                      ConstantGroup, NonterminalRef, ProductionKind, Sequence,
                      Terminal, TokenRef)
from .lexer import Lexeme, LexerSpec, Scanner
from .linking import LinkedGrammar, element_attr_name
from .metamodel import Metamodel

if TYPE_CHECKING:
    from .composition import LanguageComponent

EXT_MARK = "<embedded>"   # FIRST-set wildcard for external nonterminals
EOF_KIND = "<eof>"
ERROR_KIND = "<scan-error>"

FAIL = None  # parse functions return an index or None


# ---------------------------------------------------------------------------
# FIRST_k machinery
# ---------------------------------------------------------------------------

def _truncate(seq: tuple, k: int) -> tuple:
    return seq if len(seq) <= k else seq[:k]


def _concat(left: frozenset, right: frozenset, k: int) -> frozenset:
    out = set()
    for a in left:
        if len(a) >= k or EXT_MARK in a:
            out.add(_truncate(a, k))
            continue
        for b in right:
            out.add(_truncate(a + b, k))
    return frozenset(out)


_EPSILON = frozenset({()})


class _FirstComputer:
    """Fixpoint FIRST_k over a linked grammar (variant alternatives included)."""

    def __init__(self, linked: LinkedGrammar, k: int):
        self.linked = linked
        self.k = k
        self.sets: dict[str, frozenset] = {n: frozenset()
                                           for n in linked.productions}
        self._run()

    def _run(self) -> None:
        changed = True
        while changed:
            changed = False
            for name in self.linked.productions:
                new = self._of_production(name)
                if new != self.sets[name]:
                    self.sets[name] = new
                    changed = True

    def _of_production(self, name: str) -> frozenset:
        prod = self.linked.productions[name]
        if prod.kind is ProductionKind.EXTERNAL:
            return frozenset({(EXT_MARK,)})
        own, variants = self.linked.parse_alternatives(name)
        out: set = set()
        if own is not None:
            out |= self.of_body(own)
        for variant in variants:
            out |= self.sets[variant]
        return frozenset(out)

    def of_body(self, body: BodyElement) -> frozenset:
        base = self._base(body)
        card = getattr(body, "card", Cardinality.ONE)
        if isinstance(body, ConstantGroup):
            card = Cardinality.ONE
        if card is Cardinality.ONE:
            return base
        if card is Cardinality.OPTIONAL:
            return base | _EPSILON
        star = self._star(base)
        if card is Cardinality.STAR:
            return star
        return _concat(base, star, self.k)

    def _star(self, base: frozenset) -> frozenset:
        result = frozenset(_EPSILON)
        while True:
            grown = result | _concat(base, result, self.k)
            if grown == result:
                return result
            result = grown

    def _base(self, body: BodyElement) -> frozenset:
        if isinstance(body, Sequence):
            out = _EPSILON
            for item in body.items:
                out = _concat(out, self.of_body(item), self.k)
            return out
        if isinstance(body, Alternative):
            out: set = set()
            for branch in body.branches:
                out |= self.of_body(branch)
            return frozenset(out)
        if isinstance(body, Block):
            return self.of_body(body.inner)
        if isinstance(body, Terminal):
            return frozenset({(body.text,)})
        if isinstance(body, TokenRef):
            return frozenset({(body.target,)})
        if isinstance(body, ConstantGroup):
            return frozenset({(c,) for c in body.constants})
        if isinstance(body, NonterminalRef):
            return self.sets.get(body.target, frozenset())
        raise TypeError(f"not a body element: {body!r}")


def _prefix_conflict(a: frozenset, b: frozenset) -> tuple | None:
    """A witness sequence when one set holds a prefix of the other's entry."""
    for sa in sorted(a):
        for sb in sorted(b):
            if EXT_MARK in sa or EXT_MARK in sb:
                return sa if EXT_MARK in sa else sb
            short, long_ = (sa, sb) if len(sa) <= len(sb) else (sb, sa)
            if long_[:len(short)] == short:
                return short
    return None


# ---------------------------------------------------------------------------
# Nullability and left recursion
# ---------------------------------------------------------------------------

class _Nullability:
    def __init__(self, linked: LinkedGrammar):
        self.linked = linked
        self.nullable: dict[str, bool] = {n: False for n in linked.productions}
        changed = True
        while changed:
            changed = False
            for name in linked.productions:
                value = self._of_production(name)
                if value != self.nullable[name]:
                    self.nullable[name] = value
                    changed = True

    def _of_production(self, name: str) -> bool:
        prod = self.linked.productions[name]
        if prod.kind is ProductionKind.EXTERNAL:
            return False
        own, variants = self.linked.parse_alternatives(name)
        if own is not None and self.of_body(own):
            return True
        return any(self.nullable[v] for v in variants)

    def of_body(self, body: BodyElement) -> bool:
        card = getattr(body, "card", Cardinality.ONE)
        if card in (Cardinality.OPTIONAL, Cardinality.STAR):
            return True
        if isinstance(body, Sequence):
            return all(self.of_body(i) for i in body.items)
        if isinstance(body, Alternative):
            return any(self.of_body(b) for b in body.branches)
        if isinstance(body, Block):
            return self.of_body(body.inner)
        if isinstance(body, NonterminalRef):
            return self.nullable.get(body.target, False)
        return False  # terminals, tokens, constants consume input


def _left_edges(linked: LinkedGrammar, nullability: _Nullability
                ) -> dict[str, list[str]]:
    """name -> nonterminals derivable at the leftmost position."""
    edges: dict[str, list[str]] = {n: [] for n in linked.productions}

    def scan(owner: str, body: BodyElement) -> None:
        if isinstance(body, Sequence):
            for item in body.items:
                scan(owner, item)
                if not nullability.of_body(item):
                    return
            return
        if isinstance(body, Alternative):
            for branch in body.branches:
                scan(owner, branch)
            return
        if isinstance(body, Block):
            scan(owner, body.inner)
            return
        if isinstance(body, NonterminalRef):
            edges[owner].append(body.target)

    for name in linked.productions:
        own, variants = linked.parse_alternatives(name)
        if own is not None:
            scan(name, own)
        edges[name].extend(variants)
    return edges


def _find_left_recursion(edges: dict[str, list[str]]) -> list[list[str]]:
    cycles: list[list[str]] = []
    state: dict[str, int] = {}

    def visit(name: str, trail: list[str]) -> None:
        state[name] = 1
        trail.append(name)
        for target in edges.get(name, ()):  # noqa: B007
            if target not in edges:
                continue
            if state.get(target) == 1:
                cycles.append(trail[trail.index(target):] + [target])
            elif state.get(target, 0) == 0:
                visit(target, trail)
        trail.pop()
        state[name] = 2

    for name in edges:
        if state.get(name, 0) == 0:
            visit(name, [])
    return cycles


# ---------------------------------------------------------------------------
# Decision table
# ---------------------------------------------------------------------------

@dataclass
class DecisionPoint:
    production: str
    kind: str  # "alternative" | "optional" | "loop" | "dispatch"
    path: str
    k: int
    branch_firsts: list[frozenset]
    conflict: bool
    witness: tuple | None
    pos: SourcePos | None = None


@dataclass
class DecisionTable:
    k: int
    first_sets: dict[str, frozenset]
    decisions: list[DecisionPoint] = field(default_factory=list)
    diagnostics: list[Diagnostic] = field(default_factory=list)

    @property
    def errors(self) -> list[Diagnostic]:
        from .diagnostics import Severity
        return [d for d in self.diagnostics if d.severity is Severity.ERROR]

    @property
    def conflicts(self) -> list[DecisionPoint]:
        return [d for d in self.decisions if d.conflict]


def analyze_llk(linked: LinkedGrammar, k: int | None = None) -> DecisionTable:
    """Left-recursion check plus per-decision FIRST_k conflict analysis.

    Left recursion is an error (parsing refused); FIRST_k conflicts are
    warnings naming both branches and a witness prefix, since the parser
    falls back to ordered backtracking there.
    """
    if k is None:
        k = linked.options.lookahead_k
    nullability = _Nullability(linked)
    cycles = _find_left_recursion(_left_edges(linked, nullability))
    table = DecisionTable(k=k, first_sets={})
    for cycle in cycles:
        head = cycle[0]
        table.diagnostics.append(error(
            "left recursion: " + " -> ".join(cycle),
            linked.productions[head].pos))
    if cycles:
        return table

    firsts = _FirstComputer(linked, k)
    table.first_sets = dict(firsts.sets)

    for name in linked.productions:
        prod = linked.productions[name]
        own, variants = linked.parse_alternatives(name)
        branches: list[frozenset] = []
        if own is not None:
            branches.append(firsts.of_body(own))
        branches.extend(firsts.sets[v] for v in variants)
        if len(branches) > 1:
            _record(table, name, "dispatch", name, branches, prod.pos)
        if own is not None:
            _walk_decisions(table, firsts, name, own, f"{name}.body")
    return table


def _record(table: DecisionTable, production: str, kind: str, path: str,
            branches: list[frozenset], pos) -> None:
    conflict = False
    witness = None
    for i in range(len(branches)):
        for j in range(i + 1, len(branches)):
            hit = _prefix_conflict(branches[i], branches[j])
            if hit is not None:
                conflict = True
                witness = hit
                table.diagnostics.append(warning(
                    f"decision in '{production}' ({kind} at {path}): branches "
                    f"{i} and {j} share lookahead prefix {list(hit)}; first "
                    "succeeding branch wins", pos))
                break
        if conflict:
            break
    table.decisions.append(DecisionPoint(
        production=production, kind=kind, path=path, k=table.k,
        branch_firsts=branches, conflict=conflict, witness=witness, pos=pos))


def _walk_decisions(table: DecisionTable, firsts: _FirstComputer,
                    production: str, body: BodyElement, path: str) -> None:
    card = getattr(body, "card", Cardinality.ONE)
    if isinstance(body, ConstantGroup):
        card = Cardinality.ONE
    if card is not Cardinality.ONE:
        base = firsts._base(body)
        kind = "optional" if card is Cardinality.OPTIONAL else "loop"
        enter = {s for s in base if s != ()}
        _record(table, production, kind, path, [frozenset(enter), _EPSILON],
                getattr(body, "pos", None))
    if isinstance(body, Alternative):
        branches = [firsts.of_body(b) for b in body.branches]
        _record(table, production, "alternative", path, branches, body.pos)
        for index, branch in enumerate(body.branches):
            _walk_decisions(table, firsts, production, branch,
                            f"{path}.alt{index}")
    elif isinstance(body, Sequence):
        for index, item in enumerate(body.items):
            _walk_decisions(table, firsts, production, item,
                            f"{path}.{index}")
    elif isinstance(body, Block):
        _walk_decisions(table, firsts, production, body.inner, f"{path}.block")


# ---------------------------------------------------------------------------
# Cursors
# ---------------------------------------------------------------------------

@dataclass
class _ScanState:
    offset: int
    line: int
    col: int


class _Cursor:
    """Lazily scanned lexeme sequence with re-anchoring for embedding.

    Each cached entry remembers the scanner state after the lexeme, so
    truncating the cache (when an embedded parse moved the character
    position, or when backtracking past it) re-scans from exact positions.
    """

    def __init__(self, spec: LexerSpec, text: str, file: str,
                 start: _ScanState | None = None):
        self.spec = spec
        self.text = text
        self.file = file
        self.start = start or _ScanState(0, 1, 1)
        self.scanner = Scanner(spec, text, file, self.start.offset,
                               self.start.line, self.start.col)
        self.cache: list[tuple[Lexeme, _ScanState]] = []
        self.generation = 0
        self._scan_failure: Diagnostic | None = None

    def peek(self, i: int) -> Lexeme:
        while len(self.cache) <= i:
            if self._scan_failure is not None:
                pos = SourcePos(self.file, self.scanner.line, self.scanner.col)
                return Lexeme(ERROR_KIND, "", None, pos, self.scanner.offset,
                              self.scanner.offset)
            try:
                lexeme = self.scanner.next_lexeme()
            except SourceError as exc:
                self._scan_failure = exc.diagnostics[0]
                continue
            if lexeme is None:
                pos = SourcePos(self.file, self.scanner.line, self.scanner.col)
                return Lexeme(EOF_KIND, "", None, pos, self.scanner.offset,
                              self.scanner.offset)
            self.cache.append((lexeme, _ScanState(
                self.scanner.offset, self.scanner.line, self.scanner.col)))
        return self.cache[i][0]

    def state_before(self, i: int) -> _ScanState:
        """Scanner state from which lexeme ``i`` would be scanned."""
        if i == 0:
            return self.start
        self.peek(i - 1)
        return self.cache[i - 1][1]

    def reanchor(self, i: int, state: _ScanState) -> None:
        """Continue scanning lexeme ``i`` and onwards from ``state``."""
        del self.cache[i:]
        self.scanner.offset = state.offset
        self.scanner.line = state.line
        self.scanner.col = state.col
        self._scan_failure = None
        self.generation += 1

    def scan_failure(self) -> Diagnostic | None:
        return self._scan_failure


class _ListCursor:
    """Cursor over pre-scanned lexemes; embedding needs raw text instead."""

    def __init__(self, lexemes: list[Lexeme], file: str):
        self.lexemes = lexemes
        self.file = file
        self.generation = 0
        self.text = None

    def peek(self, i: int) -> Lexeme:
        if i < len(self.lexemes):
            return self.lexemes[i]
        if self.lexemes:
            last = self.lexemes[-1]
            pos = SourcePos(last.pos.file, last.pos.line,
                            last.pos.column + len(last.raw))
            return Lexeme(EOF_KIND, "", None, pos, last.end, last.end)
        return Lexeme(EOF_KIND, "", None, SourcePos(self.file, 1, 1), 0, 0)

    def scan_failure(self):
        return None


# ---------------------------------------------------------------------------
# The interpretive parser
# ---------------------------------------------------------------------------

class _Failure:
    """Furthest-failure tracker for error reporting."""

    def __init__(self):
        self.index = -1
        self.expected: set[str] = set()
        self.production: str | None = None
        self.lexeme: Lexeme | None = None

    def note(self, index: int, expected: str, production: str,
             lexeme: Lexeme) -> None:
        if index > self.index:
            self.index = index
            self.expected = {expected}
            self.production = production
            self.lexeme = lexeme
        elif index == self.index:
            self.expected.add(expected)


class _IdAllocator:
    def __init__(self):
        self.next_id = 1

    def take(self) -> int:
        value = self.next_id
        self.next_id += 1
        return value


class _Runner:
    def __init__(self, component: "LanguageComponent", ids: _IdAllocator,
                 failure: _Failure):
        self.component = component
        self.linked: LinkedGrammar = component.linked
        self.meta: Metamodel = component.metamodel
        self.ids = ids
        self.failure = failure
        self.memo: dict = {}
        self.first1 = _FirstComputer(self.linked, 1)
        self.nullability = _Nullability(self.linked)

    # -- productions --------------------------------------------------------

    def parse_production(self, name: str, cursor, i: int):
        """Returns (node, next_index) or FAIL."""
        key = (name, id(cursor), cursor.generation, i)
        if key in self.memo:
            return self.memo[key]
        result = self._parse_production_uncached(name, cursor, i)
        self.memo[key] = result
        return result

    def _parse_production_uncached(self, name: str, cursor, i: int):
        own, variants = self.linked.parse_alternatives(name)
        lookahead = cursor.peek(i).kind
        if own is not None:
            if self._viable(self.first1.of_body(own), lookahead):
                events: list = []
                end = self.parse_body(own, cursor, i, events, name)
                if end is not FAIL:
                    node = self._build_node(name, events, cursor, i)
                    return node, end
        for variant in variants:
            if not self._viable(self.first1.sets[variant], lookahead):
                continue
            result = self.parse_production(variant, cursor, i)
            if result is not FAIL:
                return result
        if own is None and not variants:
            self.failure.note(i, f"<no alternatives for {name}>", name,
                              cursor.peek(i))
        return FAIL

    def _viable(self, first_set: frozenset, lookahead: str) -> bool:
        for seq in first_set:
            if seq == ():
                return True
            if seq[0] == EXT_MARK or seq[0] == lookahead:
                return True
        return False

    def _build_node(self, name: str, events: list, cursor, i: int) -> AstNode:
        node = AstNode(type_name=name, node_id=self.ids.take(),
                       pos=cursor.peek(i).pos)
        declared = self.meta.all_attributes(name)
        for attr_name, value in events:
            attr = declared.get(attr_name)
            if attr is not None and attr.is_list:
                node.attrs.setdefault(attr_name, []).append(value)
            else:
                node.attrs[attr_name] = value
        for attr_name, attr in declared.items():
            if attr_name in node.attrs:
                continue
            if attr.is_list:
                node.attrs[attr_name] = []
            elif attr.kind == "boolean":
                node.attrs[attr_name] = False
        return node

    # -- body elements ------------------------------------------------------

    def parse_body(self, body: BodyElement, cursor, i: int, events: list,
                   production: str):
        card = getattr(body, "card", Cardinality.ONE)
        if isinstance(body, (Sequence, Alternative, ConstantGroup)):
            card = Cardinality.ONE
        if card is Cardinality.ONE:
            return self._parse_once(body, cursor, i, events, production)
        return self._parse_repeated(body, card, cursor, i, events, production)

    def _parse_repeated(self, body, card, cursor, i, events, production):
        if card is Cardinality.OPTIONAL:
            checkpoint = len(events)
            end = self._parse_once(body, cursor, i, events, production)
            if end is FAIL:
                del events[checkpoint:]
                return i
            return end
        count = 0
        current = i
        while True:
            checkpoint = len(events)
            end = self._parse_once(body, cursor, current, events, production)
            if end is FAIL or end == current:  # no progress: stop looping
                del events[checkpoint:]
                break
            count += 1
            current = end
        if card is Cardinality.PLUS and count == 0:
            return FAIL
        return current

    def _parse_once(self, body: BodyElement, cursor, i: int, events: list,
                    production: str):
        if isinstance(body, Sequence):
            current = i
            for item in body.items:
                current = self.parse_body(item, cursor, current, events,
                                          production)
                if current is FAIL:
                    return FAIL
            return current
        if isinstance(body, Alternative):
            lookahead = cursor.peek(i).kind
            for branch in body.branches:
                if not self._viable(self.first1.of_body(branch), lookahead):
                    continue
                checkpoint = len(events)
                end = self.parse_body(branch, cursor, i, events, production)
                if end is not FAIL:
                    return end
                del events[checkpoint:]
            return FAIL
        if isinstance(body, Block):
            return self.parse_body(body.inner, cursor, i, events, production)
        if isinstance(body, Terminal):
            lexeme = cursor.peek(i)
            if lexeme.kind == body.text:
                return i + 1
            self.failure.note(i, f'"{body.text}"', production, lexeme)
            return FAIL
        if isinstance(body, TokenRef):
            lexeme = cursor.peek(i)
            if lexeme.kind == body.target:
                events.append((element_attr_name(body), lexeme.value))
                return i + 1
            self.failure.note(i, body.target, production, lexeme)
            return FAIL
        if isinstance(body, ConstantGroup):
            lexeme = cursor.peek(i)
            if lexeme.kind in body.constants:
                value = True if len(body.constants) == 1 else lexeme.kind
                events.append((element_attr_name(body), value))
                return i + 1
            self.failure.note(i, " or ".join(f'"{c}"' for c in body.constants),
                              production, lexeme)
            return FAIL
        if isinstance(body, NonterminalRef):
            target = self.linked.productions.get(body.target)
            if target is not None and target.kind is ProductionKind.EXTERNAL:
                return self._parse_external(body, cursor, i, events, production)
            result = self.parse_production(body.target, cursor, i)
            if result is FAIL:
                return FAIL
            node, end = result
            events.append((element_attr_name(body), node))
            return end
        raise TypeError(f"not a body element: {body!r}")

    # -- embedding ----------------------------------------------------------

    def _parse_external(self, ref: NonterminalRef, cursor, i: int,
                        events: list, production: str):
        binding = self.component.embeddings.get(ref.target)
        lexeme = cursor.peek(i)
        if binding is None:
            self.failure.note(i, f"<bound language for {ref.target}>",
                              production, lexeme)
            return FAIL
        if not isinstance(cursor, _Cursor):
            raise SourceError(error(
                f"external nonterminal '{ref.target}' needs a text-based "
                "parse; pre-scanned lexemes cannot cross lexer boundaries",
                lexeme.pos))
        index = self._select_candidate(binding, events, cursor, i)
        if index is None or index >= len(binding.candidates):
            self.failure.note(i, f"<language selection for {ref.target}>",
                              production, lexeme)
            return FAIL
        candidate_component, start_rule = binding.candidates[index]
        state = cursor.state_before(i)
        sub_cursor = _Cursor(candidate_component.lexer, cursor.text,
                             cursor.file, start=state)
        sub_runner = _Runner(candidate_component, self.ids, self.failure)
        result = sub_runner.parse_production(start_rule, sub_cursor, 0)
        if result is FAIL:
            return FAIL
        node, sub_end = result
        end_state = sub_cursor.state_before(sub_end)
        attach_metamodel(node, candidate_component.metamodel)
        events.append((element_attr_name(ref), node))
        cursor.reanchor(i, end_state)
        return i

    def _select_candidate(self, binding, events: list, cursor, i: int):
        rule = binding.selection
        if rule is None or rule.kind == "fixed":
            return rule.index if rule is not None else 0
        if rule.kind == "by-attribute":
            for attr_name, value in reversed(events):
                if attr_name == rule.attr_name:
                    return rule.cases.get(str(value), rule.default)
            return None
        if rule.kind == "by-first-token":
            lexeme = cursor.peek(i)
            if lexeme.kind != ERROR_KIND:
                if lexeme.raw in rule.cases:
                    return rule.cases[lexeme.raw]
                if lexeme.kind in rule.cases:
                    return rule.cases[lexeme.kind]
            state = cursor.state_before(i)
            for index, (candidate, _) in enumerate(binding.candidates):
                probe = _Cursor(candidate.lexer, cursor.text, cursor.file,
                                start=state)
                first = probe.peek(0)
                if first.kind in (ERROR_KIND, EOF_KIND):
                    continue
                if rule.cases.get(first.raw) == index or \
                        rule.cases.get(first.kind) == index:
                    return index
            return rule.default
        return None


# ---------------------------------------------------------------------------
# Entry points
# ---------------------------------------------------------------------------

def _fail_diagnostics(cursor, failure: _Failure) -> list[Diagnostic]:
    scan_failure = cursor.scan_failure()
    diags: list[Diagnostic] = []
    if failure.index >= 0 and failure.lexeme is not None:
        found = failure.lexeme
        shown = (found.raw or found.kind)
        expected = ", ".join(sorted(failure.expected))
        where = f" (in production {failure.production})" if failure.production else ""
        diags.append(error(
            f"expected {expected}, found {shown!r}{where}", found.pos))
    if scan_failure is not None:
        diags.append(scan_failure)
    if not diags:
        diags.append(error("parse failed"))
    return diags


def _run_parse(component: "LanguageComponent", cursor, start_rule: str) -> AstNode:
    if start_rule not in component.linked.productions:
        raise SourceError(error(f"unknown start rule '{start_rule}'"))
    table = component.decision_table
    if table is not None and table.errors:
        raise SourceError(table.errors)
    failure = _Failure()
    runner = _Runner(component, _IdAllocator(), failure)
    result = runner.parse_production(start_rule, cursor, 0)
    if result is not FAIL:
        node, end = result
        trailing = cursor.peek(end)
        if trailing.kind == EOF_KIND:
            meta = component.effective_metamodel()
            attach_metamodel(node, meta)
            return set_parents(node)
        failure.note(end, EOF_KIND, start_rule, trailing)
    raise SourceError(_fail_diagnostics(cursor, failure))


def parse_text(component: "LanguageComponent", text: str,
               start_rule: str | None = None, file: str = "<model>") -> AstNode:
    """Parse a character stream into a typed tree (full-input recognition).

    Raises:
        SourceError: positioned diagnostics with the expected set and the
            enclosing production on the first unrecoverable mismatch.
    """
    start = start_rule or component.default_start()
    cursor = _Cursor(component.lexer, text, file)
    return _run_parse(component, cursor, start)


def parse(component: "LanguageComponent", lexemes: list[Lexeme],
          start_rule: str | None = None) -> AstNode:
    """Parse pre-scanned lexemes; language embedding requires parse_text."""
    start = start_rule or component.default_start()
    file = lexemes[0].pos.file if lexemes else "<model>"
    return _run_parse(component, _ListCursor(lexemes, file), start)
