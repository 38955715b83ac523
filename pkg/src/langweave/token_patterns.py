"""Restricted token patterns: literals, char ranges, alternation, repetition.

This is deliberately a small subset of regular expressions; anything richer
in a grammar file is rejected by the meta-parser.  Patterns compile to
anchored :mod:`re` matchers for scanning and can also produce random sample
strings for the sentence generator.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import cached_property
from random import Random
from typing import Union


def _quote_char(ch: str) -> str:
    if ch == "\\":
        return "'\\\\'"
    if ch == "'":
        return "'\\''"
    if ch == "\n":
        return "'\\n'"
    if ch == "\t":
        return "'\\t'"
    return f"'{ch}'"


@dataclass(frozen=True)
class PatLit:
    """A fixed text, written 'c' or "text" in the grammar."""

    text: str

    def __str__(self) -> str:
        if len(self.text) == 1:
            return _quote_char(self.text)
        escaped = self.text.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{escaped}"'


@dataclass(frozen=True)
class PatRange:
    lo: str
    hi: str

    def __post_init__(self):
        if len(self.lo) != 1 or len(self.hi) != 1 or self.lo > self.hi:
            raise ValueError(f"invalid character range {self.lo!r}..{self.hi!r}")

    def __str__(self) -> str:
        return f"{_quote_char(self.lo)}..{_quote_char(self.hi)}"


@dataclass(frozen=True)
class PatSeq:
    parts: tuple["PatternNode", ...]

    def __str__(self) -> str:
        return " ".join(_nested(p, PatAlt) for p in self.parts)


@dataclass(frozen=True)
class PatAlt:
    branches: tuple["PatternNode", ...]

    def __str__(self) -> str:
        return " | ".join(str(b) for b in self.branches)


@dataclass(frozen=True)
class PatRep:
    inner: "PatternNode"
    op: str  # one of ? * +

    def __post_init__(self):
        if self.op not in "?*+":
            raise ValueError(f"invalid repetition operator {self.op!r}")

    def __str__(self) -> str:
        return _nested(self.inner, (PatAlt, PatSeq)) + self.op


PatternNode = Union[PatLit, PatRange, PatSeq, PatAlt, PatRep]


def _nested(node: PatternNode, wrap_types) -> str:
    text = str(node)
    if isinstance(node, wrap_types):
        return f"({text})"
    return text


def _to_regex(node: PatternNode) -> str:
    if isinstance(node, PatLit):
        return re.escape(node.text)
    if isinstance(node, PatRange):
        return f"[{re.escape(node.lo)}-{re.escape(node.hi)}]"
    if isinstance(node, PatSeq):
        return "".join(_to_regex(p) for p in node.parts)
    if isinstance(node, PatAlt):
        return "(?:" + "|".join(_to_regex(b) for b in node.branches) + ")"
    if isinstance(node, PatRep):
        return f"(?:{_to_regex(node.inner)}){node.op}"
    raise TypeError(f"not a pattern node: {node!r}")


def _sample(node: PatternNode, rng: Random) -> str:
    if isinstance(node, PatLit):
        return node.text
    if isinstance(node, PatRange):
        return chr(rng.randint(ord(node.lo), ord(node.hi)))
    if isinstance(node, PatSeq):
        return "".join(_sample(p, rng) for p in node.parts)
    if isinstance(node, PatAlt):
        return _sample(rng.choice(node.branches), rng)
    if isinstance(node, PatRep):
        if node.op == "?":
            count = rng.randint(0, 1)
        elif node.op == "*":
            count = rng.randint(0, 2)
        else:
            count = rng.randint(1, 3)
        return "".join(_sample(node.inner, rng) for _ in range(count))
    raise TypeError(f"not a pattern node: {node!r}")


@dataclass(frozen=True)
class TokenPattern:
    """A compiled restricted pattern; ``str()`` round-trips to grammar syntax."""

    root: PatternNode

    def __str__(self) -> str:
        return str(self.root)

    @cached_property
    def regex(self) -> re.Pattern:
        return re.compile(_to_regex(self.root))

    def fullmatch(self, text: str) -> bool:
        return self.regex.fullmatch(text) is not None

    def match_length(self, text: str, pos: int) -> int:
        """Longest match starting at pos, or -1 if none (empty match counts)."""
        m = self.regex.match(text, pos)
        if m is None:
            return -1
        return m.end() - pos

    def sample(self, rng: Random) -> str:
        return _sample(self.root, rng)


def literal_pattern(text: str) -> TokenPattern:
    return TokenPattern(PatLit(text))
