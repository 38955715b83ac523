"""Lexer construction, maximal-munch scanning, and keyword reservation."""

import pytest

from langweave import (ConverterRegistry, SourceError, build_lexer,
                       link_inheritance, parse_grammar, tokenize)

from conftest import SHOP_GRAMMAR, make_cardinality_converters

CARD_GRAMMAR = """
grammar CardLang {
  options { nodefaulttokens; }
  token IDENT = ('a'..'z' | 'A'..'Z')+;
  token NUMBER = ('0'..'9')+ : int;
  token CARDINALITY = ('0'..'9')+ | '*' : cardinality;
  Bound = "card" value:CARDINALITY;
}
"""


def _lexer(source, converters=None, file="g.mcg"):
    linked = link_inheritance([parse_grammar(source, file)])
    return build_lexer(linked, converters)


def test_reserved_terminals_and_active_rules(shop):
    spec = shop.lexer
    assert spec.reserved_terminals == frozenset(
        {"client", "premiumclient", "creditorder", "cashorder"})
    assert [r.name for r in spec.token_rules] == ["NUMBER", "IDENT", "STRING"]
    assert spec.keywords == spec.reserved_terminals


def test_missing_token_rule_reported():
    source = """
    grammar Bare {
      options { nodefaulttokens; }
      Thing = name:IDENT;
    }
    """
    with pytest.raises(SourceError) as exc:
        _lexer(source)
    assert any("IDENT" in d.message and "no rule defines it" in d.message
               for d in exc.value.diagnostics)


def test_token_override_is_per_lexer():
    base = parse_grammar(
        "package a; grammar Base { Word = w:IDENT; }", "base.mcg")
    sub = parse_grammar(
        "package a; grammar Sub extends a.Base {"
        " token IDENT = ('a'..'z')+; }", "sub.mcg")
    base_lexer = build_lexer(link_inheritance([base]))
    sub_lexer = build_lexer(link_inheritance([base, sub]))
    assert tokenize(base_lexer, "Hello")[0].kind == "IDENT"
    with pytest.raises(SourceError):
        tokenize(sub_lexer, "Hello")  # uppercase no longer scans
    assert tokenize(sub_lexer, "hello")[0].kind == "IDENT"
    # the supergrammar lexer is unchanged
    assert tokenize(base_lexer, "Hello")[0].raw == "Hello"


def test_scan_keyword_then_ident(shop):
    lexemes = tokenize(shop.lexer, "client Bob")
    assert [(l.kind, l.raw) for l in lexemes] == [("client", "client"),
                                                  ("IDENT", "Bob")]
    assert lexemes[1].value == "Bob"


def test_scan_empty_input(shop):
    assert tokenize(shop.lexer, "") == []


def test_custom_conversion():
    spec = _lexer(CARD_GRAMMAR, make_cardinality_converters())
    star = tokenize(spec, "*")[0]
    assert (star.kind, star.raw, star.value) == ("CARDINALITY", "*", -1)
    # digits also match NUMBER, which wins by declaration order
    three = tokenize(spec, "3")[0]
    assert (three.kind, three.value) == ("NUMBER", 3)


def test_missing_converter_is_a_build_error():
    with pytest.raises(SourceError) as exc:
        _lexer(CARD_GRAMMAR, ConverterRegistry())
    assert any("cardinality" in d.message for d in exc.value.diagnostics)


def test_failing_converter_is_a_positioned_diagnostic():
    converters = ConverterRegistry()

    def explode(raw):
        raise ValueError("bad value")

    converters.register("cardinality", explode)
    spec = _lexer(CARD_GRAMMAR, converters)
    with pytest.raises(SourceError) as exc:
        tokenize(spec, "card 12")
    diag = exc.value.diagnostics[0]
    assert "bad value" in diag.message
    assert diag.pos is not None and diag.pos.column == 6


def test_unscannable_character(shop):
    with pytest.raises(SourceError) as exc:
        tokenize(shop.lexer, "client @")
    diag = exc.value.diagnostics[0]
    assert "unscannable" in diag.message
    assert (diag.pos.line, diag.pos.column) == (1, 8)


def test_raw_concatenation_reproduces_input(shop):
    text = ('MyShop  client Bob "Main"\t"Aachen"\n'
            '// a comment\n'
            'cashorder Bob 10 /* block */ creditorder Bob 7')
    lexemes = tokenize(shop.lexer, text, file="m.shop")
    rebuilt = []
    cursor = 0
    for lexeme in lexemes:
        rebuilt.append(text[cursor:lexeme.start])  # skipped trivia
        rebuilt.append(lexeme.raw)
        assert text[lexeme.start:lexeme.end] == lexeme.raw
        cursor = lexeme.end
    rebuilt.append(text[cursor:])
    assert "".join(rebuilt) == text


def test_determinism(shop):
    text = 'Shop client Ann "a" "b" cashorder Ann 1'
    assert tokenize(shop.lexer, text) == tokenize(shop.lexer, text)


def test_keyword_reservation_is_per_lexer(shop, pay_component):
    # "pay" is a keyword of the payment language only
    assert tokenize(shop.lexer, "pay")[0].kind == "IDENT"
    assert tokenize(pay_component.lexer, "pay")[0].kind == "pay"
    # and "client" is only reserved in the shop language
    assert tokenize(pay_component.lexer, "client")[0].kind == "IDENT"


def test_longest_match_beats_keyword(shop):
    lexemes = tokenize(shop.lexer, "clientele")
    assert [(l.kind, l.raw) for l in lexemes] == [("IDENT", "clientele")]


def test_overlap_warning():
    spec = _lexer(CARD_GRAMMAR, make_cardinality_converters())
    assert any("NUMBER" in w.message and "CARDINALITY" in w.message
               for w in spec.warnings)
