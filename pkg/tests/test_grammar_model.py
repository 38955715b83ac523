"""Grammar file parsing, validation, and the print/parse round trip."""

import string

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from langweave import SourceError, parse_grammar, print_grammar, validate_grammar
from langweave.grammar import (Alternative, Block, Cardinality, GrammarDef,
                               NonterminalRef, Sequence, TokenRef,
                               grammars_equal)

from conftest import SHOP_GRAMMAR, SHOP_INHERIT_GRAMMAR, SHOP_LINKS_GRAMMAR


def test_shop_grammar_shape():
    g = parse_grammar(SHOP_GRAMMAR, "shop.mcg")
    assert g.package == "shop"
    assert g.name == "ShopLang"
    assert [p.name for p in g.productions] == [
        "ShopSystem", "Client", "PremiumClient", "OrderCreditcard",
        "OrderCash", "Address"]
    body = g.productions[0].body
    assert isinstance(body, Sequence)
    first, second, third = body.items
    assert isinstance(first, TokenRef)
    assert (first.target, first.label) == ("IDENT", "name")
    assert isinstance(second, Block) and second.card is Cardinality.STAR
    assert isinstance(second.inner, Alternative)
    assert [b.target for b in second.inner.branches] == ["Client",
                                                         "PremiumClient"]
    assert isinstance(third, Block) and third.card is Cardinality.STAR
    assert [b.target for b in third.inner.branches] == ["OrderCreditcard",
                                                        "OrderCash"]


def test_empty_grammar():
    g = parse_grammar("grammar E { }", "e.mcg")
    assert g.productions == []
    assert g.tokens == []
    assert g.package == ""


def test_association_fields():
    g = parse_grammar(SHOP_LINKS_GRAMMAR, "links.mcg")
    assoc = g.associations[0]
    assert assoc.name == "ClientOrder"
    assert assoc.source_type == "Client"
    assert (assoc.source_card.lo, assoc.source_card.hi) == (1, 1)
    assert assoc.target_type == "Order"
    assert assoc.target_card.hi is None
    assert assoc.target_role == "orderingClient"
    assert assoc.source_role is None
    assert assoc.directed is False


def test_association_range_and_arrow():
    g = parse_grammar(
        "grammar A { X = name:IDENT; Y = xName:IDENT;"
        " association R X 3..4 -> * Y.ref; }", "a.mcg")
    assoc = g.associations[0]
    assert (assoc.source_card.lo, assoc.source_card.hi) == (3, 4)
    assert assoc.directed is True


def test_every_element_carries_a_position():
    g = parse_grammar(SHOP_INHERIT_GRAMMAR, "i.mcg")
    lines = SHOP_INHERIT_GRAMMAR.count("\n") + 1
    seen = [g.pos] + [p.pos for p in g.productions] + \
        [t.pos for t in g.tokens] + [a.pos for a in g.associations] + \
        [a.pos for a in g.ast_augmentations]
    from langweave.grammar import iter_body
    for p in g.productions:
        if p.body is not None:
            seen.extend(e.pos for e in iter_body(p.body))
    for pos in seen:
        assert pos is not None
        assert pos.file == "i.mcg"
        assert 1 <= pos.line <= lines
        assert pos.column >= 1


def test_syntax_error_has_position_and_no_partial_result():
    with pytest.raises(SourceError) as exc:
        parse_grammar("grammar X { Broken = ; ;", "x.mcg")
    diag = exc.value.diagnostics[0]
    assert diag.pos is not None and diag.pos.file == "x.mcg"


@settings(max_examples=200, deadline=None)
@given(st.text(alphabet=string.printable, max_size=80))
def test_parse_grammar_total_over_strings(text):
    # the meta-parser either yields a grammar or positioned diagnostics
    try:
        result = parse_grammar(text, "fuzz.mcg")
        assert isinstance(result, GrammarDef)
    except SourceError as exc:
        assert exc.diagnostics


def test_validate_clean_grammar(shop):
    g = parse_grammar(SHOP_GRAMMAR, "shop.mcg")
    assert validate_grammar(g) == []


def test_validate_duplicate_production():
    g = parse_grammar(
        'grammar D { Client = "client" name:IDENT; Client = name:IDENT; }',
        "d.mcg")
    diags = validate_grammar(g)
    assert any("duplicate production" in d.message for d in diags)


def test_validate_external_with_body():
    g = parse_grammar('grammar E { external X = "a"; }', "e.mcg")
    diags = validate_grammar(g)
    assert len(diags) == 1
    assert "must not define a body" in diags[0].message


def test_validate_unlabeled_multi_constant_group():
    g = parse_grammar('grammar C { X = ["a" | "b"]; }', "c.mcg")
    diags = validate_grammar(g)
    assert any("needs a label" in d.message for d in diags)


def test_validate_token_name_conventions():
    g = parse_grammar("grammar T { token x = 'a'; X = x:IDENT; }", "t.mcg")
    assert any("all-caps" in d.message for d in validate_grammar(g))


def test_validate_compileunit_needs_name():
    g = parse_grammar(
        "grammar N { options { compileunit Top; } Top = v:NUMBER; "
        "token NUMBER = ('0'..'9')+; }", "n.mcg")
    assert any("'name'" in d.message for d in validate_grammar(g))


@pytest.mark.parametrize("source", [SHOP_GRAMMAR, SHOP_INHERIT_GRAMMAR,
                                    SHOP_LINKS_GRAMMAR])
def test_print_parse_round_trip(source):
    g = parse_grammar(source, "orig.mcg")
    printed = print_grammar(g)
    again = parse_grammar(printed, "printed.mcg")
    assert grammars_equal(g, again)


def test_round_trip_random_grammars():
    from random import Random
    from oracles import random_dag_grammar
    rng = Random(99)
    for _ in range(25):
        g = random_dag_grammar(rng)
        printed = print_grammar(g)
        again = parse_grammar(printed, "printed.mcg")
        assert grammars_equal(g, again), printed
