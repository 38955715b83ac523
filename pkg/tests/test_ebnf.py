"""The expanded EBNF view of a linked grammar set."""

from langweave import emit_ebnf, link_inheritance, parse_grammar

from conftest import SHOP_GRAMMAR, SHOP_INHERIT_GRAMMAR
from oracles import ebnf_vocabulary, parse_ebnf

EXPECTED_INHERIT_EBNF = """\
ShopSystem ::= IDENT Client* Order*
OrderCreditcard ::= "creditorder" IDENT NUMBER
OrderCash ::= "cashorder" IDENT NUMBER
Client ::= "client" IDENT Address | PremiumClient
PremiumClient ::= "premiumclient" IDENT NUMBER
Address ::= STRING STRING
Order ::= OrderCreditcard | OrderCash
"""


def _normalize(text: str) -> list[list[str]]:
    return [line.split() for line in text.strip().splitlines()]


def test_inheritance_becomes_alternatives(shop_inherit):
    ebnf = emit_ebnf(shop_inherit.linked)
    assert _normalize(ebnf) == _normalize(EXPECTED_INHERIT_EBNF)


def test_plain_grammar_is_isomorphic(shop):
    ebnf = emit_ebnf(shop.linked)
    productions = parse_ebnf(ebnf)
    assert list(productions) == [p for p in shop.linked.productions]
    assert productions["Address"] == ["STRING", "STRING"]
    assert productions["Client"] == ['"client"', "IDENT", "Address"]


def test_three_level_chain_appends_transitively():
    g = parse_grammar(
        """
        grammar Chain {
          Animal = "animal" name:IDENT;
          Dog extends Animal = "dog" name:IDENT;
          Puppy extends Dog = "puppy" name:IDENT;
        }
        """, "chain.mcg")
    ebnf = emit_ebnf(link_inheritance([g]))
    productions = parse_ebnf(ebnf)
    assert productions["Animal"] == ['"animal"', "IDENT", "|", "Dog"]
    assert productions["Dog"] == ['"dog"', "IDENT", "|", "Puppy"]
    assert productions["Puppy"] == ['"puppy"', "IDENT"]


def test_output_reparses_and_vocabulary_matches(shop, shop_inherit,
                                                shop_links, shop_flags):
    from langweave.grammar import (ConstantGroup, NonterminalRef,
                                   ProductionKind, Terminal, TokenRef,
                                   iter_body)
    for component in (shop, shop_inherit, shop_links, shop_flags):
        linked = component.linked
        ebnf = emit_ebnf(linked)
        productions = parse_ebnf(ebnf)  # raises on malformed output
        names, terminals = ebnf_vocabulary(productions)

        want_terminals: set[str] = set()
        want_names: set[str] = set(productions)
        for prod in linked.productions.values():
            if prod.body is None or prod.kind is ProductionKind.INTERFACE:
                continue
            for element in iter_body(prod.body):
                if isinstance(element, Terminal):
                    want_terminals.add(element.text)
                elif isinstance(element, ConstantGroup):
                    want_terminals.update(element.constants)
                elif isinstance(element, TokenRef):
                    want_names.add(element.target)
                elif isinstance(element, NonterminalRef):
                    want_names.add(element.target)
        assert terminals == want_terminals
        assert names == want_names


def test_interface_with_explicit_alternative_list():
    g = parse_grammar(
        """
        grammar Pick {
          interface Choice = Left | Right;
          Left implements Choice = "l" v:IDENT;
          Right = "r" v:IDENT;
        }
        """, "pick.mcg")
    linked = link_inheritance([g])
    productions = parse_ebnf(emit_ebnf(linked))
    assert productions["Choice"] == ["Left", "|", "Right"]


def test_determinism(shop_inherit):
    assert emit_ebnf(shop_inherit.linked) == emit_ebnf(shop_inherit.linked)
