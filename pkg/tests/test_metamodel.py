"""Abstract-syntax derivation: attributes, multiplicities, inheritance."""

from random import Random

import pytest

from langweave import (SourceError, derive_metamodel, link_inheritance,
                       metamodel_from_json, occurrence_analysis, parse_grammar)
from langweave.grammar import (Alternative, Block, Cardinality,
                               NonterminalRef, Sequence, Terminal, TokenRef)
from langweave.metamodel import emit_metamodel_report, metamodel_to_dict

from conftest import SHOP_FLAGS_GRAMMAR, SHOP_LINKS_GRAMMAR
from oracles import oracle_occurrence, random_body


def _attr_map(type_def):
    return {a.name: a for a in type_def.attributes}


def test_shop_metamodel_types_and_attributes(shop):
    m = shop.metamodel
    assert [t.name for t in m.node_types] == [
        "ShopSystem", "Client", "PremiumClient", "OrderCreditcard",
        "OrderCash", "Address"]
    shop_sys = _attr_map(m.node_type("ShopSystem"))
    assert shop_sys["name"].kind == "token"
    assert (shop_sys["name"].min_occurs, shop_sys["name"].max_occurs) == (1, 1)
    for list_attr in ("client", "premiumClient", "orderCreditcard",
                      "orderCash"):
        attr = shop_sys[list_attr]
        assert attr.kind == "composition"
        assert (attr.min_occurs, attr.max_occurs) == (0, None)
    address = _attr_map(m.node_type("Address"))
    assert set(address) == {"street", "town"}
    assert address["street"].value_type == "string"


def test_inherited_subtype_keeps_only_new_attributes(shop_inherit):
    m = shop_inherit.metamodel
    premium = m.node_type("PremiumClient")
    assert premium.super_type == "Client"
    assert [a.name for a in premium.attributes] == ["discount"]
    client = _attr_map(m.node_type("Client"))
    assert set(client) == {"name", "address"}


def test_interface_declares_only_augmented_attributes(shop_inherit):
    m = shop_inherit.metamodel
    order = m.interface("Order")
    assert [a.name for a in order.declared_attributes] == ["clientName"]
    # implementors are classes with their own attributes
    cash = m.node_type("OrderCash")
    assert cash.implemented_interfaces == ["Order"]
    assert {a.name for a in cash.attributes} == {"clientName", "amount"}


def test_boolean_and_enum_constants(shop_flags):
    m = shop_flags.metamodel
    client = _attr_map(m.node_type("Client"))
    assert client["premium"].kind == "boolean"
    assert client["rating"].kind == "enum"
    assert client["rating"].values == ("gold", "silver")
    assert client["rating"].min_occurs == 0
    assert client["discount"].min_occurs == 0
    assert client["discount"].max_occurs == 1


def test_exclusive_groups_recorded_for_plain_alternatives():
    g = parse_grammar(
        "grammar X { A = B | C; B = b:IDENT; C = \"c\"; }", "x.mcg")
    m = derive_metamodel(link_inheritance([g]))
    groups = m.node_type("A").exclusive_groups
    assert groups == [[["b"], ["c"]]]


def test_no_exclusive_groups_under_repetition(shop):
    assert shop.metamodel.node_type("ShopSystem").exclusive_groups == []


def test_one_type_per_production(shop, shop_inherit, shop_links):
    for component in (shop, shop_inherit, shop_links):
        names = {t.name for t in component.metamodel.node_types} | \
                {i.name for i in component.metamodel.interfaces}
        assert names == set(component.linked.productions)


def test_flattening_soundness(shop, shop_inherit, shop_flags):
    # every reference/constant in a body surfaces as exactly one attribute
    from langweave.grammar import ConstantGroup, element_attr_name, iter_body
    for component in (shop, shop_inherit, shop_flags):
        for name, prod in component.linked.productions.items():
            if prod.body is None or prod.kind.value != "node":
                continue
            expected = {element_attr_name(e)
                        for e in iter_body(prod.body)
                        if isinstance(e, (NonterminalRef, TokenRef,
                                          ConstantGroup))}
            inherited = set()
            if prod.extends_list:
                inherited = set(component.metamodel.all_attributes(
                    prod.extends_list[0]))
            own = {a.name for a in
                   component.metamodel.node_type(name).attributes}
            assert own | inherited >= expected


def test_attribute_subtraction_property(shop_inherit, shop_extended):
    for component in (shop_inherit, shop_extended):
        m = component.metamodel
        for t in m.node_types:
            if t.super_type is None:
                continue
            inherited = m.all_attributes(t.super_type)
            for attr in t.attributes:
                other = inherited.get(attr.name)
                assert other is None or not attr.same_shape(other)


def test_ast_only_inheritance_edges():
    g = parse_grammar(
        "grammar A { Base = v:IDENT; Extra astextends Base = "
        "\"extra\" v:IDENT w:IDENT; }", "a.mcg")
    linked = link_inheritance([g])
    m = derive_metamodel(linked)
    assert m.node_type("Extra").super_type == "Base"
    # the concrete syntax is untouched: Base gets no new alternative
    assert linked.direct_variants("Base") == []
    assert [a.name for a in m.node_type("Extra").attributes] == ["w"]


def test_association_edges_with_default_roles(shop_links):
    m = shop_links.metamodel
    edge = m.associations[0]
    assert edge.name == "ClientOrder"
    assert edge.source == "Client"
    assert edge.target == "Order"
    assert edge.target_role == "orderingClient"
    assert edge.source_role == "order"  # de-capitalized opposite type


def test_association_unknown_endpoint():
    g = parse_grammar(
        "grammar A { X = name:IDENT; association R X 1 <-> * Ghost; }",
        "a.mcg")
    with pytest.raises(SourceError) as exc:
        derive_metamodel(link_inheritance([g]))
    assert any("Ghost" in d.message for d in exc.value.diagnostics)


def test_inheritance_cycle_detected():
    g = parse_grammar(
        "grammar C { A extends B = \"a\"; B extends A = \"b\"; }", "c.mcg")
    with pytest.raises(SourceError) as exc:
        derive_metamodel(link_inheritance([g]))
    assert any("cycle" in d.message for d in exc.value.diagnostics)


# ---------------------------------------------------------------------------
# Occurrence analysis
# ---------------------------------------------------------------------------

def test_occurrence_repeated_via_derivation():
    # A (B | A C)? derives to A A C, so A can occur twice
    body = Sequence([
        NonterminalRef("A"),
        Block(Alternative([NonterminalRef("B"),
                           Sequence([NonterminalRef("A"),
                                     NonterminalRef("C")])]),
              Cardinality.OPTIONAL),
    ])
    assert occurrence_analysis(body, (None, "A")) == (1, 2)


def test_occurrence_constant_separated_list():
    body = Sequence([
        NonterminalRef("X", label="A"),
        Block(Sequence([Terminal(","), NonterminalRef("X", label="A")]),
              Cardinality.STAR),
    ])
    assert occurrence_analysis(body, ("A", "X")) == (1, None)


def test_occurrence_optional_single():
    body = NonterminalRef("B", card=Cardinality.OPTIONAL)
    assert occurrence_analysis(body, (None, "B")) == (0, 1)


def test_occurrence_against_enumeration_oracle():
    rng = Random(2024)
    for _ in range(120):
        body = random_body(rng, depth=3)
        for label, target in {("x", "A"), (None, "A"), (None, "IDENT"),
                              ("y", "NUMBER")}:
            got_min, got_max = occurrence_analysis(body, (label, target))
            want_min, want_max = oracle_occurrence(body, label, target)
            assert got_min == want_min
            assert (got_max is None or got_max > 1) == (want_max > 1)


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

def test_json_report_counts(shop):
    import json
    doc = json.loads(emit_metamodel_report(shop.metamodel, "structured-json"))
    assert len(doc["types"]) == 6
    assert doc["interfaces"] == []


def test_json_report_loss_free(shop_inherit, shop_links):
    for component in (shop_inherit, shop_links):
        text = emit_metamodel_report(component.metamodel, "structured-json")
        again = metamodel_from_json(text)
        assert metamodel_to_dict(again) == metamodel_to_dict(
            component.metamodel)


def test_empty_metamodel_report():
    import json
    g = parse_grammar("grammar E { }", "e.mcg")
    m = derive_metamodel(link_inheritance([g]))
    doc = json.loads(emit_metamodel_report(m, "structured-json"))
    assert doc == {"types": [], "interfaces": [], "associations": []}


def test_dot_report_includes_association_edge(shop_links):
    dot = emit_metamodel_report(shop_links.metamodel, "graph-dot")
    assert 'label="ClientOrder"' in dot
    assert dot.count('label="ClientOrder"') == 1


def test_report_determinism(shop_links):
    first = emit_metamodel_report(shop_links.metamodel, "structured-json")
    second = emit_metamodel_report(shop_links.metamodel, "structured-json")
    assert first == second
