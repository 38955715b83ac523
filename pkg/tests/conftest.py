"""Shared fixture grammars and calculators for the test suite."""

from __future__ import annotations

import pytest

from langweave import (CalculatorRegistry, Contract, ConverterRegistry,
                       EmbeddingBinding, SelectionRule, bind_embedding,
                       build_component)

# A flat shop language: repetition, alternatives inside blocks, default and
# explicit token classes.
SHOP_GRAMMAR = """
package shop;

grammar ShopLang {
  options { compileunit ShopSystem; }

  token NUMBER = ('0'..'9')+ : int;

  ShopSystem =
    name:IDENT (Client | PremiumClient)* (OrderCreditcard | OrderCash)*;

  Client = "client" name:IDENT Address;

  PremiumClient = "premiumclient" name:IDENT discount:NUMBER Address;

  OrderCreditcard = "creditorder" clientName:IDENT billingID:NUMBER;

  OrderCash = "cashorder" clientName:IDENT amount:NUMBER;

  Address = street:STRING town:STRING;
}
"""

# The same language remodeled with nonterminal inheritance, an interface
# nonterminal, and an abstract-syntax-only augmentation.
SHOP_INHERIT_GRAMMAR = """
package shop;

grammar ShopInheritLang {
  options { compileunit ShopSystem; }

  token NUMBER = ('0'..'9')+ : int;

  ShopSystem = Name:IDENT Client* Order*;

  OrderCreditcard implements Order =
    "creditorder" ClientName:IDENT BillingID:NUMBER;

  OrderCash implements Order =
    "cashorder" ClientName:IDENT Amount:NUMBER;

  Client = "client" Name:IDENT Address;

  PremiumClient extends Client =
    "premiumclient" Name:IDENT Discount:NUMBER;

  Address = Street:STRING Town:STRING;

  interface Order;

  ast Order = ClientName:IDENT;
}
"""

# Adds an association resolved by name after parsing, plus a synthesized
# attribute declaration.
SHOP_LINKS_GRAMMAR = """
package shop;

grammar ShopAttrLang {
  options { compileunit ShopSystem; }

  token NUMBER = ('0'..'9')+ : int;

  ShopSystem = name:IDENT Client* Order*;

  Client = "client" name:IDENT;

  PremiumClient extends Client = "premiumclient" name:IDENT discount:NUMBER;

  OrderCreditcard implements Order = "creditorder" clientName:IDENT amount:NUMBER;

  OrderCash implements Order = "cashorder" clientName:IDENT amount:NUMBER;

  interface Order;

  association ClientOrder Client 1 <-> * Order.orderingClient;

  syn outstanding : /float;
}
"""

# Bracketed constants: a boolean flag and an enumeration attribute.
SHOP_FLAGS_GRAMMAR = """
package shop;

grammar ShopFlagsLang {
  token NUMBER = ('0'..'9')+ : int;

  ShopSystem = name:IDENT Client*;

  Client =
    ("client" | premium:["premiumclient"]) name:IDENT (discount:NUMBER)?
    rating:["gold" | "silver"]?;
}
"""

# Host with external nonterminals for language embedding.
EMBED_HOST_GRAMMAR = """
package shop;

grammar ShopEmbedLang {
  options { compileunit ShopSystem; }

  token NUMBER = ('0'..'9')+ : int;

  ShopSystem = name:IDENT Client* Order*;

  Client = "client" name:IDENT;

  interface Order;

  OrderCash implements Order =
    "cashorder" clientName:IDENT lang:IDENT statement:StatementCash;

  OrderCreditcard implements Order =
    "creditorder" clientName:IDENT statement:StatementCredit;

  external StatementCash /shop.IStatementCash;

  external StatementCredit;
}
"""

PAY_GRAMMAR = """
package mini;

grammar PayLang {
  token NUMBER = ('0'..'9')+ : int;

  StmtPay = "pay" amount:NUMBER ("tip" tip:NUMBER)?;
}
"""

NOTE_GRAMMAR = """
package mini;

grammar NoteLang {
  StmtNote = "note" text:STRING;
}
"""

# Two independent mini languages plus a grammar inheriting from both; the
# subgrammar overrides a production to add an interface from the other super.
EXPR_GRAMMAR = """
package mini;

grammar ExprLang {
  token NUMBER = ('0'..'9')+ : int;

  Program = "eval" Expression;

  interface Expression;

  Literal implements Expression = value:NUMBER;

  Sum implements Expression = "add" left:Expression right:Expression;
}
"""

QUERY_GRAMMAR = """
package mini;

grammar QueryLang {
  QuerySelect = "select" column:IDENT "from" table:IDENT;
}
"""

EXPR_QUERY_GRAMMAR = """
package mini;

grammar ExprQueryLang extends mini.ExprLang, mini.QueryLang {
  QuerySelect implements Expression;
}
"""

# Pure extension of the inheritance shop language (conservativity checks).
SHOP_EXTENDED_GRAMMAR = """
package shop;

grammar ShopExtendedLang extends shop.ShopInheritLang {
  VipClient extends Client = "vipclient" Name:IDENT Discount:NUMBER;

  OrderVoucher implements Order = "voucherorder" ClientName:IDENT Code:IDENT;
}
"""

# A second attributed language, used to combine attributes across grammars.
STATS_GRAMMAR = """
package mini;

grammar StatsLang {
  token NUMBER = ('0'..'9')+ : int;

  Tally = "tally" name:IDENT Entry*;

  Entry = "entry" amount:NUMBER;

  syn sum : /float;
}
"""

VIRTUAL_MAP_TEXT = """
// combine the two per-language attributes under one name
Unpaid {
  shop.ShopAttrLang.outstanding = /shop.OutstandingCalc;
  mini.StatsLang.sum = /mini.SumCalc;
}
"""


@pytest.fixture(scope="session")
def shop():
    return build_component([(SHOP_GRAMMAR, "shop.mcg")], name="shop")


@pytest.fixture(scope="session")
def shop_inherit():
    return build_component([(SHOP_INHERIT_GRAMMAR, "shop_inherit.mcg")],
                           name="shop_inherit")


@pytest.fixture(scope="session")
def shop_links():
    return build_component([(SHOP_LINKS_GRAMMAR, "shop_links.mcg")],
                           name="shop_links")


@pytest.fixture(scope="session")
def shop_flags():
    return build_component([(SHOP_FLAGS_GRAMMAR, "shop_flags.mcg")],
                           name="shop_flags")


@pytest.fixture(scope="session")
def shop_extended():
    return build_component(
        [(SHOP_INHERIT_GRAMMAR, "shop_inherit.mcg"),
         (SHOP_EXTENDED_GRAMMAR, "shop_extended.mcg")],
        name="shop_extended", root="shop.ShopExtendedLang")


@pytest.fixture(scope="session")
def pay_component():
    return build_component([(PAY_GRAMMAR, "pay.mcg")], name="pay",
                           start_rules={"StmtPay"})


@pytest.fixture(scope="session")
def note_component():
    return build_component([(NOTE_GRAMMAR, "note.mcg")], name="note",
                           start_rules={"StmtNote"})


@pytest.fixture(scope="session")
def embed_host():
    return build_component([(EMBED_HOST_GRAMMAR, "embed_host.mcg")],
                           name="shop_embed")


@pytest.fixture()
def composed_shop(embed_host, pay_component, note_component):
    return bind_embedding(embed_host, [
        EmbeddingBinding(
            external_nt="StatementCash",
            candidates=[(pay_component, "StmtPay"),
                        (note_component, "StmtNote")],
            selection=SelectionRule.by_attribute("lang", {"Pay": 0},
                                                 default=1),
            required_contract=Contract("shop.IStatementCash", ["amount"]),
        ),
        EmbeddingBinding(
            external_nt="StatementCredit",
            candidates=[(note_component, "StmtNote")],
            selection=SelectionRule.fixed(0),
        ),
    ])


@pytest.fixture(scope="session")
def stats_component():
    return build_component([(STATS_GRAMMAR, "stats.mcg")], name="stats",
                           start_rules={"Tally"})


def make_cardinality_converters() -> ConverterRegistry:
    registry = ConverterRegistry()
    registry.register("cardinality",
                      lambda raw: -1 if raw == "*" else int(raw))
    return registry


def register_shop_calculators(registry: CalculatorRegistry) -> None:
    """Outstanding-amount calculation for the attributed shop language."""

    def order_outstanding(node, ctx):
        clients = node.links.get("orderingClient", [])
        discount = clients[0].attrs.get("discount", 0) if clients else 0
        return float(node.attrs["amount"]) * (1 - discount / 100)

    def shop_outstanding(node, ctx):
        return float(sum(ctx.eval(order, "outstanding")
                         for order in node.attrs.get("order", [])))

    registry.register("shop.OutstandingCalc", "OrderCash", order_outstanding)
    registry.register("shop.OutstandingCalc", "OrderCreditcard",
                      order_outstanding)
    registry.register("shop.OutstandingCalc", "ShopSystem", shop_outstanding)
    registry.bind_attribute("shop.ShopAttrLang", "outstanding",
                            "shop.OutstandingCalc")


def register_stats_calculators(registry: CalculatorRegistry) -> None:
    registry.register("mini.SumCalc", "Entry",
                      lambda node, ctx: float(node.attrs["amount"]))
    registry.register(
        "mini.SumCalc", "Tally",
        lambda node, ctx: float(sum(ctx.eval(e, "sum")
                                    for e in node.attrs.get("entry", []))))
    registry.bind_attribute("mini.StatsLang", "sum", "mini.SumCalc")


@pytest.fixture()
def shop_calculators(shop_links):
    registry = CalculatorRegistry()
    for decl in shop_links.linked.attribute_decls:
        registry.declare(decl.owning_grammar, decl)
    register_shop_calculators(registry)
    return registry
