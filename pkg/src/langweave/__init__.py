"""langweave: a compositional textual-language workbench.

One grammar format yields the concrete syntax, a typed abstract-syntax
metamodel, lexers, interpretive LL(k) parsers, post-parse association
linking, visitors, and attribute evaluation.  Grammar inheritance and
language embedding compose independently developed language modules at
configuration time.
"""

from .ast_nodes import (AstNode, check_conformance, from_json, iter_tree,
                        resolve_path, set_parents, structural_equal, to_json)
from .attributes import (AttributeDecl, CalculatorRegistry,
                         VirtualAttributeMap, eval_attribute,
                         parse_virtual_map, register_virtual)
from .composition import (Contract, EmbeddingBinding, LanguageComponent,
                          SelectionRule, bind_embedding, build_component,
                          compose_check, load_composition_config)
from .diagnostics import Diagnostic, Severity, SourceError, SourcePos
from .generate import generate_sentence, unparse
from .grammar import GrammarDef, validate_grammar
from .grammar_parser import parse_grammar, print_grammar
from .lexer import ConverterRegistry, Lexeme, LexerSpec, build_lexer, tokenize
from .linking import LinkedGrammar, link_inheritance
from .links import (LinkReport, ResolverRegistry, SymbolTable, build_symbols,
                    establish_links, navigate)
from .metamodel import (Metamodel, derive_metamodel, emit_ebnf,
                        emit_metamodel_report, metamodel_from_json,
                        occurrence_analysis)
from .parsing import DecisionTable, analyze_llk, parse, parse_text
from .tooling import (RootFactory, RootObject, ToolConfig, load_model,
                      load_tool_config, run_workflow, write_output)
from .visitors import TraversalControl, VisitorSet, VisitorUnit, traverse

__version__ = "0.1.0"
