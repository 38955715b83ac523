"""Command-line frontend.

Subcommands:
    check  <grammar.mcg ...>        parse, validate, and analyze decisions
    ebnf   <grammar.mcg ...>        print the expanded EBNF view
    ast    <grammar.mcg ...>        print the derived metamodel (json or dot)
    parse  <config> <model ...>     compose, parse, link, dump AST JSON
    run    <config> <model ...>     run the configured workflow
    eval   <config> <model> --attr  evaluate an attribute on one node

Diagnostics go to standard error as ``file:line:col: severity: message``;
exit status is 0 on success, 1 on diagnostics, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .ast_nodes import resolve_path, to_json
from .attributes import eval_attribute
from .composition import build_component
from .diagnostics import Severity, SourceError
from .grammar import GrammarDef, validate_grammar
from .grammar_parser import parse_grammar
from .linking import link_inheritance
from .metamodel import derive_metamodel, emit_ebnf, emit_metamodel_report
from .parsing import analyze_llk
from .tooling import execute_workflow, load_tool_config, run_workflow


def _print_diagnostics(diags, stream=None) -> None:
    stream = stream or sys.stderr
    for diag in diags:
        print(diag.format(), file=stream)


def _load_grammars(paths: list[str]) -> list[GrammarDef]:
    grammars = []
    for path in paths:
        text = Path(path).read_text(encoding="utf-8")
        grammars.append(parse_grammar(text, path))
    return grammars


def _link_from_files(paths: list[str]):
    """Parse, validate, and link; the last grammar is the most derived one."""
    grammars = _load_grammars(paths)
    diags = []
    for g in grammars:
        diags.extend(validate_grammar(g))
    if any(d.severity is Severity.ERROR for d in diags):
        raise SourceError(diags)
    _print_diagnostics(diags)
    return link_inheritance(grammars, root=grammars[-1])


def _cmd_check(args) -> int:
    linked = _link_from_files(args.grammars)
    table = analyze_llk(linked, args.k)
    _print_diagnostics(table.diagnostics)
    if table.errors:
        return 1
    if args.strict and table.conflicts:
        return 1
    return 0


def _cmd_ebnf(args) -> int:
    linked = _link_from_files(args.grammars)
    sys.stdout.write(emit_ebnf(linked))
    return 0


def _cmd_ast(args) -> int:
    linked = _link_from_files(args.grammars)
    metamodel = derive_metamodel(linked)
    sys.stdout.write(emit_metamodel_report(metamodel, args.format))
    return 0


def _cmd_parse(args) -> int:
    config = load_tool_config(args.config)
    config.execution_units = ["parse", "link"]
    roots, workflow_diags = execute_workflow(config, args.models)
    _print_diagnostics(workflow_diags)
    failed = any(d.severity is Severity.ERROR for d in workflow_diags)
    for root in roots:
        _print_diagnostics(root.diagnostics)
        failed = failed or root.errors
    if failed:
        return 1
    for root in roots:
        if root.ast is not None and args.out == "json":
            sys.stdout.write(to_json(root.ast))
    return 0


def _cmd_run(args) -> int:
    overrides = {}
    if args.dry_run:
        overrides["dryRun"] = True
    if args.strict_links:
        overrides["strictLinks"] = True
    config = load_tool_config(args.config, overrides or None)
    status, report = run_workflow(config, args.models)
    sys.stdout.write(report)
    return status


def _cmd_eval(args) -> int:
    config = load_tool_config(args.config)
    config.execution_units = ["parse", "link"]
    roots, workflow_diags = execute_workflow(config, [args.model])
    diags = workflow_diags + [d for r in roots for d in r.diagnostics]
    _print_diagnostics(diags)
    if any(d.severity is Severity.ERROR for d in diags) or not roots \
            or roots[0].ast is None:
        return 1
    node = resolve_path(roots[0].ast, args.node)
    value = eval_attribute(node, args.attr, config.calculators)
    print(value)
    return 0


def build_arg_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="langweave",
        description="compositional textual-language workbench")
    sub = parser.add_subparsers(dest="command", required=True)

    check = sub.add_parser("check", help="validate grammars and decisions")
    check.add_argument("grammars", nargs="+", metavar="grammar")
    check.add_argument("--k", type=int, default=None,
                       help="lookahead depth (default: grammar option)")
    check.add_argument("--strict", action="store_true",
                       help="treat decision conflicts as errors")
    check.set_defaults(fn=_cmd_check)

    ebnf = sub.add_parser("ebnf", help="emit the expanded EBNF view")
    ebnf.add_argument("grammars", nargs="+", metavar="grammar")
    ebnf.set_defaults(fn=_cmd_ebnf)

    ast = sub.add_parser("ast", help="emit the derived metamodel")
    ast.add_argument("grammars", nargs="+", metavar="grammar")
    ast.add_argument("--format", choices=["json", "dot"], default="json")
    ast.set_defaults(fn=_cmd_ast)

    parse_cmd = sub.add_parser("parse", help="parse models and dump AST JSON")
    parse_cmd.add_argument("config")
    parse_cmd.add_argument("models", nargs="+", metavar="model")
    parse_cmd.add_argument("--out", choices=["json"], default="json")
    parse_cmd.set_defaults(fn=_cmd_parse)

    run = sub.add_parser("run", help="run the configured workflow")
    run.add_argument("config")
    run.add_argument("models", nargs="+", metavar="model")
    run.add_argument("--dry-run", action="store_true")
    run.add_argument("--strict-links", action="store_true")
    run.set_defaults(fn=_cmd_run)

    eval_cmd = sub.add_parser("eval", help="evaluate an attribute on a node")
    eval_cmd.add_argument("config")
    eval_cmd.add_argument("model")
    eval_cmd.add_argument("--attr", required=True)
    eval_cmd.add_argument("--node", default=".",
                          help="path like order[0].address (default: root)")
    eval_cmd.set_defaults(fn=_cmd_eval)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_arg_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        return args.fn(args)
    except SourceError as exc:
        _print_diagnostics(exc.diagnostics)
        return 1
    except (OSError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
