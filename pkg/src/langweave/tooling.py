"""The workflow runtime: root objects, execution units, model loading, output.

A tool run routes each input file through a root factory (dispatching on the
file extension or the first keyword), then applies the configured execution
units in order.  Units are stateless callbacks registered under string keys;
everything they compute lands on the root object as write-once annotations
or diagnostics.  Built-ins cover parsing, symbol linking, constraint
checking, attribute evaluation, and pretty-printing; projects add their own
units through plugins.

Model files of packaged languages (``compileunit`` option) start with::

    package shop.EU;
    import shop.EU.Other;

and must live in a directory matching the package; the top node's ``name``
attribute must match the file name.
"""

from __future__ import annotations

import importlib
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

from .ast_nodes import AstNode, check_conformance
from .attributes import CalculatorRegistry, eval_attribute
from .composition import LanguageComponent, load_composition_config
from .diagnostics import (Diagnostic, DiagnosticSink, Severity, SourceError,
                          SourcePos, error, warning)
from .generate import unparse
from .lexer import ConverterRegistry
from .links import ResolverRegistry, build_symbols, establish_links
from .parsing import parse_text


@dataclass
class RootObject:
    """Per-input unit of work: the AST plus everything units computed."""

    source_file: str
    component: LanguageComponent | None = None
    start_rule: str | None = None
    text: str = ""
    ast: AstNode | None = None
    package: str | None = None
    imports: list[str] = field(default_factory=list)
    annotations: dict[str, Any] = field(default_factory=dict)
    diagnostics: list[Diagnostic] = field(default_factory=list)

    def annotate(self, key: str, value: Any) -> None:
        if key in self.annotations:
            raise SourceError(error(
                f"annotation '{key}' already written for {self.source_file}"))
        self.annotations[key] = value

    @property
    def errors(self) -> list[Diagnostic]:
        return [d for d in self.diagnostics if d.severity is Severity.ERROR]


@dataclass
class RootFactory:
    """Routes an input to (component, start rule) by extension or keyword."""

    by_extension: dict[str, tuple[str, str | None]] = field(default_factory=dict)
    by_first_keyword: dict[str, tuple[str, str | None]] = field(default_factory=dict)
    default: tuple[str, str | None] | None = None

    def route(self, path: str, text: str) -> tuple[str, str | None] | None:
        ext = Path(path).suffix
        if ext in self.by_extension:
            return self.by_extension[ext]
        if self.by_first_keyword:
            keyword = _first_keyword(text)
            if keyword is not None and keyword in self.by_first_keyword:
                return self.by_first_keyword[keyword]
        return self.default

    def known_extensions(self) -> list[str]:
        return sorted(self.by_extension)


_COMMENT_RE = re.compile(r"//[^\n]*|/\*.*?\*/", re.S)
_WORD_RE = re.compile(r"[A-Za-z_]\w*")


def _first_keyword(text: str) -> str | None:
    stripped = _COMMENT_RE.sub(" ", text)
    match = _WORD_RE.search(stripped)
    if match is None:
        return None
    word = match.group(0)
    if word == "package":  # skip the packaging header
        rest = stripped[match.end():]
        semicolon = rest.find(";")
        while True:
            match = _WORD_RE.search(rest, semicolon + 1)
            if match is None:
                return None
            if match.group(0) == "import":
                semicolon = rest.find(";", match.end())
                continue
            return match.group(0)
    return word


UnitFn = Callable[[RootObject, "ToolConfig"], None]
SetUnitFn = Callable[[list[RootObject], "ToolConfig"], None]


@dataclass
class ExecutionUnit:
    key: str
    fn: Callable
    whole_set: bool = False


@dataclass
class ToolConfig:
    """Everything one tool run needs; write-once at configuration time."""

    components: dict[str, LanguageComponent] = field(default_factory=dict)
    factory: RootFactory = field(default_factory=RootFactory)
    execution_units: list[str] = field(default_factory=list)
    model_path: list[Path] = field(default_factory=list)
    output_root: Path | None = None
    dry_run: bool = False
    strict_links: bool = False
    symbol_scheme: str = "flat"
    eval_attrs: list[str] = field(default_factory=list)
    converters: ConverterRegistry = field(default_factory=ConverterRegistry)
    calculators: CalculatorRegistry = field(default_factory=CalculatorRegistry)
    resolvers: ResolverRegistry = field(default_factory=ResolverRegistry)
    units: dict[str, ExecutionUnit] = field(default_factory=dict)
    model_cache: dict[str, RootObject] = field(default_factory=dict)
    _loading: set = field(default_factory=set)

    def register_unit(self, key: str, fn: Callable, whole_set: bool = False) -> None:
        self.units[key] = ExecutionUnit(key, fn, whole_set)

    def component_of(self, root: RootObject) -> LanguageComponent:
        if root.component is None:
            raise SourceError(error(f"no component routed for "
                                    f"{root.source_file}"))
        return root.component


# ---------------------------------------------------------------------------
# Packaged model headers
# ---------------------------------------------------------------------------

_PACKAGE_RE = re.compile(r"package\s+([\w.]+)\s*;")
_IMPORT_RE = re.compile(r"import\s+([\w.]+)\s*;")


def split_model_header(text: str) -> tuple[str | None, list[str], str]:
    """(package, imports, body text with the header blanked out).

    Blanking keeps every character position, so diagnostics still point into
    the original file.
    """
    stripped = _COMMENT_RE.sub(lambda m: " " * len(m.group(0)), text)
    package = None
    imports: list[str] = []
    end = 0
    match = _PACKAGE_RE.match(stripped, _skip_ws(stripped, 0))
    if match:
        package = match.group(1)
        end = match.end()
        while True:
            match = _IMPORT_RE.match(stripped, _skip_ws(stripped, end))
            if not match:
                break
            imports.append(match.group(1))
            end = match.end()
    blanked = "".join(
        ch if ch == "\n" else " " for ch in text[:end]) + text[end:]
    return package, imports, blanked


def _skip_ws(text: str, pos: int) -> int:
    while pos < len(text) and text[pos] in " \t\r\n":
        pos += 1
    return pos


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def write_output(path: str | Path, content: str | bytes,
                 config: ToolConfig) -> bool:
    """Write a generated file under the output root, but never redundantly.

    Returns True only when the file system actually changed; identical
    content is left untouched (the non-recurring write contract) and dry
    runs never touch disk at all.

    Raises:
        SourceError: no output root, path escaping it, or I/O failure.
    """
    if config.output_root is None:
        raise SourceError(error("no outputRoot configured"))
    root = config.output_root.resolve()
    target = Path(path)
    if not target.is_absolute():
        target = root / target
    target = target.resolve()
    if not target.is_relative_to(root):
        raise SourceError(error(
            f"output path {path} escapes the output root {root}"))
    data = content if isinstance(content, bytes) else content.encode("utf-8")
    if config.dry_run:
        return False
    try:
        if target.exists() and target.read_bytes() == data:
            return False
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_bytes(data)
        return True
    except OSError as exc:
        raise SourceError(error(f"cannot write {target}: {exc}"))


def load_model(qualified_name: str, config: ToolConfig) -> RootObject:
    """Load (and parse) a model by qualified name from the model path.

    ``shop.EU.Main`` must live at ``<modelPath>/shop/EU/Main.<ext>``, declare
    ``package shop.EU;``, and carry ``Main`` as its top-level name.  Imports
    are loaded transitively; loaded roots are cached per run.

    Raises:
        SourceError: file not found, package/directory mismatch, name/file
            mismatch, or import cycles.
    """
    if qualified_name in config.model_cache:
        return config.model_cache[qualified_name]
    if qualified_name in config._loading:
        raise SourceError(error(
            f"import cycle through model '{qualified_name}'"))
    parts = qualified_name.split(".")
    package_parts, name = parts[:-1], parts[-1]
    candidates = []
    for base in config.model_path:
        for ext in config.factory.known_extensions():
            candidates.append(Path(base, *package_parts, name + ext))
    found = next((c for c in candidates if c.is_file()), None)
    if found is None:
        raise SourceError(error(
            f"model '{qualified_name}' not found on the model path "
            f"(searched {len(candidates)} location(s))"))
    config._loading.add(qualified_name)
    try:
        root = _load_model_file(found, qualified_name, package_parts, name,
                                config)
    finally:
        config._loading.discard(qualified_name)
    config.model_cache[qualified_name] = root
    return root


def _load_model_file(path: Path, qualified_name: str,
                     package_parts: list[str], name: str,
                     config: ToolConfig) -> RootObject:
    text = path.read_text(encoding="utf-8")
    routed = config.factory.route(str(path), text)
    if routed is None:
        raise SourceError(error(f"no component routes {path}"))
    component = config.components[routed[0]]
    if component.linked.options.compile_unit_start is None:
        raise SourceError(error(
            f"component '{component.name}' has no compileunit option; "
            f"'{qualified_name}' cannot be loaded by qualified name"))
    package, imports, body = split_model_header(text)
    expected_package = ".".join(package_parts)
    if (package or "") != expected_package:
        raise SourceError(error(
            f"package declaration '{package or ''}' of {path} does not match "
            f"its directory '{expected_package}'", SourcePos(str(path), 1, 1)))
    ast = parse_text(component, body, routed[1], file=str(path))
    top_name = ast.attrs.get("name")
    if top_name != name:
        raise SourceError(error(
            f"model name '{top_name}' does not match file name '{name}'",
            ast.pos))
    root = RootObject(source_file=str(path), component=component,
                      start_rule=routed[1], text=text, ast=ast,
                      package=package, imports=imports)
    for imported in imports:
        load_model(imported, config)
    return root


def execute_workflow(config: ToolConfig, inputs: list[str | Path]
                     ) -> tuple[list[RootObject], list[Diagnostic]]:
    """Route the inputs and apply the configured units; returns the root
    objects plus workflow-level diagnostics."""
    sink = DiagnosticSink()
    for key in config.execution_units:
        if key not in config.units:
            sink.error(f"unknown execution unit '{key}'")
    roots: list[RootObject] = []
    if sink.errors:
        return roots, sink.items
    for path in inputs:
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            sink.error(f"cannot read {path}: {exc}")
            continue
        routed = config.factory.route(str(path), text)
        if routed is None:
            sink.error(f"no component routes {path}")
            continue
        component_name, start = routed
        if component_name not in config.components:
            sink.error(f"{path} routed to unknown component "
                       f"'{component_name}'")
            continue
        roots.append(RootObject(
            source_file=str(path),
            component=config.components[component_name],
            start_rule=start, text=text))
    for key in config.execution_units:
        unit = config.units[key]
        if unit.whole_set:
            try:
                unit.fn(roots, config)
            except SourceError as exc:
                sink.extend(exc.diagnostics)
        else:
            for root in roots:
                try:
                    unit.fn(root, config)
                except SourceError as exc:
                    root.diagnostics.extend(exc.diagnostics)
    return roots, sink.items


def run_workflow(config: ToolConfig, inputs: list[str | Path]
                 ) -> tuple[int, str]:
    """Route the inputs, apply the configured units in order, report.

    Exit status 0 means no error-severity diagnostics anywhere.
    """
    roots, workflow_diags = execute_workflow(config, inputs)
    lines: list[str] = [d.format() for d in workflow_diags]
    for root in roots:
        lines.extend(d.format() for d in root.diagnostics)
    all_diags = workflow_diags + [d for r in roots for d in r.diagnostics]
    error_count = sum(1 for d in all_diags if d.severity is Severity.ERROR)
    warning_count = sum(1 for d in all_diags if d.severity is Severity.WARNING)
    lines.append(f"{len(roots)} file(s) processed, {error_count} error(s), "
                 f"{warning_count} warning(s)")
    return (0 if error_count == 0 else 1), "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Built-in execution units
# ---------------------------------------------------------------------------

def _unit_parse(root: RootObject, config: ToolConfig) -> None:
    component = config.component_of(root)
    body = root.text
    if component.linked.options.compile_unit_start is not None:
        root.package, root.imports, body = split_model_header(root.text)
    root.ast = parse_text(component, body, root.start_rule,
                          file=root.source_file)
    for imported in root.imports:
        try:
            load_model(imported, config)
        except SourceError as exc:
            root.diagnostics.extend(exc.diagnostics)


def _unit_link(roots: list[RootObject], config: ToolConfig) -> None:
    parsed = [r for r in roots if r.ast is not None]
    extra = [r for r in config.model_cache.values() if r.ast is not None]
    asts = [r.ast for r in parsed + extra]
    if not asts:
        return
    table = build_symbols(asts, scheme=config.symbol_scheme)
    severity_fixup = (lambda d: d) if config.strict_links else (
        lambda d: Diagnostic(Severity.WARNING, d.message, d.pos))
    for root in parsed:
        root.diagnostics.extend(severity_fixup(d) for d in table.diagnostics
                                if d.pos and d.pos.file == root.source_file)
    for root in parsed:
        component = config.component_of(root)
        meta = component.effective_metamodel()
        report = establish_links([root.ast], meta, table, config.resolvers)
        root.annotate("linkReport", report)
        for assoc, node, message, pos in report.errors:
            diag = error(f"association {assoc}: {message}", pos)
            if not config.strict_links:
                diag = Diagnostic(Severity.WARNING, diag.message, diag.pos)
            root.diagnostics.append(diag)


def _unit_check_constraints(root: RootObject, config: ToolConfig) -> None:
    if root.ast is None:
        return
    component = config.component_of(root)
    diags = check_conformance(root.ast, component.effective_metamodel(),
                              component.allowed_external_types())
    root.diagnostics.extend(diags)


def _unit_eval_attrs(root: RootObject, config: ToolConfig) -> None:
    if root.ast is None:
        return
    for attr in config.eval_attrs:
        value = eval_attribute(root.ast, attr, config.calculators)
        root.annotate(f"attr:{attr}", value)


def _unit_pretty_print(root: RootObject, config: ToolConfig) -> None:
    if root.ast is None:
        return
    component = config.component_of(root)
    text = unparse(root.ast, component) + "\n"
    root.annotate("pretty", text)
    if config.output_root is not None:
        write_output(Path(root.source_file).name, text, config)


BUILTIN_UNITS: list[ExecutionUnit] = [
    ExecutionUnit("parse", _unit_parse),
    ExecutionUnit("link", _unit_link, whole_set=True),
    ExecutionUnit("check-constraints", _unit_check_constraints),
    ExecutionUnit("eval-attrs", _unit_eval_attrs),
    ExecutionUnit("pretty-print", _unit_pretty_print),
]


# ---------------------------------------------------------------------------
# Configuration loading
# ---------------------------------------------------------------------------

def load_tool_config(config_path: str | Path,
                     overrides: dict | None = None) -> ToolConfig:
    """Assemble a ToolConfig from a composition/tool JSON document.

    Plugins named under ``tool.plugins`` are imported first and may register
    converters, calculators, resolvers, and execution units through their
    ``register(config)`` hook; grammar components are built afterwards so
    custom token converters are available.
    """
    import json
    path = Path(config_path)
    data = json.loads(path.read_text(encoding="utf-8"))
    if overrides:
        data.setdefault("tool", {}).update(overrides)
    tool = data.get("tool", {})
    base = path.parent

    config = ToolConfig()
    for unit in BUILTIN_UNITS:
        config.units[unit.key] = unit
    for plugin_dir in tool.get("pluginPath", []):
        sys.path.insert(0, str(base / plugin_dir))
    for module_name in tool.get("plugins", []):
        module = importlib.import_module(module_name)
        register = getattr(module, "register", None)
        if register is None:
            raise SourceError(error(
                f"plugin '{module_name}' has no register(config) hook"))
        register(config)

    components, _ = load_composition_config(data, base, config.converters)
    config.components = components

    factory_data = tool.get("factory", {})
    factory = RootFactory()
    for ext, entry in factory_data.get("byExtension", {}).items():
        factory.by_extension[ext] = (entry["component"], entry.get("start"))
    for keyword, entry in factory_data.get("byFirstKeyword", {}).items():
        factory.by_first_keyword[keyword] = (entry["component"],
                                             entry.get("start"))
    if "default" in factory_data:
        entry = factory_data["default"]
        factory.default = (entry["component"], entry.get("start"))
    if not factory_data and len(components) == 1:
        only = next(iter(components))
        factory.default = (only, None)
    config.factory = factory

    config.execution_units = list(tool.get("units", ["parse"]))
    config.model_path = [base / p for p in tool.get("modelPath", [])]
    if "outputRoot" in tool:
        config.output_root = base / tool["outputRoot"]
    config.dry_run = bool(tool.get("dryRun", False))
    config.strict_links = bool(tool.get("strictLinks", False))
    config.symbol_scheme = tool.get("symbolScheme", "flat")
    config.eval_attrs = list(tool.get("evalAttrs", []))

    for component in components.values():
        for decl in component.linked.attribute_decls:
            config.calculators.declare(decl.owning_grammar, decl)
    return config
