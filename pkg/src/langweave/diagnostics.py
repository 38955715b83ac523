"""Positions, diagnostics, and the error channel shared by all stages."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field


@dataclass(frozen=True)
class SourcePos:
    """A 1-based line/column position inside a source file."""

    file: str
    line: int
    column: int

    def __str__(self) -> str:
        return f"{self.file}:{self.line}:{self.column}"


class Severity(enum.Enum):
    ERROR = "error"
    WARNING = "warning"
    INFO = "info"


@dataclass(frozen=True)
class Diagnostic:
    """One reportable finding, formatted as ``file:line:col: severity: message``."""

    severity: Severity
    message: str
    pos: SourcePos | None = None

    def format(self) -> str:
        if self.pos is None:
            return f"{self.severity.value}: {self.message}"
        return f"{self.pos}: {self.severity.value}: {self.message}"

    def __str__(self) -> str:
        return self.format()


def error(message: str, pos: SourcePos | None = None) -> Diagnostic:
    return Diagnostic(Severity.ERROR, message, pos)


def warning(message: str, pos: SourcePos | None = None) -> Diagnostic:
    return Diagnostic(Severity.WARNING, message, pos)


def has_errors(diagnostics) -> bool:
    return any(d.severity is Severity.ERROR for d in diagnostics)


class SourceError(Exception):
    """Raised by operations whose contract is "result or diagnostics".

    Carries the full diagnostic list; the message is the first entry.
    """

    def __init__(self, diagnostics):
        if isinstance(diagnostics, Diagnostic):
            diagnostics = [diagnostics]
        self.diagnostics: list[Diagnostic] = list(diagnostics)
        super().__init__(self.diagnostics[0].format() if self.diagnostics else "error")

    def format_all(self) -> str:
        return "\n".join(d.format() for d in self.diagnostics)


@dataclass
class DiagnosticSink:
    """Accumulates diagnostics across pipeline steps."""

    items: list[Diagnostic] = field(default_factory=list)

    def add(self, diag: Diagnostic) -> None:
        self.items.append(diag)

    def extend(self, diags) -> None:
        self.items.extend(diags)

    def error(self, message: str, pos: SourcePos | None = None) -> None:
        self.add(error(message, pos))

    def warning(self, message: str, pos: SourcePos | None = None) -> None:
        self.add(warning(message, pos))

    @property
    def errors(self) -> list[Diagnostic]:
        return [d for d in self.items if d.severity is Severity.ERROR]

    def raise_if_errors(self) -> None:
        if self.errors:
            raise SourceError(self.items)
