"""Diagnostics shared by every compiler stage."""
from __future__ import annotations

import os
import sys
from dataclasses import dataclass, field


@dataclass(frozen=True)
class Loc:
    line: int = 0
    col: int = 0
    file: str = "<input>"

    def __str__(self):
        return f"{self.file}:{self.line}:{self.col}"


NOWHERE = Loc()


@dataclass
class Diagnostic:
    severity: str  # error | warning | note
    message: str
    loc: Loc = NOWHERE

    def format(self, color: bool = False) -> str:
        sev = self.severity
        if color:
            code = {"error": "31", "warning": "33", "note": "36"}.get(sev, "0")
            sev = f"\x1b[1;{code}m{sev}\x1b[0m"
        return f"{self.loc}: {sev}: {self.message}"


class CompileError(Exception):
    """Raised when a stage produces at least one error diagnostic."""

    def __init__(self, diagnostics):
        if isinstance(diagnostics, Diagnostic):
            diagnostics = [diagnostics]
        self.diagnostics = list(diagnostics)
        super().__init__("\n".join(d.format() for d in self.diagnostics))


class InternalError(Exception):
    """Compiler invariant violated; indicates a bug, not a user error."""


def error(message, loc=NOWHERE):
    return CompileError(Diagnostic("error", message, loc))


@dataclass
class DiagnosticSink:
    items: list = field(default_factory=list)

    def error(self, message, loc=NOWHERE):
        self.items.append(Diagnostic("error", message, loc))

    def warning(self, message, loc=NOWHERE):
        self.items.append(Diagnostic("warning", message, loc))

    def note(self, message, loc=NOWHERE):
        self.items.append(Diagnostic("note", message, loc))

    @property
    def errors(self):
        return [d for d in self.items if d.severity == "error"]

    def check(self):
        if self.errors:
            raise CompileError(self.items)


def use_color(stream=sys.stderr) -> bool:
    flag = os.environ.get("HLS_COLOR", "auto").lower()
    if flag in ("1", "yes", "on", "always", "true"):
        return True
    if flag in ("0", "no", "off", "never", "false"):
        return False
    return hasattr(stream, "isatty") and stream.isatty()
