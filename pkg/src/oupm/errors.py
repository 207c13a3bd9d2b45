"""Exception types shared across the package."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Diagnostic:
    line: int
    col: int
    message: str
    severity: str = "error"

    def format(self, filename: str = "<input>") -> str:
        return f"{filename}:{self.line}:{self.col}: {self.severity}: {self.message}"


class ModelError(Exception):
    """A model failed to parse or validate.  Carries every diagnostic found."""

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        first = self.diagnostics[0] if self.diagnostics else None
        super().__init__(first.format() if first else "invalid model")


class ParseError(ModelError):
    def __init__(self, message: str, line: int, col: int, expected=()):
        self.line = line
        self.col = col
        self.expected = frozenset(expected)
        text = message
        if self.expected:
            text += "; expected one of: " + ", ".join(sorted(self.expected))
        super().__init__([Diagnostic(line, col, text)])


class ModelRuntimeError(Exception):
    """Evaluation hit something validation could not rule out (bad parameter, cycle)."""


class ContractViolation(Exception):
    """An operation was called outside its precondition."""


class InitializationError(Exception):
    def __init__(self, attempts: int, reason: str = "no feasible world found"):
        self.attempts = attempts
        super().__init__(f"initialization failed after {attempts} attempts: {reason}")


class OracleLimitation(Exception):
    """The enumeration oracle cannot handle this model (e.g. unclamped continuous variables)."""
