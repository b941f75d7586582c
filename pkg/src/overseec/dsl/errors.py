"""Error types raised while parsing or validating costmap programs."""

from __future__ import annotations

from ..errors import OverseecError


class DslError(OverseecError):
    """Base class for DSL errors."""


class _Positioned(DslError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{message} (line {line}, col {col})")
        self.line = line
        self.col = col


class LexError(_Positioned):
    """Input contains characters or words outside the DSL's lexicon."""


class DslParseError(_Positioned):
    """Token stream does not match the grammar."""

    def __init__(self, message: str, line: int, col: int, expected: frozenset[str] = frozenset()):
        super().__init__(message, line, col)
        self.expected = expected


class DuplicateBindingError(_Positioned):
    """A mask identifier or class name is bound twice."""


class InvalidCueError(_Positioned):
    """A geometric cue has out-of-range parameters (e.g. negative radius)."""


class DslValidationError(DslError):
    """Base class for semantic validation failures."""


class UnresolvedIdentError(DslValidationError):
    """A mask identifier is used before (or without) being bound."""


class InvalidWeightError(DslValidationError):
    """A cost weight is negative or non-finite."""


class TypeMismatchError(DslValidationError):
    """A graded (soft) mask was fed to an operator that needs a binary mask."""
