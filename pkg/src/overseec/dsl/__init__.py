"""Costmap program DSL: parsing, validation, formatting, and evaluation.

The DSL is the executable artifact the language backend emits: class
declarations, named mask expressions over predefined operators, subset
hierarchies, and weighted cost rules. See `parser.GRAMMAR` for the surface
syntax.
"""

from .ast import (
    And,
    ClassDecl,
    ClassRef,
    CostProgram,
    CostRule,
    Cue,
    Ident,
    MaskBinding,
    MaskExpr,
    Not,
    Or,
    Remove,
)
from .errors import (
    DslError,
    DslParseError,
    DslValidationError,
    DuplicateBindingError,
    InvalidCueError,
    InvalidWeightError,
    LexError,
    TypeMismatchError,
    UnresolvedIdentError,
)
from .evaluate import EvalInputs, evaluate, validate
from .parser import format_program, parse

__all__ = [
    "And",
    "ClassDecl",
    "ClassRef",
    "CostProgram",
    "CostRule",
    "Cue",
    "DslError",
    "DslParseError",
    "DslValidationError",
    "DuplicateBindingError",
    "EvalInputs",
    "Ident",
    "InvalidCueError",
    "InvalidWeightError",
    "LexError",
    "MaskBinding",
    "MaskExpr",
    "Not",
    "Or",
    "Remove",
    "TypeMismatchError",
    "UnresolvedIdentError",
    "evaluate",
    "format_program",
    "parse",
    "validate",
]
