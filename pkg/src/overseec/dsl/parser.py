"""Tokenizer, recursive-descent parser, and formatter for the costmap DSL.

Surface grammar::

    program  := stmt+
    stmt     := classdecl | maskdecl | hierdecl | costdecl
    classdecl:= "class" STRING ("linear"|"areal") ";"
    maskdecl := "mask" IDENT "=" expr ";"
    hierdecl := "hierarchy" STRING "subset_of" STRING ";"
    costdecl := "cost" target ":" NUMBER ";"
    target   := IDENT | "M(" STRING ")"
    expr     := "M(" STRING ")" | IDENT
              | "AND(" expr "," expr ")" | "OR(" expr "," expr ")"
              | "NOT(" expr ")"          | "REMOVE(" expr "," expr ")"
              | "NEAR(" expr "," NUMBER ")" | "DILATE(" expr "," NUMBER ")"
              | "ERODE(" expr "," NUMBER ")" | "CENTER(" expr ")"
              | "EDGE(" expr "," NUMBER ")"

`#` starts a comment running to end of line. STRING is double-quoted UTF-8
with no escape sequences (a string may not contain `"` or a newline).
NUMBER is signed decimal. IDENT matches ``[a-z_][a-z0-9_]*``; the words
class, mask, hierarchy, subset_of, cost, linear, and areal are reserved.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from ..errors import HierarchyCycleError
from ..maskops import CueKind, GeometricCue, HierarchyEdge
from ..raster import Geometry
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
from .errors import DslParseError, DuplicateBindingError, InvalidCueError, LexError

KEYWORDS = {"class", "mask", "hierarchy", "subset_of", "cost", "linear", "areal"}
OPERATORS = {"M", "AND", "OR", "NOT", "REMOVE", "NEAR", "DILATE", "ERODE", "CENTER", "EDGE"}
PUNCT = set("(),:;=")

_IDENT_RE = re.compile(r"[a-z_][a-z0-9_]*\Z")
_WORD_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_NUMBER_RE = re.compile(r"-?\d+(?:\.\d+)?")


@dataclass(frozen=True)
class Token:
    kind: str  # keyword/operator literal, punct char, or IDENT/STRING/NUMBER/EOF
    value: object
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    i, line, col = 0, 1, 1
    n = len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            i, line, col = i + 1, line + 1, 1
        elif c in " \t\r":
            i, col = i + 1, col + 1
        elif c == "#":
            while i < n and text[i] != "\n":
                i += 1
        elif c == '"':
            end = i + 1
            while end < n and text[end] not in '"\n':
                end += 1
            if end >= n or text[end] != '"':
                raise LexError("unterminated string", line, col)
            tokens.append(Token("STRING", text[i + 1 : end], line, col))
            col += end + 1 - i
            i = end + 1
        elif c.isdigit() or (c == "-" and i + 1 < n and text[i + 1].isdigit()):
            m = _NUMBER_RE.match(text, i)
            tokens.append(Token("NUMBER", float(m.group()), line, col))
            col += m.end() - i
            i = m.end()
        elif c.isalpha() or c == "_":
            m = _WORD_RE.match(text, i)
            word = m.group()
            if word in KEYWORDS or word in OPERATORS:
                kind = word
            elif _IDENT_RE.match(word):
                kind = "IDENT"
            else:
                raise LexError(f"unknown word {word!r}", line, col)
            tokens.append(Token(kind, word, line, col))
            col += m.end() - i
            i = m.end()
        elif c in PUNCT:
            tokens.append(Token(c, c, line, col))
            i, col = i + 1, col + 1
        else:
            raise LexError(f"unexpected character {c!r}", line, col)
    tokens.append(Token("EOF", None, line, col))
    return tokens


_BINARY_NODES = {"AND": And, "OR": Or, "REMOVE": Remove}
_RADIUS_CUES = {"NEAR": CueKind.NEAR, "DILATE": CueKind.DILATE,
                "ERODE": CueKind.ERODE, "EDGE": CueKind.EDGE}
_EXPR_STARTS = frozenset({"M", "IDENT"} | _BINARY_NODES.keys() | _RADIUS_CUES.keys()
                         | {"NOT", "CENTER"})


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, *kinds: str) -> Token:
        tok = self.peek()
        if tok.kind not in kinds:
            found = "end of input" if tok.kind == "EOF" else repr(tok.value)
            raise DslParseError(
                f"expected {_describe(kinds)}, found {found}",
                tok.line,
                tok.col,
                expected=frozenset(kinds),
            )
        return self.advance()

    def program(self) -> CostProgram:
        classes: list[ClassDecl] = []
        masks: list[MaskBinding] = []
        hierarchy: list[HierarchyEdge] = []
        rules: list[CostRule] = []
        bound_classes: dict[str, Token] = {}
        bound_masks: dict[str, Token] = {}

        if self.peek().kind == "EOF":
            tok = self.peek()
            raise DslParseError(
                "expected at least one statement", tok.line, tok.col,
                expected=frozenset({"class", "mask", "hierarchy", "cost"}),
            )
        while self.peek().kind != "EOF":
            tok = self.expect("class", "mask", "hierarchy", "cost")
            if tok.kind == "class":
                name_tok = self.expect("STRING")
                if name_tok.value in bound_classes:
                    raise DuplicateBindingError(
                        f"class {name_tok.value!r} declared twice", name_tok.line, name_tok.col
                    )
                bound_classes[name_tok.value] = name_tok
                geom = self.expect("linear", "areal")
                self.expect(";")
                classes.append(ClassDecl(name_tok.value, Geometry(geom.kind)))
            elif tok.kind == "mask":
                ident_tok = self.expect("IDENT")
                if ident_tok.value in bound_masks:
                    raise DuplicateBindingError(
                        f"mask {ident_tok.value!r} bound twice", ident_tok.line, ident_tok.col
                    )
                bound_masks[ident_tok.value] = ident_tok
                self.expect("=")
                expr = self.expr()
                self.expect(";")
                masks.append(MaskBinding(ident_tok.value, expr))
            elif tok.kind == "hierarchy":
                child = self.expect("STRING")
                self.expect("subset_of")
                parent = self.expect("STRING")
                self.expect(";")
                if child.value == parent.value:
                    raise HierarchyCycleError(
                        f"class {child.value!r} cannot be a subset of itself "
                        f"(line {child.line}, col {child.col})"
                    )
                hierarchy.append(HierarchyEdge(child=child.value, parent=parent.value))
            else:  # cost
                target = self.target()
                self.expect(":")
                weight = self.expect("NUMBER")
                self.expect(";")
                rules.append(CostRule(target, float(weight.value)))
        return CostProgram(tuple(classes), tuple(masks), tuple(hierarchy), tuple(rules))

    def target(self):
        tok = self.expect("IDENT", "M")
        if tok.kind == "IDENT":
            return Ident(tok.value)
        self.expect("(")
        name = self.expect("STRING")
        self.expect(")")
        return ClassRef(name.value)

    def expr(self) -> MaskExpr:
        tok = self.peek()
        if tok.kind not in _EXPR_STARTS:
            found = "end of input" if tok.kind == "EOF" else repr(tok.value)
            raise DslParseError(
                f"expected a mask expression, found {found}",
                tok.line,
                tok.col,
                expected=_EXPR_STARTS,
            )
        self.advance()
        if tok.kind == "IDENT":
            return Ident(tok.value)
        if tok.kind == "M":
            self.expect("(")
            name = self.expect("STRING")
            self.expect(")")
            return ClassRef(name.value)
        if tok.kind in _BINARY_NODES:
            self.expect("(")
            left = self.expr()
            self.expect(",")
            right = self.expr()
            self.expect(")")
            return _BINARY_NODES[tok.kind](left, right)
        if tok.kind == "NOT":
            self.expect("(")
            operand = self.expr()
            self.expect(")")
            return Not(operand)
        if tok.kind == "CENTER":
            self.expect("(")
            operand = self.expr()
            self.expect(")")
            return Cue(operand, GeometricCue(CueKind.CENTER))
        # remaining cues carry one numeric parameter
        self.expect("(")
        operand = self.expr()
        self.expect(",")
        num = self.expect("NUMBER")
        self.expect(")")
        try:
            cue = GeometricCue(_RADIUS_CUES[tok.kind], radius=float(num.value))
        except ValueError as exc:
            raise InvalidCueError(str(exc), num.line, num.col) from exc
        return Cue(operand, cue)


def _describe(kinds) -> str:
    names = sorted(str(k) for k in kinds)
    if len(names) == 1:
        return f"'{names[0]}'"
    return "one of " + ", ".join(f"'{k}'" for k in names)


def parse(text: str) -> CostProgram:
    """Parse DSL source into a CostProgram.

    Raises LexError / DslParseError / DuplicateBindingError carrying the
    1-based line and column of the offending token.
    """
    return _Parser(tokenize(text)).program()


# ---------------------------------------------------------------------------
# Formatting
# ---------------------------------------------------------------------------


def _num(x: float) -> str:
    return repr(float(x))


def _quote(name: str) -> str:
    if '"' in name or "\n" in name:
        raise ValueError(f"class name {name!r} cannot be written in DSL syntax")
    return f'"{name}"'


def _fmt_expr(expr: MaskExpr) -> str:
    if isinstance(expr, ClassRef):
        return f"M({_quote(expr.name)})"
    if isinstance(expr, Ident):
        return expr.name
    if isinstance(expr, And):
        return f"AND({_fmt_expr(expr.left)}, {_fmt_expr(expr.right)})"
    if isinstance(expr, Or):
        return f"OR({_fmt_expr(expr.left)}, {_fmt_expr(expr.right)})"
    if isinstance(expr, Remove):
        return f"REMOVE({_fmt_expr(expr.left)}, {_fmt_expr(expr.right)})"
    if isinstance(expr, Not):
        return f"NOT({_fmt_expr(expr.operand)})"
    if isinstance(expr, Cue):
        inner = _fmt_expr(expr.operand)
        kind = expr.cue.kind
        if kind is CueKind.CENTER:
            return f"CENTER({inner})"
        name = {CueKind.NEAR: "NEAR", CueKind.DILATE: "DILATE",
                CueKind.ERODE: "ERODE", CueKind.EDGE: "EDGE"}.get(kind)
        if name is None:
            raise ValueError(f"cue kind {kind} has no DSL syntax")
        return f"{name}({inner}, {_num(expr.cue.radius)})"
    raise TypeError(f"not a mask expression: {expr!r}")


def format_program(program: CostProgram) -> str:
    """Emit canonical DSL source; parse(format_program(p)) == p."""
    lines: list[str] = []
    for decl in program.classes:
        lines.append(f"class {_quote(decl.name)} {decl.geometry.value};")
    for binding in program.masks:
        lines.append(f"mask {binding.ident} = {_fmt_expr(binding.expr)};")
    for edge in program.hierarchy:
        lines.append(f"hierarchy {_quote(edge.child)} subset_of {_quote(edge.parent)};")
    for rule in program.rules:
        target = rule.target.name if isinstance(rule.target, Ident) else f"M({_quote(rule.target.name)})"
        lines.append(f"cost {target}: {_num(rule.weight)};")
    return "\n".join(lines) + "\n"
