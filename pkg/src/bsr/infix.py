"""Infix rendering and parsing of expression trees.

Grammar of the emitted text (whitespace is ignored when parsing)::

    expr   := VAR                          x1, x2, ...  (1-based)
            | NAME "(" expr ("," expr)* ")"   exp(..), sin(..), user ops
            | "(" inner ")"
    inner  := expr BINOP expr              BINOP in + - * /
            | expr "^" ("2" | "3")
            | "-" expr                     negation
            | "1/" expr                    reciprocal
            | NUM "*" expr ("+"|"-") NUM   linear transform a*x+b

Feature ``x1`` is column 0 of the data matrix.
"""

from __future__ import annotations

import re

from .exceptions import ParseError, UnknownOperator
from .operators import get_operator
from .tree import Node, NonTerminal, Terminal

_BINOPS = {"+": "add", "-": "sub", "*": "mul", "/": "div"}
_POWERS = {"2": "square", "3": "cube"}

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<sym>[()+\-*/^,]))"
)


def _fmt_num(v: float, precision: int | None) -> str:
    if precision is None:
        return repr(float(v))
    return format(float(v), f".{precision}g")


def to_infix(tree: Node, precision: int | None = None) -> str:
    """Render ``tree`` as a fully parenthesised infix string.

    With ``precision=None`` lt coefficients are written with ``repr`` so the
    text parses back to exactly the same numbers; otherwise they are rounded
    to ``precision`` significant digits.
    """
    if isinstance(tree, Terminal):
        return f"x{tree.feature + 1}"
    args = [to_infix(c, precision) for c in tree.children]
    op = tree.op
    if op.has_params:
        a, b = tree.params
        sign = "-" if b < 0 or (b == 0 and str(b).startswith("-")) else "+"
        return f"({_fmt_num(a, precision)}*{args[0]}{sign}{_fmt_num(abs(b), precision)})"
    if op.fmt is not None:
        return op.fmt.format(*args)
    return f"{op.name}({','.join(args)})"


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = []
        pos = 0
        while pos < len(text):
            if text[pos:].strip() == "":
                break
            m = _TOKEN.match(text, pos)
            if m is None or m.end() == pos:
                while text[pos].isspace():
                    pos += 1
                raise ParseError(f"unexpected character {text[pos]!r}", pos)
            kind = m.lastgroup
            self.tokens.append((kind, m.group(kind), m.start(kind)))
            pos = m.end()
        self.i = 0

    def peek(self, offset=0):
        j = self.i + offset
        if j < len(self.tokens):
            return self.tokens[j]
        return ("eof", "", len(self.text))

    def take(self):
        tok = self.peek()
        if tok[0] == "eof":
            raise ParseError("unexpected end of input", tok[2])
        self.i += 1
        return tok

    def expect(self, value):
        tok = self.take()
        if tok[1] != value:
            raise ParseError(f"expected {value!r}, got {tok[1]!r}", tok[2])
        return tok

    def number(self):
        tok = self.take()
        if tok[0] != "num":
            raise ParseError(f"expected a number, got {tok[1]!r}", tok[2])
        return float(tok[1])

    def parse(self) -> Node:
        node = self.expr()
        tok = self.peek()
        if tok[0] != "eof":
            raise ParseError(f"trailing input {tok[1]!r}", tok[2])
        return node

    def expr(self) -> Node:
        kind, val, pos = self.peek()
        if kind == "name":
            self.take()
            m = re.fullmatch(r"x(\d+)", val)
            if m and self.peek()[1] != "(":
                idx = int(m.group(1))
                if idx < 1:
                    raise ParseError("feature indices start at x1", pos)
                return Terminal(idx - 1)
            try:
                op = get_operator(val)
            except UnknownOperator:
                raise ParseError(f"unknown operator {val!r}", pos) from None
            self.expect("(")
            args = [self.expr()]
            while self.peek()[1] == ",":
                self.take()
                args.append(self.expr())
            self.expect(")")
            if len(args) != op.arity or op.has_params:
                raise ParseError(f"bad call to {val!r}", pos)
            return NonTerminal(op, tuple(args))
        if val == "(":
            self.take()
            node = self.inner()
            self.expect(")")
            return node
        if kind == "eof":
            raise ParseError("unexpected end of input", pos)
        raise ParseError(f"unexpected token {val!r}", pos)

    def _linear(self, a: float) -> Node:
        self.expect("*")
        child = self.expr()
        tok = self.take()
        if tok[1] not in "+-" or tok[0] != "sym":
            raise ParseError(f"expected '+' or '-', got {tok[1]!r}", tok[2])
        b = self.number()
        if tok[1] == "-":
            b = -b
        return NonTerminal(get_operator("lt"), (child,), (a, b))

    def inner(self) -> Node:
        kind, val, pos = self.peek()
        if val == "-":
            self.take()
            if self.peek()[0] == "num":
                return self._linear(-self.number())
            return NonTerminal(get_operator("neg"), (self.expr(),))
        if kind == "num":
            nxt = self.peek(1)[1]
            if nxt == "/":
                if float(val) != 1.0:
                    raise ParseError("only 1/x reciprocals are supported", pos)
                self.take()
                self.take()
                return NonTerminal(get_operator("inv"), (self.expr(),))
            return self._linear(self.number())
        left = self.expr()
        tok = self.take()
        if tok[1] == "^":
            p = self.take()
            if p[1] not in _POWERS:
                raise ParseError(f"unsupported power {p[1]!r}", p[2])
            return NonTerminal(get_operator(_POWERS[p[1]]), (left,))
        if tok[0] != "sym" or tok[1] not in _BINOPS:
            raise ParseError(f"expected a binary operator, got {tok[1]!r}", tok[2])
        right = self.expr()
        return NonTerminal(get_operator(_BINOPS[tok[1]]), (left, right))


def parse_infix(text: str) -> Node:
    """Parse text produced by :func:`to_infix` back into a tree."""
    return _Parser(text).parse()
