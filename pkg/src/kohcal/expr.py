"""Small arithmetic expression language for config-defined models.

Grammar (``^`` binds tighter than unary minus, and is right-associative)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := primary ('^' unary)?
    primary := NUMBER | VAR | FUNC '(' expr (',' expr)* ')' | '(' expr ')'

Variables are ``x0 .. x{d-1}`` (inputs) and ``p0 .. p{p-1}`` (parameters).
Functions: ``sqrt exp log abs pow(a, b)``.  Expressions compile to closures
that evaluate column-wise on numpy arrays.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

__all__ = ["ExpressionError", "parse", "compile_expression", "to_source", "Num", "Var", "Neg", "BinOp", "Call"]


class ExpressionError(ValueError):
    def __init__(self, message: str, position: int | None = None, text: str | None = None):
        self.position = position
        self.text = text
        if position is not None:
            message = f"{message} at position {position}"
        super().__init__(message)


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    kind: str  # "x" or "p"
    index: int


@dataclass(frozen=True)
class Neg:
    operand: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple


Node = Union[Num, Var, Neg, BinOp, Call]

FUNCTIONS = {"sqrt": 1, "exp": 1, "log": 1, "abs": 1, "pow": 2}

_TOKEN = re.compile(
    r"\s*(?:"
    r"(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),])"
    r")"
)


def _tokenize(text: str):
    tokens = []
    pos = 0
    n = len(text)
    while pos < n:
        if text[pos].isspace():
            pos += 1
            continue
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            raise ExpressionError(f"unexpected character {text[pos]!r}", pos, text)
        start = m.start(m.lastgroup)
        tokens.append((m.lastgroup, m.group(m.lastgroup), start))
        pos = m.end()
    tokens.append(("end", "", n))
    return tokens


class _Parser:
    def __init__(self, text: str, xdim: int, pdim: int):
        self.text = text
        self.xdim = xdim
        self.pdim = pdim
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, val, pos = self.peek()
        if val != value or kind != "op":
            found = "end of input" if kind == "end" else repr(val)
            raise ExpressionError(f"expected {value!r}, found {found}", pos, self.text)
        return self.advance()

    def error(self, msg):
        raise ExpressionError(msg, self.peek()[2], self.text)

    def parse(self) -> Node:
        node = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ExpressionError(f"unexpected token {val!r}", pos, self.text)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.advance()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = self.advance()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        kind, val, _ = self.peek()
        if kind == "op" and val == "-":
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.primary()
        kind, val, _ = self.peek()
        if kind == "op" and val == "^":
            self.advance()
            return BinOp("^", base, self.unary())
        return base

    def primary(self):
        kind, val, pos = self.peek()
        if kind == "num":
            self.advance()
            return Num(float(val))
        if kind == "name":
            self.advance()
            m = re.fullmatch(r"([xp])(\d+)", val)
            if m:
                var, idx = m.group(1), int(m.group(2))
                limit = self.xdim if var == "x" else self.pdim
                if idx >= limit:
                    raise ExpressionError(
                        f"variable {val} out of range ({var}0..{var}{limit - 1})" if limit else
                        f"variable {val} not available ({var}dim is 0)",
                        pos,
                        self.text,
                    )
                return Var(var, idx)
            if val not in FUNCTIONS:
                raise ExpressionError(f"unknown function or variable {val!r}", pos, self.text)
            self.expect("(")
            args = [self.expr()]
            while self.peek()[0] == "op" and self.peek()[1] == ",":
                self.advance()
                args.append(self.expr())
            self.expect(")")
            if len(args) != FUNCTIONS[val]:
                raise ExpressionError(f"{val} takes {FUNCTIONS[val]} argument(s), got {len(args)}", pos, self.text)
            return Call(val, tuple(args))
        if kind == "op" and val == "(":
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if kind == "end" else repr(val)
        raise ExpressionError(f"unexpected {found}", pos, self.text)


def parse(text: str, xdim: int, pdim: int) -> Node:
    """Parse ``text`` into an AST, checking variable indices against the dimensions."""
    return _Parser(text, xdim, pdim).parse()


_BINARY = {
    "+": np.add,
    "-": np.subtract,
    "*": np.multiply,
    "/": np.divide,
    "^": np.power,
}
_UNARY = {"sqrt": np.sqrt, "exp": np.exp, "log": np.log, "abs": np.abs}


def _build(node: Node) -> Callable:
    if isinstance(node, Num):
        v = node.value
        return lambda X, P: np.full(X.shape[0], v)
    if isinstance(node, Var):
        j = node.index
        if node.kind == "x":
            return lambda X, P: X[:, j]
        return lambda X, P: P[:, j]
    if isinstance(node, Neg):
        f = _build(node.operand)
        return lambda X, P: -f(X, P)
    if isinstance(node, BinOp):
        op = _BINARY[node.op]
        f, g = _build(node.left), _build(node.right)
        return lambda X, P: op(f(X, P), g(X, P))
    if isinstance(node, Call):
        if node.name == "pow":
            f, g = _build(node.args[0]), _build(node.args[1])
            return lambda X, P: np.power(f(X, P), g(X, P))
        fn = _UNARY[node.name]
        f = _build(node.args[0])
        return lambda X, P: fn(f(X, P))
    raise TypeError(f"not an expression node: {node!r}")


def compile_expression(text_or_node, xdim: int, pdim: int) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    """Return ``f(X, P) -> y`` evaluating the expression row-wise.

    ``X`` is ``(n, xdim)`` and ``P`` is ``(n, pdim)``.  Invalid operations
    (e.g. ``sqrt`` of a negative) produce ``nan`` which the caller reports.
    """
    node = parse(text_or_node, xdim, pdim) if isinstance(text_or_node, str) else text_or_node
    return _build(node)


def to_source(node: Node) -> str:
    """Fully parenthesised source text that re-parses to an equivalent tree."""
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return f"{node.kind}{node.index}"
    if isinstance(node, Neg):
        return f"(-{to_source(node.operand)})"
    if isinstance(node, BinOp):
        return f"({to_source(node.left)} {node.op} {to_source(node.right)})"
    if isinstance(node, Call):
        return f"{node.name}({', '.join(to_source(a) for a in node.args)})"
    raise TypeError(f"not an expression node: {node!r}")
