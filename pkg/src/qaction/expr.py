"""Small expression language for user-defined potentials.

Grammar, lowest to highest precedence::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := atom ('^' unary)?          # right associative
    atom    := NUMBER | NAME | FUNC '(' expr ')' | '(' expr ')'

``-x^2`` therefore parses as ``-(x^2)`` and ``2^-1`` is accepted.  Names are
``x`` or a key of the parameter map; unknown names are rejected at parse time.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Mapping, Union

import numpy as np

from .errors import ExprSyntaxError, UnknownIdentifier

FUNCTIONS = ("neg", "abs", "exp", "ln", "sqrt", "sin", "cos", "tanh")
BINARY_OPS = ("+", "-", "*", "/", "^")

_TOKEN = re.compile(
    r"\s*(?:"
    r"(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()])"
    r")"
)


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    pass


@dataclass(frozen=True)
class Param:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str
    arg: "Node"


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Node"
    right: "Node"


Node = Union[Num, Var, Param, Unary, Binary]


def _tokenize(source: str):
    tokens = []
    pos = 0
    n = len(source)
    while pos < n:
        if source[pos:].strip() == "":
            break
        m = _TOKEN.match(source, pos)
        if m is None or m.end() == pos:
            raise ExprSyntaxError(f"unexpected character {source[pos]!r}", _offset(source, pos))
        start = m.start(m.lastgroup)
        tokens.append((m.lastgroup, m.group(m.lastgroup), _offset(source, start)))
        pos = m.end()
    tokens.append(("end", "", _offset(source, n)))
    return tokens


def _offset(source, index):
    # byte offset, so non-ASCII input reports the position a file viewer shows
    return len(source[:index].encode("utf-8"))


class _Parser:
    def __init__(self, source, params):
        self.tokens = _tokenize(source)
        self.i = 0
        self.params = params

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text):
        kind, value, pos = self.take()
        if value != text or kind == "end":
            raise ExprSyntaxError(f"expected {text!r}, found {value or 'end of input'!r}", pos)

    def parse(self):
        node = self.expr()
        kind, value, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected token {value!r}", pos)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = Binary(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = Binary(op, node, self.unary())
        return node

    def unary(self):
        if self.peek()[:2] == ("op", "-"):
            self.take()
            return Unary("neg", self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[:2] == ("op", "^"):
            self.take()
            return Binary("^", base, self.unary())
        return base

    def atom(self):
        kind, value, pos = self.take()
        if kind == "num":
            return Num(float(value))
        if kind == "name":
            if value in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Unary(value, arg)
            if value == "x":
                return Var()
            if value in self.params:
                return Param(value)
            raise UnknownIdentifier(value, pos)
        if value == "(":
            node = self.expr()
            self.expect(")")
            return node
        raise ExprSyntaxError(f"unexpected {value or 'end of input'!r}", pos)


def parse_potential(source: str, params: Mapping[str, float] | None = None) -> Node:
    """Parse ``source`` into an expression tree.

    Raises
    ------
    ExprSyntaxError
        On malformed input; carries the byte offset of the failure.
    UnknownIdentifier
        For a name that is neither ``x`` nor a key of ``params``.
    """
    if not source or not source.strip():
        raise ExprSyntaxError("empty expression", 0)
    return _Parser(source, dict(params or {})).parse()


_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}


def unparse(node: Node) -> str:
    """Render a tree back to source text that parses to the same tree."""
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return "x"
    if isinstance(node, Param):
        return node.name
    if isinstance(node, Unary):
        if node.op == "neg":
            inner = unparse(node.arg)
            if _prec(node.arg) < _PREC["neg"]:
                inner = f"({inner})"
            return f"-{inner}"
        return f"{node.op}({unparse(node.arg)})"
    left, right = unparse(node.left), unparse(node.right)
    p = _PREC[node.op]
    if node.op == "^":
        # left operand of ^ must be an atom; the right may be any unary
        if _prec(node.left) <= p:
            left = f"({left})"
        if _prec(node.right) < _PREC["neg"]:
            right = f"({right})"
    else:
        if _prec(node.left) < p:
            left = f"({left})"
        if _prec(node.right) <= p:
            right = f"({right})"
    return f"{left}{node.op}{right}"


def _prec(node):
    if isinstance(node, Binary):
        return _PREC[node.op]
    if isinstance(node, Unary) and node.op == "neg":
        return _PREC["neg"]
    return 10


def free_params(node: Node) -> set[str]:
    if isinstance(node, Param):
        return {node.name}
    if isinstance(node, Unary):
        return free_params(node.arg)
    if isinstance(node, Binary):
        return free_params(node.left) | free_params(node.right)
    return set()


_SCALAR_FUNCS = {
    "abs": "abs", "exp": "_m.exp", "ln": "_m.log", "sqrt": "_m.sqrt",
    "sin": "_m.sin", "cos": "_m.cos", "tanh": "_m.tanh",
}
_VECTOR_FUNCS = {
    "abs": "_np.abs", "exp": "_np.exp", "ln": "_np.log", "sqrt": "_np.sqrt",
    "sin": "_np.sin", "cos": "_np.cos", "tanh": "_np.tanh",
}


def _emit(node, funcs, params):
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return "x"
    if isinstance(node, Param):
        return f"({float(params[node.name])!r})"
    if isinstance(node, Unary):
        arg = _emit(node.arg, funcs, params)
        if node.op == "neg":
            return f"(-{arg})"
        return f"{funcs[node.op]}({arg})"
    op = "**" if node.op == "^" else node.op
    return f"({_emit(node.left, funcs, params)}{op}{_emit(node.right, funcs, params)})"


def compile_expr(node: Node, params: Mapping[str, float]):
    """Return ``(scalar_fn, vector_fn)`` evaluating the tree at ``x``.

    Parameters are baked in as literals, so evaluation never looks a name up.
    """
    missing = free_params(node) - set(params)
    if missing:
        raise UnknownIdentifier(sorted(missing)[0], -1)
    scope = {"_m": math, "_np": np}
    scalar = eval(f"lambda x: {_emit(node, _SCALAR_FUNCS, params)}", scope)  # noqa: S307
    vector = eval(f"lambda x: {_emit(node, _VECTOR_FUNCS, params)}", scope)  # noqa: S307

    def vector_fn(x):
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            return np.asarray(vector(np.asarray(x, dtype=float)), dtype=float) + np.zeros_like(x, dtype=float)

    return scalar, vector_fn


def evaluate(node: Node, x: float, params: Mapping[str, float] | None = None) -> float:
    """Tree-walking evaluator; slow but handy for tests and one-off checks."""
    params = params or {}
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return float(x)
    if isinstance(node, Param):
        return float(params[node.name])
    if isinstance(node, Unary):
        a = evaluate(node.arg, x, params)
        if node.op == "neg":
            return -a
        return {"abs": abs, "exp": math.exp, "ln": math.log, "sqrt": math.sqrt,
                "sin": math.sin, "cos": math.cos, "tanh": math.tanh}[node.op](a)
    a = evaluate(node.left, x, params)
    b = evaluate(node.right, x, params)
    if node.op == "+":
        return a + b
    if node.op == "-":
        return a - b
    if node.op == "*":
        return a * b
    if node.op == "/":
        return a / b
    return a**b
