"""A small arithmetic language for vital rates ``f(a, x)``.

Expressions use the two variables ``a`` (age) and ``x`` (environment value),
numeric literals, ``+ - * / ^``, unary minus, parentheses and the functions
``exp``, ``log``, ``min``, ``max`` and ``abs``::

    >>> ast = parse("2/(1+x)")
    >>> evaluate(ast, 0.0, 1.0)
    1.0

Precedence, from loosest to tightest: ``+ -``, ``* /``, unary ``-``, ``^``.
``^`` is right-associative, so ``-a^2`` is ``-(a^2)`` and ``2^3^2`` is 512.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import DomainError, ExprSyntaxError, UnknownIdentifier

__all__ = [
    "Num", "Var", "Neg", "BinOp", "Call", "Expr",
    "parse", "evaluate", "compile_vectorized", "to_source", "variables",
]

VARIABLES = ("a", "x")
FUNCTIONS = {"exp": 1, "log": 1, "abs": 1, "min": 2, "max": 2}


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple


Expr = Union[Num, Var, Neg, BinOp, Call]


# ---------------------------------------------------------------------------
# Tokenizer

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Token:
    kind: str  # "num", "name", "op" or "end"
    text: str
    offset: int  # byte offset


def _tokenize(text: str) -> list:
    tokens = []
    pos = 0
    # character index -> byte offset, so errors report byte positions even
    # when a stray non-ASCII character sneaks in
    def byte_offset(i):
        return len(text[:i].encode("utf-8"))

    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ExprSyntaxError(
                f"unexpected character {text[pos]!r}", byte_offset(pos),
                "number, name, operator or parenthesis")
        if m.lastgroup != "ws":
            tokens.append(_Token(m.lastgroup, m.group(), byte_offset(pos)))
        pos = m.end()
    tokens.append(_Token("end", "", byte_offset(len(text))))
    return tokens


# ---------------------------------------------------------------------------
# Pratt parser

_INFIX_BP = {"+": 10, "-": 10, "*": 20, "/": 20, "^": 40}
_PREFIX_BP = 30
_RIGHT_ASSOC = {"^"}


class _Parser:
    def __init__(self, text):
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, text, what):
        tok = self.advance()
        if tok.text != text or tok.kind != "op":
            found = tok.text or "end of input"
            raise ExprSyntaxError(f"unexpected {found!r}", tok.offset, what)
        return tok

    def expression(self, min_bp=0):
        left = self.prefix()
        while True:
            tok = self.peek()
            if tok.kind != "op" or tok.text not in _INFIX_BP:
                break
            bp = _INFIX_BP[tok.text]
            if bp <= min_bp:
                break
            self.advance()
            right_bp = bp - 1 if tok.text in _RIGHT_ASSOC else bp
            left = BinOp(tok.text, left, self.expression(right_bp))
        return left

    def prefix(self):
        tok = self.advance()
        if tok.kind == "num":
            value = float(tok.text)
            if not math.isfinite(value):
                raise ExprSyntaxError("literal overflows a double", tok.offset,
                                      "finite number")
            return Num(value)
        if tok.kind == "name":
            return self.name(tok)
        if tok.kind == "op" and tok.text == "-":
            return Neg(self.expression(_PREFIX_BP))
        if tok.kind == "op" and tok.text == "(":
            inner = self.expression()
            self.expect(")", "')'")
            return inner
        found = tok.text or "end of input"
        raise ExprSyntaxError(f"unexpected {found!r}", tok.offset,
                              "number, variable, function call, '-' or '('")

    def name(self, tok):
        if tok.text in VARIABLES:
            return Var(tok.text)
        if tok.text not in FUNCTIONS:
            raise UnknownIdentifier(
                f"unknown identifier {tok.text!r}", tok.offset,
                "one of a, x, " + ", ".join(sorted(FUNCTIONS)))
        self.expect("(", f"'(' after {tok.text}")
        args = [self.expression()]
        while self.peek().kind == "op" and self.peek().text == ",":
            self.advance()
            args.append(self.expression())
        close = self.expect(")", "',' or ')'")
        arity = FUNCTIONS[tok.text]
        if len(args) != arity:
            raise ExprSyntaxError(
                f"{tok.text} takes {arity} argument(s), got {len(args)}",
                close.offset, f"{arity} argument(s)")
        return Call(tok.text, tuple(args))


def parse(text: str) -> Expr:
    """Parse ``text`` into an expression tree."""
    parser = _Parser(text)
    tree = parser.expression()
    tok = parser.peek()
    if tok.kind != "end":
        raise ExprSyntaxError(f"unexpected {tok.text!r}", tok.offset,
                              "operator or end of input")
    return tree


# ---------------------------------------------------------------------------
# Scalar evaluation

def _finite(value, what):
    if not math.isfinite(value):
        raise DomainError(f"{what} produced a non-finite value")
    return value


def evaluate(node: Expr, a: float, x: float) -> float:
    """Evaluate ``node`` at one point in IEEE double precision.

    Raises :class:`DomainError` for ``log`` of a nonpositive number, division
    by exact zero, and any intermediate non-finite value.
    """
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return _finite(float(a if node.name == "a" else x), node.name)
    if isinstance(node, Neg):
        return -evaluate(node.operand, a, x)
    if isinstance(node, BinOp):
        lhs = evaluate(node.left, a, x)
        rhs = evaluate(node.right, a, x)
        op = node.op
        if op == "+":
            return _finite(lhs + rhs, "'+'")
        if op == "-":
            return _finite(lhs - rhs, "'-'")
        if op == "*":
            return _finite(lhs * rhs, "'*'")
        if op == "/":
            if rhs == 0.0:
                raise DomainError("division by zero")
            return _finite(lhs / rhs, "'/'")
        try:
            return _finite(math.pow(lhs, rhs), "'^'")
        except (ValueError, OverflowError, ZeroDivisionError) as exc:
            raise DomainError(f"'^' out of domain: {lhs!r}^{rhs!r}") from exc
    args = [evaluate(arg, a, x) for arg in node.args]
    func = node.func
    if func == "exp":
        try:
            return math.exp(args[0])
        except OverflowError as exc:
            raise DomainError("exp overflow") from exc
    if func == "log":
        if args[0] <= 0.0:
            raise DomainError(f"log of nonpositive value {args[0]!r}")
        return math.log(args[0])
    if func == "abs":
        return abs(args[0])
    if func == "min":
        return min(args[0], args[1])
    return max(args[0], args[1])


# ---------------------------------------------------------------------------
# Vectorized evaluation

def _checked(arr, what):
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{what} produced a non-finite value")
    return arr


def compile_vectorized(node: Expr):
    """Return ``f(a, x)`` evaluating ``node`` elementwise on numpy arrays.

    Same domain rules as :func:`evaluate`, applied to every element.
    """
    if isinstance(node, Num):
        value = node.value
        return lambda a, x: np.full(np.broadcast(a, x).shape, value)
    if isinstance(node, Var):
        if node.name == "a":
            return lambda a, x: _checked(np.broadcast_to(np.asarray(a, float), np.broadcast(a, x).shape), "a")
        return lambda a, x: _checked(np.broadcast_to(np.asarray(x, float), np.broadcast(a, x).shape), "x")
    if isinstance(node, Neg):
        inner = compile_vectorized(node.operand)
        return lambda a, x: -inner(a, x)
    if isinstance(node, BinOp):
        lhs = compile_vectorized(node.left)
        rhs = compile_vectorized(node.right)
        op = node.op
        if op == "/":
            def divide(a, x):
                den = rhs(a, x)
                if np.any(den == 0.0):
                    raise DomainError("division by zero")
                with np.errstate(all="ignore"):
                    return _checked(lhs(a, x) / den, "'/'")
            return divide
        ufunc = {"+": np.add, "-": np.subtract, "*": np.multiply, "^": np.power}[op]

        def binary(a, x):
            with np.errstate(all="ignore"):
                return _checked(ufunc(lhs(a, x), rhs(a, x)), f"{op!r}")
        return binary
    args = [compile_vectorized(arg) for arg in node.args]
    func = node.func
    if func == "log":
        def log(a, x):
            val = args[0](a, x)
            if np.any(val <= 0.0):
                raise DomainError("log of nonpositive value")
            return np.log(val)
        return log
    if func == "exp":
        def exp(a, x):
            with np.errstate(all="ignore"):
                return _checked(np.exp(args[0](a, x)), "exp")
        return exp
    if func == "abs":
        return lambda a, x: np.abs(args[0](a, x))
    pair = np.minimum if func == "min" else np.maximum
    return lambda a, x: pair(args[0](a, x), args[1](a, x))


# ---------------------------------------------------------------------------
# Printing

def to_source(node: Expr) -> str:
    """Fully parenthesized source text; ``parse(to_source(t)) == t``."""
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return f"(-{to_source(node.operand)})"
    if isinstance(node, BinOp):
        return f"({to_source(node.left)} {node.op} {to_source(node.right)})"
    return f"{node.func}({', '.join(to_source(arg) for arg in node.args)})"


def variables(node: Expr) -> set:
    """Names of the variables that occur in ``node``."""
    if isinstance(node, Var):
        return {node.name}
    if isinstance(node, Num):
        return set()
    if isinstance(node, Neg):
        return variables(node.operand)
    if isinstance(node, BinOp):
        return variables(node.left) | variables(node.right)
    return set().union(*(variables(arg) for arg in node.args))
