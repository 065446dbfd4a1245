"""Tiny arithmetic expression language for user-supplied potentials.

Grammar (whitespace-insensitive):

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?          # right-associative
    atom   := NUMBER | 'z' | ('log' | 'exp') '(' expr ')' | '(' expr ')'

Compiles to a closure over numpy ops, so the resulting callable accepts both
scalars and arrays. Deliberately no eval(), no names beyond the three above.
"""

from __future__ import annotations

import re
from typing import Callable

import numpy as np

from .errors import ExpressionError

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()]))"
)

_FUNCS = {"log": np.log, "exp": np.exp}


def _tokenize(text: str) -> list[tuple[str, str]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ExpressionError(f"unexpected character at position {pos}: {text[pos:]!r}")
        pos = m.end()
        if m.lastgroup is not None:
            tokens.append((m.lastgroup, m.group(m.lastgroup)))
    return tokens


class _Parser:
    def __init__(self, tokens: list[tuple[str, str]], source: str):
        self.tokens = tokens
        self.i = 0
        self.source = source

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else (None, None)

    def take(self):
        tok = self.peek()
        self.i += 1
        return tok

    def expect_op(self, op: str):
        kind, val = self.take()
        if kind != "op" or val != op:
            raise ExpressionError(f"expected {op!r} in {self.source!r}")

    def parse(self) -> Callable:
        node = self.expr()
        if self.i != len(self.tokens):
            raise ExpressionError(f"trailing input in {self.source!r}")
        return node

    def expr(self):
        node = self.term()
        while self.peek() == ("op", "+") or self.peek() == ("op", "-"):
            _, op = self.take()
            rhs = self.term()
            node = self._binary(op, node, rhs)
        return node

    def term(self):
        node = self.unary()
        while self.peek() == ("op", "*") or self.peek() == ("op", "/"):
            _, op = self.take()
            rhs = self.unary()
            node = self._binary(op, node, rhs)
        return node

    def unary(self):
        if self.peek() == ("op", "-"):
            self.take()
            inner = self.unary()
            return lambda z: -inner(z)
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek() == ("op", "^"):
            self.take()
            exponent = self.unary()
            return lambda z: np.power(base(z), exponent(z))
        return base

    def atom(self):
        kind, val = self.take()
        if kind == "num":
            c = float(val)
            return lambda z: c
        if kind == "name":
            if val == "z":
                return lambda z: z
            fn = _FUNCS.get(val)
            if fn is None:
                raise ExpressionError(f"unknown name {val!r} in {self.source!r}")
            self.expect_op("(")
            inner = self.expr()
            self.expect_op(")")
            return lambda z: fn(inner(z))
        if kind == "op" and val == "(":
            inner = self.expr()
            self.expect_op(")")
            return inner
        raise ExpressionError(f"unexpected token {val!r} in {self.source!r}")

    @staticmethod
    def _binary(op, lhs, rhs):
        if op == "+":
            return lambda z: lhs(z) + rhs(z)
        if op == "-":
            return lambda z: lhs(z) - rhs(z)
        if op == "*":
            return lambda z: lhs(z) * rhs(z)
        return lambda z: lhs(z) / rhs(z)


def compile_expression(text: str) -> Callable:
    """Parse ``text`` into a callable of one variable ``z``.

    The result follows the shape of its argument even when the expression is
    constant, so array callers always get arrays back.
    """
    if not isinstance(text, str) or not text.strip():
        raise ExpressionError("expression must be a nonempty string")
    tokens = _tokenize(text)
    if not tokens:
        raise ExpressionError("expression must be a nonempty string")
    body = _Parser(tokens, text).parse()

    def evaluate(z):
        out = body(z)
        shape = np.shape(z)
        if np.shape(out) != shape:
            out = np.broadcast_to(np.asarray(out, dtype=float), shape).copy()
        return out

    return evaluate
