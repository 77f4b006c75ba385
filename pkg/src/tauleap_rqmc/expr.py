"""Tiny arithmetic language for non-mass-action propensities.

Grammar::

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := base ('^' uint)?
    base   := number | ident | '(' expr ')'

Identifiers are species names, ``x<i>`` (1-based species index) or named
model parameters, which are folded into constants at parse time.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping, Sequence, Union

import numpy as np


class ExpressionError(ValueError):
    """Syntax or semantic error in a propensity expression."""

    def __init__(self, msg, line=None, col=None):
        if line is not None:
            msg = f"{msg} (line {line}, column {col})"
        super().__init__(msg)
        self.line = line
        self.col = col


class ZeroDivisionInPropensity(ArithmeticError):
    pass


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    index: int  # 0-based species index


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * /
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Pow:
    base: "Node"
    exponent: int


Node = Union[Const, Var, BinOp, Pow]

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)|(?P<id>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^()]))"
)


def _tokenize(text: str, line: int, col0: int):
    pos = 0
    toks = []
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            bad = pos + len(text[pos:]) - len(text[pos:].lstrip())
            raise ExpressionError(f"unexpected character {text[bad]!r}", line, col0 + bad + 1)
        kind = m.lastgroup
        start = m.start(kind)
        toks.append((kind, m.group(kind), col0 + start + 1))
        pos = m.end()
    toks.append(("end", "", col0 + len(text) + 1))
    return toks


class _Parser:
    def __init__(self, text, species, params, line, col0):
        self.toks = _tokenize(text, line, col0)
        self.i = 0
        self.species = {name: k for k, name in enumerate(species)}
        self.nspecies = len(species)
        self.params = dict(params or {})
        self.line = line

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def error(self, msg, tok):
        raise ExpressionError(msg, self.line, tok[2])

    def parse(self) -> Node:
        node = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            self.error(f"unexpected token {tok[1]!r}", tok)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.factor()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.factor())
        return node

    def factor(self):
        node = self.base()
        if self.peek()[1] == "^":
            self.take()
            tok = self.take()
            if tok[0] != "num" or not tok[1].isdigit():
                self.error("exponent must be an unsigned integer", tok)
            node = Pow(node, int(tok[1]))
        return node

    def base(self):
        tok = self.take()
        kind, text = tok[0], tok[1]
        if kind == "num":
            return Const(float(text))
        if kind == "id":
            if text in self.species:
                return Var(self.species[text])
            m = re.fullmatch(r"x(\d+)", text)
            if m:
                k = int(m.group(1))
                if not 1 <= k <= self.nspecies:
                    self.error(f"species index {text} out of range 1..{self.nspecies}", tok)
                return Var(k - 1)
            if text in self.params:
                return Const(float(self.params[text]))
            self.error(f"unknown identifier {text!r}", tok)
        if text == "(":
            node = self.expr()
            close = self.take()
            if close[1] != ")":
                self.error("expected ')'", close)
            return node
        self.error(f"unexpected token {text!r}" if text else "unexpected end of expression", tok)


def parse_expression(
    text: str,
    species: Sequence[str],
    params: Mapping[str, float] | None = None,
    line: int | None = None,
    col: int = 0,
) -> Node:
    """Parse ``text`` into an AST over the given species names."""
    return _Parser(text, list(species), params, line, col).parse()


def evaluate(node: Node, x: np.ndarray) -> np.ndarray:
    """Evaluate on states ``x`` of shape ``(..., l)``; division by zero raises."""
    if isinstance(node, Const):
        return np.full(np.shape(x)[:-1], node.value)
    if isinstance(node, Var):
        return np.asarray(x[..., node.index], dtype=np.float64)
    if isinstance(node, Pow):
        return evaluate(node.base, x) ** node.exponent
    a = evaluate(node.left, x)
    b = evaluate(node.right, x)
    if node.op == "+":
        return a + b
    if node.op == "-":
        return a - b
    if node.op == "*":
        return a * b
    if np.any(b == 0):
        bad = np.argwhere(np.atleast_1d(b) == 0)[0]
        raise ZeroDivisionInPropensity(
            f"division by zero in propensity at state {np.atleast_2d(x)[tuple(bad[:1])]}"
        )
    return a / b


def species_used(node: Node) -> set[int]:
    if isinstance(node, Var):
        return {node.index}
    if isinstance(node, Pow):
        return species_used(node.base)
    if isinstance(node, BinOp):
        return species_used(node.left) | species_used(node.right)
    return set()


_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def to_string(node: Node, species: Sequence[str] | None = None) -> str:
    """Render back to the grammar; the output parses to an equal tree."""

    def name(i):
        return species[i] if species is not None else f"x{i + 1}"

    def rec(n, ctx):
        if isinstance(n, Const):
            if not (np.isfinite(n.value) and n.value >= 0):
                raise ExpressionError(f"constant {n.value} has no literal form")
            return repr(float(n.value))
        if isinstance(n, Var):
            return name(n.index)
        if isinstance(n, Pow):
            b = rec(n.base, 3)
            if isinstance(n.base, Pow):
                b = f"({b})"
            return f"{b}^{n.exponent}"
        p = _PREC[n.op]
        left = rec(n.left, p)
        # right operand needs parentheses at equal precedence (left-assoc)
        right = rec(n.right, p + 1)
        s = f"{left} {n.op} {right}"
        return f"({s})" if p < ctx else s

    return rec(node, 0)
