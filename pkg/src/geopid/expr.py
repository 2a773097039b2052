"""Small infix expression language for system descriptions.

Grammar (``^`` is right associative and binds tighter than unary minus)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := ('+' | '-') unary | power
    power  := atom ('^' unary)?
    atom   := NUMBER | NAME | NAME '(' expr ')' | '(' expr ')'

Names are state variables or the constants ``pi`` and ``e``; the only
functions are ``sin``, ``cos`` and ``sqrt``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import GeoPidError

FUNCTIONS = {"sin": math.sin, "cos": math.cos, "sqrt": math.sqrt}
CONSTANTS = {"pi": math.pi, "e": math.e}


class ExprError(GeoPidError, ValueError):
    """Problem in an expression; ``position`` is a 0-based character offset."""

    def __init__(self, message, text="", position=None):
        super().__init__(message)
        self.message = message
        self.text = text
        self.position = position
        # filled in by the config reader
        self.line = None
        self.key = None

    def __str__(self):
        loc = f"line {self.line}, key {self.key!r}: " if self.line is not None else ""
        where = f" at position {self.position}" if self.position is not None else ""
        return f"{loc}{self.message}{where}"


class ExprSyntaxError(ExprError):
    pass


class UnknownFunction(ExprError):
    pass


class UnknownName(ExprError):
    pass


_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^()]))"
)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    pos: int


def tokenize(text: str) -> list:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            bad = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise ExprSyntaxError(f"unexpected character {text[bad]!r}", text, bad)
        kind = m.lastgroup
        tokens.append(Token(kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(Token("end", "", len(text)))
    return tokens


# -- syntax tree ------------------------------------------------------------------


class Node:
    def names(self) -> set:
        return set()


@dataclass(frozen=True)
class Num(Node):
    value: float

    def source(self, index):
        return repr(self.value)

    def __str__(self):
        return repr(self.value)


@dataclass(frozen=True)
class Name(Node):
    name: str
    pos: int = 0

    def names(self):
        return {self.name}

    def source(self, index):
        if self.name in index:
            return f"_v[{index[self.name]}]"
        return repr(CONSTANTS[self.name])

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Unary(Node):
    op: str
    arg: Node

    def names(self):
        return self.arg.names()

    def source(self, index):
        return f"({self.op}{self.arg.source(index)})"

    def __str__(self):
        return f"({self.op}{self.arg})"


@dataclass(frozen=True)
class Binary(Node):
    op: str
    left: Node
    right: Node

    def names(self):
        return self.left.names() | self.right.names()

    def source(self, index):
        op = "**" if self.op == "^" else self.op
        return f"({self.left.source(index)} {op} {self.right.source(index)})"

    def __str__(self):
        return f"({self.left} {self.op} {self.right})"


@dataclass(frozen=True)
class Call(Node):
    func: str
    arg: Node

    def names(self):
        return self.arg.names()

    def source(self, index):
        return f"{self.func}({self.arg.source(index)})"

    def __str__(self):
        return f"{self.func}({self.arg})"


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = tokenize(text)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def take(self) -> Token:
        t = self.tokens[self.i]
        self.i += 1
        return t

    def expect(self, op: str):
        if self.tok.kind != "op" or self.tok.text != op:
            found = "end of input" if self.tok.kind == "end" else repr(self.tok.text)
            raise ExprSyntaxError(f"expected {op!r}, found {found}", self.text, self.tok.pos)
        return self.take()

    def parse(self) -> Node:
        node = self.expr()
        if self.tok.kind != "end":
            raise ExprSyntaxError(f"unexpected {self.tok.text!r}", self.text, self.tok.pos)
        return node

    def expr(self):
        node = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.take().text
            node = Binary(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.take().text
            node = Binary(op, node, self.unary())
        return node

    def unary(self):
        if self.tok.kind == "op" and self.tok.text in "+-":
            op = self.take().text
            return Unary(op, self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.tok.kind == "op" and self.tok.text == "^":
            self.take()
            return Binary("^", base, self.unary())
        return base

    def atom(self):
        t = self.tok
        if t.kind == "num":
            self.take()
            return Num(float(t.text))
        if t.kind == "name":
            self.take()
            if self.tok.kind == "op" and self.tok.text == "(":
                if t.text not in FUNCTIONS:
                    raise UnknownFunction(f"unknown function {t.text!r}", self.text, t.pos)
                self.take()
                arg = self.expr()
                self.expect(")")
                return Call(t.text, arg)
            return Name(t.text, t.pos)
        if t.kind == "op" and t.text == "(":
            self.take()
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if t.kind == "end" else repr(t.text)
        raise ExprSyntaxError(f"unexpected {found}", self.text, t.pos)


def parse(text: str) -> Node:
    """Parse ``text`` into a syntax tree."""
    return _Parser(text).parse()


def _find_name(node: Node, name: str):
    if isinstance(node, Name) and node.name == name:
        return node.pos
    for child in ("arg", "left", "right"):
        sub = getattr(node, child, None)
        if sub is not None:
            p = _find_name(sub, name)
            if p is not None:
                return p
    return None


def compile_expr(text: str, variables: Sequence[str] = ()):
    """Compile ``text`` to ``f(coords) -> float`` over the named variables.

    Raises
    ------
    ExprSyntaxError, UnknownFunction, UnknownName
    """
    tree = parse(text)
    index = {v: i for i, v in enumerate(variables)}
    for name in sorted(tree.names()):
        if name not in index and name not in CONSTANTS:
            raise UnknownName(f"unknown name {name!r}", text, _find_name(tree, name))
    src = f"lambda _v: {tree.source(index)}"
    return eval(src, {"__builtins__": {}, **FUNCTIONS})  # noqa: S307 - source built from a validated tree


def evaluate(text: str, env: dict = None) -> float:
    """Evaluate ``text`` with variables taken from ``env``."""
    env = env or {}
    names = list(env)
    f = compile_expr(text, names)
    return float(f([env[k] for k in names]))


def compile_matrix(rows: Sequence[Sequence[str]], variables: Sequence[str] = ()):
    """Compile a matrix of expressions into one ``f(coords) -> ndarray``.

    Returns ``(f, constant)`` where ``constant`` is true when no entry
    references a variable.
    """
    index = {v: i for i, v in enumerate(variables)}
    used = set()
    src_rows = []
    for row in rows:
        parts = []
        for text in row:
            tree = parse(text)
            for name in sorted(tree.names()):
                if name not in index and name not in CONSTANTS:
                    raise UnknownName(f"unknown name {name!r}", text, _find_name(tree, name))
            used |= tree.names() & set(index)
            parts.append(tree.source(index))
        src_rows.append("[" + ", ".join(parts) + "]")
    src = "lambda _v: _array([" + ", ".join(src_rows) + "], dtype=_float)"
    f = eval(src, {"__builtins__": {}, "_array": np.array, "_float": float, **FUNCTIONS})  # noqa: S307 - validated tree
    return f, not used
