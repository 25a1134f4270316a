"""Arithmetic expressions in ``x`` and ``t`` for variable fractional orders.

The grammar is the subset of Python expressions made of numbers, the names
``x``, ``t`` and ``pi``, the operators ``+ - * /`` (binary and unary) and
the functions ``abs`` and ``sin``. Parsing is delegated to :mod:`ast` and
the resulting tree is checked against that subset and converted into a
small immutable tree that evaluates on numpy arrays.
"""

from __future__ import annotations

import ast
import math
from dataclasses import dataclass
from typing import Union

import numpy as np


class ExprError(ValueError):
    """Raised for malformed order expressions.

    .. attribute:: offset

        0-based byte offset of the offending token in the source text.
    """

    def __init__(self, message: str, offset: int = 0) -> None:
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


VARIABLES = ("x", "t")
CONSTANTS = {"pi": math.pi}
FUNCTIONS = {"abs": np.abs, "sin": np.sin}
BINARY = {ast.Add: "+", ast.Sub: "-", ast.Mult: "*", ast.Div: "/"}


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: Node


@dataclass(frozen=True)
class BinOp:
    op: str
    left: Node
    right: Node


@dataclass(frozen=True)
class Call:
    func: str
    arg: Node


Node = Union[Num, Var, Neg, BinOp, Call]


def _eval(node: Node, env: dict[str, np.ndarray]):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return env[node.name]
    if isinstance(node, Neg):
        return -_eval(node.operand, env)
    if isinstance(node, Call):
        return FUNCTIONS[node.func](_eval(node.arg, env))

    a, b = _eval(node.left, env), _eval(node.right, env)
    if node.op == "+":
        return a + b
    if node.op == "-":
        return a - b
    if node.op == "*":
        return a * b
    return a / b


def _names(node: Node) -> set[str]:
    if isinstance(node, Var):
        return {node.name}
    if isinstance(node, Neg):
        return _names(node.operand)
    if isinstance(node, Call):
        return _names(node.arg)
    if isinstance(node, BinOp):
        return _names(node.left) | _names(node.right)
    return set()


@dataclass(frozen=True)
class OrderExpr:
    """A parsed expression; call :meth:`evaluate` with arrays or scalars."""

    text: str
    root: Node

    def evaluate(self, x, t=0.0):
        x = np.asarray(x, dtype=np.float64)
        t = np.asarray(t, dtype=np.float64)
        with np.errstate(divide="ignore", invalid="ignore"):
            value = _eval(self.root, {"x": x, "t": t})
        return np.broadcast_to(value, np.broadcast_shapes(x.shape, t.shape)).astype(
            np.float64
        )

    def depends_on(self, name: str) -> bool:
        return name in _names(self.root)

    def is_constant(self) -> bool:
        return not _names(self.root)


def _convert(node: ast.AST, text: str) -> Node:
    # ast column offsets are already in UTF-8 bytes
    offset = int(getattr(node, "col_offset", 0) or 0)

    if isinstance(node, ast.Constant):
        if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
            raise ExprError(f"unsupported literal {node.value!r}", offset)
        return Num(float(node.value))

    if isinstance(node, ast.Name):
        if node.id in VARIABLES:
            return Var(node.id)
        if node.id in CONSTANTS:
            return Num(CONSTANTS[node.id])
        raise ExprError(f"unknown identifier {node.id!r}", offset)

    if isinstance(node, ast.UnaryOp):
        if isinstance(node.op, ast.USub):
            return Neg(_convert(node.operand, text))
        if isinstance(node.op, ast.UAdd):
            return _convert(node.operand, text)
        raise ExprError("unsupported unary operator", offset)

    if isinstance(node, ast.BinOp):
        op = BINARY.get(type(node.op))
        if op is None:
            raise ExprError("unsupported binary operator", offset)
        return BinOp(op, _convert(node.left, text), _convert(node.right, text))

    if isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name):
            raise ExprError("unsupported call", offset)
        name = node.func.id
        if name not in FUNCTIONS:
            raise ExprError(f"unknown function {name!r}", offset)
        if node.keywords or len(node.args) != 1:
            raise ExprError(f"{name}() takes exactly one argument", offset)
        return Call(name, _convert(node.args[0], text))

    raise ExprError(f"unsupported syntax {type(node).__name__}", offset)


def parse_order_expr(text: str) -> OrderExpr:
    """Parse *text* such as ``"4/5*abs(sin(10*pi*(x-t)))+1.1"``."""
    if not text or not text.strip():
        raise ExprError("empty expression", 0)
    if "\n" in text:
        raise ExprError("expression must be a single line", text.index("\n"))

    body = text.strip()
    lead = len(text.encode()) - len(text.lstrip().encode())
    try:
        tree = ast.parse(body, mode="eval")
    except SyntaxError as exc:
        # offsets are 1-based characters; 0 or None means end of input
        col = exc.offset - 1 if exc.offset else len(body)
        col = min(col, len(body))
        raise ExprError(f"syntax error: {exc.msg}", lead + len(body[:col].encode())) from None

    try:
        root = _convert(tree.body, text)
    except ExprError as exc:
        raise ExprError(str(exc).rsplit(" (at offset", 1)[0], exc.offset + lead) from None

    return OrderExpr(text=text, root=root)
