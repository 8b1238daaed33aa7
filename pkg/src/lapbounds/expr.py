"""Closed-form fields from coordinate expressions.

Grammar: numbers, the space's coordinate names, ``pi`` and ``e``; ``+ - * /``,
``^`` or ``**`` for powers; ``min``, ``max`` (elementwise, any arity), ``abs``,
``sqrt``, ``exp``, ``log``, ``sin``, ``cos``, ``tan``, ``sinh``, ``cosh``,
``tanh``, ``asin``, ``acos``, ``atan``, ``asinh``, ``atanh``; and the distance
primitive ``d(p)`` where ``p`` is a vertex id, ``pK`` for vertex ``K``, or
``center``.
"""

from __future__ import annotations

import ast
import re

import numpy as np

from .calculus import ScalarField
from .space import MMGraph


class ExpressionError(ValueError):
    pass


FUNCTIONS = {
    "abs": np.abs, "sqrt": np.sqrt, "exp": np.exp, "log": np.log,
    "sin": np.sin, "cos": np.cos, "tan": np.tan,
    "sinh": np.sinh, "cosh": np.cosh, "tanh": np.tanh,
    "asin": np.arcsin, "acos": np.arccos, "atan": np.arctan,
    "asinh": np.arcsinh, "atanh": np.arctanh,
}
CONSTANTS = {"pi": np.pi, "e": np.e}
_BINOPS = {ast.Add: np.add, ast.Sub: np.subtract, ast.Mult: np.multiply,
           ast.Div: np.divide, ast.Pow: np.power}
_VERTEX = re.compile(r"p?(\d+)$")


class _Evaluator:
    def __init__(self, space: MMGraph):
        self.space = space
        self.names = {**CONSTANTS, **space.coordinate_names()}

    def eval(self, node):
        method = getattr(self, "_" + type(node).__name__, None)
        if method is None:
            raise ExpressionError(f"unsupported syntax: {type(node).__name__}")
        return method(node)

    def _Expression(self, node):
        return self.eval(node.body)

    def _Constant(self, node):
        if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
            raise ExpressionError(f"unsupported literal {node.value!r}")
        return float(node.value)

    def _Name(self, node):
        try:
            return self.names[node.id]
        except KeyError:
            known = ", ".join(sorted(self.names))
            raise ExpressionError(f"unknown name {node.id!r} (known: {known})") from None

    def _BinOp(self, node):
        op = _BINOPS.get(type(node.op))
        if op is None:
            raise ExpressionError(f"unsupported operator {type(node.op).__name__}")
        return op(self.eval(node.left), self.eval(node.right))

    def _UnaryOp(self, node):
        if isinstance(node.op, ast.USub):
            return -self.eval(node.operand)
        if isinstance(node.op, ast.UAdd):
            return self.eval(node.operand)
        raise ExpressionError(f"unsupported unary operator {type(node.op).__name__}")

    def _Call(self, node):
        if not isinstance(node.func, ast.Name) or node.keywords:
            raise ExpressionError("only plain function calls are allowed")
        name = node.func.id
        if name == "d":
            return self._distance(node.args)
        if name not in FUNCTIONS and name not in ("min", "max"):
            raise ExpressionError(f"unknown function {name!r}")
        args = [self.eval(a) for a in node.args]
        if name in ("min", "max"):
            if not args:
                raise ExpressionError(f"{name}() needs arguments")
            red = np.minimum if name == "min" else np.maximum
            out = args[0]
            for a in args[1:]:
                out = red(out, a)
            return out
        fn = FUNCTIONS[name]
        if len(args) != 1:
            raise ExpressionError(f"{name}() takes one argument")
        return fn(args[0])

    def _distance(self, args):
        if len(args) != 1:
            raise ExpressionError("d() takes one vertex argument")
        a = args[0]
        if isinstance(a, ast.Name) and a.id == "center":
            v = self.space.center
        else:
            token = a.id if isinstance(a, ast.Name) else (
                str(a.value) if isinstance(a, ast.Constant) and isinstance(a.value, int) else None)
            m = _VERTEX.match(token or "")
            if m is None:
                raise ExpressionError("d() expects a vertex id, pK, or center")
            v = int(m.group(1))
        return np.array(self.space.distances_from(self.space.check_vertex(v)), dtype=float)


def expression_values(space: MMGraph, expr: str) -> np.ndarray:
    if not isinstance(expr, str) or not expr.strip():
        raise ExpressionError("empty expression")
    try:
        tree = ast.parse(expr.replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse {expr!r}: {exc.msg}") from None
    with np.errstate(all="ignore"):
        vals = _Evaluator(space).eval(tree)
    vals = np.broadcast_to(np.asarray(vals, dtype=float), (space.n,)).copy()
    bad = np.flatnonzero(~np.isfinite(vals))
    if bad.size:
        raise ExpressionError(f"{expr!r} is not finite at vertex {int(bad[0])}")
    return vals


def expression_field(space: MMGraph, expr: str) -> ScalarField:
    """Evaluate ``expr`` at every vertex."""
    return ScalarField(space, expression_values(space, expr))
