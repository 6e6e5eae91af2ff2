"""Whitelisted closed-form expressions: polynomials, abs, min, max.

Expressions are parsed with :mod:`ast` and only the node types below are
accepted, so nothing outside arithmetic on the declared variables can run.
"""

from __future__ import annotations

import ast
import operator
from typing import Callable, Sequence

import numpy as np

_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}
_UNARY = {ast.USub: operator.neg, ast.UAdd: operator.pos}


def _min(*args):
    return np.minimum.reduce(np.broadcast_arrays(*args))


def _max(*args):
    return np.maximum.reduce(np.broadcast_arrays(*args))


_FUNCS = {"abs": np.abs, "min": _min, "max": _max}


class ExpressionError(ValueError):
    pass


def _is_constant(node) -> bool:
    if isinstance(node, ast.Constant):
        return True
    if isinstance(node, ast.UnaryOp):
        return _is_constant(node.operand)
    if isinstance(node, ast.BinOp):
        return _is_constant(node.left) and _is_constant(node.right)
    return False


def _check(node, variables: Sequence[str]) -> None:
    if isinstance(node, ast.Expression):
        _check(node.body, variables)
    elif isinstance(node, ast.Constant):
        if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
            raise ExpressionError(f"unsupported constant {node.value!r}")
    elif isinstance(node, ast.Name):
        if node.id not in variables:
            raise ExpressionError(f"unknown name {node.id!r} (allowed: {', '.join(variables)})")
    elif isinstance(node, ast.BinOp):
        if type(node.op) not in _BINOPS:
            raise ExpressionError(f"operator {type(node.op).__name__} is not allowed")
        if isinstance(node.op, ast.Pow) and not _is_constant(node.right):
            raise ExpressionError("exponents must be constants")
        if isinstance(node.op, ast.Div) and not _is_constant(node.right):
            raise ExpressionError("only division by constants is allowed")
        _check(node.left, variables)
        _check(node.right, variables)
    elif isinstance(node, ast.UnaryOp):
        if type(node.op) not in _UNARY:
            raise ExpressionError(f"operator {type(node.op).__name__} is not allowed")
        _check(node.operand, variables)
    elif isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCS:
            raise ExpressionError("only abs, min and max may be called")
        if node.keywords or not node.args:
            raise ExpressionError(f"bad arguments to {node.func.id}")
        if node.func.id == "abs" and len(node.args) != 1:
            raise ExpressionError("abs takes one argument")
        for arg in node.args:
            _check(arg, variables)
    else:
        raise ExpressionError(f"{type(node).__name__} is not allowed in expressions")


def _eval(node, env: dict):
    if isinstance(node, ast.Expression):
        return _eval(node.body, env)
    if isinstance(node, ast.Constant):
        return float(node.value)
    if isinstance(node, ast.Name):
        return env[node.id]
    if isinstance(node, ast.BinOp):
        return _BINOPS[type(node.op)](_eval(node.left, env), _eval(node.right, env))
    if isinstance(node, ast.UnaryOp):
        return _UNARY[type(node.op)](_eval(node.operand, env))
    if isinstance(node, ast.Call):
        return _FUNCS[node.func.id](*(_eval(a, env) for a in node.args))
    raise ExpressionError(type(node).__name__)  # unreachable after _check


def compile_expression(text: str, variables: Sequence[str]) -> Callable:
    """Return a vectorised callable taking the variables positionally."""
    try:
        tree = ast.parse(str(text).replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse {text!r}: {exc.msg}") from exc
    _check(tree, variables)

    def func(*args):
        env = {name: np.asarray(a, dtype=float) for name, a in zip(variables, args)}
        with np.errstate(over="ignore", invalid="ignore"):
            out = _eval(tree, env)
        shape = np.broadcast(*env.values()).shape if env else ()
        return np.broadcast_to(np.asarray(out, dtype=float), shape)

    func.__doc__ = f"{text} in ({', '.join(variables)})"
    return func
