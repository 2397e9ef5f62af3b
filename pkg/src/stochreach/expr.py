"""Dynamics written in a small vocabulary of primitive operations.

An expression such as ``"a - b*log1p(x1)"`` is parsed with :mod:`ast`,
checked against the vocabulary, and compiled once. The compiled function is
evaluated with plain floats, numpy arrays (batched states) or
:class:`~stochreach.interval.Interval` objects; the last case yields the
natural interval extension used by the interval reachability backend.

Names available inside expressions: state components ``x0 .. x{n-1}``, input
components ``u0 .. u{p-1}``, the time index ``t``, user parameters, ``pi``.
"""
from __future__ import annotations

import ast
import math

from . import interval as iv

PRIMITIVES = {
    "log1p": iv.log1p,
    "log": iv.log,
    "exp": iv.exp,
    "sqrt": iv.sqrt,
    "sin": iv.sin,
    "cos": iv.cos,
    "tan": iv.tan,
    "atan": iv.atan,
    "abs": iv.iabs,
    "min": iv.imin,
    "max": iv.imax,
}

_ALLOWED_NODES = (
    ast.Expression, ast.BinOp, ast.UnaryOp, ast.Call, ast.Name, ast.Load,
    ast.Constant, ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow, ast.USub, ast.UAdd,
)


class ExpressionError(ValueError):
    pass


def _validate(tree, names):
    for node in ast.walk(tree):
        if not isinstance(node, _ALLOWED_NODES):
            raise ExpressionError(f"unsupported syntax: {type(node).__name__}")
        if isinstance(node, ast.Constant) and not isinstance(node.value, (int, float)):
            raise ExpressionError(f"unsupported constant {node.value!r}")
        if isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.func.id not in PRIMITIVES:
                raise ExpressionError(f"unknown primitive in {ast.unparse(node)!r}")
            if node.keywords:
                raise ExpressionError("keyword arguments are not supported")
        if isinstance(node, ast.BinOp) and isinstance(node.op, ast.Pow):
            if not _is_constant(node.right):
                raise ExpressionError("only constant exponents are supported")
        if isinstance(node, ast.Name) and not (
            node.id in names or node.id in PRIMITIVES or node.id == "pi"
        ):
            raise ExpressionError(f"unknown name {node.id!r}")


def _is_constant(node):
    if isinstance(node, ast.Constant):
        return True
    if isinstance(node, ast.UnaryOp):
        return _is_constant(node.operand)
    return False


def compile_dynamics(expressions, dim_state, dim_input=0, params=None):
    """Compile one expression per state component into ``f(x, u, t)``.

    ``x`` and ``u`` are sequences (or arrays with components on the last
    axis); the result is a list with one entry per component, each a float,
    array or Interval depending on the inputs.
    """
    params = dict(params or {})
    if len(expressions) != dim_state:
        raise ExpressionError(
            f"expected {dim_state} expressions, got {len(expressions)}")
    state_names = [f"x{i}" for i in range(dim_state)]
    input_names = [f"u{j}" for j in range(dim_input)]
    names = set(state_names) | set(input_names) | set(params) | {"t"}
    clash = set(params) & (set(state_names) | set(input_names) | set(PRIMITIVES) | {"t"})
    if clash:
        raise ExpressionError(f"parameter names shadow reserved names: {sorted(clash)}")

    codes = []
    for src in expressions:
        try:
            tree = ast.parse(str(src), mode="eval")
        except SyntaxError as exc:
            raise ExpressionError(f"cannot parse {src!r}: {exc.msg}") from None
        _validate(tree, names)
        codes.append(compile(tree, "<dynamics>", "eval"))

    base = {"__builtins__": {}, "pi": math.pi, **PRIMITIVES, **params}

    def f(x, u=(), t=0):
        scope = dict(base)
        for i, name in enumerate(state_names):
            scope[name] = x[..., i] if hasattr(x, "ndim") else x[i]
        for j, name in enumerate(input_names):
            scope[name] = u[..., j] if hasattr(u, "ndim") else u[j]
        scope["t"] = t
        return [eval(code, scope) for code in codes]  # noqa: S307 - validated AST

    return f
