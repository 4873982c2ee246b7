"""Tiny arithmetic expression compiler for custom weight profiles.

Grammar: +, -, *, /, ** (powers), unary minus, parentheses, the functions
sin, cos, exp, abs, sqrt, log, and the names r, z1..zk (z as an alias for
z1), pi.  Expressions are parsed once into a vectorized numpy callable.
"""

from __future__ import annotations

import ast
import math

import numpy as np

from .errors import ValidationError

_FUNCS = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "abs": np.abs,
    "sqrt": np.sqrt,
    "log": np.log,
}

_BINOPS = {
    ast.Add: np.add,
    ast.Sub: np.subtract,
    ast.Mult: np.multiply,
    ast.Div: np.divide,
    ast.Pow: np.power,
}

_parse_cache: dict = {}


def _compile_node(node, names):
    if isinstance(node, ast.Expression):
        return _compile_node(node.body, names)
    if isinstance(node, ast.Constant):
        if not isinstance(node.value, (int, float)):
            raise ValidationError(f"non-numeric constant {node.value!r}")
        v = float(node.value)
        return lambda env: v
    if isinstance(node, ast.Name):
        if node.id == "pi":
            return lambda env: math.pi
        if node.id not in names:
            raise ValidationError(f"unknown name {node.id!r} in expression")
        key = node.id
        return lambda env: env[key]
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        op = _BINOPS[type(node.op)]
        lt = _compile_node(node.left, names)
        rt = _compile_node(node.right, names)
        return lambda env: op(lt(env), rt(env))
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        inner = _compile_node(node.operand, names)
        if isinstance(node.op, ast.USub):
            return lambda env: -inner(env)
        return inner
    if isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCS:
            raise ValidationError("only sin/cos/exp/abs/sqrt/log calls allowed")
        if len(node.args) != 1 or node.keywords:
            raise ValidationError(f"{node.func.id} takes exactly one argument")
        fn = _FUNCS[node.func.id]
        arg = _compile_node(node.args[0], names)
        return lambda env: fn(arg(env))
    raise ValidationError(f"disallowed syntax in expression: {ast.dump(node)}")


def compile_expression(text: str, k: int):
    """Compile ``text`` to a callable f(r, z) with r scalar/array, z (..., k).

    The callable broadcasts r against the tangential columns z1..zk.
    """
    key = (text, k)
    if key in _parse_cache:
        return _parse_cache[key]
    names = {"r"} | {f"z{a+1}" for a in range(k)}
    if k == 1:
        names.add("z")
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as exc:
        raise ValidationError(f"cannot parse expression {text!r}: {exc}") from exc
    fn = _compile_node(tree, names)

    def evaluate(r, z):
        r = np.asarray(r, dtype=float)
        z = np.asarray(z, dtype=float)
        env = {"r": r}
        for a in range(k):
            env[f"z{a+1}"] = z[..., a]
        if k == 1:
            env["z"] = z[..., 0]
        out = np.asarray(fn(env), dtype=float)
        target = np.broadcast_shapes(out.shape, r.shape)
        if out.shape != target:
            out = np.broadcast_to(out, target).copy()
        return out

    _parse_cache[key] = evaluate
    return evaluate
