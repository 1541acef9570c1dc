"""Small arithmetic expression language for masks, densities and form entries.

Expressions are parsed with :mod:`ast` and evaluated against numpy arrays of
cell-center coordinates.  Only a whitelist of nodes is accepted::

    + - * / ^ (or **)  abs min max sin cos exp sqrt  pi
    comparisons (< <= > >= == !=), and/or/not  (for masks)
    coordinates x1..xn, with x, y, z as aliases for x1, x2, x3
"""

import ast
import operator

import numpy as np

from .errors import ConfigError

_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: np.power,
}
_CMPOPS = {
    ast.Lt: operator.lt,
    ast.LtE: operator.le,
    ast.Gt: operator.gt,
    ast.GtE: operator.ge,
    ast.Eq: operator.eq,
    ast.NotEq: operator.ne,
}
_FUNCS = {
    "abs": np.abs,
    "min": np.minimum,
    "max": np.maximum,
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "sqrt": np.sqrt,
}
_ALIASES = {"x": "x1", "y": "x2", "z": "x3"}


def compile_expr(text):
    """Parse ``text`` once; returns a callable ``f(coords) -> ndarray``.

    ``coords`` is an ``(m, dim)`` array of points.
    """
    if not isinstance(text, str) or not text.strip():
        raise ConfigError(f"expression must be a non-empty string, got {text!r}")
    try:
        # '^' is power with Python's '**' precedence, not XOR
        tree = ast.parse(text.strip().replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"cannot parse expression {text!r}: {exc.msg}") from None
    _check(tree.body, text)

    def evaluate(coords):
        coords = np.atleast_2d(np.asarray(coords, dtype=float))
        env = {f"x{i + 1}": coords[:, i] for i in range(coords.shape[1])}
        with np.errstate(divide="ignore", invalid="ignore"):
            out = _eval(tree.body, env, text)
        return np.broadcast_to(np.asarray(out), (coords.shape[0],)).copy()

    evaluate.source = text
    return evaluate


def _check(node, text):
    if isinstance(node, ast.BinOp):
        if type(node.op) not in _BINOPS:
            raise ConfigError(f"operator {type(node.op).__name__} not allowed in {text!r}")
        _check(node.left, text)
        _check(node.right, text)
    elif isinstance(node, ast.UnaryOp):
        if not isinstance(node.op, (ast.USub, ast.UAdd, ast.Not)):
            raise ConfigError(f"unary operator not allowed in {text!r}")
        _check(node.operand, text)
    elif isinstance(node, ast.Compare):
        for op in node.ops:
            if type(op) not in _CMPOPS:
                raise ConfigError(f"comparison not allowed in {text!r}")
        _check(node.left, text)
        for c in node.comparators:
            _check(c, text)
    elif isinstance(node, ast.BoolOp):
        for v in node.values:
            _check(v, text)
    elif isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCS or node.keywords:
            raise ConfigError(f"function call not allowed in {text!r}")
        for a in node.args:
            _check(a, text)
    elif isinstance(node, ast.Name):
        name = _ALIASES.get(node.id, node.id)
        if name != "pi" and not (name.startswith("x") and name[1:].isdigit()):
            raise ConfigError(f"unknown name {node.id!r} in {text!r}")
    elif isinstance(node, ast.Constant):
        if not isinstance(node.value, (int, float)) or isinstance(node.value, bool):
            raise ConfigError(f"only numeric constants allowed in {text!r}")
    else:
        raise ConfigError(f"syntax {type(node).__name__} not allowed in {text!r}")


def _eval(node, env, text):
    if isinstance(node, ast.BinOp):
        return _BINOPS[type(node.op)](_eval(node.left, env, text), _eval(node.right, env, text))
    if isinstance(node, ast.UnaryOp):
        val = _eval(node.operand, env, text)
        if isinstance(node.op, ast.USub):
            return -val
        if isinstance(node.op, ast.Not):
            return np.logical_not(val)
        return val
    if isinstance(node, ast.Compare):
        left = _eval(node.left, env, text)
        result = True
        for op, comp in zip(node.ops, node.comparators):
            right = _eval(comp, env, text)
            result = np.logical_and(result, _CMPOPS[type(op)](left, right))
            left = right
        return result
    if isinstance(node, ast.BoolOp):
        combine = np.logical_and if isinstance(node.op, ast.And) else np.logical_or
        vals = [_eval(v, env, text) for v in node.values]
        out = vals[0]
        for v in vals[1:]:
            out = combine(out, v)
        return out
    if isinstance(node, ast.Call):
        args = [_eval(a, env, text) for a in node.args]
        if node.func.id in ("min", "max"):
            if len(args) < 2:
                raise ConfigError(f"{node.func.id} needs two or more arguments in {text!r}")
            out = args[0]
            for a in args[1:]:
                out = _FUNCS[node.func.id](out, a)
            return out
        if len(args) != 1:
            raise ConfigError(f"{node.func.id} takes one argument in {text!r}")
        return _FUNCS[node.func.id](args[0])
    if isinstance(node, ast.Name):
        name = _ALIASES.get(node.id, node.id)
        if name == "pi":
            return np.pi
        if name not in env:
            raise ConfigError(f"coordinate {node.id!r} exceeds domain dimension in {text!r}")
        return env[name]
    return float(node.value)
