"""Positive functions on a reference unit sphere ``{rho = 1}``.

Two representations: a closed-form expression over the point coordinates
``x0, x1, ...`` (``x, y, z`` are aliases), or a table of sampled values with
angular linear interpolation in 2-D and nearest-direction lookup otherwise.
"""
from __future__ import annotations

import ast
from typing import Callable

import numpy as np

_FUNCS = {
    "sin": np.sin, "cos": np.cos, "tan": np.tan, "exp": np.exp, "log": np.log,
    "sqrt": np.sqrt, "abs": np.abs, "atan2": np.arctan2, "arctan2": np.arctan2,
    "tanh": np.tanh, "minimum": np.minimum, "maximum": np.maximum,
}
_CONSTS = {"pi": np.pi, "e": np.e}
_BINOPS = {
    ast.Add: np.add, ast.Sub: np.subtract, ast.Mult: np.multiply,
    ast.Div: np.divide, ast.Pow: np.power,
}


class ExpressionError(ValueError):
    pass


def _compile(expr: str) -> Callable[[dict], np.ndarray]:
    try:
        tree = ast.parse(expr, mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse expression {expr!r}: {exc.msg}") from None

    def build(node):
        if isinstance(node, ast.Expression):
            return build(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            v = float(node.value)
            return lambda env: v
        if isinstance(node, ast.Name):
            name = node.id
            if name in _CONSTS:
                v = _CONSTS[name]
                return lambda env: v
            return lambda env: env[name]
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            op, lhs, rhs = _BINOPS[type(node.op)], build(node.left), build(node.right)
            return lambda env: op(lhs(env), rhs(env))
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            inner = build(node.operand)
            if isinstance(node.op, ast.USub):
                return lambda env: -inner(env)
            return inner
        if (isinstance(node, ast.Call) and isinstance(node.func, ast.Name)
                and node.func.id in _FUNCS and not node.keywords):
            fn, args = _FUNCS[node.func.id], [build(a) for a in node.args]
            return lambda env: fn(*(a(env) for a in args))
        raise ExpressionError(f"unsupported syntax in expression {expr!r}")

    return build(tree)


class SphereFunction:
    dim: int | None = None

    def __call__(self, theta) -> np.ndarray:
        raise NotImplementedError

    def to_json(self) -> dict:
        raise NotImplementedError


class ExprSphereFunction(SphereFunction):
    def __init__(self, expr: str | Callable[[np.ndarray], np.ndarray]):
        if callable(expr):
            self.expr = None
            self._fn = expr
        else:
            self.expr = str(expr)
            prog = _compile(self.expr)

            def fn(theta):
                env = {f"x{i}": theta[:, i] for i in range(theta.shape[1])}
                env.update(zip("xyz", (theta[:, i] for i in range(min(3, theta.shape[1])))))
                env["r"] = np.linalg.norm(theta, axis=1)
                try:
                    return prog(env)
                except KeyError as exc:
                    raise ExpressionError(f"unknown name {exc.args[0]!r} in {self.expr!r}") from None

            self._fn = fn

    def __call__(self, theta):
        theta = np.atleast_2d(np.asarray(theta, dtype=float))
        out = np.broadcast_to(np.asarray(self._fn(theta), dtype=float), (len(theta),))
        return np.array(out)

    def to_json(self):
        if self.expr is None:
            raise ValueError("callable sphere functions cannot be serialized")
        return {"kind": "expr", "expr": self.expr}


def constant(c: float) -> ExprSphereFunction:
    return ExprSphereFunction(repr(float(c)))


class TableSphereFunction(SphereFunction):
    """Sampled values; exact at the samples, interpolated in between."""

    def __init__(self, points, values):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        vals = np.asarray(values, dtype=float).reshape(-1)
        if len(pts) != len(vals) or len(vals) == 0:
            raise ValueError("points and values must be non-empty and of equal length")
        if np.any(~(vals > 0)):
            raise ValueError("sphere function values must be positive")
        self.points, self.values, self.dim = pts, vals, pts.shape[1]
        if self.dim == 2:
            ang = np.arctan2(pts[:, 1], pts[:, 0])
            order = np.argsort(ang)
            self._ang = ang[order]
            self._vals = vals[order]
        self._dirs = pts / np.linalg.norm(pts, axis=1, keepdims=True)

    def __call__(self, theta):
        theta = np.atleast_2d(np.asarray(theta, dtype=float))
        if self.dim == 2 and len(self._ang) > 1:
            q = np.arctan2(theta[:, 1], theta[:, 0])
            xp = np.concatenate([self._ang - 2 * np.pi, self._ang, self._ang + 2 * np.pi])
            fp = np.tile(self._vals, 3)
            return np.interp(q, xp, fp)
        if self.dim == 1:
            return np.where(theta[:, 0] >= 0,
                            self._pick(1.0), self._pick(-1.0))
        dirs = theta / np.linalg.norm(theta, axis=1, keepdims=True)
        return self.values[np.argmax(dirs @ self._dirs.T, axis=1)]

    def _pick(self, sign):
        hits = self.values[np.sign(self.points[:, 0]) == sign]
        return hits[0] if len(hits) else self.values[0]

    def max_gap(self) -> float:
        """Largest angular gap between samples (2-D only), a proxy for interpolation error."""
        if self.dim != 2:
            return float("nan")
        gaps = np.diff(np.concatenate([self._ang, [self._ang[0] + 2 * np.pi]]))
        return float(gaps.max())

    def to_json(self):
        return {"kind": "table", "points": self.points.tolist(), "values": self.values.tolist()}


def sphere_function_from_json(data: dict) -> SphereFunction:
    kind = data.get("kind")
    if kind == "expr":
        return ExprSphereFunction(data["expr"])
    if kind == "table":
        return TableSphereFunction(data["points"], data["values"])
    raise ValueError(f"unknown sphere function kind {kind!r}")
