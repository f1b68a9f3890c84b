"""Boundary graphs y_N = g(y') with exact derivatives via sympy."""

from __future__ import annotations

import numpy as np
import sympy

from .errors import ConfigError

__all__ = ["BoundaryGraph"]


class BoundaryGraph:
    """A graph ``g: R^(N-1) -> R`` given as a sympy-parsable expression.

    Variables are named ``y1, ..., y{N-1}``. Derivatives up to third order are
    produced symbolically and lambdified, so the coefficient field and its
    first derivatives are exact.

    Parameters
    ----------
    N : int
        Ambient dimension of the domain (1 or 2).
    expression : str
        Expression in ``y1..y{N-1}``. Must vanish with its gradient at 0.
    """

    def __init__(self, N: int, expression: str = "0"):
        self.N = int(N)
        self.expression = str(expression)
        n = self.N - 1
        syms = sympy.symbols([f"y{i + 1}" for i in range(n)]) if n else []
        try:
            expr = sympy.sympify(self.expression, locals={str(v): v for v in syms})
        except (sympy.SympifyError, TypeError) as exc:
            raise ConfigError(f"cannot parse boundary graph {expression!r}") from exc
        extra = expr.free_symbols - set(syms)
        if extra:
            raise ConfigError(f"boundary graph uses unknown symbols {sorted(map(str, extra))}")
        if n == 0 and expr != 0:
            raise ConfigError("a one-dimensional domain has a flat boundary point")
        self._expr = expr
        self.is_flat = bool(expr == 0)
        grad = [sympy.diff(expr, v) for v in syms]
        hess = [[sympy.diff(gi, v) for v in syms] for gi in grad]
        third = [[[sympy.diff(hij, v) for v in syms] for hij in row] for row in hess]
        self._f = sympy.lambdify(syms, expr, "numpy") if n else None
        self._g = [sympy.lambdify(syms, e, "numpy") for e in grad]
        self._h = [[sympy.lambdify(syms, e, "numpy") for e in row] for row in hess]
        self._t = [[[sympy.lambdify(syms, e, "numpy") for e in r2] for r2 in r1] for r1 in third]
        origin = np.zeros((1, n))
        if n and (abs(self.value(origin)[0]) > 1e-14 or np.max(np.abs(self.grad(origin))) > 1e-14):
            raise ConfigError("boundary graph must satisfy g(0)=0 and grad g(0)=0")

    @staticmethod
    def _eval(fn, yp: np.ndarray) -> np.ndarray:
        cols = [yp[:, i] for i in range(yp.shape[1])]
        return np.broadcast_to(np.asarray(fn(*cols), dtype=float), (yp.shape[0],)).copy()

    def value(self, yp) -> np.ndarray:
        yp = np.atleast_2d(np.asarray(yp, dtype=float))
        if self._f is None:
            return np.zeros(yp.shape[0])
        return self._eval(self._f, yp)

    def grad(self, yp) -> np.ndarray:
        yp = np.atleast_2d(np.asarray(yp, dtype=float))
        out = np.zeros((yp.shape[0], self.N - 1))
        for i, fn in enumerate(self._g):
            out[:, i] = self._eval(fn, yp)
        return out

    def hess(self, yp) -> np.ndarray:
        yp = np.atleast_2d(np.asarray(yp, dtype=float))
        n = self.N - 1
        out = np.zeros((yp.shape[0], n, n))
        for i in range(n):
            for j in range(n):
                out[:, i, j] = self._eval(self._h[i][j], yp)
        return out

    def third(self, yp) -> np.ndarray:
        yp = np.atleast_2d(np.asarray(yp, dtype=float))
        n = self.N - 1
        out = np.zeros((yp.shape[0], n, n, n))
        for i in range(n):
            for j in range(n):
                for k in range(n):
                    out[:, i, j, k] = self._eval(self._t[i][j][k], yp)
        return out

    def __repr__(self) -> str:
        return f"BoundaryGraph(N={self.N}, expression={self.expression!r})"
