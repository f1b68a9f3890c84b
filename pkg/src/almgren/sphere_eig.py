"""Eigenfunctions of the weighted half-sphere problem.

An eigenfunction of degree m is the restriction to the half-sphere of a
homogeneous polynomial P in ``(y_1, ..., y_N, t)``, odd in y_N, even in t,
with ``Delta P + (1-2s)/t dP/dt = 0``. Its eigenvalue is
``m^2 + m(N-2s)``; for N = 1 only odd degrees occur.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .errors import ConfigError
from .quadrature import half_sphere

__all__ = [
    "Polynomial",
    "SphericalEigenfunction",
    "EigenspaceBasis",
    "eigenvalue",
    "degree_of_eigenvalue",
    "admissible_degrees",
    "family_N1",
    "family_N2",
    "eigenspace_basis",
    "eigenspace_of_degree",
    "rayleigh_quotient",
    "weighted_laplacian",
]


class Polynomial:
    """Polynomial in ``n_vars`` variables stored as exponent rows and coefficients.

    Coefficients may be floats or ``Fraction``; evaluation converts to float.
    The object also serves as a field: ``value`` and ``gradient`` take point
    rows ``z``.
    """

    def __init__(self, exponents, coefficients, n_vars: int | None = None):
        exps = [tuple(int(v) for v in e) for e in exponents]
        if n_vars is None:
            if not exps:
                raise ValueError("n_vars is required for an empty polynomial")
            n_vars = len(exps[0])
        merged: dict = {}
        for e, c in zip(exps, coefficients):
            if len(e) != n_vars:
                raise ValueError("inconsistent exponent length")
            merged[e] = merged.get(e, 0) + c
        keys = sorted((e for e, c in merged.items() if c != 0), reverse=True)
        self.n_vars = int(n_vars)
        self.terms = {e: merged[e] for e in keys}
        self._exp = np.array(keys, dtype=int).reshape(-1, self.n_vars)
        self._coef = np.array([float(merged[e]) for e in keys])

    @property
    def exponents(self) -> np.ndarray:
        return self._exp

    @property
    def coefficients(self) -> np.ndarray:
        return self._coef

    @property
    def degrees(self) -> set:
        return {int(sum(e)) for e in self.terms}

    @property
    def degree(self) -> int:
        d = self.degrees
        return max(d) if d else 0

    def is_zero(self) -> bool:
        return not self.terms

    def is_homogeneous(self) -> bool:
        return len(self.degrees) <= 1

    def __add__(self, other: "Polynomial") -> "Polynomial":
        e = list(self.terms) + list(other.terms)
        c = list(self.terms.values()) + list(other.terms.values())
        return Polynomial(e, c, self.n_vars)

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        return self + other * -1

    def __mul__(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            e, c = [], []
            for ea, ca in self.terms.items():
                for eb, cb in other.terms.items():
                    e.append(tuple(a + b for a, b in zip(ea, eb)))
                    c.append(ca * cb)
            return Polynomial(e, c, self.n_vars)
        return Polynomial(list(self.terms), [c * other for c in self.terms.values()], self.n_vars)

    __rmul__ = __mul__

    def __eq__(self, other) -> bool:
        return isinstance(other, Polynomial) and self.n_vars == other.n_vars and self.terms == other.terms

    def __hash__(self):
        return hash(tuple(self.terms.items()))

    def value(self, z) -> np.ndarray:
        z = np.atleast_2d(np.asarray(z, dtype=float))
        if not self.terms:
            return np.zeros(z.shape[0])
        mons = np.ones((z.shape[0], len(self._coef)))
        for j in range(self.n_vars):
            mons *= z[:, j : j + 1] ** self._exp[None, :, j]
        return mons @ self._coef

    __call__ = value

    def gradient(self, z) -> np.ndarray:
        z = np.atleast_2d(np.asarray(z, dtype=float))
        out = np.zeros((z.shape[0], self.n_vars))
        if not self.terms:
            return out
        pw = [z[:, j : j + 1] ** np.maximum(self._exp[None, :, j] - 1, 0) for j in range(self.n_vars)]
        full = [pw[j] * np.where(self._exp[None, :, j] > 0, z[:, j : j + 1], 1.0) for j in range(self.n_vars)]
        for i in range(self.n_vars):
            mons = self._exp[None, :, i] * pw[i]
            for j in range(self.n_vars):
                if j != i:
                    mons = mons * full[j]
            out[:, i] = mons @ self._coef
        return out

    def derivative(self, i: int) -> "Polynomial":
        e, c = [], []
        for ex, co in self.terms.items():
            if ex[i] > 0:
                new = list(ex)
                new[i] -= 1
                e.append(tuple(new))
                c.append(co * ex[i])
        return Polynomial(e, c, self.n_vars)

    def __repr__(self) -> str:
        names = [f"y{i + 1}" for i in range(self.n_vars - 1)] + ["t"]
        parts = []
        for e, c in self.terms.items():
            mon = "*".join(f"{n}^{p}" if p > 1 else n for n, p in zip(names, e) if p)
            parts.append(f"{c}" + (f"*{mon}" if mon else ""))
        return " + ".join(parts) if parts else "0"


def weighted_laplacian(P: Polynomial, s) -> Polynomial:
    """``Delta P + (1-2s)/t dP/dt``; exact when coefficients and s are Fractions.

    Raises if a monomial with odd t-exponent would make the division inexact.
    """
    n = P.n_vars
    e_out, c_out = [], []
    for ex, co in P.terms.items():
        for i in range(n - 1):
            a = ex[i]
            if a >= 2:
                new = list(ex)
                new[i] -= 2
                e_out.append(tuple(new))
                c_out.append(co * a * (a - 1))
        c = ex[n - 1]
        if c >= 1:
            if c % 2:
                raise ConfigError("division by t is exact only for even t-exponents")
            new = list(ex)
            new[n - 1] -= 2
            e_out.append(tuple(new))
            c_out.append(co * c * (c - 1 + 1 - 2 * s))
    return Polynomial(e_out, c_out, n)


def eigenvalue(m: int, N: int, s: float) -> float:
    """Eigenvalue attached to index m (degree m, or 2m-1 when N = 1)."""
    if m < 1:
        raise ConfigError("m must be a positive integer; 0 is not an eigenvalue")
    if N not in (1, 2):
        raise ConfigError("N must be 1 or 2")
    d = 2 * m - 1 if N == 1 else m
    return d * d + d * (N - 2.0 * s)


def degree_of_eigenvalue(mu: float, N: int, s: float) -> float:
    """Homogeneity degree ``-(N-2s)/2 + sqrt(((N-2s)/2)^2 + mu)``."""
    b = 0.5 * (N - 2.0 * s)
    return -b + math.sqrt(b * b + mu)


def admissible_degrees(N: int, m_max: int) -> list[int]:
    return [m for m in range(1, m_max + 1) if N != 1 or m % 2 == 1]


def _fraction(s) -> Fraction:
    return Fraction(str(s)) if not isinstance(s, Fraction) else s


def family_N1(m: int, s) -> Polynomial:
    """Explicit solution of degree 2m-1 for N = 1 in variables (y1, t).

    ``sum_k a_k y1^(2k+1) t^(2m-2k-2)`` with ``a_0 = 1`` and
    ``a_k = -2((m-k)^2 - s(m-k)) / (k(2k+1)) a_(k-1)``; Fraction arithmetic.
    """
    if m < 1:
        raise ConfigError("m must be positive")
    s = _fraction(s)
    a = Fraction(1)
    exps, coefs = [(1, 2 * m - 2)], [a]
    for k in range(1, m):
        a = -2 * ((m - k) ** 2 - s * (m - k)) / (k * (2 * k + 1)) * a
        exps.append((2 * k + 1, 2 * m - 2 * k - 2))
        coefs.append(a)
    return Polynomial(exps, coefs, 2)


def family_N2(m: int, s) -> Polynomial:
    """Explicit solution of degree m for N = 2 in variables (y1, y2, t).

    Odd m reuses the N = 1 family in (y2, t); even m = 2n is the harmonic
    polynomial ``sum_k a_k y1^(2k+1) y2^(2n-2k-1)`` with ``a_0 = 1`` and
    ``a_(k+1) = -(2(n-k)^2 - 3n + 3k + 1) / (2k^2 + 5k + 3) a_k``.
    """
    if m < 1:
        raise ConfigError("m must be positive")
    if m % 2:
        base = family_N1((m + 1) // 2, s)
        return Polynomial([(0, e[0], e[1]) for e in base.terms], list(base.terms.values()), 3)
    n = m // 2
    a = Fraction(1)
    exps, coefs = [(1, 2 * n - 1, 0)], [a]
    for k in range(0, n - 1):
        a = -Fraction(2 * (n - k) ** 2 - 3 * n + 3 * k + 1, 2 * k * k + 5 * k + 3) * a
        exps.append((2 * k + 3, 2 * n - 2 * k - 3, 0))
        coefs.append(a)
    return Polynomial(exps, coefs, 3)


def _monomials(N: int, m: int) -> list[tuple]:
    """Degree-m exponents odd in y_N and even in t, lexicographically descending."""
    out = []
    for e in itertools.product(range(m + 1), repeat=N + 1):
        if sum(e) == m and e[N - 1] % 2 == 1 and e[N] % 2 == 0:
            out.append(e)
    return sorted(out, reverse=True)


def _operator_matrix(N: int, m: int, s: float) -> tuple[np.ndarray, list, list]:
    dom = _monomials(N, m)
    cod = _monomials(N, m - 2) if m >= 2 else []
    pos = {e: i for i, e in enumerate(cod)}
    L = np.zeros((len(cod), len(dom)))
    for j, e in enumerate(dom):
        img = weighted_laplacian(Polynomial([e], [1.0], N + 1), s)
        for ex, co in img.terms.items():
            L[pos[ex], j] += float(co)
    return L, dom, cod


def rayleigh_quotient(P: Polynomial, N: int, s: float, rule=None) -> float:
    """Weighted Rayleigh quotient of the restriction of P to the half-sphere.

    The tangential gradient uses ``|grad_S P|^2 = |grad P|^2 - (grad P . theta)^2``
    on the unit sphere.
    """
    rule = rule or half_sphere(N, s)
    th = rule.points
    val = P.value(th)
    g = P.gradient(th)
    radial = np.einsum("ni,ni->n", g, th)
    num = rule.integrate(np.einsum("ni,ni->n", g, g) - radial**2)
    den = rule.integrate(val**2)
    if den <= 0:
        raise ConfigError("zero polynomial has no Rayleigh quotient")
    return float(num / den)


@dataclass(frozen=True, eq=False)
class SphericalEigenfunction:
    """Unit-norm eigenfunction ``Y_{m,k}`` with its homogeneous extension."""

    polynomial: Polynomial
    degree: int
    index: int
    eigenvalue: float
    s: float
    N: int

    def value(self, z) -> np.ndarray:
        """Homogeneous extension ``|z|^m Y(z/|z|)`` (the polynomial itself)."""
        return self.polynomial.value(z)

    def gradient(self, z) -> np.ndarray:
        return self.polynomial.gradient(z)

    def on_sphere(self, z) -> np.ndarray:
        """``Y(z/|z|)``, homogeneous of degree 0."""
        z = np.atleast_2d(np.asarray(z, dtype=float))
        r = np.linalg.norm(z, axis=1)
        return self.polynomial.value(z / r[:, None])

    def tangential_gradient(self, theta) -> np.ndarray:
        """``grad_S Y`` at unit vectors theta."""
        th = np.atleast_2d(np.asarray(theta, dtype=float))
        g = self.polynomial.gradient(th)
        return g - np.einsum("ni,ni->n", g, th)[:, None] * th

    def residual(self) -> float:
        """Largest coefficient of the weighted Laplacian, relative to P."""
        L = weighted_laplacian(self.polynomial, self.s)
        if L.is_zero():
            return 0.0
        return float(np.max(np.abs(L.coefficients)) / np.max(np.abs(self.polynomial.coefficients)))


@dataclass(frozen=True, eq=False)
class EigenspaceBasis:
    degree: int
    N: int
    s: float
    functions: tuple
    singular_values: np.ndarray
    flagged: bool = False
    monomials: list = field(default_factory=list)

    @property
    def dimension(self) -> int:
        return len(self.functions)

    def __iter__(self):
        return iter(self.functions)

    def __len__(self) -> int:
        return len(self.functions)

    def __getitem__(self, k):
        return self.functions[k]


@lru_cache(maxsize=128)
def _eigenspace_cached(m: int, N: int, s: float) -> EigenspaceBasis:
    L, dom, _ = _operator_matrix(N, m, s)
    d = len(dom)
    rule = half_sphere(N, s)
    mons = np.column_stack([Polynomial([e], [1.0], N + 1).value(rule.points) for e in dom]) if d else np.zeros((len(rule), 0))
    G = mons.T @ (rule.weights[:, None] * mons)
    if L.shape[0] == 0:
        sv = np.zeros(0)
        null = np.eye(d)
        flagged = False
    else:
        _, sv, Vt = np.linalg.svd(L)
        thresh = 1e-10 * sv.max()
        rank = int(np.sum(sv > thresh))
        null = Vt[rank:].T
        flagged = bool(np.any((sv > 0.1 * thresh) & (sv < 10.0 * thresh)))
    nullity = null.shape[1]
    proj = null @ null.T
    family = family_N1((m + 1) // 2, s) if N == 1 else family_N2(m, s)
    cands = []
    if (N == 1 and m % 2 == 1) or N == 2:
        pos = {e: i for i, e in enumerate(dom)}
        v = np.zeros(d)
        for e, c in family.terms.items():
            v[pos[e]] = float(c)
        cands.append(v)
    cands.extend(proj[:, j] for j in range(d))
    basis: list[np.ndarray] = []
    for v in cands:
        if len(basis) == nullity:
            break
        w = v.copy()
        for _ in range(2):
            for b in basis:
                w -= (b @ G @ w) * b
        nrm = math.sqrt(max(float(w @ G @ w), 0.0))
        ref = math.sqrt(max(float(v @ G @ v), 0.0))
        if ref > 0 and nrm > 1e-8 * ref:
            basis.append(w / nrm)
    mu = eigenvalue((m + 1) // 2, N, s) if N == 1 else eigenvalue(m, N, s)
    funcs = tuple(
        SphericalEigenfunction(Polynomial(dom, list(b), N + 1), m, k, mu, s, N) for k, b in enumerate(basis)
    )
    return EigenspaceBasis(m, N, s, funcs, sv, flagged, dom)


def eigenspace_of_degree(degree: int, N: int, s: float, max_degree: int = 15) -> EigenspaceBasis:
    """Orthonormal basis of eigenfunctions homogeneous of the given degree.

    The basis is empty when no eigenfunction of that degree exists; for
    N = 1 this happens at every even degree, because no nonzero polynomial
    odd in y1 and even in t has even total degree.
    """
    if degree < 1 or degree > max_degree:
        raise ConfigError(f"degree must lie in 1..{max_degree}")
    if N not in (1, 2):
        raise ConfigError("N must be 1 or 2")
    if not 0.0 < s < 1.0:
        raise ConfigError("s must lie in (0, 1)")
    return _eigenspace_cached(int(degree), int(N), float(s))


def eigenspace_basis(m: int, N: int, s: float, m_max: int = 8) -> EigenspaceBasis:
    """Orthonormal basis of the m-th eigenspace, indexed like ``eigenvalue``.

    For N = 2 the functions have degree m; for N = 1 they have degree 2m - 1
    (even degrees carry no eigenfunctions there).
    """
    if m < 1 or m > m_max:
        raise ConfigError(f"eigenvalue index must lie in 1..{m_max}")
    degree = 2 * m - 1 if N == 1 else m
    return eigenspace_of_degree(degree, N, s, max_degree=max(15, degree))
