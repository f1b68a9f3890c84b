"""Spectral fractional powers of the Dirichlet Laplacian and the weak form of
``(-Delta)^s u = h u``."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .eigenbasis import SpectralFunction, _check_same, hs_scalar_product
from .errors import ConfigError

__all__ = [
    "FractionalOrder",
    "apply_fractional_laplacian",
    "riesz_pairing",
    "weak_residual",
    "WeakResidual",
    "as_pointwise",
]


@dataclass(frozen=True)
class FractionalOrder:
    """Order s in (0, 1) together with the critical trace exponent.

    ``critical_exponent`` is 2N/(N-2s); it is infinite in the borderline
    case N = 2s (N = 1, s = 1/2), which the shipped scenarios use.
    """

    s: float
    N: int

    def __post_init__(self):
        if not 0.0 < self.s < 1.0:
            raise ConfigError(f"fractional order must lie in (0, 1), got {self.s}")
        if self.N < 2 * self.s:
            raise ConfigError(f"need N >= 2s, got N={self.N}, s={self.s}")

    @property
    def critical_exponent(self) -> float:
        gap = self.N - 2.0 * self.s
        return math.inf if gap == 0 else 2.0 * self.N / gap


def apply_fractional_laplacian(v: SpectralFunction, s: float) -> SpectralFunction:
    """Coefficients ``mu_k^s c_k``; s = 1 gives the Dirichlet Laplacian."""
    if not 0.0 < s <= 1.0:
        raise ConfigError(f"order must lie in (0, 1], got {s}")
    c = v.basis.eigenvalues**s * v.coefficients
    return SpectralFunction(v.basis, c, role="dual")


def riesz_pairing(v1: SpectralFunction, v2: SpectralFunction, s: float) -> float:
    """Duality pairing of ``(-Delta)^s v1`` with ``v2``."""
    _check_same(v1, v2)
    dual = apply_fractional_laplacian(v1, s)
    return float(np.dot(dual.coefficients, v2.coefficients))


def as_pointwise(h):
    """Wrap a constant or callable potential as a callable on point rows."""
    if callable(h):
        return h
    value = float(h)
    return lambda x: np.full(np.atleast_2d(x).shape[0], value)


@dataclass(frozen=True)
class WeakResidual:
    """``value`` is normalized by the H^s norm of u, ``raw`` is not."""

    value: float
    raw: float
    per_test: np.ndarray
    flags: tuple = ()


def weak_residual(u: SpectralFunction, h, s: float, M: int | None = None, n_quad: int | None = None) -> WeakResidual:
    """Largest weak-form defect over the first M eigenfunctions.

    For each test function phi_j the defect is
    ``|(u, phi_j)_{H^s} - int h u phi_j dx|``.
    """
    basis = u.basis
    M = basis.K if M is None else min(int(M), basis.K)
    h = as_pointwise(h)
    pts, w = basis.quadrature(n_quad)
    Phi = basis.evaluate(pts, np.arange(M))
    hu = np.asarray(h(pts), dtype=float) * u(pts)
    rhs = Phi.T @ (w * hu)
    lhs = basis.eigenvalues[:M] ** s * u.coefficients[:M]
    per = np.abs(lhs - rhs)
    norm = math.sqrt(hs_scalar_product(u, u, s))
    raw = float(per.max())
    flags = ()
    if not np.all(np.isfinite(per)):
        flags = ("quadrature",)
    return WeakResidual(raw / norm if norm > 0 else raw, raw, per, flags)
