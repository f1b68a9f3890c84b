"""Weighted quadrature on half-spheres, half-balls and their flat bases.

Points are stored as rows ``z = (y_1, ..., y_N, t)``. Every rule carries the
weight ``t^(1-2s)`` in its weights, so an integral is ``weights @ f(points)``.
All rules split along the hyperplane y_N = 0 so integrands that are only
piecewise smooth across it (reflected coefficients) still converge fast.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

__all__ = [
    "Rule",
    "half_sphere",
    "half_ball",
    "flat_ball",
    "flat_sphere",
    "radial_rule",
]


@dataclass(frozen=True)
class Rule:
    """Nodes and weights; ``integrate(values)`` sums along the first axis."""

    points: np.ndarray
    weights: np.ndarray

    def integrate(self, values) -> np.ndarray:
        return np.tensordot(self.weights, np.asarray(values), axes=(0, 0))

    def __len__(self) -> int:
        return len(self.weights)


@lru_cache(maxsize=64)
def _jacobi(n: int, alpha: float, beta: float):
    x, w = roots_jacobi(n, alpha, beta)
    return x, w


@lru_cache(maxsize=64)
def _legendre(n: int):
    return roots_legendre(n)


@lru_cache(maxsize=64)
def _half_sphere_unit(N: int, s: float, n_polar: int, n_azimuth: int):
    a = 1.0 - 2.0 * s
    if N == 1:
        # phi in (0, pi/2), weight sin(phi)^a singular at phi = 0
        x, w = _jacobi(n_polar // 2, 0.0, a)
        phi = 0.25 * np.pi * (1.0 + x)
        smooth = (np.sin(phi) / (1.0 + x)) ** a
        wt = w * smooth * 0.25 * np.pi
        c, sn = np.cos(phi), np.sin(phi)
        pts = np.concatenate([np.column_stack([c, sn]), np.column_stack([-c, sn])])
        wts = np.concatenate([wt, wt])
        return pts, wts
    if N == 2:
        # polar angle from the t-axis, weight cos^a * sin, singular at pi/2
        x, w = _jacobi(n_polar, a, 0.0)
        th = 0.25 * np.pi * (1.0 + x)
        smooth = (np.cos(th) / (1.0 - x)) ** a * np.sin(th)
        wt = w * smooth * 0.25 * np.pi
        xo, wo = _legendre(n_azimuth // 2)
        om = 0.5 * np.pi * (1.0 + xo)
        om = np.concatenate([om, om + np.pi])
        wo = np.concatenate([wo, wo]) * 0.5 * np.pi
        T, O = np.meshgrid(th, om, indexing="ij")
        W = np.outer(wt, wo)
        pts = np.column_stack(
            [
                (np.sin(T) * np.cos(O)).ravel(),
                (np.sin(T) * np.sin(O)).ravel(),
                np.cos(T).ravel(),
            ]
        )
        return pts, W.ravel()
    raise ValueError(f"unsupported dimension N={N}")


def half_sphere(N: int, s: float, n_polar: int | None = None, n_azimuth: int = 64, radius: float = 1.0) -> Rule:
    """Rule for ``int_{S_r^+} t^(1-2s) f dS``.

    Defaults: 128 polar nodes for N=1, a 64 x 64 product for N=2.
    """
    if n_polar is None:
        n_polar = 128 if N == 1 else 64
    pts, wts = _half_sphere_unit(N, float(s), int(n_polar), int(n_azimuth))
    scale = radius ** (N + 1.0 - 2.0 * s)
    return Rule(pts * radius, wts * scale)


@lru_cache(maxsize=64)
def _radial_unit(n: int, power: float):
    x, w = _jacobi(n, 0.0, power)
    rho = 0.5 * (1.0 + x)
    return rho, w * 0.5 ** (power + 1.0)


def radial_rule(r: float, n: int = 64, power: float = 0.0) -> Rule:
    """Gauss-Jacobi rule for ``int_0^r rho^power f(rho) drho``."""
    rho, w = _radial_unit(int(n), float(power))
    return Rule(rho * r, w * r ** (power + 1.0))


def half_ball(
    N: int,
    s: float,
    r: float,
    n_radial: int = 64,
    n_polar: int | None = None,
    n_azimuth: int = 64,
    extra_power: float = 0.0,
) -> Rule:
    """Rule for ``int_{B_r^+} t^(1-2s) |z|^extra_power f dz`` in polar form."""
    sph = half_sphere(N, s, n_polar, n_azimuth)
    rad = radial_rule(r, n_radial, N + 1.0 - 2.0 * s + extra_power)
    pts = (rad.points[:, None, None] * sph.points[None, :, :]).reshape(-1, N + 1)
    wts = np.outer(rad.weights, sph.weights).ravel()
    return Rule(pts, wts)


def flat_ball(N: int, r: float, n: int = 64, n_azimuth: int = 64) -> Rule:
    """Rule for ``int_{B_r'} f dy``; points are rows of y (length N)."""
    if N == 1:
        x, w = _legendre(n)
        y = 0.5 * r * (1.0 + x)
        pts = np.concatenate([-y, y])[:, None]
        return Rule(pts, np.concatenate([w, w]) * 0.5 * r)
    if N == 2:
        rad = radial_rule(r, n, 1.0)
        xo, wo = _legendre(n_azimuth // 2)
        om = 0.5 * np.pi * (1.0 + xo)
        om = np.concatenate([om, om + np.pi])
        wo = np.concatenate([wo, wo]) * 0.5 * np.pi
        R, O = np.meshgrid(rad.points, om, indexing="ij")
        pts = np.column_stack([(R * np.cos(O)).ravel(), (R * np.sin(O)).ravel()])
        return Rule(pts, np.outer(rad.weights, wo).ravel())
    raise ValueError(f"unsupported dimension N={N}")


def flat_sphere(N: int, r: float, n_azimuth: int = 64) -> Rule:
    """Rule for ``int_{S_r'} f dS'`` (two points with unit mass when N=1)."""
    if N == 1:
        return Rule(np.array([[-r], [r]]), np.ones(2))
    if N == 2:
        xo, wo = _legendre(n_azimuth // 2)
        om = 0.5 * np.pi * (1.0 + xo)
        om = np.concatenate([om, om + np.pi])
        wo = np.concatenate([wo, wo]) * 0.5 * np.pi * r
        return Rule(np.column_stack([r * np.cos(om), r * np.sin(om)]), wo)
    raise ValueError(f"unsupported dimension N={N}")
