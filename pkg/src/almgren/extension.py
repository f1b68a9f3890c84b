"""Extension of a spectral function to the half-cylinder Omega x (0, inf).

Each eigenmode is carried by the kernel ``psi_s(sqrt(mu_k) t)`` where
``psi_s(xi) = 2^(1-s) / Gamma(s) * xi^s K_s(xi)`` solves
``psi'' + (1-2s)/xi psi' = psi``, ``psi(0) = 1`` and decays at infinity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .eigenbasis import SpectralFunction
from .errors import ConfigError, NumericError
from .quadrature import radial_rule
from .special import bessel_k_pair, gamma, richardson

__all__ = [
    "ExtensionKernel",
    "ExtensionField",
    "NeumannTrace",
    "build_kernel",
    "extend",
    "neumann_trace",
    "kappa_oracle",
    "energy_perturbation",
]


def kappa_oracle(s: float) -> float:
    """Closed form ``2^(1-2s) Gamma(1-s) / Gamma(s)`` of the Neumann constant."""
    return 2.0 ** (1.0 - 2.0 * s) * gamma(1.0 - s) / gamma(s)


def _kernel_values(s: float, xi, derivative: bool = True):
    xi = np.asarray(xi, dtype=float)
    flat = xi.ravel()
    psi = np.ones_like(flat)
    dpsi = np.empty_like(flat)
    pos = flat > 0
    const = 2.0 ** (1.0 - s) / gamma(s)
    if np.any(pos):
        x = flat[pos]
        mu = -s if s <= 0.5 else s - 1.0
        ka, kb = bessel_k_pair(mu, x)
        k_s, k_1ms = (ka, kb) if s <= 0.5 else (kb, ka)
        xs = x**s
        psi[pos] = const * xs * k_s
        dpsi[pos] = -const * xs * k_1ms
    if np.any(~pos):
        dpsi[~pos] = -1.0 if s == 0.5 else (0.0 if s > 0.5 else -math.inf)
    if derivative:
        return psi.reshape(xi.shape), dpsi.reshape(xi.shape)
    return psi.reshape(xi.shape)


@dataclass(frozen=True)
class ExtensionKernel:
    """Kernel psi_s with its table, Neumann constant and self-checks.

    ``kappa`` is the Richardson-extrapolated limit of ``-xi^(1-2s) psi'(xi)``
    at 0; ``kappa_oracle`` is the Gamma-function closed form and
    ``kappa_gap`` their difference. ``ode_residual`` is the largest scaled
    residual of the kernel ODE over the interior table nodes, with psi''
    taken from extrapolated finite differences of psi' and the residual
    scaled by ``|psi''| + |psi'|/xi + |psi|``.
    """

    s: float
    grid: np.ndarray
    psi_table: np.ndarray
    dpsi_table: np.ndarray
    kappa: float
    kappa_error: float
    kappa_oracle: float
    ode_residual: float
    _spline: CubicHermiteSpline = field(repr=False, compare=False, default=None)

    @property
    def kappa_gap(self) -> float:
        return abs(self.kappa - self.kappa_oracle)

    def psi(self, xi) -> np.ndarray:
        return _kernel_values(self.s, xi, derivative=False)

    def psi_and_derivative(self, xi):
        return _kernel_values(self.s, xi)

    def interpolate(self, xi) -> np.ndarray:
        """Cubic Hermite interpolation of the table in log(xi)."""
        xi = np.asarray(xi, dtype=float)
        out = np.where(xi > self.grid[-1], 0.0, 1.0)
        inside = (xi >= self.grid[0]) & (xi <= self.grid[-1])
        out = out.astype(float)
        out[inside] = self._spline(np.log(xi[inside]))
        return out


def _second_derivative_fd(s: float, xi: np.ndarray) -> np.ndarray:
    ests = []
    for hrel in (1e-3, 5e-4, 2.5e-4):
        h = hrel * xi
        ests.append((_kernel_values(s, xi + h)[1] - _kernel_values(s, xi - h)[1]) / (2.0 * h))
    a, b, c = ests
    r1 = [(4.0 * b - a) / 3.0, (4.0 * c - b) / 3.0]
    return (16.0 * r1[1] - r1[0]) / 15.0


def _neumann_limit(s: float, sample, t0: float = 1e-3) -> tuple[float, float]:
    ts = [t0, t0 / 2.0, t0 / 4.0]
    vals = [sample(t) for t in ts]
    exps = [2.0 - 2.0 * s]
    if abs(2.0 - 2.0 * s - 2.0) > 0.05:
        exps.append(2.0)
    return richardson(vals, exps, 2.0)


def build_kernel(s: float, n_grid: int = 400, xi_max: float = 40.0, tol: float = 1e-8) -> ExtensionKernel:
    """Tabulate psi_s on a log grid and compute kappa_s.

    Raises ``NumericError`` if the ODE residual or the kappa extrapolation
    misses ``tol``.
    """
    s = float(s)
    if not 0.0 < s < 1.0:
        raise ConfigError(f"order must lie in (0, 1), got {s}")
    grid = np.logspace(-8.0, math.log10(xi_max), n_grid)
    psi, dpsi = _kernel_values(s, grid)
    interior = grid[1:-1]
    p_in, dp_in = psi[1:-1], dpsi[1:-1]
    d2 = _second_derivative_fd(s, interior)
    drift = (1.0 - 2.0 * s) / interior * dp_in
    scale = np.abs(d2) + np.abs(dp_in) / interior + np.abs(p_in)
    resid = float(np.max(np.abs(d2 + drift - p_in) / scale))
    kappa, kerr = _neumann_limit(s, lambda x: float(-(x ** (1.0 - 2.0 * s)) * _kernel_values(s, x)[1]))
    if resid > tol:
        raise NumericError(f"kernel ODE residual {resid:.3e} exceeds {tol:.1e}")
    if not np.all(np.diff(psi) <= 0) or psi[-1] > 1e-15:
        raise NumericError("kernel is not strictly decreasing to zero")
    spline = CubicHermiteSpline(np.log(grid), psi, dpsi * grid)
    return ExtensionKernel(s, grid, psi, dpsi, kappa, kerr, kappa_oracle(s), resid, spline)


class ExtensionField:
    """Evaluator of ``U(x, t) = sum_k c_k phi_k(x) psi_s(sqrt(mu_k) t)``.

    Only modes with nonzero coefficients are summed.
    """

    def __init__(self, u: SpectralFunction, kernel: ExtensionKernel):
        self.u = u
        self.kernel = kernel
        self.s = kernel.s
        self._sup = u.support
        self._c = u.coefficients[self._sup]
        self._sqrt_mu = np.sqrt(u.basis.eigenvalues[self._sup])

    @property
    def N(self) -> int:
        return self.u.domain.N

    def value(self, x, t) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        t = np.broadcast_to(np.asarray(t, dtype=float), (x.shape[0],))
        if self._sup.size == 0:
            return np.zeros(x.shape[0])
        phi = self.u.basis.evaluate(x, self._sup)
        psi = self.kernel.psi(np.outer(t, self._sqrt_mu))
        return (phi * psi) @ self._c

    def gradient(self, x, t) -> np.ndarray:
        """Rows ``(dU/dx_1, ..., dU/dx_N, dU/dt)``."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        t = np.broadcast_to(np.asarray(t, dtype=float), (x.shape[0],))
        out = np.zeros((x.shape[0], self.N + 1))
        if self._sup.size == 0:
            return out
        phi = self.u.basis.evaluate(x, self._sup)
        dphi = self.u.basis.gradient(x, self._sup)
        psi, dpsi = self.kernel.psi_and_derivative(np.outer(t, self._sqrt_mu))
        out[:, : self.N] = np.einsum("nkd,nk,k->nd", dphi, psi, self._c)
        out[:, self.N] = (phi * dpsi) @ (self._c * self._sqrt_mu)
        return out

    def value_and_gradient(self, x, t):
        return self.value(x, t), self.gradient(x, t)

    def tail_bound(self, t) -> np.ndarray:
        """Rough bound for the discarded modes k > K.

        Assumes the discarded coefficients are no larger than the largest
        coefficient in the upper half of the kept ones and that the next K
        modes decay like the last kept mode.
        """
        c = np.abs(self.u.coefficients)
        K = len(c)
        cmax = float(c[K // 2 :].max()) if K > 1 else float(c.max())
        mu_K = float(self.u.basis.eigenvalues[-1])
        return cmax * K * self.kernel.psi(math.sqrt(mu_K) * np.asarray(t, dtype=float))


def extend(u: SpectralFunction, s_or_kernel) -> ExtensionField:
    kernel = s_or_kernel if isinstance(s_or_kernel, ExtensionKernel) else build_kernel(s_or_kernel)
    return ExtensionField(u, kernel)


@dataclass(frozen=True)
class NeumannTrace:
    value: np.ndarray
    error: np.ndarray
    flagged: bool


def neumann_trace(field: ExtensionField, x, t0: float = 1e-3, rtol: float = 1e-4) -> NeumannTrace:
    """Extrapolate ``-t^(1-2s) dU/dt (x, t)`` to t = 0 at each point of x."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    s = field.s
    N = field.N

    def sample(t):
        return -(t ** (1.0 - 2.0 * s)) * field.gradient(x, np.full(x.shape[0], t))[:, N]

    ts = [t0, t0 / 2.0, t0 / 4.0]
    vals = np.array([sample(t) for t in ts])
    out = np.empty(x.shape[0])
    err = np.empty(x.shape[0])
    exps = [2.0 - 2.0 * s]
    if abs(2.0 - 2.0 * s - 2.0) > 0.05:
        exps.append(2.0)
    for i in range(x.shape[0]):
        out[i], err[i] = richardson(vals[:, i], exps, 2.0)
    scale = np.maximum(np.abs(out), 1e-300)
    flagged = bool(np.any(err > rtol * scale) and np.any(np.abs(out) > 0))
    return NeumannTrace(out, err, flagged)


def energy_perturbation(kernel: ExtensionKernel, mu: float, T: float = 1.0, delta: float = 1e-2, n: int = 200):
    """Weighted Dirichlet energy of one mode under a bump perturbation.

    The profile ``psi(sqrt(mu) t)`` is multiplied by ``1 + d sin(pi t / T)``
    for ``d`` in ``(-delta, 0, delta)``; the perturbation keeps the values at
    t = 0 and t = T. Returns the three energies (per unit L2 mass of the
    eigenfunction) on the truncated cylinder Omega x (0, T).
    """
    s = kernel.s
    rule = radial_rule(T, n, 1.0 - 2.0 * s)
    t = rule.points
    rt = math.sqrt(mu)
    psi, dpsi = kernel.psi_and_derivative(rt * t)
    bump = np.sin(math.pi * t / T)
    dbump = math.pi / T * np.cos(math.pi * t / T)
    energies = []
    for d in (-delta, 0.0, delta):
        f = psi * (1.0 + d * bump)
        df = rt * dpsi * (1.0 + d * bump) + psi * d * dbump
        energies.append(float(rule.integrate(df**2 + mu * f**2)))
    return tuple(energies)
