"""Blow-up analysis at the boundary point.

The rescaled fields ``V^lam(z) = W(lam z) / sqrt(H(lam))`` converge to a
homogeneous profile ``|z|^m0 sum_k beta_k Y_{m0,k}(z/|z|)``. This module
computes the Fourier coefficients of ``W(lam .)`` on the half-sphere, the
correction term Upsilon, the limit coefficients beta by two independent
routes, and the discrepancy between the rescaled field and the profile.

Route A uses the closed formula for beta at a fixed radius r. Each Upsilon
piece is an integral over a half-ball, a half-sphere or a flat ball; after
polar decomposition the nested radial integrals collapse to single ones by
swapping the order of integration, and every remaining integrand is a power
of the radius times a smooth shell function, integrated by Gauss-Jacobi.
Route B extrapolates ``lam^-m0 phi_{m0,k}(lam)`` to lam = 0.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DegenerateError
from .frequency import LocalProblem, eta_exponents, extrapolate_limit, height
from .quadrature import flat_ball, flat_sphere, half_ball, half_sphere, radial_rule
from .sphere_eig import Polynomial, SphericalEigenfunction, admissible_degrees, eigenspace_of_degree

__all__ = [
    "RescaledField",
    "BetaEstimate",
    "BlowupReport",
    "rescale",
    "eigenfunctions_up_to",
    "fourier_coefficients",
    "upsilon",
    "beta_route_a",
    "beta_route_b",
    "beta_coefficients",
    "limit_profile",
    "h1_discrepancy",
    "trace_discrepancy",
    "profile_convergence",
    "blowup_analysis",
]


class RescaledField:
    """``V(z) = W(lam z) / sqrt(H(lam))`` with its gradient."""

    def __init__(self, W, lam: float, H: float):
        if not H > 1e-300:
            raise DegenerateError(f"height {H:.3e} at lambda={lam} is too small to normalize")
        self.W = W
        self.lam = float(lam)
        self.H = float(H)
        self._scale = 1.0 / math.sqrt(H)

    def value(self, z) -> np.ndarray:
        z = np.atleast_2d(np.asarray(z, dtype=float))
        return self.W.value(self.lam * z) * self._scale

    def gradient(self, z) -> np.ndarray:
        z = np.atleast_2d(np.asarray(z, dtype=float))
        return self.W.gradient(self.lam * z) * (self.lam * self._scale)


def rescale(problem: LocalProblem, lam: float) -> RescaledField:
    """Normalized blow-up of the problem's field at scale lam."""
    if not 0.0 < lam < problem.r0:
        raise ConfigError(f"lambda must lie in (0, r0), got {lam}")
    return RescaledField(problem.field, lam, problem.height(lam))


class _ScaledField:
    """``z -> c W(lam z)``, the unnormalized blow-up ``lam^-m0 W(lam z)``."""

    def __init__(self, W, lam: float, factor: float):
        self.W, self.lam, self.factor = W, lam, factor

    def value(self, z):
        return self.factor * self.W.value(self.lam * np.atleast_2d(z))

    def gradient(self, z):
        return (self.factor * self.lam) * self.W.gradient(self.lam * np.atleast_2d(z))


def eigenfunctions_up_to(N: int, s: float, m_max: int) -> list[SphericalEigenfunction]:
    """All basis eigenfunctions of admissible degree <= m_max, by degree then index."""
    out = []
    for m in admissible_degrees(N, m_max):
        out.extend(eigenspace_of_degree(m, N, s, max_degree=max(15, m_max)).functions)
    return out


def labels(funcs) -> list[str]:
    return [f"phi_{Y.degree}_{Y.index + 1}" for Y in funcs]


def fourier_coefficients(W, lam: float, funcs, s: float, orders=None) -> np.ndarray:
    """``phi_{m,k}(lam) = int_{S^+} theta^(1-2s) W(lam theta) Y_{m,k}(theta) dS``."""
    N = funcs[0].N
    o = orders
    sph = half_sphere(N, s, getattr(o, "n_polar", None), getattr(o, "n_azimuth", 64))
    w = W.value(lam * sph.points)
    Y = np.column_stack([Y.value(sph.points) for Y in funcs])
    return sph.integrate(w[:, None] * Y)


# ---- Upsilon -------------------------------------------------------------
def _shell_vol_surf(problem: LocalProblem, sigma: np.ndarray, Y: SphericalEigenfunction, sph):
    """Shell functions of the volume and surface terms at radii sigma.

    ``q_vol(sigma) = int_S+ theta^(1-2s) (A~ - Id) grad W(sigma theta) . grad_S Y(theta)``
    ``q_surf(sigma) = int_S+ theta^(1-2s) (A~ - Id) grad W(sigma theta) . theta Y(theta)``
    """
    th = sph.points
    gS = Y.tangential_gradient(th)
    Yv = Y.value(th)
    nq, M = len(th), th.shape[1]
    z = (sigma[:, None, None] * th[None]).reshape(-1, M)
    A = problem.cf.matrix(z) - np.eye(M)
    v = np.einsum("nij,nj->ni", A, problem.field.gradient(z)).reshape(len(sigma), nq, M)
    qv = np.einsum("snj,nj,n->s", v, gS, sph.weights)
    qs = np.einsum("snj,nj,n->s", v, th, Yv * sph.weights)
    return qv, qs


def _shell_base(problem: LocalProblem, sigma: np.ndarray, Y: SphericalEigenfunction, n_azimuth: int = 64):
    """``q_base(sigma) = int_S' h~(sigma th) W(sigma th, 0) Y(th, 0) dS'``."""
    N = problem.N
    ring = flat_sphere(N, 1.0, n_azimuth)
    th = ring.points
    th0 = np.column_stack([th, np.zeros(len(th))])
    Yv = Y.value(th0)
    y = (sigma[:, None, None] * th[None]).reshape(-1, N)
    vals = problem.cf.h_tilde(y) * problem.field.value(np.column_stack([y, np.zeros(len(y))]))
    return vals.reshape(len(sigma), len(th)) @ (ring.weights * Yv)


def upsilon(problem: LocalProblem, lam: float, Y: SphericalEigenfunction, orders=None) -> float:
    """Upsilon_{m,k}(lam) as the sum of its volume, surface and base integrals."""
    o = orders or problem.orders
    N, s = problem.N, problem.s
    M = N + 1
    ball = half_ball(N, s, lam, o.n_radial, o.n_polar, o.n_azimuth, extra_power=-1.0)
    z = ball.points
    th = z / np.linalg.norm(z, axis=1)[:, None]
    A = problem.cf.matrix(z) - np.eye(M)
    v = np.einsum("nij,nj->ni", A, problem.field.gradient(z))
    vol = -float(ball.integrate(np.einsum("ni,ni->n", v, Y.tangential_gradient(th))))
    sph = half_sphere(N, s, o.n_polar, o.n_azimuth, radius=lam)
    zs = sph.points
    vs = np.einsum("nij,nj->ni", problem.cf.matrix(zs) - np.eye(M), problem.field.gradient(zs))
    surf = float(sph.integrate(np.einsum("ni,ni->n", vs, zs / lam) * Y.value(zs / lam)))
    base = 0.0
    if not problem.cf.potential.is_zero:
        fb = flat_ball(N, lam, o.n_base, o.n_azimuth)
        y = fb.points
        r = np.linalg.norm(y, axis=1)
        y0 = np.column_stack([y / r[:, None], np.zeros(len(y))])
        wv = problem.field.value(np.column_stack([y, np.zeros(len(y))]))
        base = problem.kappa * float(fb.integrate(problem.cf.h_tilde(y) * wv * Y.value(y0)))
    return vol + surf + base


@dataclass(frozen=True)
class BetaEstimate:
    values: np.ndarray
    errors: np.ndarray
    method: str
    rates: np.ndarray = field(default_factory=lambda: np.zeros(0))


def _route_a_single(problem: LocalProblem, r: float, m0: int, Y: SphericalEigenfunction, n: int, orders) -> float:
    N, s = problem.N, problem.s
    o = orders
    sph = half_sphere(N, s, o.n_polar, o.n_azimuth)
    g = m0 + N - 2.0 * s
    c1 = m0 * r ** (-2.0 * m0 - N + 2.0 * s) / (2.0 * m0 + N - 2.0 * s)
    c2 = g / (2.0 * m0 + N - 2.0 * s)
    rb1 = r ** (-g)  # r^(b+1) with b = -m0-N-1+2s

    phi = float(sph.integrate(problem.field.value(r * sph.points) * Y.value(sph.points)))

    # volume and surface pieces on the plain and the r^(N-2s) weighted rule
    plain = radial_rule(r, n, 0.0)
    wtd = radial_rule(r, n, N - 2.0 * s)
    qv0, qs0 = _shell_vol_surf(problem, plain.points, Y, sph)
    qv1, qs1 = _shell_vol_surf(problem, wtd.points, Y, sph)
    sp, sw = plain.points, wtd.points
    # int rho^(m0-1) Upsilon
    i1 = -float(wtd.integrate(qv1 * (r**m0 - sw**m0) / m0))
    i1 += float(wtd.integrate(sw**m0 * qs1))
    # int rho^b Upsilon
    i2 = -(float(plain.integrate(sp ** (-m0) * qv0)) - rb1 * float(wtd.integrate(qv1))) / g
    i2 += float(plain.integrate(sp ** (-m0) * qs0))

    if not problem.cf.potential.is_zero:
        kap = problem.kappa
        b_n = radial_rule(r, n, N - 1.0)
        b_s = radial_rule(r, n, 2.0 * s - 1.0)
        qb_n = _shell_base(problem, b_n.points, Y, o.n_azimuth)
        qb_s = _shell_base(problem, b_s.points, Y, o.n_azimuth)
        i1 += kap * float(b_n.integrate(qb_n * (r**m0 - b_n.points**m0) / m0))
        i2 += kap / g * (float(b_s.integrate(b_s.points ** (-m0) * qb_s)) - rb1 * float(b_n.integrate(qb_n)))
    return phi / r**m0 + c1 * i1 + c2 * i2


def beta_route_a(problem: LocalProblem, m0: int, funcs, r: float | None = None, n: int = 64, orders=None) -> BetaEstimate:
    """beta by the closed formula at radius r; the error is the change when
    the radial node count is halved."""
    r = 0.5 * problem.r0 if r is None else float(r)
    if not 0.0 < r <= problem.r0:
        raise ConfigError("route A radius must lie in (0, r0]")
    o = orders or problem.orders
    vals = np.array([_route_a_single(problem, r, m0, Y, n, o) for Y in funcs])
    coarse = np.array([_route_a_single(problem, r, m0, Y, n // 2, o) for Y in funcs])
    return BetaEstimate(vals, np.abs(vals - coarse), "formula")


def beta_route_b(lambdas, table: np.ndarray, m0: int, delta: float) -> BetaEstimate:
    """beta as the limit of ``lam^-m0 phi_{m0,k}(lam)``; ``table`` has one
    column per eigenfunction of degree m0. ``rates`` are the empirical
    convergence exponents."""
    lam = np.asarray(lambdas, dtype=float)
    seq = table * lam[:, None] ** (-m0)
    vals, errs, rates, methods = [], [], [], set()
    for j in range(seq.shape[1]):
        v, e, how = extrapolate_limit(lam, seq[:, j], delta)
        vals.append(v)
        errs.append(e)
        methods.add(how)
        dev = np.abs(seq[:, j] - v)
        tail = slice(len(lam) // 2, len(lam) - 1)
        ok = dev[tail] > 1e-14 * max(abs(v), 1e-300)
        if np.count_nonzero(ok) >= 2:
            rates.append(float(np.polyfit(np.log(lam[tail][ok]), np.log(dev[tail][ok]), 1)[0]))
        else:
            rates.append(math.nan)
    return BetaEstimate(np.array(vals), np.array(errs), "+".join(sorted(methods)), np.array(rates))


def beta_coefficients(problem: LocalProblem, m0: int, lambdas, r: float | None = None, threads: int = 1):
    """Both routes for the degree-m0 coefficients; returns ``(A, B, gap)``.

    ``gap`` is the largest route difference relative to the largest |beta|.
    """
    funcs = eigenspace_of_degree(m0, problem.N, problem.s, max_degree=max(15, m0)).functions
    if not funcs:
        raise ConfigError(f"degree {m0} carries no eigenfunctions for N={problem.N}")
    a = beta_route_a(problem, m0, funcs, r)
    table = _coefficient_table(problem, lambdas, funcs, threads)
    delta = eta_exponents(problem.N, problem.s, problem.eps)[1]
    b = beta_route_b(lambdas, table, m0, delta)
    gap = float(np.max(np.abs(a.values - b.values)) / max(np.max(np.abs(b.values)), 1e-300))
    return a, b, gap


def _coefficient_table(problem: LocalProblem, lambdas, funcs, threads: int = 1) -> np.ndarray:
    def one(lam):
        return fourier_coefficients(problem.field, float(lam), funcs, problem.s, problem.orders)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            rows = list(ex.map(one, lambdas))
    else:
        rows = [one(lam) for lam in lambdas]
    return np.array(rows)


def limit_profile(funcs, beta) -> Polynomial:
    """``sum_k beta_k P_{m0,k}``, which equals ``|z|^m0 sum beta_k Y(z/|z|)``."""
    out = funcs[0].polynomial * float(beta[0])
    for Y, b in zip(funcs[1:], beta[1:]):
        out = out + Y.polynomial * float(b)
    return out


def h1_discrepancy(field_a, field_b, N: int, s: float, orders=None) -> float:
    """Equivalent weighted H^1(B_1^+) distance: the half-sphere L2 norm plus
    the half-ball gradient L2 norm, combined in quadrature."""
    n_polar = getattr(orders, "n_polar", None)
    n_az = getattr(orders, "n_azimuth", 64)
    n_rad = getattr(orders, "n_radial", 64)
    sph = half_sphere(N, s, n_polar, n_az)
    d = field_a.value(sph.points) - field_b.value(sph.points)
    ball = half_ball(N, s, 1.0, n_rad, n_polar, n_az)
    g = field_a.gradient(ball.points) - field_b.gradient(ball.points)
    return math.sqrt(max(float(sph.integrate(d * d)) + float(ball.integrate(np.einsum("ni,ni->n", g, g))), 0.0))


class _Zero:
    def value(self, z):
        return np.zeros(np.atleast_2d(z).shape[0])

    def gradient(self, z):
        z = np.atleast_2d(z)
        return np.zeros_like(z, dtype=float)


def trace_discrepancy(problem: LocalProblem, lam: float, m0: int, profile: Polynomial, n: int = 64) -> tuple[float, float]:
    """H^1(B_1') distance between ``lam^-m0 W(lam y, 0)`` and the profile trace.

    Returns ``(distance, profile norm)``. Both traces are odd in y_N, so the
    side ``y_N < 0`` (the domain) and its mirror contribute equally.
    """
    N = problem.N
    fb = flat_ball(N, 1.0, n)
    y = fb.points
    z = np.column_stack([y, np.zeros(len(y))])
    f = lam ** (-m0)
    d = f * problem.field.value(lam * z) - profile.value(z)
    gd = f * lam * problem.field.gradient(lam * z)[:, :N] - profile.gradient(z)[:, :N]
    gp = profile.gradient(z)[:, :N]
    pv = profile.value(z)
    dist = math.sqrt(float(fb.integrate(d * d + np.einsum("ni,ni->n", gd, gd))))
    norm = math.sqrt(float(fb.integrate(pv * pv + np.einsum("ni,ni->n", gp, gp))))
    return dist, norm


def profile_convergence(problem: LocalProblem, m0: int, profile: Polynomial, lambdas, threads: int = 1) -> np.ndarray:
    """``d(lam) = ||lam^-m0 W(lam .) - profile||`` in the weighted H^1(B_1^+) norm."""

    def one(lam):
        return h1_discrepancy(_ScaledField(problem.field, float(lam), float(lam) ** (-m0)), profile, problem.N, problem.s, problem.orders)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return np.array(list(ex.map(one, lambdas)))
    return np.array([one(lam) for lam in lambdas])


@dataclass(frozen=True)
class BlowupReport:
    """Everything measured along the blow-up grid.

    ``table`` holds ``phi_{m,k}(lam)`` with one column per entry of
    ``labels``; ``beta_a``/``beta_b`` are the two routes for degree m0.
    """

    lambdas: np.ndarray
    m0: int
    labels: list
    degrees: list
    table: np.ndarray
    beta_a: BetaEstimate
    beta_b: BetaEstimate
    route_gap: float
    discrepancy: np.ndarray
    profile_norm: float
    trace: np.ndarray
    trace_norm: float
    dominance: float
    below_order: float
    bessel_ok: bool
    normalization_error: float
    upsilon_scaled: np.ndarray
    classified: bool
    flags: tuple = ()

    @property
    def beta(self) -> np.ndarray:
        return self.beta_a.values


def blowup_analysis(
    problem: LocalProblem,
    m0: int,
    lambdas,
    r: float | None = None,
    extra_orders: int = 2,
    route_tolerance: float = 0.05,
    threads: int = 1,
) -> BlowupReport:
    """Run the blow-up pipeline for a classified order m0."""
    N, s = problem.N, problem.s
    lambdas = np.asarray(lambdas, dtype=float)
    funcs = eigenfunctions_up_to(N, s, m0 + extra_orders)
    degs = [Y.degree for Y in funcs]
    top = [j for j, d in enumerate(degs) if d == m0]
    if not top:
        raise ConfigError(f"degree {m0} carries no eigenfunctions for N={N}")
    table = _coefficient_table(problem, lambdas, funcs, threads)
    delta = eta_exponents(N, s, problem.eps)[1]
    beta_b = beta_route_b(lambdas, table[:, top], m0, delta)
    beta_a = beta_route_a(problem, m0, [funcs[j] for j in top], r)
    scale = max(float(np.max(np.abs(beta_a.values))), 1e-300)
    gap = float(np.max(np.abs(beta_a.values - beta_b.values))) / scale
    flags = []
    if gap > route_tolerance:
        flags.append("route-disagreement")
    if not np.any(np.abs(beta_a.values) > 1e-12):
        flags.append("zero-beta")

    # normalization and Bessel inequality at every lambda
    sph = half_sphere(N, s, problem.orders.n_polar, problem.orders.n_azimuth)
    norm_err, bessel = 0.0, True
    for i, lam in enumerate(lambdas):
        V = rescale(problem, float(lam))
        z = sph.points
        norm_err = max(norm_err, abs(float(sph.integrate(problem.cf.mu(lam * z) * V.value(z) ** 2)) - 1.0))
        w2 = float(sph.integrate(problem.field.value(lam * z) ** 2))
        bessel &= bool(np.sum(table[i] ** 2) <= w2 * (1.0 + 1e-9) + 1e-300)

    last = table[-1] * lambdas[-1] ** (-m0)
    others = [j for j in range(len(funcs)) if j not in top]
    dom = float(np.max(np.abs(last[top])))
    rivals = [abs(last[j]) for j in others]
    if len(top) > 1:
        order = np.sort(np.abs(last[top]))[::-1]
        rivals.append(order[1])
    dominance = dom / max(max(rivals), 1e-300) if rivals else math.inf
    below = [abs(last[j]) for j in others if degs[j] < m0]
    below_ratio = max(below) / max(dom, 1e-300) if below else 0.0

    prof = limit_profile([funcs[j] for j in top], beta_a.values)
    d = profile_convergence(problem, m0, prof, lambdas, threads)
    pnorm = h1_discrepancy(prof, _Zero(), N, s, problem.orders)
    tr = np.array([trace_discrepancy(problem, float(lam), m0, prof)[0] for lam in lambdas])
    tnorm = trace_discrepancy(problem, float(lambdas[0]), m0, prof)[1]
    ups = np.array([upsilon(problem, float(lam), funcs[top[0]]) * lam ** (-m0 - N - 1 + 2 * s) for lam in lambdas])

    classified = not flags and dominance >= 10.0 and below_ratio < 0.05
    return BlowupReport(
        lambdas, m0, labels(funcs), degs, table, beta_a, beta_b, gap, d, pnorm, tr, tnorm,
        dominance, below_ratio, bessel, norm_err, ups, classified, tuple(flags),
    )
