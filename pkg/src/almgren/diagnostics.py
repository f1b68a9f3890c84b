"""Audits of the functional inequalities and integral identities.

Every check evaluates both sides with the weighted quadrature rules and
returns them together with a verdict. Inequalities that involve an unknown
sharp constant (the Sobolev-trace constant) are run with a constant
calibrated on a seeded batch of random polynomial fields; the calibrated
value is a witness, not a claim about the sharp constant.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DegenerateError
from .frequency import LocalProblem, QuadratureOrders, eta_exponents, unit_ball_volume
from .quadrature import flat_ball, flat_sphere, half_ball, half_sphere
from .sphere_eig import Polynomial

__all__ = [
    "InequalityResult",
    "AuditSummary",
    "AuditCase",
    "RANDOM_SEED",
    "POLY_ORDERS",
    "hardy_check",
    "poincare_check",
    "sobolev_trace_check",
    "found_check",
    "random_polynomials",
    "random_audit_cases",
    "calibrate_sobolev_constant",
    "inequality_audit",
    "PohozaevTerms",
    "pohozaev_terms",
    "pohozaev_check",
    "pohozaev_convergence",
    "DerivativeCheck",
    "derivative_identity_check",
]

RANDOM_SEED = 0xA1
AUDIT_PAIRS = ((1, 0.25), (2, 0.25), (2, 0.5), (2, 0.75))
# Exact for polynomial fields of degree <= 4; the flat base keeps 64 nodes
# because |Tr v|^(2*) is not a polynomial.
POLY_ORDERS = QuadratureOrders(n_radial=16, n_polar=24, n_azimuth=24, n_base=64)


@dataclass(frozen=True)
class InequalityResult:
    lhs: float
    rhs: float
    passed: bool
    tag: str

    @property
    def ratio(self) -> float:
        if self.rhs > 0:
            return self.lhs / self.rhs
        return 0.0 if self.lhs <= 0 else math.inf


@dataclass(frozen=True)
class AuditCase:
    """One randomized inequality case."""

    field: Polynomial
    N: int
    s: float
    r: float
    weight: Polynomial | None = None
    tolerance: float = 1e-10

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ConfigError("tolerance must be positive")
        if not self.r > 0:
            raise ConfigError("radius must be positive")


def _gap(N: int, s: float) -> float:
    g = N - 2.0 * s
    if g <= 0:
        raise ConfigError(f"the inequality needs N > 2s, got N={N}, s={s}")
    return g


def _pieces(v, N: int, s: float, r: float, orders: QuadratureOrders | None = None):
    """Basic weighted integrals of v used by the inequalities."""
    o = orders or QuadratureOrders()
    ball = half_ball(N, s, r, o.n_radial, o.n_polar, o.n_azimuth)
    z = ball.points
    val = v.value(z)
    g = v.gradient(z)
    rad = np.linalg.norm(z, axis=1)
    sph = half_sphere(N, s, o.n_polar, o.n_azimuth, radius=r)
    return {
        "grad2": float(ball.integrate(np.einsum("ni,ni->n", g, g))),
        "radial2": float(ball.integrate((np.einsum("ni,ni->n", g, z) / rad) ** 2)),
        "v2": float(ball.integrate(val * val)),
        "sphere_v2": float(sph.integrate(v.value(sph.points) ** 2)),
    }


def hardy_check(v, N: int, s: float, r: float, tol: float = 1e-10, orders=None) -> InequalityResult:
    """``((N-2s)/2)^2 int v^2/|z|^2 <= int (grad v . z/|z|)^2 + (N-2s)/(2r) int_S v^2``.

    The singular left side uses the half-ball rule with the ``|z|^-2`` factor
    moved into the radial weight.
    """
    g = _gap(N, s)
    o = orders or QuadratureOrders()
    sing = half_ball(N, s, r, o.n_radial, o.n_polar, o.n_azimuth, extra_power=-2.0)
    lhs = (g / 2.0) ** 2 * float(sing.integrate(v.value(sing.points) ** 2))
    p = _pieces(v, N, s, r, o)
    rhs = p["radial2"] + g / (2.0 * r) * p["sphere_v2"]
    return InequalityResult(lhs, rhs, lhs <= rhs * (1.0 + tol) + 1e-300, "hardy")


def poincare_check(v, N: int, s: float, r: float, tol: float = 1e-10, orders=None) -> InequalityResult:
    """``int v^2 <= 4r/(N-2s)^2 (r int |grad v|^2 + (N-2s)/2 int_S v^2)``."""
    g = _gap(N, s)
    p = _pieces(v, N, s, r, orders)
    lhs = p["v2"]
    rhs = 4.0 * r / g**2 * (r * p["grad2"] + g / 2.0 * p["sphere_v2"])
    return InequalityResult(lhs, rhs, lhs <= rhs * (1.0 + tol) + 1e-300, "poincare")


def _energy_bracket(v, N, s, r, orders=None) -> float:
    p = _pieces(v, N, s, r, orders)
    return p["grad2"] + (N - 2.0 * s) / (2.0 * r) * p["sphere_v2"]


def _trace(v, y):
    return v.value(np.column_stack([y, np.zeros(len(y))]))


def sobolev_trace_check(v, N: int, s: float, r: float, constant: float = 1.0, tol: float = 1e-10, orders=None) -> InequalityResult:
    """``||Tr v||_{L^{2*}(B_r')}^2 <= S (int |grad v|^2 + (N-2s)/(2r) int_S v^2)``."""
    g = _gap(N, s)
    crit = 2.0 * N / g
    o = orders or QuadratureOrders()
    base = flat_ball(N, r, o.n_base, o.n_azimuth)
    tr = _trace(v, base.points)
    lhs = float(base.integrate(np.abs(tr) ** crit)) ** (2.0 / crit)
    rhs = constant * _energy_bracket(v, N, s, r, o)
    return InequalityResult(lhs, rhs, lhs <= rhs * (1.0 + tol) + 1e-300, "sobolev-trace")


def found_check(v, f, N: int, s: float, r: float, eps: float = 0.5, constant: float = 1.0, tol: float = 1e-10, orders=None) -> InequalityResult:
    """``int_{B_r'} f |Tr v|^2 <= eta_f(r) (int |grad v|^2 + (N-2s)/(2r) int_S v^2)``.

    ``f`` is a callable on rows of y or a field with ``value``.
    """
    _gap(N, s)
    o = orders or QuadratureOrders()
    base = flat_ball(N, r, o.n_base, o.n_azimuth)
    y = base.points
    fv = np.asarray(f.value(y) if hasattr(f, "value") else f(y), dtype=float)
    lhs = float(base.integrate(fv * _trace(v, y) ** 2))
    a, b, p = eta_exponents(N, s, eps)
    norm = float(base.integrate(np.abs(fv) ** p)) ** (1.0 / p)
    eta = constant * unit_ball_volume(N) ** a * norm * r**b
    rhs = eta * _energy_bracket(v, N, s, r, o)
    return InequalityResult(lhs, rhs, lhs <= rhs * (1.0 + tol) + 1e-300, "found")


# ---- randomized fields ------------------------------------------------------
def random_polynomials(n: int, N: int, rng: np.random.Generator, max_degree: int = 4) -> list[Polynomial]:
    """Polynomials in (y, t), even in t, degree <= max_degree, coefficients U[-1, 1]."""
    exps = [e for e in itertools.product(range(max_degree + 1), repeat=N + 1) if sum(e) <= max_degree and e[N] % 2 == 0]
    exps.sort(key=lambda e: (sum(e), tuple(-x for x in e)))
    out = []
    for _ in range(n):
        c = rng.uniform(-1.0, 1.0, size=len(exps))
        out.append(Polynomial(exps, list(c), N + 1))
    return out


def random_audit_cases(n: int = 100, seed: int = RANDOM_SEED, pairs=AUDIT_PAIRS) -> list[AuditCase]:
    """Seeded cases cycling over the ``(N, s)`` pairs, radii in [0.2, 1]."""
    rng = np.random.default_rng(seed)
    cases = []
    for i in range(n):
        N, s = pairs[i % len(pairs)]
        v = random_polynomials(1, N, rng)[0]
        r = float(rng.uniform(0.2, 1.0))
        c = rng.uniform(-1.0, 1.0, size=N + 1)
        weight = Polynomial([tuple(int(j == k) for j in range(N)) for k in range(N)] + [(0,) * N], list(c[:N]) + [2.0 + abs(c[N])], N)
        cases.append(AuditCase(v, N, s, r, weight))
    return cases


def _sobolev_ratio(case: AuditCase) -> float:
    res = sobolev_trace_check(case.field, case.N, case.s, case.r, 1.0, orders=POLY_ORDERS)
    return res.ratio


def calibrate_sobolev_constant(cases, threads: int = 1) -> dict:
    """Smallest constant per (N, s) making every case pass, keyed ``"N,s"``."""

    def run(c):
        return _sobolev_ratio(c)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            ratios = list(ex.map(run, cases))
    else:
        ratios = [run(c) for c in cases]
    out: dict = {}
    for c, q in zip(cases, ratios):
        key = f"{c.N},{c.s}"
        out[key] = max(out.get(key, 0.0), q)
    return out


@dataclass(frozen=True)
class AuditSummary:
    counts: dict
    violations: dict
    constants: dict
    margin: float
    worst_ratio: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return not any(self.violations.values())


def inequality_audit(n: int = 100, seed: int = RANDOM_SEED, margin: float = 1.1, eps: float = 0.5, threads: int = 1) -> AuditSummary:
    """Randomized audit of the four inequalities.

    Hardy and Poincare are constant-free and run on the seeded batch. The
    Sobolev-trace constant is calibrated on that batch and multiplied by
    ``margin``; the constant-bearing checks then run on a second batch
    (seed + 1) never seen by the calibration.
    """
    cal_cases = random_audit_cases(n, seed)
    fresh = random_audit_cases(n, seed + 1)
    constants = calibrate_sobolev_constant(cal_cases, threads)

    o = POLY_ORDERS

    def run(pair):
        c, d = pair
        S = margin * constants[f"{d.N},{d.s}"]
        w = d.weight
        return (
            hardy_check(c.field, c.N, c.s, c.r, orders=o),
            poincare_check(c.field, c.N, c.s, c.r, orders=o),
            sobolev_trace_check(d.field, d.N, d.s, d.r, S, orders=o),
            found_check(d.field, lambda y, w=w: np.exp(w.value(y) - 2.0), d.N, d.s, d.r, eps, S, orders=o),
        )

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            rows = list(ex.map(run, zip(cal_cases, fresh)))
    else:
        rows = [run(p) for p in zip(cal_cases, fresh)]
    tags = ("hardy", "poincare", "sobolev-trace", "found")
    counts = {t: len(rows) for t in tags}
    viol = {t: sum(not row[i].passed for row in rows) for i, t in enumerate(tags)}
    worst = {t: max(row[i].ratio for row in rows) for i, t in enumerate(tags)}
    return AuditSummary(counts, viol, constants, margin, worst)


# ---- Pohozaev identity --------------------------------------------------------
@dataclass(frozen=True)
class PohozaevTerms:
    """Left side ``sphere - flat_sphere`` and the six right-side terms."""

    sphere: float
    flat_sphere: float
    normal: float
    base: float
    div_beta: float
    jac_beta: float
    d_matrix: float
    weight: float

    @property
    def lhs(self) -> float:
        return self.sphere - self.flat_sphere

    @property
    def rhs(self) -> float:
        return self.normal - self.base + self.div_beta - self.jac_beta + self.d_matrix + self.weight

    @property
    def gap(self) -> float:
        return abs(self.lhs - self.rhs) / (abs(self.lhs) + abs(self.rhs) + np.finfo(float).eps)


def pohozaev_terms(problem: LocalProblem, r: float, orders: QuadratureOrders | None = None) -> PohozaevTerms:
    """All integrals of the Pohozaev identity on ``B_r^+``."""
    o = orders or problem.orders
    N, s, cf, W = problem.N, problem.s, problem.cf, problem.field
    kap = problem.kappa
    sph = half_sphere(N, s, o.n_polar, o.n_azimuth, radius=r)
    zs = sph.points
    gs = W.gradient(zs)
    As = cf.matrix(zs)
    Ags = np.einsum("nij,nj->ni", As, gs)
    nu = zs / r
    sphere = float(sph.integrate(np.einsum("ni,ni->n", Ags, gs)))
    normal = 2.0 * float(sph.integrate(np.einsum("ni,ni->n", Ags, nu) ** 2 / cf.mu(zs)))

    flat_s = 0.0
    base = 0.0
    if kap != 0.0 and not cf.potential.is_zero:
        ring = flat_sphere(N, r, o.n_azimuth)
        yr = ring.points
        flat_s = kap * float(ring.integrate(cf.h_tilde(yr) * W.value(np.column_stack([yr, np.zeros(len(yr))])) ** 2))
        fb = flat_ball(N, r, o.n_base, o.n_azimuth)
        y = fb.points
        bg = cf.base_geometry(y)
        w2 = W.value(np.column_stack([y, np.zeros(len(y))])) ** 2
        dens = bg["div_beta_prime"] * cf.h_tilde(y) + np.einsum("ni,ni->n", bg["beta_prime"], cf.grad_h_tilde(y))
        base = kap / r * float(fb.integrate(dens * w2))

    ball = half_ball(N, s, r, o.n_radial, o.n_polar, o.n_azimuth)
    z = ball.points
    geo = cf.geometry(z)
    g = W.gradient(z)
    Ag = np.einsum("nij,nj->ni", geo["A"], g)
    q = np.einsum("ni,ni->n", Ag, g)
    div_b = float(ball.integrate(q * geo["div_beta"])) / r
    jac = 2.0 / r * float(ball.integrate(np.einsum("nij,nj,ni->n", geo["jac_beta"], Ag, g)))
    dAvv = np.einsum("nikh,nh,nk->ni", geo["dA"], g, g)
    dmat = float(ball.integrate(np.einsum("ni,ni->n", dAvv, geo["beta"]))) / r
    wt = (1.0 - 2.0 * s) / r * float(ball.integrate(geo["alpha"] / geo["mu"] * q))
    return PohozaevTerms(sphere, flat_s, normal, base, div_b, jac, dmat, wt)


def pohozaev_check(problem: LocalProblem, r: float, orders: QuadratureOrders | None = None) -> float:
    """Relative gap ``|LHS - RHS| / (|LHS| + |RHS| + eps_mach)``; 0 for W = 0."""
    return pohozaev_terms(problem, r, orders).gap


def pohozaev_convergence(problem: LocalProblem, r: float, factors=(0.125, 0.25, 0.5, 1.0)) -> tuple[np.ndarray, np.ndarray, float]:
    """Gaps under uniform refinement of every rule.

    Returns ``(node factors, gaps, order)`` where ``order`` is the least-squares
    slope of ``-log(gap)`` against ``log(factor)`` over the gaps above the
    roundoff floor 1e-13 (infinite when the coarsest rule is already exact).
    """
    base = problem.orders
    N = problem.N
    f = np.asarray(factors, dtype=float)
    gaps = np.array([pohozaev_check(problem, r, base.refined(k, N)) for k in f])
    mask = gaps > 1e-13
    if np.count_nonzero(mask) < 2:
        return f, gaps, math.inf
    order = -float(np.polyfit(np.log(f[mask]), np.log(gaps[mask]), 1)[0])
    return f, gaps, order


# ---- derivative identities ---------------------------------------------------
@dataclass(frozen=True)
class DerivativeCheck:
    """Finite-difference derivatives of H and D against their integral forms.

    ``*_slack`` are the fitted O(1) constants: the gap divided by H (for H')
    or by the perturbative envelope (for D').
    """

    r: float
    dH: float
    h1: float
    h2: float
    from_energy: float
    dD: float
    d_formula: float
    H: float
    D: float
    gaps: dict
    slack: dict


def _fd(fun, r: float, rel: float = 1e-3) -> float:
    h = rel * r
    return (-fun(r + 2 * h) + 8 * fun(r + h) - 8 * fun(r - h) + fun(r - 2 * h)) / (12.0 * h)


def derivative_identity_check(problem: LocalProblem, r: float, rel: float = 1e-3) -> DerivativeCheck:
    """Compare H' and D' by central differences with their surface forms."""
    N, s, cf, W = problem.N, problem.s, problem.cf, problem.field
    H = problem.height(r)
    if not H > 1e-300:
        raise DegenerateError("height vanishes; the identities need H > 0")
    D = problem.energy(r)
    dH = _fd(problem.height, r, rel)
    dD = _fd(problem.energy, r, rel)
    o = problem.orders
    sph = half_sphere(N, s, o.n_polar, o.n_azimuth, radius=r)
    z = sph.points
    nu = z / r
    w = W.value(z)
    g = W.gradient(z)
    mu = cf.mu(z)
    Ag = np.einsum("nij,nj->ni", cf.matrix(z), g)
    scale = 2.0 * r ** (-(N + 1.0 - 2.0 * s))
    h1 = scale * float(sph.integrate(mu * w * np.einsum("ni,ni->n", g, nu)))
    h2 = scale * float(sph.integrate(w * np.einsum("ni,ni->n", Ag, nu)))
    from_energy = 2.0 / r * D
    dform = 2.0 * r ** (2.0 * s - N) * float(sph.integrate(np.einsum("ni,ni->n", Ag, nu) ** 2 / mu))
    delta = eta_exponents(N, s, problem.eps)[1]
    env = r ** (-1.0 + delta) * abs(D + (N - 2.0 * s) / 2.0 * H)
    gaps = {"H1": abs(dH - h1), "H2": abs(dH - h2), "D-as-H": abs(dH - from_energy), "D'": abs(dD - dform)}
    rel_gaps = {k: v / max(abs(dH), 1e-300) for k, v in gaps.items() if k != "D'"}
    rel_gaps["D'"] = gaps["D'"] / max(abs(dD), 1e-300)
    slack = {"H1": gaps["H1"] / H, "H2": gaps["H2"] / H, "D-as-H": gaps["D-as-H"] / H, "D'": gaps["D'"] / max(env, 1e-300)}
    return DerivativeCheck(r, dH, h1, h2, from_energy, dD, dform, H, D, rel_gaps, slack)
