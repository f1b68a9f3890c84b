"""Height, energy and frequency of a reflected field, and their audits.

For a field W on the half-ball with the reflected coefficients A~,

    H(r) = r^-(N+1-2s) int_{S_r^+} t^(1-2s) mu W^2 dS
    D(r) = r^-(N-2s) (int_{B_r^+} t^(1-2s) A~ grad W . grad W dz
                      - kappa_s int_{B_r'} h~ W(y, 0)^2 dy)

and the frequency is N(r) = D(r) / H(r). Its limit at r = 0 is the
vanishing order.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, DegenerateError, NumericError
from .graph import BoundaryGraph
from .quadrature import flat_ball, half_ball, half_sphere
from .straightening import CoefficientField, build_map, coefficient_field

__all__ = [
    "QuadratureOrders",
    "LocalProblem",
    "RadialProfile",
    "AuditReport",
    "flat_problem",
    "height",
    "energy",
    "eta_bound",
    "eta_exponents",
    "unit_ball_volume",
    "geometric_grid",
    "extrapolate_limit",
    "nearest_admissible",
    "frequency_profile",
    "monotonicity_audit",
]

CLASSIFICATION_TOL = 0.05


@dataclass(frozen=True)
class QuadratureOrders:
    """Node counts for the half-sphere, half-ball and flat-base rules.

    ``n_polar=None`` selects the half-sphere default (128 for N=1, 64 for N=2).
    """

    n_radial: int = 64
    n_polar: int | None = None
    n_azimuth: int = 64
    n_base: int = 64

    def refined(self, factor: float, N: int) -> "QuadratureOrders":
        polar = self.n_polar if self.n_polar is not None else (128 if N == 1 else 64)
        k = float(factor)
        even = lambda n: 2 * max(1, int(round(n * k / 2)))  # noqa: E731
        return QuadratureOrders(even(self.n_radial), even(polar), even(self.n_azimuth), even(self.n_base))


@dataclass
class LocalProblem:
    """A reflected field together with everything needed to measure it.

    Attributes
    ----------
    field : object
        Exposes ``value(z)`` and ``gradient(z)`` on point rows.
    cf : CoefficientField
    s, kappa : float
        Fractional order and Neumann constant.
    r0 : float
        Chart radius; radii must lie in (0, r0).
    eps : float
        Integrability margin of the potential, used only by ``eta_bound``.
    sobolev_constant : float
        Multiplier in ``eta_bound``; unknown in closed form, default 1.
    """

    field: object
    cf: CoefficientField
    s: float
    kappa: float
    r0: float = 1.0
    eps: float = 0.5
    sobolev_constant: float = 1.0
    orders: QuadratureOrders = field(default_factory=QuadratureOrders)

    @property
    def N(self) -> int:
        return self.cf.N

    def height(self, r: float) -> float:
        return height(self.field, self.cf, r, self.s, self.orders)

    def energy(self, r: float) -> float:
        return energy(self.field, self.cf, r, self.s, self.kappa, self.orders)

    def eta(self, r: float) -> float:
        return eta_bound(self.cf.h_tilde, r, self.N, self.s, self.eps, self.sobolev_constant, self.orders.n_base)

    def refined(self, factor: float) -> "LocalProblem":
        return replace(self, orders=self.orders.refined(factor, self.N))


def flat_problem(field, N: int, s: float, kappa: float = 0.0, h=None, r0: float = 1.0, **kw) -> LocalProblem:
    """LocalProblem with the identity coefficients of a flat edge."""
    fmap = build_map(BoundaryGraph(N, "0"), r0)
    return LocalProblem(field, coefficient_field(fmap, h), s, kappa, r0, **kw)


def _check_radius(r: float):
    if not (r > 0 and math.isfinite(r)):
        raise ConfigError(f"radius must be positive, got {r}")


def height(W, cf: CoefficientField, r: float, s: float, orders: QuadratureOrders | None = None) -> float:
    """H(r) by the half-sphere rule on the unit sphere with ``z = r theta``."""
    _check_radius(r)
    o = orders or QuadratureOrders()
    sph = half_sphere(cf.N, s, o.n_polar, o.n_azimuth)
    z = r * sph.points
    w = W.value(z)
    val = float(sph.integrate(cf.mu(z) * w * w))
    if not math.isfinite(val):
        raise NumericError(f"height is not finite at r={r}")
    return val


def energy(W, cf: CoefficientField, r: float, s: float, kappa: float, orders: QuadratureOrders | None = None) -> float:
    """D(r) by a radial Gauss-Jacobi times half-sphere product rule."""
    _check_radius(r)
    o = orders or QuadratureOrders()
    N = cf.N
    ball = half_ball(N, s, r, o.n_radial, o.n_polar, o.n_azimuth)
    z = ball.points
    g = W.gradient(z)
    Ag = np.einsum("nij,nj->ni", cf.matrix(z), g)
    vol = float(ball.integrate(np.einsum("ni,ni->n", Ag, g)))
    flat = 0.0
    if kappa != 0.0 and not cf.potential.is_zero:
        base = flat_ball(N, r, o.n_base, o.n_azimuth)
        y = base.points
        wb = W.value(np.column_stack([y, np.zeros(len(y))]))
        flat = float(base.integrate(cf.h_tilde(y) * wb * wb))
    val = r ** (2.0 * s - N) * (vol - kappa * flat)
    if not math.isfinite(val):
        raise NumericError(f"energy is not finite at r={r}")
    return val


def unit_ball_volume(N: int) -> float:
    return math.pi ** (N / 2.0) / math.gamma(N / 2.0 + 1.0)


def eta_exponents(N: int, s: float, eps: float) -> tuple[float, float, float]:
    """``(volume exponent, radius exponent, Lebesgue exponent)`` of eta."""
    r_exp = 4.0 * s * s * eps / (N + 2.0 * s * eps)
    return r_exp / N, r_exp, N / (2.0 * s) + eps


def eta_bound(h_tilde, r: float, N: int, s: float, eps: float = 0.5, constant: float = 1.0, n: int = 64) -> float:
    """Smallness factor of the potential term on ``B_r'``.

    ``constant * |B_1|^a * ||h~||_{L^p(B_r')} * r^b`` with ``(a, b, p)`` from
    ``eta_exponents``. ``h_tilde`` is a constant or a callable on rows of y.
    """
    if not 0.0 < eps < 1.0:
        raise ConfigError("eps must lie in (0, 1)")
    _check_radius(r)
    a, b, p = eta_exponents(N, s, eps)
    base = flat_ball(N, r, n)
    if callable(h_tilde):
        hv = np.asarray(h_tilde(base.points), dtype=float)
    else:
        hv = np.full(len(base), float(h_tilde))
    norm = float(base.integrate(np.abs(hv) ** p)) ** (1.0 / p)
    return constant * unit_ball_volume(N) ** a * norm * r**b


def geometric_grid(r_max: float, r_min: float, ratio: float = 2.0**-0.5) -> np.ndarray:
    """Decreasing geometric grid from r_max that stops at the first point <= r_min."""
    if not 0.0 < ratio <= 0.8:
        raise ConfigError("grid ratio must lie in (0, 0.8]")
    if not 0.0 < r_min < r_max:
        raise ConfigError("need 0 < r_min < r_max")
    n = int(math.ceil(math.log(r_min / r_max) / math.log(ratio) - 1e-9)) + 1
    return r_max * ratio ** np.arange(n)


def _aitken(seq: np.ndarray) -> np.ndarray:
    a, b, c = seq[:-2], seq[1:-1], seq[2:]
    den = c - 2.0 * b + a
    out = np.where(np.abs(den) > 1e-14 * (np.abs(a) + np.abs(b) + np.abs(c)) + 1e-300, c - (c - b) ** 2 / np.where(den == 0, 1.0, den), c)
    return out


def extrapolate_limit(radii, values, delta: float, tail: int = 6) -> tuple[float, float, str]:
    """Limit of a sequence sampled on a decreasing geometric grid.

    Aitken's Delta^2 is applied to the last ``tail`` samples; the spread of
    the accelerated tail is the error estimate. If it exceeds the spread of
    the raw tail (the acceleration is unstable), a least-squares fit of
    ``a + b r^delta`` is used instead. Returns ``(limit, error, method)``.
    """
    r = np.asarray(radii, dtype=float)
    v = np.asarray(values, dtype=float)
    k = min(tail, len(v))
    vt, rt = v[-k:], r[-k:]
    raw_spread = float(np.ptp(vt[-3:])) if k >= 3 else math.inf
    if k >= 3:
        acc = _aitken(vt)
        if np.all(np.isfinite(acc)):
            spread = float(np.ptp(acc[-3:])) if len(acc) >= 3 else float(np.ptp(acc))
            if spread <= max(raw_spread, 1e-13):
                return float(acc[-1]), spread, "aitken"
    X = np.column_stack([np.ones(k), rt**delta])
    coef, *_ = np.linalg.lstsq(X, vt, rcond=None)
    resid = float(np.max(np.abs(X @ coef - vt))) if k > 2 else math.inf
    return float(coef[0]), resid, "power-fit"


def nearest_admissible(gamma: float, N: int) -> int:
    """Nearest positive integer, restricted to odd integers when N = 1."""
    if N == 1:
        m = 2 * int(round((gamma - 1.0) / 2.0)) + 1
        return max(m, 1)
    return max(int(round(gamma)), 1)


@dataclass(frozen=True)
class RadialProfile:
    radii: np.ndarray
    H: np.ndarray
    D: np.ndarray
    frequency: np.ndarray
    eta: np.ndarray
    gamma: float
    gamma_error: float
    gamma_method: str
    m0: int
    classified: bool
    N: int
    s: float
    delta: float
    limit: float
    limit_error: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def scaled_height(self) -> np.ndarray:
        """``r^(-2 gamma) H(r)`` along the grid."""
        return self.radii ** (-2.0 * self.gamma) * self.H

    def frequency_lower_bound(self) -> float:
        return -(self.N - 2.0 * self.s) / 2.0


def _evaluate(problem: LocalProblem, r: float):
    return problem.height(r), problem.energy(r), problem.eta(r)


def frequency_profile(problem: LocalProblem, radii, threads: int = 1, min_points: int = 12) -> RadialProfile:
    """Evaluate H, D, N and eta on a decreasing geometric grid and classify.

    Per-radius work runs on ``threads`` workers; results are gathered in grid
    order so the profile does not depend on the thread count.
    """
    radii = np.asarray(radii, dtype=float)
    if radii.ndim != 1 or len(radii) < min_points:
        raise ConfigError(f"need at least {min_points} radii")
    if np.any(radii <= 0) or np.any(radii >= problem.r0 * (1 + 1e-12)):
        raise ConfigError("radii must lie in (0, r0)")
    ratios = radii[1:] / radii[:-1]
    if np.any(ratios > 0.8 + 1e-12) or np.ptp(ratios) > 1e-9 * ratios.mean():
        raise ConfigError("radii must form a decreasing geometric grid with ratio <= 0.8")
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            rows = list(ex.map(lambda r: _evaluate(problem, float(r)), radii))
    else:
        rows = [_evaluate(problem, float(r)) for r in radii]
    H = np.array([row[0] for row in rows])
    D = np.array([row[1] for row in rows])
    eta = np.array([row[2] for row in rows])
    if np.any(H <= 1e-300):
        raise DegenerateError("height vanishes on the radius grid; the field is trivial near x0")
    freq = D / H
    N, s = problem.N, problem.s
    delta = eta_exponents(N, s, problem.eps)[1]
    gamma, gerr, method = extrapolate_limit(radii, freq, delta)
    m0 = nearest_admissible(gamma, N)
    classified = bool(abs(gamma - m0) < CLASSIFICATION_TOL and gerr < CLASSIFICATION_TOL)
    scaled = radii ** (-2.0 * gamma) * H
    limit, lerr, _ = extrapolate_limit(radii, scaled, delta)
    diag = {"tail_spread": float(np.ptp(freq[-4:])), "min_frequency": float(freq.min())}
    return RadialProfile(radii, H, D, freq, eta, gamma, gerr, method, m0, classified, N, s, delta, limit, lerr, diag)


@dataclass(frozen=True)
class AuditReport:
    """Outcome of the four monotonicity checks with the fitted witnesses."""

    checks: dict
    witnesses: dict
    details: dict

    @property
    def passed(self) -> bool:
        return all(self.checks.values())


def _log_slopes(profile: RadialProfile) -> np.ndarray:
    """``r (log H)'`` by second-order differences in log r."""
    return np.gradient(np.log(profile.H), np.log(profile.radii))


def monotonicity_audit(
    profile: RadialProfile,
    sigma: float = 0.1,
    doubling_factors=(2.0, 4.0),
    slack: float = 1e-3,
    gamma: float | None = None,
) -> AuditReport:
    """Fit and verify the witnesses of the four growth properties of H.

    (i) ``frequency <= C`` with ``C`` the grid maximum, plus the lower bound
    ``frequency > -(N-2s)/2``.
    (ii) ``H(r) <= c0 r^(2 gamma)``. The constant absorbs the perturbative
    drift: ``c0 = H(r_max) r_max^(-2 gamma) exp(K r_max^delta / delta)``
    where ``K`` bounds ``r^(1-delta) (2 gamma / r - (log H)')_+`` on the upper
    half of the grid. It is then checked at every radius.
    (iii) ``H(R r) <= R^cbar H(r)`` with ``cbar = max(2 C, slope)``, the slope
    fitted on the upper half of the grid.
    (iv) ``H(r) >= c_sigma r^(2 gamma + sigma)`` with ``c_sigma`` fitted at the
    largest radius below which the log-slope stays under ``2 gamma + sigma``
    and checked at the smaller radii.

    ``gamma`` overrides the profile's fitted exponent.
    """
    r, H, freq = profile.radii, profile.H, profile.frequency
    g = profile.gamma if gamma is None else float(gamma)
    delta = profile.delta
    n = len(r)
    upper = slice(0, max(n // 2, 2))
    slopes = _log_slopes(profile)
    checks, wit, det = {}, {}, {}

    C = float(freq.max())
    lower = profile.frequency_lower_bound()
    checks["bounded"] = bool(np.all(np.isfinite(freq)) and np.all(freq <= C) and np.all(freq > lower))
    wit["C"] = C
    det["frequency_min"] = float(freq.min())

    excess = np.maximum(2.0 * g - slopes[upper], 0.0) * r[upper] ** (-delta)
    K = float(excess.max())
    c0 = H[0] * r[0] ** (-2.0 * g) * math.exp(K * r[0] ** delta / delta)
    bound = c0 * r ** (2.0 * g)
    checks["upper"] = bool(np.all(H <= bound * (1.0 + slack)))
    wit["c0"], wit["K"] = c0, K
    det["upper_ratio"] = (H / bound).tolist()

    cbar = max(2.0 * C, float(slopes[upper].max()))
    step = math.log(r[0] / r[1])
    ok = True
    worst = -math.inf
    for R in doubling_factors:
        j = int(round(math.log(R) / step))
        if j < 1 or abs(j * step - math.log(R)) > 1e-6:
            raise ConfigError(f"doubling factor {R} is not a power of the grid ratio")
        lhs = H[:-j]
        rhs = R**cbar * H[j:]
        worst = max(worst, float(np.max(lhs / rhs)))
        ok &= bool(np.all(lhs <= rhs * (1.0 + slack)))
    checks["doubling"] = ok
    wit["cbar"] = cbar
    det["doubling_worst_ratio"] = worst

    target = 2.0 * g + sigma
    below = slopes <= target
    idx = n - 1
    while idx > 0 and below[idx - 1]:
        idx -= 1
    if not below[-1] or idx >= n - 1:
        checks["lower"] = False
        wit["c_sigma"] = math.nan
        wit["r_sigma"] = math.nan
    else:
        c_sig = H[idx] * r[idx] ** (-target)
        checks["lower"] = bool(np.all(H[idx:] >= c_sig * r[idx:] ** target * (1.0 - slack)))
        wit["c_sigma"] = float(c_sig)
        wit["r_sigma"] = float(r[idx])
    wit["sigma"] = sigma

    checks["limit"] = bool(math.isfinite(profile.limit) and profile.limit > 0 and profile.limit_error < 0.5 * profile.limit)
    wit["limit"] = profile.limit
    return AuditReport(checks, wit, det)
