"""Flattening of the boundary near x0 and the reflected local problem.

Local coordinates are ``z = (y', y_N, t)``. The map

    F(y', y_N, t) = (y' - y_N grad g(y'), y_N + g(y'), t)

sends the half-space ``{y_N < 0}`` onto the region below the graph of g.
The pulled-back operator has the coefficient matrix
``A = J^-1 J^-T |det J|`` which is block diagonal with blocks ``D`` (size N)
and ``alpha = det J``. Its reflection across ``y_N = 0`` is ``A~``; the
solution is reflected oddly and the potential evenly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import sympy

from .eigenbasis import DomainSpec
from .errors import ConfigError, DomainError
from .graph import BoundaryGraph
from .quadrature import flat_ball, half_ball, half_sphere

__all__ = [
    "Potential",
    "StraighteningMap",
    "CoefficientField",
    "ReflectedField",
    "ExpansionReport",
    "build_map",
    "coefficient_field",
    "reflect_solution",
    "verify_expansions",
    "boundary_integration_identity",
    "select_chart_radius",
]


class Potential:
    """A potential h on Omega in global coordinates, with its gradient.

    Build it from a constant or from an expression in ``x1, ..., xN``.
    """

    def __init__(self, N: int, spec=0.0):
        self.N = int(N)
        self.spec = spec
        xs = sympy.symbols([f"x{i + 1}" for i in range(self.N)])
        if isinstance(spec, str):
            try:
                expr = sympy.sympify(spec, locals={str(v): v for v in xs})
            except (sympy.SympifyError, TypeError) as exc:
                raise ConfigError(f"cannot parse potential {spec!r}") from exc
        else:
            expr = sympy.Float(float(spec))
        extra = expr.free_symbols - set(xs)
        if extra:
            raise ConfigError(f"potential uses unknown symbols {sorted(map(str, extra))}")
        self.expression = expr
        self.is_constant = not expr.free_symbols
        self.is_zero = bool(expr.is_zero)
        self._value = sympy.lambdify(xs, expr, "numpy")
        self._grad = [sympy.lambdify(xs, sympy.diff(expr, v), "numpy") for v in xs]

    def _call(self, fn, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = fn(*[x[:, i] for i in range(self.N)])
        return np.broadcast_to(np.asarray(out, dtype=float), (x.shape[0],)).copy()

    def __call__(self, x) -> np.ndarray:
        return self._call(self._value, x)

    def gradient(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return np.column_stack([self._call(g, x) for g in self._grad])

    def __repr__(self) -> str:
        return f"Potential({str(self.expression)!r})"


class StraighteningMap:
    """The map F for a boundary graph g on the chart ``B_r0``."""

    def __init__(self, graph: BoundaryGraph, r0: float):
        self.graph = graph
        self.N = graph.N
        self.r0 = float(r0)

    def __call__(self, z) -> np.ndarray:
        z = np.atleast_2d(np.asarray(z, dtype=float))
        out = z.copy()
        if self.N > 1:
            yp, yn = z[:, : self.N - 1], z[:, self.N - 1]
            out[:, : self.N - 1] = yp - yn[:, None] * self.graph.grad(yp)
            out[:, self.N - 1] = yn + self.graph.value(yp)
        return out

    def jacobian(self, y) -> np.ndarray:
        """The y-block of J_F (the t-row and t-column are trivial)."""
        y = np.atleast_2d(np.asarray(y, dtype=float))
        n, N = y.shape[0], self.N
        J = np.broadcast_to(np.eye(N), (n, N, N)).copy()
        if N > 1:
            yp, yn = y[:, : N - 1], y[:, N - 1]
            H = self.graph.hess(yp)
            G = self.graph.grad(yp)
            J[:, : N - 1, : N - 1] -= yn[:, None, None] * H
            J[:, : N - 1, N - 1] = -G
            J[:, N - 1, : N - 1] = G
        return J

    def jacobian_derivatives(self, y) -> np.ndarray:
        """``dJ[:, i] = d J / d y_i`` with shape (n, N, N, N)."""
        y = np.atleast_2d(np.asarray(y, dtype=float))
        n, N = y.shape[0], self.N
        dJ = np.zeros((n, N, N, N))
        if N > 1:
            yp, yn = y[:, : N - 1], y[:, N - 1]
            H = self.graph.hess(yp)
            T = self.graph.third(yp)
            for i in range(N - 1):
                dJ[:, i, : N - 1, : N - 1] = -yn[:, None, None] * T[:, :, :, i]
                dJ[:, i, : N - 1, N - 1] = -H[:, :, i]
                dJ[:, i, N - 1, : N - 1] = H[:, i, :]
            dJ[:, N - 1, : N - 1, : N - 1] = -H
        return dJ

    def determinant(self, y) -> np.ndarray:
        return np.linalg.det(self.jacobian(y))


def _sample_ball(N: int, r: float, n: int, seed: int = 12345) -> np.ndarray:
    rng = np.random.default_rng(seed)
    v = rng.normal(size=(n, N))
    v /= np.linalg.norm(v, axis=1)[:, None]
    rad = r * rng.uniform(size=n) ** (1.0 / N)
    return v * rad[:, None]


def build_map(graph: BoundaryGraph, r0: float, n_samples: int = 10000) -> StraighteningMap:
    """Build F and check ``det J_F > 1/2`` on a sample of ``B_r0``."""
    m = StraighteningMap(graph, r0)
    y = _sample_ball(graph.N, r0, n_samples)
    if np.min(m.determinant(y)) <= 0.5:
        raise ConfigError(f"chart radius {r0} too large: det J_F drops to 1/2")
    return m


def select_chart_radius(graph: BoundaryGraph, r_start: float = 1.0, n_samples: int = 4000) -> float:
    """Largest dyadic radius where ellipticity and the mu-bounds hold with 10% margin."""
    r = float(r_start)
    for _ in range(40):
        cf = CoefficientField(StraighteningMap(graph, r))
        z = _sample_ball(graph.N + 1, r, n_samples)
        z[:, -1] = np.abs(z[:, -1])
        lam = np.linalg.eigvalsh(cf.matrix(z))
        mu = cf.mu(z)
        if lam.min() >= 0.5 * 1.1 and lam.max() <= 2.0 / 1.1 and mu.min() >= 0.55 and mu.max() <= 2.0 / 1.1:
            return r
        r *= 0.5
    raise ConfigError("no admissible chart radius found")


class CoefficientField:
    """Reflected coefficient matrix A~ and the geometric fields built on it.

    Parameters
    ----------
    fmap : StraighteningMap
    potential : Potential, optional
        h on Omega in global coordinates; zero if omitted.
    domain : DomainSpec, optional
        Supplies the rigid motion from local to global coordinates.
    """

    def __init__(self, fmap: StraighteningMap, potential: Potential | None = None, domain: DomainSpec | None = None):
        self.map = fmap
        self.N = fmap.N
        self.potential = potential if potential is not None else Potential(self.N, 0.0)
        self.domain = domain
        self.is_flat = fmap.graph.is_flat
        self._mirror = np.ones(self.N + 1)
        self._mirror[self.N - 1] = -1.0

    # ---- unreflected pieces on y_N <= 0 ---------------------------------
    def _block(self, y, derivatives: bool = False):
        J = self.map.jacobian(y)
        B = np.linalg.inv(J)
        det = np.linalg.det(J)
        alpha = np.abs(det)
        BBt = B @ np.swapaxes(B, 1, 2)
        D = alpha[:, None, None] * BBt
        if not derivatives:
            return D, alpha
        dJ = self.map.jacobian_derivatives(y)
        # dB_i = -B dJ_i B ; d alpha_i = alpha tr(B dJ_i)
        dB = -np.einsum("nab,nibc,ncd->niad", B, dJ, B)
        dalpha = alpha[:, None] * np.einsum("nab,niba->ni", B, dJ)
        dBBt = dB @ np.swapaxes(B, 1, 2)[:, None] + B[:, None] @ np.swapaxes(dB, 2, 3)
        dD = dalpha[:, :, None, None] * BBt[:, None] + alpha[:, None, None, None] * dBBt
        return D, alpha, dD, dalpha

    def _fold(self, y):
        y = np.atleast_2d(np.asarray(y, dtype=float))
        upper = y[:, self.N - 1] > 0
        yr = y.copy()
        yr[upper, self.N - 1] *= -1.0
        return yr, upper

    # ---- reflected fields ------------------------------------------------
    def block(self, y):
        """Reflected ``(D~, alpha~)`` at points y."""
        yr, upper = self._fold(y)
        D, alpha = self._block(yr)
        m = self._mirror[: self.N]
        D[upper] = D[upper] * np.outer(m, m)
        return D, alpha

    def block_and_derivatives(self, y):
        """Reflected ``(D~, alpha~, dD~, dalpha~)``; ``dD~[:, i] = dD~/dy_i``."""
        yr, upper = self._fold(y)
        D, alpha, dD, dalpha = self._block(yr, derivatives=True)
        m = self._mirror[: self.N]
        mm = np.outer(m, m)
        D[upper] = D[upper] * mm
        dD[upper] = dD[upper] * mm[None, None] * m[None, :, None, None]
        dalpha[upper] = dalpha[upper] * m[None, :]
        return D, alpha, dD, dalpha

    def matrix(self, z) -> np.ndarray:
        """A~ at points z (shape (n, N+1, N+1))."""
        z = np.atleast_2d(np.asarray(z, dtype=float))
        if self.is_flat:
            return np.broadcast_to(np.eye(self.N + 1), (z.shape[0], self.N + 1, self.N + 1)).copy()
        D, alpha = self.block(z[:, : self.N])
        A = np.zeros((z.shape[0], self.N + 1, self.N + 1))
        A[:, : self.N, : self.N] = D
        A[:, self.N, self.N] = alpha
        return A

    def matrix_and_derivatives(self, z):
        """``(A~, dA~)`` with ``dA~[:, i] = dA~/dz_i``; the t-derivative is 0."""
        z = np.atleast_2d(np.asarray(z, dtype=float))
        n, M = z.shape[0], self.N + 1
        if self.is_flat:
            return np.broadcast_to(np.eye(M), (n, M, M)).copy(), np.zeros((n, M, M, M))
        D, alpha, dD, dalpha = self.block_and_derivatives(z[:, : self.N])
        A = np.zeros((n, M, M))
        A[:, : self.N, : self.N] = D
        A[:, self.N, self.N] = alpha
        dA = np.zeros((n, M, M, M))
        dA[:, : self.N, : self.N, : self.N] = dD
        dA[:, : self.N, self.N, self.N] = dalpha
        return A, dA

    def alpha(self, y) -> np.ndarray:
        y = np.atleast_2d(np.asarray(y, dtype=float))
        if self.is_flat:
            return np.ones(y.shape[0])
        return self.block(y)[1]

    def mu(self, z) -> np.ndarray:
        z = np.atleast_2d(np.asarray(z, dtype=float))
        if self.is_flat:
            return np.ones(z.shape[0])
        A = self.matrix(z)
        Az = np.einsum("nij,nj->ni", A, z)
        return np.einsum("ni,ni->n", Az, z) / np.einsum("ni,ni->n", z, z)

    def beta(self, z) -> np.ndarray:
        z = np.atleast_2d(np.asarray(z, dtype=float))
        A = self.matrix(z)
        Az = np.einsum("nij,nj->ni", A, z)
        mu = np.einsum("ni,ni->n", Az, z) / np.einsum("ni,ni->n", z, z)
        return Az / mu[:, None]

    @staticmethod
    def _vector_field(A, dA, z):
        """mu, beta, J_beta, div beta and dA zz for ``beta = A z / mu``."""
        r2 = np.einsum("ni,ni->n", z, z)
        Az = np.einsum("nij,nj->ni", A, z)
        mu = np.einsum("ni,ni->n", Az, z) / r2
        dAzz = np.einsum("nikh,nh,nk->ni", dA, z, z)
        grad_mu = (dAzz + 2.0 * Az) / r2[:, None] - 2.0 * mu[:, None] * z / r2[:, None]
        # d_j (A z)_i = A_ij + sum_h d_j A_ih z_h
        dAz = A + np.einsum("njih,nh->nij", dA, z)
        Jb = dAz / mu[:, None, None] - Az[:, :, None] * grad_mu[:, None, :] / (mu**2)[:, None, None]
        beta = Az / mu[:, None]
        return mu, beta, Jb, np.trace(Jb, axis1=1, axis2=2), dAzz

    def geometry(self, z) -> dict:
        """All volume-term fields at points z.

        Keys: ``A``, ``dA``, ``mu``, ``beta``, ``jac_beta``, ``div_beta``,
        ``alpha``.
        """
        z = np.atleast_2d(np.asarray(z, dtype=float))
        A, dA = self.matrix_and_derivatives(z)
        mu, beta, Jb, divb, _ = self._vector_field(A, dA, z)
        return {"A": A, "dA": dA, "mu": mu, "beta": beta, "jac_beta": Jb, "div_beta": divb, "alpha": A[:, self.N, self.N]}

    def base_geometry(self, y) -> dict:
        """Flat-base fields: ``beta_prime`` and ``div_beta_prime``."""
        y = np.atleast_2d(np.asarray(y, dtype=float))
        if self.is_flat:
            return {"beta_prime": y.copy(), "div_beta_prime": np.full(y.shape[0], float(self.N)), "mu0": np.ones(y.shape[0])}
        D, _, dD, _ = self.block_and_derivatives(y)
        mu0, bp, Jbp, divbp, _ = self._vector_field(D, dD, y)
        return {"beta_prime": bp, "div_beta_prime": divbp, "mu0": mu0, "jac_beta_prime": Jbp}

    def dA_contract(self, z, v) -> np.ndarray:
        """``(dA~ v v)_i = sum_{h,k} d_i a~_kh v_h v_k``."""
        _, dA = self.matrix_and_derivatives(z)
        return np.einsum("nikh,nh,nk->ni", dA, v, v)

    # ---- potential -------------------------------------------------------
    def _global(self, y_image):
        if self.domain is None:
            return y_image
        return self.domain.to_global(y_image)

    def h_tilde(self, y) -> np.ndarray:
        """Even reflection of ``h_bar(y) = alpha(y) h(F(y, 0))``."""
        yr, _ = self._fold(y)
        if self.potential.is_zero:
            return np.zeros(yr.shape[0])
        img = self.map(np.column_stack([yr, np.zeros(yr.shape[0])]))[:, : self.N]
        return self.alpha(yr) * self.potential(self._global(img))

    def grad_h_tilde(self, y) -> np.ndarray:
        yr, upper = self._fold(y)
        n = yr.shape[0]
        if self.potential.is_zero:
            return np.zeros((n, self.N))
        img = self.map(np.column_stack([yr, np.zeros(n)]))[:, : self.N]
        x = self._global(img)
        hval = self.potential(x)
        gx = self.potential.gradient(x)
        if self.domain is not None:
            gx = gx @ self.domain.frame
        J = self.map.jacobian(yr)
        if self.is_flat:
            alpha = np.ones(n)
            dalpha = np.zeros((n, self.N))
        else:
            _, alpha, _, dalpha = self._block(yr, derivatives=True)
        g = dalpha * hval[:, None] + alpha[:, None] * np.einsum("nji,nj->ni", J, gx)
        g[upper] = g[upper] * self._mirror[None, : self.N]
        return g

    def seam_defect(self, n: int = 2000) -> float:
        """Largest |a_Nj(y', 0)|, j < N, on a sample of the seam."""
        if self.N == 1:
            return 0.0
        rng = np.random.default_rng(7)
        y = np.zeros((n, self.N))
        y[:, : self.N - 1] = rng.uniform(-self.map.r0, self.map.r0, size=(n, self.N - 1))
        D, _ = self._block(y)
        return float(np.max(np.abs(D[:, self.N - 1, : self.N - 1])))


def coefficient_field(fmap: StraighteningMap, h=None, domain: DomainSpec | None = None, tol: float = 1e-10) -> CoefficientField:
    """Build the reflected coefficient field; verifies the seam condition."""
    pot = h if isinstance(h, Potential) else Potential(fmap.N, 0.0 if h is None else h)
    cf = CoefficientField(fmap, pot, domain)
    defect = cf.seam_defect()
    if defect > tol:
        raise ConfigError(f"seam condition violated: |a_Nj(y',0)| = {defect:.3e}")
    return cf


class ReflectedField:
    """W = U o F on ``y_N <= 0``, extended oddly across ``y_N = 0``.

    ``source`` evaluates U and its gradient in global coordinates through
    ``value(x, t)`` and ``gradient(x, t)``.
    """

    def __init__(self, source, cf: CoefficientField, domain: DomainSpec, strict: bool = True):
        self.source = source
        self.cf = cf
        self.domain = domain
        self.N = cf.N
        self.r0 = cf.map.r0
        self.strict = strict

    def _prepare(self, z):
        z = np.atleast_2d(np.asarray(z, dtype=float))
        if self.strict and np.any(np.linalg.norm(z, axis=1) > self.r0 * (1 + 1e-12)):
            raise DomainError(f"evaluation outside the chart of radius {self.r0}")
        if np.any(z[:, -1] < 0):
            raise DomainError("t must be nonnegative")
        upper = z[:, self.N - 1] > 0
        zr = z.copy()
        zr[upper, self.N - 1] *= -1.0
        img = self.cf.map(zr)
        x = self.domain.to_global(img[:, : self.N])
        return zr, upper, x, img[:, self.N]

    def value(self, z) -> np.ndarray:
        zr, upper, x, t = self._prepare(z)
        w = self.source.value(x, t)
        w[upper] *= -1.0
        return w

    def gradient(self, z) -> np.ndarray:
        zr, upper, x, t = self._prepare(z)
        gU = self.source.gradient(x, t)
        gx = gU[:, : self.N] @ self.domain.frame
        J = self.cf.map.jacobian(zr[:, : self.N])
        g = np.empty_like(gU)
        g[:, : self.N] = np.einsum("nji,nj->ni", J, gx)
        g[:, self.N] = gU[:, self.N]
        m = np.ones(self.N + 1)
        m[self.N - 1] = -1.0
        g[upper] = -g[upper] * m
        return g


def reflect_solution(source, cf: CoefficientField, domain: DomainSpec) -> ReflectedField:
    return ReflectedField(source, cf, domain)


@dataclass(frozen=True)
class ExpansionReport:
    radii: np.ndarray
    deviations: dict
    slopes: dict
    constants: dict

    def passes(self, first_order: float = 0.9, second_order: float = 1.8) -> bool:
        ok = True
        for key, slope in self.slopes.items():
            if not np.isfinite(slope):
                continue
            need = second_order if key == "beta-z" else first_order
            ok &= slope >= need
        return bool(ok)


def _directions(N: int, n: int = 64, seed: int = 3) -> np.ndarray:
    rng = np.random.default_rng(seed)
    v = rng.normal(size=(n, N + 1))
    v[:, -1] = np.abs(v[:, -1])
    return v / np.linalg.norm(v, axis=1)[:, None]


def verify_expansions(cf: CoefficientField, radii) -> ExpansionReport:
    """Log-log slopes of the deviations of the geometric fields from the
    flat case. A slope is NaN when the deviation vanishes identically."""
    radii = np.asarray(radii, dtype=float)
    N = cf.N
    dirs = _directions(N)
    bdirs = dirs[:, :N] / np.linalg.norm(dirs[:, :N], axis=1)[:, None]
    keys = ["A-Id", "mu-1", "beta-z", "Jbeta-A", "divbeta", "betap-y", "divbetap"]
    dev = {k: [] for k in keys}
    for r in radii:
        z = r * dirs
        geo = cf.geometry(z)
        A = geo["A"]
        dev["A-Id"].append(np.max(np.linalg.norm(A - np.eye(N + 1), ord=2, axis=(1, 2))))
        dev["mu-1"].append(np.max(np.abs(geo["mu"] - 1.0)))
        dev["beta-z"].append(np.max(np.linalg.norm(geo["beta"] - z, axis=1)))
        dev["Jbeta-A"].append(np.max(np.linalg.norm(geo["jac_beta"] - A, ord=2, axis=(1, 2))))
        dev["divbeta"].append(np.max(np.abs(geo["div_beta"] - (N + 1))))
        base = cf.base_geometry(r * bdirs)
        dev["betap-y"].append(np.max(np.linalg.norm(base["beta_prime"] - r * bdirs, axis=1)))
        dev["divbetap"].append(np.max(np.abs(base["div_beta_prime"] - N)))
    slopes, consts = {}, {}
    lr = np.log(radii)
    for k in keys:
        d = np.asarray(dev[k])
        dev[k] = d
        if np.all(d < 1e-14):
            slopes[k] = math.nan
            consts[k] = 0.0
            continue
        slope, icpt = np.polyfit(lr, np.log(np.maximum(d, 1e-300)), 1)
        slopes[k] = float(slope)
        consts[k] = float(np.max(d / radii ** (2.0 if k == "beta-z" else 1.0)))
    return ExpansionReport(radii, dev, slopes, consts)


def boundary_integration_identity(W, cf: CoefficientField, phi, r: float, s: float, kappa: float, n_radial: int = 64):
    """Both sides of the integration-by-parts formula on ``B_r^+``.

    ``phi`` is a test field with ``value`` and ``gradient`` on point rows.
    Returns ``(lhs, rhs, relative_gap)``; the gap is measured against the
    integrals of the absolute integrands, so it stays meaningful when both
    sides cancel to zero by symmetry.
    """
    N = cf.N
    ball = half_ball(N, s, r, n_radial=n_radial)
    z = ball.points
    A = cf.matrix(z)
    AgW = np.einsum("nij,nj->ni", A, W.gradient(z))
    vol = np.einsum("ni,ni->n", AgW, phi.gradient(z))
    lhs = float(ball.integrate(vol))
    sph = half_sphere(N, s, radius=r)
    zs = sph.points
    AgWs = np.einsum("nij,nj->ni", cf.matrix(zs), W.gradient(zs))
    sv = np.einsum("ni,ni->n", AgWs, zs) * phi.value(zs)
    surf = float(sph.integrate(sv)) / r
    base = flat_ball(N, r)
    yb = base.points
    zb = np.column_stack([yb, np.zeros(len(yb))])
    fv = cf.h_tilde(yb) * W.value(zb) * phi.value(zb)
    flat = kappa * float(base.integrate(fv))
    rhs = surf + flat
    mass = float(ball.integrate(np.abs(vol)) + sph.integrate(np.abs(sv)) / r + abs(kappa) * base.integrate(np.abs(fv)))
    gap = abs(lhs - rhs) / (mass + np.finfo(float).tiny) if mass > 0 else 0.0
    return lhs, rhs, gap
