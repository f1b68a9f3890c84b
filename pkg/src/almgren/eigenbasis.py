"""Dirichlet eigenpairs on intervals and rectangles, and coefficient-space
representations of functions on them."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigError
from .graph import BoundaryGraph
from .quadrature import _legendre

__all__ = [
    "DomainSpec",
    "DirichletEigenpair",
    "EigenBasis",
    "SpectralFunction",
    "dirichlet_eigenpairs",
    "eigenbasis",
    "project",
    "hs_scalar_product",
    "default_truncation",
    "from_coefficients",
]


def default_truncation(N: int) -> int:
    return 64 if N == 1 else 256


@dataclass(frozen=True, eq=False)
class DomainSpec:
    """A domain, a boundary point ``x0`` and the local chart around it.

    ``frame`` is an orthogonal matrix whose last column is the outward normal
    at ``x0``; local coordinates are ``x = x0 + frame @ y`` and the domain is
    locally ``{y_N < g(y')}``. Kinds ``interval`` and ``rectangle`` carry a
    sine eigenbasis; kind ``graph`` is a bare chart used with manufactured
    fields.
    """

    N: int
    kind: str
    bounds: tuple
    x0: tuple
    r0: float
    graph: BoundaryGraph = None
    frame: np.ndarray = None

    def __post_init__(self):
        if self.N not in (1, 2):
            raise ConfigError(f"dimension must be 1 or 2, got {self.N}")
        if self.kind not in ("interval", "rectangle", "graph"):
            raise ConfigError(f"unsupported domain kind {self.kind!r}")
        if self.kind == "interval" and self.N != 1 or self.kind == "rectangle" and self.N != 2:
            raise ConfigError(f"kind {self.kind!r} does not match N={self.N}")
        if not self.r0 > 0:
            raise ConfigError("chart radius r0 must be positive")
        x0 = tuple(float(v) for v in np.atleast_1d(self.x0))
        if len(x0) != self.N:
            raise ConfigError("x0 has the wrong length")
        object.__setattr__(self, "x0", x0)
        if self.graph is None:
            object.__setattr__(self, "graph", BoundaryGraph(self.N, "0"))
        bounds = tuple(tuple(float(v) for v in b) for b in self.bounds) if self.bounds else ()
        object.__setattr__(self, "bounds", bounds)
        if self.kind != "graph":
            if len(bounds) != self.N or any(b[0] >= b[1] for b in bounds):
                raise ConfigError("bounds must be N pairs (a, b) with a < b")
            if not self.graph.is_flat:
                raise ConfigError("sine-basis domains have flat edges only")
            frame = self._flat_frame()
        else:
            frame = np.eye(self.N) if self.frame is None else np.asarray(self.frame, dtype=float)
        if self.frame is not None:
            frame = np.asarray(self.frame, dtype=float)
        if frame.shape != (self.N, self.N) or not np.allclose(frame.T @ frame, np.eye(self.N), atol=1e-12):
            raise ConfigError("frame must be an orthogonal N x N matrix")
        object.__setattr__(self, "frame", frame)

    def _flat_frame(self) -> np.ndarray:
        x0 = np.array(self.x0)
        tol = 1e-12
        faces = []
        for i, (a, b) in enumerate(self.bounds):
            if abs(x0[i] - a) < tol:
                faces.append((i, -1.0))
            elif abs(x0[i] - b) < tol:
                faces.append((i, 1.0))
            elif not a < x0[i] < b:
                raise ConfigError("x0 lies outside the domain")
        if len(faces) != 1:
            raise ConfigError("x0 must lie on exactly one face (corners are excluded)")
        axis, sign = faces[0]
        for j, (a, b) in enumerate(self.bounds):
            if j != axis and min(x0[j] - a, b - x0[j]) < self.r0:
                raise ConfigError("x0 is closer than r0 to a corner")
        frame = np.zeros((self.N, self.N))
        frame[axis, self.N - 1] = sign
        others = [j for j in range(self.N) if j != axis]
        for col, j in enumerate(others):
            frame[j, col] = 1.0
        return frame

    @property
    def lengths(self) -> np.ndarray:
        return np.array([b - a for a, b in self.bounds])

    def to_global(self, y) -> np.ndarray:
        """Map local coordinates y (rows) to global x."""
        y = np.atleast_2d(np.asarray(y, dtype=float))
        return np.asarray(self.x0) + y @ self.frame.T

    def to_local(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return (x - np.asarray(self.x0)) @ self.frame

    def contains(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.kind == "graph":
            y = self.to_local(x)
            return y[:, -1] < self.graph.value(y[:, :-1])
        inside = np.ones(x.shape[0], dtype=bool)
        for i, (a, b) in enumerate(self.bounds):
            inside &= (x[:, i] > a) & (x[:, i] < b)
        return inside


@dataclass(frozen=True)
class DirichletEigenpair:
    index: tuple
    eigenvalue: float
    domain: DomainSpec

    def __call__(self, x) -> np.ndarray:
        return _sine_product(self.domain, np.array([self.index]), np.atleast_2d(x))[:, 0]


def _sine_product(domain: DomainSpec, idx: np.ndarray, x: np.ndarray) -> np.ndarray:
    out = np.ones((x.shape[0], idx.shape[0]))
    for i, (a, b) in enumerate(domain.bounds):
        L = b - a
        out *= math.sqrt(2.0 / L) * np.sin(np.outer(x[:, i] - a, idx[:, i]) * (math.pi / L))
    return out


def _sine_product_grad(domain: DomainSpec, idx: np.ndarray, x: np.ndarray) -> np.ndarray:
    N = domain.N
    vals = []
    ders = []
    for i, (a, b) in enumerate(domain.bounds):
        L = b - a
        freq = idx[:, i] * (math.pi / L)
        arg = np.outer(x[:, i] - a, freq)
        c = math.sqrt(2.0 / L)
        vals.append(c * np.sin(arg))
        ders.append(c * np.cos(arg) * freq)
    out = np.empty((x.shape[0], idx.shape[0], N))
    for i in range(N):
        term = ders[i].copy()
        for j in range(N):
            if j != i:
                term *= vals[j]
        out[:, :, i] = term
    return out


@dataclass(frozen=True, eq=False)
class EigenBasis:
    """The K smallest Dirichlet eigenpairs of a domain."""

    domain: DomainSpec
    indices: np.ndarray
    eigenvalues: np.ndarray

    @property
    def K(self) -> int:
        return len(self.eigenvalues)

    def pair(self, k: int) -> DirichletEigenpair:
        return DirichletEigenpair(tuple(int(v) for v in self.indices[k]), float(self.eigenvalues[k]), self.domain)

    def evaluate(self, x, which=None) -> np.ndarray:
        """Matrix ``phi_k(x_i)`` of shape (n_points, K) or (n_points, len(which))."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        idx = self.indices if which is None else self.indices[which]
        return _sine_product(self.domain, idx, x)

    def gradient(self, x, which=None) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        idx = self.indices if which is None else self.indices[which]
        return _sine_product_grad(self.domain, idx, x)

    def quadrature(self, n: int | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Tensor Gauss-Legendre rule on the domain.

        The default node count grows with the largest frequency so that
        products of basis functions are integrated exactly to rounding.
        """
        if n is None:
            n = max(64, int(1.6 * int(self.indices.max())) + 40)
        x, w = _legendre(n)
        axes, wts = [], []
        for a, b in self.domain.bounds:
            axes.append(a + 0.5 * (b - a) * (1.0 + x))
            wts.append(0.5 * (b - a) * w)
        grids = np.meshgrid(*axes, indexing="ij")
        pts = np.column_stack([g.ravel() for g in grids])
        W = wts[0]
        for extra in wts[1:]:
            W = np.outer(W, extra).ravel()
        return pts, W


def dirichlet_eigenpairs(domain: DomainSpec, K: int | None = None, per_axis: int = 32) -> list[DirichletEigenpair]:
    """The K smallest eigenpairs, ties broken by lexicographic multi-index."""
    basis = eigenbasis(domain, K, per_axis)
    return [basis.pair(k) for k in range(basis.K)]


def eigenbasis(domain: DomainSpec, K: int | None = None, per_axis: int = 32) -> EigenBasis:
    if domain.kind not in ("interval", "rectangle"):
        raise ConfigError(f"no closed-form eigenbasis for domain kind {domain.kind!r}")
    if K is None:
        K = default_truncation(domain.N)
    if K < 1:
        raise ConfigError("truncation K must be at least 1")
    L = domain.lengths
    if domain.N == 1:
        idx = np.arange(1, K + 1)[:, None]
    else:
        if K > per_axis**2:
            raise ConfigError(f"K={K} exceeds the {per_axis}^2 candidate pairs")
        cand = list(itertools.product(range(1, per_axis + 1), repeat=2))
        cand.sort(key=lambda k: (sum((ki * math.pi / Li) ** 2 for ki, Li in zip(k, L)), k))
        idx = np.array(cand[:K])
    mu = np.sum((idx * math.pi / L) ** 2, axis=1)
    return EigenBasis(domain, idx, mu)


@dataclass(frozen=True, eq=False)
class SpectralFunction:
    """Coefficients of a function in a Dirichlet eigenbasis.

    ``role`` is ``"primal"`` for functions and ``"dual"`` for images of the
    fractional Laplacian; both live in the same container.
    """

    basis: EigenBasis
    coefficients: np.ndarray
    role: str = "primal"
    residual: float = 0.0
    hs_tail: float = 0.0
    flags: tuple = field(default_factory=tuple)

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=float)
        if c.shape != (self.basis.K,):
            raise ConfigError(f"expected {self.basis.K} coefficients, got shape {c.shape}")
        object.__setattr__(self, "coefficients", c)

    @property
    def domain(self) -> DomainSpec:
        return self.basis.domain

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.coefficients)

    def __call__(self, x) -> np.ndarray:
        sup = self.support
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if sup.size == 0:
            return np.zeros(x.shape[0])
        return self.basis.evaluate(x, sup) @ self.coefficients[sup]

    def gradient(self, x) -> np.ndarray:
        sup = self.support
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if sup.size == 0:
            return np.zeros((x.shape[0], self.domain.N))
        return np.einsum("nkd,k->nd", self.basis.gradient(x, sup), self.coefficients[sup])

    def with_coefficients(self, c, role=None) -> "SpectralFunction":
        return SpectralFunction(self.basis, np.asarray(c, dtype=float), role or self.role)


def from_coefficients(basis: EigenBasis, c) -> SpectralFunction:
    full = np.zeros(basis.K)
    c = np.asarray(c, dtype=float)
    full[: len(c)] = c
    return SpectralFunction(basis, full)


def project(
    f: Callable[[np.ndarray], np.ndarray],
    basis_or_domain,
    K: int | None = None,
    n_quad: int | None = None,
    tol: float = 1e-8,
) -> SpectralFunction:
    """Project a pointwise function onto the eigenbasis by quadrature.

    The L2 residual ``||f - sum c_k phi_k||`` is evaluated on the quadrature
    grid and stored; a residual above ``tol * ||f||`` adds the flag
    ``"truncation"``. ``hs_tail`` is the share of the H^1 proxy carried by
    the upper half of the coefficients, a cheap indicator of tail decay.
    """
    basis = basis_or_domain if isinstance(basis_or_domain, EigenBasis) else eigenbasis(basis_or_domain, K)
    pts, w = basis.quadrature(n_quad)
    fx = np.asarray(f(pts), dtype=float).reshape(-1)
    Phi = basis.evaluate(pts)
    c = Phi.T @ (w * fx)
    c[np.abs(c) < 1e-15 * max(1.0, np.max(np.abs(c)))] = 0.0
    res = math.sqrt(max(float(w @ (fx - Phi @ c) ** 2), 0.0))
    norm = math.sqrt(float(w @ fx**2))
    energy = basis.eigenvalues * c**2
    tail = float(np.sum(energy[basis.K // 2 :]) / np.sum(energy)) if np.any(energy) else 0.0
    flags = ("truncation",) if res > tol * max(norm, 1e-300) and norm > 0 else ()
    return SpectralFunction(basis, c, residual=res, hs_tail=tail, flags=flags)


def _check_same(v1: SpectralFunction, v2: SpectralFunction):
    if v1.basis is not v2.basis and (
        v1.domain is not v2.domain or not np.array_equal(v1.basis.indices, v2.basis.indices)
    ):
        raise ConfigError("spectral functions live on different bases")


def hs_scalar_product(v1: SpectralFunction, v2: SpectralFunction, s: float) -> float:
    """Scalar product ``sum mu_k^s c1_k c2_k``."""
    _check_same(v1, v2)
    return float(np.sum(v1.basis.eigenvalues**s * v1.coefficients * v2.coefficients))
