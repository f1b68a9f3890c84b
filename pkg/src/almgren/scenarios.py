"""Scenario configuration: what to solve, where to look, and how finely.

A scenario names a domain with a boundary point, a fractional order, a
potential and a solution. Solutions are either spectral (an eigenfunction or
a coefficient list, extended to the half-cylinder) or a manufactured
t-independent harmonic field on a curved chart. Scenarios load from TOML.
"""

from __future__ import annotations

import math
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import sympy

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .eigenbasis import DomainSpec, SpectralFunction, eigenbasis
from .errors import ConfigError, DegenerateError
from .extension import ExtensionKernel, build_kernel, extend
from .frequency import LocalProblem, QuadratureOrders, geometric_grid
from .fractional_op import weak_residual
from .graph import BoundaryGraph
from .straightening import Potential, ReflectedField, build_map, coefficient_field

__all__ = [
    "Grids",
    "Scenario",
    "Setup",
    "HarmonicField",
    "load_scenario",
    "parse_scenario",
    "builtin_scenarios",
    "get_scenario",
    "setup",
]


class HarmonicField:
    """A t-independent field ``U(x, t) = f(x)`` given by an expression in x1..xN.

    Such a field solves the extension problem with zero Neumann data when f
    is harmonic; the constructor checks harmonicity symbolically.
    """

    def __init__(self, N: int, expression: str):
        self.N = int(N)
        self.expression = str(expression)
        xs = sympy.symbols([f"x{i + 1}" for i in range(self.N)], real=True)
        try:
            expr = sympy.sympify(self.expression, locals={str(v): v for v in xs})
        except (sympy.SympifyError, TypeError) as exc:
            raise ConfigError(f"cannot parse field {expression!r}") from exc
        extra = expr.free_symbols - set(xs)
        if extra:
            raise ConfigError(f"field uses unknown symbols {sorted(map(str, extra))}")
        self._f = sympy.lambdify(xs, expr, "numpy")
        self._g = [sympy.lambdify(xs, sympy.diff(expr, v), "numpy") for v in xs]
        lap = sum(sympy.diff(expr, v, 2) for v in xs)
        probe = np.array([[0.013 * (i + 1), -0.021 * (i + 2)][: self.N] for i in range(3)])
        lap_f = sympy.lambdify(xs, lap, "numpy")
        if np.max(np.abs(np.asarray(lap_f(*probe.T), dtype=float))) > 1e-10:
            raise ConfigError("field is not harmonic")

    def _eval(self, fn, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = fn(*[x[:, i] for i in range(self.N)])
        return np.broadcast_to(np.real(np.asarray(out)).astype(float), (x.shape[0],)).copy()

    def value(self, x, t=None) -> np.ndarray:
        return self._eval(self._f, x)

    def gradient(self, x, t=None) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = np.zeros((x.shape[0], self.N + 1))
        for i, g in enumerate(self._g):
            out[:, i] = self._eval(g, x)
        return out


@dataclass(frozen=True)
class Grids:
    """Geometric radius and blow-up grids, as fractions of the chart radius."""

    r_max: float = 0.5
    r_min: float = 1e-3
    ratio: float = 2.0**-0.5
    lambda_max: float = 0.1
    lambda_min: float = 1e-3

    def radii(self, r0: float) -> np.ndarray:
        return geometric_grid(self.r_max * r0, self.r_min * r0, self.ratio)

    def lambdas(self, r0: float) -> np.ndarray:
        return geometric_grid(self.lambda_max * r0, self.lambda_min * r0, self.ratio)


@dataclass(frozen=True)
class Scenario:
    """Everything needed to run the pipeline on one boundary point.

    ``solution`` is a dict with ``kind`` one of ``eigenfunction`` (keys
    ``index``, ``coefficient``), ``coefficients`` (key ``values``) or
    ``harmonic`` (key ``expression``).
    """

    name: str
    domain: dict
    s: float
    solution: dict
    h: object = 0.0
    eps: float = 0.5
    grids: Grids = field(default_factory=Grids)
    orders: QuadratureOrders = field(default_factory=QuadratureOrders)
    m_max: int = 0
    sobolev_constant: float = 1.0
    route_tolerance: float = 0.05
    residual_tolerance: float = 1e-8

    def __post_init__(self):
        if not 0.0 < self.s < 1.0:
            raise ConfigError(f"s must lie in (0, 1), got {self.s}")
        N = int(self.domain.get("N", 0))
        if N < 2 * self.s:
            raise ConfigError(f"need N >= 2s, got N={N}, s={self.s}")
        if not 0.0 < self.eps < 1.0:
            raise ConfigError("eps must lie in (0, 1)")
        if self.solution.get("kind") not in ("eigenfunction", "coefficients", "harmonic"):
            raise ConfigError(f"unknown solution kind {self.solution.get('kind')!r}")

    @property
    def N(self) -> int:
        return int(self.domain["N"])

    def domain_spec(self) -> DomainSpec:
        d = self.domain
        return DomainSpec(
            N=int(d["N"]),
            kind=d["kind"],
            bounds=tuple(tuple(b) for b in d.get("bounds", ())),
            x0=tuple(d["x0"]),
            r0=float(d["r0"]),
            graph=BoundaryGraph(int(d["N"]), str(d.get("graph", "0"))),
            frame=None if d.get("frame") is None else np.asarray(d["frame"], dtype=float),
        )

    def to_dict(self) -> dict:
        out = asdict(self)
        out["h"] = self.h if isinstance(self.h, str) else float(self.h)
        return out


@dataclass
class Setup:
    """A scenario with its fields built."""

    scenario: Scenario
    domain: DomainSpec
    kernel: ExtensionKernel
    cf: object
    field: ReflectedField
    problem: LocalProblem
    u: SpectralFunction | None = None
    weak_residual: float = 0.0

    @property
    def radii(self) -> np.ndarray:
        return self.scenario.grids.radii(self.domain.r0)

    @property
    def lambdas(self) -> np.ndarray:
        return self.scenario.grids.lambdas(self.domain.r0)


def _spectral_solution(sc: Scenario, dom: DomainSpec) -> SpectralFunction:
    basis = eigenbasis(dom)
    c = np.zeros(basis.K)
    sol = sc.solution
    if sol["kind"] == "eigenfunction":
        idx = tuple(int(i) for i in np.atleast_1d(sol["index"]))
        rows = [k for k in range(basis.K) if tuple(basis.indices[k]) == idx]
        if not rows:
            raise ConfigError(f"eigenfunction index {idx} is outside the truncated basis")
        c[rows[0]] = float(sol.get("coefficient", 1.0))
    else:
        vals = np.asarray(sol["values"], dtype=float)
        if len(vals) > basis.K:
            raise ConfigError("more coefficients than basis functions")
        c[: len(vals)] = vals
    if not np.any(c):
        raise DegenerateError("the solution is identically zero; no vanishing order exists")
    return SpectralFunction(basis, c)


def setup(sc: Scenario) -> Setup:
    """Build the kernel, chart, coefficient field and reflected solution."""
    dom = sc.domain_spec()
    kernel = build_kernel(sc.s)
    pot = Potential(dom.N, sc.h)
    fmap = build_map(dom.graph, dom.r0)
    cf = coefficient_field(fmap, pot, dom)
    u = None
    resid = 0.0
    if sc.solution["kind"] == "harmonic":
        if not pot.is_zero:
            raise ConfigError("a harmonic field solves the problem only with h = 0")
        source = HarmonicField(dom.N, sc.solution["expression"])
        probe = dom.to_global(np.zeros((1, dom.N)))
        if abs(source.value(probe)[0]) > 1e-12:
            raise ConfigError("the harmonic field must vanish at x0")
    else:
        if dom.kind == "graph":
            raise ConfigError("spectral solutions need an interval or rectangle domain")
        u = _spectral_solution(sc, dom)
        resid = weak_residual(u, pot, sc.s).value
        if resid > sc.residual_tolerance:
            raise ConfigError(f"u does not solve the equation with this potential (weak residual {resid:.3e})")
        source = extend(u, kernel)
    W = ReflectedField(source, cf, dom)
    problem = LocalProblem(W, cf, sc.s, kernel.kappa, dom.r0, sc.eps, sc.sobolev_constant, sc.orders)
    return Setup(sc, dom, kernel, cf, W, problem, u, resid)


_TOP_KEYS = {"name", "s", "eps", "domain", "potential", "solution", "grids", "quadrature", "blowup", "audit", "tolerances"}


_TABLE_KEYS = {
    "domain": {"N", "kind", "bounds", "x0", "r0", "graph", "frame"},
    "potential": {"h"},
    "solution": {"kind", "index", "coefficient", "values", "expression"},
    "blowup": {"m_max"},
    "audit": {"sobolev_constant"},
    "tolerances": {"route", "residual"},
}


def parse_scenario(data: dict) -> Scenario:
    """Build a Scenario from a TOML-shaped dict; unknown keys are errors."""
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown scenario keys {sorted(unknown)}")
    for table, allowed in _TABLE_KEYS.items():
        sub = data.get(table, {})
        if not isinstance(sub, dict):
            raise ConfigError(f"[{table}] must be a table")
        extra = set(sub) - allowed
        if extra:
            raise ConfigError(f"unknown keys in [{table}]: {sorted(extra)}")
    try:
        dom = dict(data["domain"])
        dom.setdefault("N", len(dom.get("x0", [])))
        pot = data.get("potential", {})
        grids = Grids(**data.get("grids", {}))
        orders = QuadratureOrders(**data.get("quadrature", {}))
        tol = data.get("tolerances", {})
        return Scenario(
            name=str(data["name"]),
            domain=dom,
            s=float(data["s"]),
            solution=dict(data["solution"]),
            h=pot.get("h", 0.0),
            eps=float(data.get("eps", 0.5)),
            grids=grids,
            orders=orders,
            m_max=int(data.get("blowup", {}).get("m_max", 0)),
            sobolev_constant=float(data.get("audit", {}).get("sobolev_constant", 1.0)),
            route_tolerance=float(tol.get("route", 0.05)),
            residual_tolerance=float(tol.get("residual", 1e-8)),
        )
    except KeyError as exc:
        raise ConfigError(f"missing scenario key {exc}") from exc
    except TypeError as exc:
        raise ConfigError(f"malformed scenario: {exc}") from exc


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        with path.open("rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return parse_scenario(data)


def builtin_scenarios() -> dict:
    """The shipped scenarios, keyed by name."""
    return {
        "phi1_interval": Scenario(
            name="phi1_interval",
            domain={"N": 1, "kind": "interval", "bounds": [[-1.0, 0.0]], "x0": [0.0], "r0": 0.5},
            s=0.5,
            solution={"kind": "eigenfunction", "index": [1], "coefficient": 1.0},
            h="pi",
        ),
        "order2_square": Scenario(
            name="order2_square",
            domain={"N": 2, "kind": "rectangle", "bounds": [[0.0, 1.0], [0.0, 1.0]], "x0": [0.5, 0.0], "r0": 0.25},
            s=0.5,
            solution={"kind": "eigenfunction", "index": [2, 1], "coefficient": 0.5},
            h="sqrt(5)*pi",
        ),
        "parabola_edge": Scenario(
            name="parabola_edge",
            domain={"N": 2, "kind": "graph", "x0": [0.0, 0.0], "r0": 0.25, "graph": "y1**2/4"},
            s=0.5,
            solution={"kind": "harmonic", "expression": "re(sqrt(2*I*x1 - 2*(x2 - 1))) - sqrt(2)"},
            h=0.0,
        ),
    }


def get_scenario(name_or_path) -> Scenario:
    """A shipped scenario by name, or a TOML file by path."""
    shipped = builtin_scenarios()
    if str(name_or_path) in shipped:
        return shipped[str(name_or_path)]
    p = Path(name_or_path)
    if p.suffix == ".toml" or p.exists():
        return load_scenario(p)
    raise ConfigError(f"unknown scenario {name_or_path!r}; shipped: {', '.join(shipped)}")
