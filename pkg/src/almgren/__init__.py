"""Boundary vanishing order of solutions to spectral fractional Schrödinger
equations, measured through an Almgren-type frequency function of the
Caffarelli-Stinga extension.

Typical use::

    from almgren import get_scenario, run_scenario
    report = run_scenario(get_scenario("phi1_interval"))
    report.verdict["m0"]          # vanishing order, here 1
"""

__version__ = "0.1.0"

from .errors import AlmgrenError, ConfigError, DegenerateError, DomainError, NumericError
from .eigenbasis import DomainSpec, SpectralFunction, eigenbasis
from .extension import build_kernel, extend
from .sphere_eig import eigenspace_basis
from .frequency import LocalProblem, flat_problem, frequency_profile, monotonicity_audit
from .blowup import blowup_analysis
from .diagnostics import inequality_audit, pohozaev_check
from .scenarios import Scenario, builtin_scenarios, get_scenario, load_scenario, setup
from .report import RunReport, emit, read_report, run_scenario

__all__ = [
    "__version__",
    "AlmgrenError",
    "ConfigError",
    "DegenerateError",
    "DomainError",
    "NumericError",
    "DomainSpec",
    "SpectralFunction",
    "eigenbasis",
    "build_kernel",
    "extend",
    "eigenspace_basis",
    "LocalProblem",
    "flat_problem",
    "frequency_profile",
    "monotonicity_audit",
    "blowup_analysis",
    "inequality_audit",
    "pohozaev_check",
    "Scenario",
    "builtin_scenarios",
    "get_scenario",
    "load_scenario",
    "setup",
    "RunReport",
    "emit",
    "read_report",
    "run_scenario",
]
