import math

import numpy as np
import pytest

from almgren.eigenbasis import DomainSpec, eigenbasis, from_coefficients
from almgren.frequency import flat_problem
from almgren.report import run_scenario
from almgren.scenarios import builtin_scenarios, setup
from almgren.sphere_eig import eigenspace_of_degree

SCENARIOS = ("phi1_interval", "order2_square", "parabola_edge")


def unit_interval(K=None):
    dom = DomainSpec(N=1, kind="interval", bounds=((0.0, 1.0),), x0=(0.0,), r0=0.25)
    return eigenbasis(dom, K)


def unit_square(K=None):
    dom = DomainSpec(N=2, kind="rectangle", bounds=((0.0, 1.0), (0.0, 1.0)), x0=(0.5, 0.0), r0=0.25)
    return eigenbasis(dom, K)


def basis_function(basis, k, scale=1.0):
    c = np.zeros(basis.K)
    c[k] = scale
    return from_coefficients(basis, c)


class ScaledField:
    """``scale * W`` for a field with value/gradient."""

    def __init__(self, field, scale):
        self.field, self.scale = field, scale

    def value(self, z):
        return self.scale * self.field.value(z)

    def gradient(self, z):
        return self.scale * self.field.gradient(z)


def homogeneous(m, N, s, k=0, scale=1.0):
    """Flat local problem whose field is ``scale |z|^m Y_{m,k}`` (m is the degree)."""
    Y = eigenspace_of_degree(m, N, s).functions[k]
    field = Y if scale == 1.0 else ScaledField(Y, scale)
    return flat_problem(field, N, s)


@pytest.fixture(scope="session")
def setups():
    shipped = builtin_scenarios()
    return {name: setup(shipped[name]) for name in SCENARIOS}


@pytest.fixture(scope="session")
def reports():
    """Full pipeline on every shipped scenario, single-threaded."""
    shipped = builtin_scenarios()
    return {name: run_scenario(shipped[name], threads=1) for name in SCENARIOS}


@pytest.fixture(scope="session")
def phi1_setup(setups):
    return setups["phi1_interval"]


def close(a, b, rel=1e-12, abs_=0.0):
    return math.isclose(a, b, rel_tol=rel, abs_tol=abs_)


ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda l: int(l.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
