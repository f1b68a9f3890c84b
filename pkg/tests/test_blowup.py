import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from almgren.blowup import (
    beta_route_b,
    blowup_analysis,
    eigenfunctions_up_to,
    fourier_coefficients,
    labels,
    limit_profile,
    rescale,
    upsilon,
)
from almgren.errors import ConfigError
from almgren.frequency import flat_problem, geometric_grid
from almgren.quadrature import half_sphere
from almgren.sphere_eig import eigenspace_of_degree
from conftest import SCENARIOS, ScaledField, homogeneous

LAMBDAS = geometric_grid(0.25, 0.005)


@pytest.mark.parametrize("N,s,m", [(1, 0.25, 1), (1, 0.25, 3), (2, 0.5, 2), (2, 0.3, 1)])
def test_fourier_coefficients_of_homogeneous_mode(N, s, m):
    prob = homogeneous(m, N, s)
    funcs = eigenfunctions_up_to(N, s, m + 2)
    j = labels(funcs).index(f"phi_{m}_1")
    for lam in (0.3, 0.02):
        phi = fourier_coefficients(prob.field, lam, funcs, s)
        expected = np.zeros(len(funcs))
        expected[j] = lam**m
        np.testing.assert_allclose(phi, expected, atol=1e-13 * lam**m)


def test_eigenfunction_listing_order():
    assert labels(eigenfunctions_up_to(1, 0.5, 5)) == ["phi_1_1", "phi_3_1", "phi_5_1"]
    assert labels(eigenfunctions_up_to(2, 0.5, 2)) == ["phi_1_1", "phi_2_1"]


def test_upsilon_vanishes_for_flat_data():
    Y = eigenspace_of_degree(2, 2, 0.5).functions[0]
    prob = homogeneous(2, 2, 0.5)
    assert upsilon(prob, 0.3, Y) == 0.0


@pytest.mark.parametrize("N,s,m", [(1, 0.25, 3), (2, 0.5, 2)])
def test_upsilon_constant_potential_closed_form(N, s, m):
    # flat chart, h = c: only the base term survives and
    # kappa c int_{B'_lam} |y|^m Y(y/|y|,0)^2 dy = kappa c lam^(m+N)/(m+N) int_{S'} Y^2
    Y = eigenspace_of_degree(m, N, s).functions[0]
    kappa, c, lam = 1.3, 2.0, 0.3
    prob = flat_problem(Y, N, s, kappa=kappa, h=c)
    if N == 1:
        ring = Y.value(np.array([[1.0, 0.0]]))[0] ** 2 + Y.value(np.array([[-1.0, 0.0]]))[0] ** 2
    else:
        th = np.linspace(0, 2 * np.pi, 400, endpoint=False)
        pts = np.column_stack([np.cos(th), np.sin(th), np.zeros_like(th)])
        ring = float(np.mean(Y.value(pts) ** 2) * 2 * np.pi)
    expected = kappa * c * lam ** (m + N) / (m + N) * ring
    assert upsilon(prob, lam, Y) == pytest.approx(expected, rel=1e-10)


@pytest.mark.parametrize("scale", [1.0, 2.0])
def test_homogeneous_blowup(scale):
    prob = homogeneous(2, 2, 0.5, scale=scale)
    rep = blowup_analysis(prob, 2, LAMBDAS)
    np.testing.assert_allclose(rep.beta, [scale], rtol=1e-10)
    np.testing.assert_allclose(rep.beta_b.values, [scale], rtol=1e-10)
    assert rep.classified and not rep.flags
    assert rep.route_gap < 1e-10
    assert np.max(rep.discrepancy) < 1e-12
    assert rep.normalization_error < 1e-12
    assert rep.bessel_ok


def test_blowup_rejects_empty_degree():
    with pytest.raises(ConfigError):
        blowup_analysis(homogeneous(1, 1, 0.5), 2, LAMBDAS)


@settings(max_examples=20, deadline=None)
@given(st.floats(min_value=0.01, max_value=0.9), st.floats(min_value=0.1, max_value=50.0))
def test_rescaled_field_is_normalized_and_scale_free(lam, c):
    N, s = 2, 0.3
    base = homogeneous(1, N, s)
    big = homogeneous(1, N, s, scale=c)
    sph = half_sphere(N, s)
    Va, Vb = rescale(base, lam), rescale(big, lam)
    z = sph.points
    assert float(sph.integrate(Va.value(z) ** 2)) == pytest.approx(1.0, rel=1e-12)
    np.testing.assert_allclose(Va.value(z), Vb.value(z), rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(Va.gradient(z), Vb.gradient(z), rtol=1e-12, atol=1e-14)


def test_fourier_scaling_covariance():
    prob = homogeneous(3, 1, 0.25)
    funcs = eigenfunctions_up_to(1, 0.25, 5)
    a = fourier_coefficients(prob.field, 0.4, funcs, 0.25)
    b = fourier_coefficients(ScaledField(prob.field, -3.0), 0.4, funcs, 0.25)
    np.testing.assert_allclose(b, -3.0 * a, atol=1e-15)


def test_route_b_recovers_power_law_limit():
    lam = geometric_grid(0.25, 0.002)
    table = (lam**2 * (0.7 + 0.4 * lam**0.5))[:, None]
    est = beta_route_b(lam, table, 2, 0.5)
    assert est.values[0] == pytest.approx(0.7, abs=1e-6)
    assert est.rates[0] == pytest.approx(0.5, abs=0.05)


def test_limit_profile_is_homogeneous():
    funcs = eigenspace_of_degree(2, 2, 0.5).functions
    prof = limit_profile(funcs, [0.5, -1.5])
    z = np.array([[0.2, -0.1, 0.3], [0.5, 0.1, 0.05]])
    np.testing.assert_allclose(prof.value(3 * z), 9 * prof.value(z), rtol=1e-12)


def test_phi1_coefficient_log_slope(phi1_setup):
    prob = phi1_setup.problem
    funcs = eigenfunctions_up_to(1, prob.s, 1)
    lam = np.array([0.02, 0.01, 0.005])
    phi = np.array([fourier_coefficients(prob.field, l, funcs, prob.s, prob.orders)[0] for l in lam])
    slope = np.polyfit(np.log(lam), np.log(np.abs(phi)), 1)[0]
    assert abs(slope - 1.0) < 0.02


@pytest.mark.parametrize("name", SCENARIOS)
def test_scenario_blowup_quality(reports, name):
    rep = reports[name]
    bl = rep.blowup
    assert bl["route_gap"] <= 0.05
    d = np.asarray(bl["discrepancy"], dtype=float)
    assert np.all(np.diff(d) <= 1e-12 * d[0])
    assert d[-1] < 0.05 * bl["profile_norm"]
    assert rep.verdict["checks"]["bessel"]
    assert bl["normalization_error"] < 1e-8
    beta = np.asarray(rep.verdict["beta"], dtype=float)
    assert np.linalg.norm(beta) > 0
