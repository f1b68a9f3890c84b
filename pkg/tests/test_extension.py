import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from almgren.eigenbasis import from_coefficients
from almgren.extension import build_kernel, energy_perturbation, extend, kappa_oracle, neumann_trace
from almgren.fractional_op import apply_fractional_laplacian
from almgren.special import gamma
from conftest import basis_function, unit_interval, unit_square


@pytest.fixture(scope="module")
def kernels():
    return {s: build_kernel(s) for s in (0.25, 0.5, 0.75)}


def test_half_order_kernel_is_exponential(kernels):
    k = kernels[0.5]
    xi = np.linspace(0.0, 10.0, 201)
    np.testing.assert_allclose(k.psi(xi), np.exp(-xi), atol=1e-10)
    assert float(k.psi(1.0)) == pytest.approx(0.367879, abs=1e-6)
    assert k.kappa == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("s", [0.25, 0.5, 0.75])
def test_kernel_invariants(kernels, s):
    k = kernels[s]
    assert float(k.psi(0.0)) == 1.0
    assert k.ode_residual < 1e-8
    assert k.kappa_gap < 1e-6
    xi = np.geomspace(1e-6, 40, 300)
    p = k.psi(xi)
    assert np.all(np.diff(p) < 0)
    assert p[-1] < 1e-12


def test_kappa_oracle_value():
    # independent evaluation of 2^(1-2s) Gamma(1-s) / Gamma(s) at s = 1/4
    expected = math.sqrt(2) * math.gamma(0.75) / math.gamma(0.25)
    assert kappa_oracle(0.25) == pytest.approx(expected, rel=1e-12)
    assert expected == pytest.approx(0.4780, abs=1e-4)


@settings(max_examples=15, deadline=None)
@given(st.floats(min_value=0.05, max_value=0.95))
def test_kernel_constant_matches_oracle(s):
    k = build_kernel(s, n_grid=120)
    assert k.kappa == pytest.approx(2 ** (1 - 2 * s) * gamma(1 - s) / gamma(s), rel=1e-6)


def test_extend_closed_form_half_order():
    b = unit_interval()
    U = extend(basis_function(b, 0), 0.5)
    assert float(U.value(np.array([[0.5]]), np.array([1 / math.pi]))[0]) == pytest.approx(math.sqrt(2) / math.e, rel=1e-12)
    assert math.sqrt(2) / math.e == pytest.approx(0.52026, abs=1e-5)


def test_extend_zero_and_boundary():
    b = unit_square(16)
    zero = extend(from_coefficients(b, np.zeros(b.K)), 0.3)
    x = np.array([[0.2, 0.4], [0.7, 0.1]])
    assert not np.any(zero.value(x, np.array([0.1, 0.2])))
    rng = np.random.default_rng(0)
    U = extend(from_coefficients(b, rng.normal(size=b.K)), 0.3)
    edge = np.array([[0.0, 0.3], [1.0, 0.6], [0.25, 0.0], [0.8, 1.0]])
    assert np.max(np.abs(U.value(edge, np.full(4, 0.05)))) < 1e-12


@pytest.mark.parametrize("s", [0.25, 0.75])
def test_extend_trace_and_sign(kernels, s):
    b = unit_interval()
    u = basis_function(b, 0)
    U = extend(u, kernels[s])
    x = np.array([[0.3]])
    # psi_s(xi) = 1 - O(xi^(2s)), so the trace is approached slowly for small s
    assert float(U.value(x, np.array([1e-16]))[0]) == pytest.approx(float(u(x)[0]), rel=1e-6)
    vals = U.value(np.repeat(x, 20, axis=0), np.linspace(0.0, 3.0, 20))
    assert np.all(vals > 0)


def test_neumann_trace_examples(kernels):
    b = unit_interval()
    u = basis_function(b, 0)
    x = np.array([[0.5]])
    tr = neumann_trace(extend(u, kernels[0.5]), x)
    assert tr.value[0] == pytest.approx(math.pi * math.sqrt(2), rel=1e-6)
    zero = neumann_trace(extend(from_coefficients(b, np.zeros(b.K)), kernels[0.5]), x)
    assert zero.value[0] == 0.0
    k = kernels[0.25]
    tr = neumann_trace(extend(u, k), x)
    expected = k.kappa * math.pi**0.5 * math.sqrt(2)
    assert tr.value[0] == pytest.approx(expected, rel=1e-4)
    assert tr.value[0] == pytest.approx(k.kappa * float(apply_fractional_laplacian(u, 0.25)(x)[0]), rel=1e-4)


@settings(max_examples=10, deadline=None)
@given(st.lists(st.floats(min_value=-1, max_value=1), min_size=6, max_size=6))
def test_neumann_trace_matches_fractional_laplacian(coefs):
    b = unit_square(6)
    u = from_coefficients(b, coefs)
    if not np.any(u.coefficients):
        return
    k = build_kernel(0.5)
    x = np.array([[0.3, 0.4], [0.61, 0.77], [0.5, 0.5]])
    tr = neumann_trace(extend(u, k), x)
    ref = k.kappa * apply_fractional_laplacian(u, 0.5)(x)
    scale = np.max(np.abs(ref)) + 1e-12
    assert np.max(np.abs(tr.value - ref)) / scale < 1e-4


def test_weighted_divergence_residual(kernels):
    """div(t^(1-2s) grad U) = 0, using analytic x-derivatives and the kernel ODE."""
    s = 0.25
    k = kernels[s]
    b = unit_interval(8)
    rng = np.random.default_rng(5)
    c = rng.normal(size=8)
    for _ in range(20):
        x, t = rng.uniform(0.05, 0.95), rng.uniform(0.01, 1.0)
        lap = 0.0
        dt = 0.0
        dtt = 0.0
        for j in range(8):
            mu = b.eigenvalues[j]
            phi = float(b.evaluate(np.array([[x]]), [j])[0, 0])
            xi = math.sqrt(mu) * t
            psi, dpsi = (float(v[0]) for v in k.psi_and_derivative(np.array([xi])))
            # kernel ODE: psi'' = psi - (1-2s)/xi psi'
            d2psi = psi - (1 - 2 * s) / xi * dpsi
            lap += -mu * c[j] * phi * psi
            dt += c[j] * phi * math.sqrt(mu) * dpsi
            dtt += c[j] * phi * mu * d2psi
        residual = lap + dtt + (1 - 2 * s) / t * dt
        scale = abs(lap) + abs(dt) / t + 1.0
        assert abs(residual) / scale < 1e-6


def test_energy_minimality_proxy(kernels):
    for s, k in kernels.items():
        minus, zero, plus = energy_perturbation(k, math.pi**2)
        assert minus > zero and plus > zero
        assert minus + plus - 2 * zero > 0


def test_tail_bound_nonnegative():
    b = unit_interval(8)
    U = extend(basis_function(b, 0), 0.5)
    assert np.all(U.tail_bound(np.array([0.0, 0.1, 1.0])) >= 0)
