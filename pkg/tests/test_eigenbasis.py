import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from almgren.eigenbasis import DomainSpec, dirichlet_eigenpairs, eigenbasis, from_coefficients, hs_scalar_product, project
from almgren.errors import ConfigError
from conftest import basis_function, unit_interval, unit_square


def test_interval_first_eigenpair():
    b = unit_interval(3)
    assert b.eigenvalues[0] == pytest.approx(math.pi**2)
    x = np.array([[0.3]])
    assert b.evaluate(x, [0])[0, 0] == pytest.approx(math.sqrt(2) * math.sin(0.3 * math.pi))
    np.testing.assert_allclose(b.eigenvalues, [math.pi**2, 4 * math.pi**2, 9 * math.pi**2])


def test_square_first_eigenvalue_and_ordering():
    b = unit_square()
    assert b.eigenvalues[0] == pytest.approx(2 * math.pi**2)
    assert b.K == 256
    assert np.all(np.diff(b.eigenvalues) >= 0)
    assert np.all(b.eigenvalues > 0)
    # ties broken by lexicographic multi-index
    assert tuple(b.indices[1]) == (1, 2) and tuple(b.indices[2]) == (2, 1)


def test_default_truncations():
    assert unit_interval().K == 64


def test_unsupported_kind():
    with pytest.raises(ConfigError):
        DomainSpec(N=2, kind="disk", bounds=((0, 1), (0, 1)), x0=(0.5, 0.0), r0=0.1)


def test_corner_margin_enforced():
    with pytest.raises(ConfigError):
        DomainSpec(N=2, kind="rectangle", bounds=((0, 1), (0, 1)), x0=(0.1, 0.0), r0=0.25)


@pytest.mark.parametrize("make", [lambda: unit_interval(20), lambda: unit_square(40)])
def test_orthonormality(make):
    b = make()
    x, w = b.quadrature()
    phi = b.evaluate(x)
    gram = (phi * w[:, None]).T @ phi
    assert np.max(np.abs(gram - np.eye(b.K))) < 1e-10


def test_finite_difference_laplacian_residual():
    b = unit_square(30)
    rng = np.random.default_rng(3)
    x = rng.uniform(0.01, 0.99, size=(100, 2))
    h = 1e-4
    phi = b.evaluate(x)
    lap = np.zeros_like(phi)
    for i in range(2):
        e = np.zeros(2)
        e[i] = h
        lap += (b.evaluate(x + e) - 2 * phi + b.evaluate(x - e)) / h**2
    scale = np.max(np.abs(phi), axis=0)
    res = np.abs(lap + phi * b.eigenvalues) / (b.eigenvalues * np.maximum(scale, 1e-300))
    assert np.max(res) < 1e-6


def test_project_examples():
    b = unit_interval(5)
    phi2 = b.pair(1)
    v = project(lambda x: phi2(x), b)
    np.testing.assert_allclose(v.coefficients, [0, 1, 0, 0, 0], atol=1e-10)
    zero = project(lambda x: np.zeros(len(x)), b)
    assert not np.any(zero.coefficients)
    # c1 of x(1-x) against sqrt(2) sin(pi x): 4 sqrt(2) / pi^3
    c = project(lambda x: x[:, 0] * (1 - x[:, 0]), unit_interval(1))
    assert c.coefficients[0] == pytest.approx(4 * math.sqrt(2) / math.pi**3, rel=1e-12)
    assert c.residual > 0


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(min_value=-1, max_value=1), min_size=8, max_size=8))
def test_project_evaluate_round_trip(coefs):
    b = unit_interval(8)
    v = from_coefficients(b, np.array(coefs))
    back = project(v, b)
    np.testing.assert_allclose(back.coefficients, coefs, atol=1e-10)


def test_hs_scalar_product_examples():
    b = unit_interval(2)
    p1, p2 = basis_function(b, 0), basis_function(b, 1)
    assert hs_scalar_product(p1, p1, 0.5) == pytest.approx(math.pi)
    assert hs_scalar_product(p1, p2, 0.5) == 0.0
    v1 = from_coefficients(b, [1.0, 1.0])
    v2 = from_coefficients(b, [1.0, -1.0])
    expected = (math.pi**2) ** 0.3 - (4 * math.pi**2) ** 0.3
    assert hs_scalar_product(v1, v2, 0.3) == pytest.approx(expected, rel=1e-13)
    assert expected == pytest.approx(-1.0250, abs=1e-4)


def test_hs_scalar_product_mismatched_domains():
    with pytest.raises(ConfigError):
        hs_scalar_product(basis_function(unit_interval(2), 0), basis_function(unit_square(4), 0), 0.5)


@given(
    st.lists(st.floats(min_value=-2, max_value=2), min_size=6, max_size=6),
    st.lists(st.floats(min_value=-2, max_value=2), min_size=6, max_size=6),
    st.floats(min_value=0.01, max_value=0.99),
)
def test_hs_scalar_product_symmetric_positive(c1, c2, s):
    b = unit_interval(6)
    v1, v2 = from_coefficients(b, c1), from_coefficients(b, c2)
    assert hs_scalar_product(v1, v2, s) == pytest.approx(hs_scalar_product(v2, v1, s), rel=1e-12, abs=1e-12)
    assert hs_scalar_product(v1, v1, s) >= 0


def test_eigenpairs_list_matches_basis():
    dom = DomainSpec(N=1, kind="interval", bounds=((-1.0, 0.0),), x0=(0.0,), r0=0.5)
    pairs = dirichlet_eigenpairs(dom, 4)
    b = eigenbasis(dom, 4)
    assert [p.eigenvalue for p in pairs] == list(b.eigenvalues)
