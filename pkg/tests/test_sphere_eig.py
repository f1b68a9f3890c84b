import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from almgren.errors import ConfigError
from almgren.quadrature import half_sphere
from almgren.sphere_eig import (
    Polynomial,
    admissible_degrees,
    degree_of_eigenvalue,
    eigenspace_basis,
    eigenspace_of_degree,
    eigenvalue,
    family_N1,
    family_N2,
    rayleigh_quotient,
    weighted_laplacian,
)

S_VALUES = (0.25, 0.5, 0.75)


def poly(terms, n):
    return Polynomial([e for e, _ in terms], [c for _, c in terms], n)


def test_eigenvalue_examples():
    assert eigenvalue(1, 1, 0.5) == 1
    assert eigenvalue(2, 2, 0.5) == 6
    assert eigenvalue(1, 2, 0.75) == 1.5
    with pytest.raises(ConfigError):
        eigenvalue(0, 2, 0.5)


@given(st.integers(min_value=1, max_value=8), st.sampled_from([1, 2]), st.floats(min_value=0.01, max_value=0.5))
def test_degree_map_inverts_eigenvalue(m, N, s):
    degree = 2 * m - 1 if N == 1 else m
    assert degree_of_eigenvalue(eigenvalue(m, N, s), N, s) == pytest.approx(degree, abs=1e-12)


def test_admissible_degrees():
    assert admissible_degrees(1, 7) == [1, 3, 5, 7]
    assert admissible_degrees(2, 4) == [1, 2, 3, 4]


def test_family_N1_examples():
    assert family_N1(1, Fraction(1, 2)) == poly([((1, 0), 1)], 2)
    expected = poly([((1, 2), 1), ((3, 0), Fraction(-1, 3))], 2)
    assert family_N1(2, Fraction(1, 2)) == expected
    assert family_N1(2, Fraction(1, 4)).terms[(3, 0)] == Fraction(-1, 2)


def test_family_N2_examples():
    assert family_N2(1, Fraction(1, 2)) == poly([((0, 1, 0), 1)], 3)
    assert family_N2(2, Fraction(1, 2)) == poly([((1, 1, 0), 1)], 3)
    assert family_N2(4, Fraction(1, 2)) == poly([((1, 3, 0), 1), ((3, 1, 0), -1)], 3)


@pytest.mark.parametrize("m", range(1, 9))
@pytest.mark.parametrize("s", [Fraction(1, 4), Fraction(1, 2), Fraction(3, 4)])
def test_families_solve_weighted_equation_exactly(m, s):
    assert weighted_laplacian(family_N1(m, s), s).is_zero()
    assert weighted_laplacian(family_N2(m, s), s).is_zero()


@pytest.mark.parametrize("m", range(1, 6))
def test_family_rayleigh_quotients(m):
    for s in S_VALUES:
        assert rayleigh_quotient(family_N1(m, s), 1, s) == pytest.approx(eigenvalue(m, 1, s), abs=1e-8)
        assert rayleigh_quotient(family_N2(m, s), 2, s) == pytest.approx(eigenvalue(m, 2, s), abs=1e-8)


def test_rayleigh_examples():
    assert rayleigh_quotient(family_N1(1, 0.5), 1, 0.5) == pytest.approx(1.0, abs=1e-8)
    assert rayleigh_quotient(poly([((1, 1, 0), 1.0)], 3), 2, 0.5) == pytest.approx(6.0, abs=1e-8)
    assert rayleigh_quotient(family_N1(2, 0.25), 1, 0.25) == pytest.approx(10.5, abs=1e-8)
    with pytest.raises(ConfigError):
        rayleigh_quotient(poly([((0, 0), 0.0)], 2), 1, 0.5)


def test_weighted_laplacian_rejects_odd_t():
    with pytest.raises(ConfigError):
        weighted_laplacian(poly([((1, 3), 1)], 2), Fraction(1, 2))


def test_basis_N1_degree1_normalization():
    b = eigenspace_basis(1, 1, 0.5)
    assert b.dimension == 1
    Y = b.functions[0]
    rule = half_sphere(1, 0.5)
    norm_y1 = math.sqrt(rule.integrate(rule.points[:, 0] ** 2))
    assert Y.polynomial.terms[(1, 0)] == pytest.approx(1 / norm_y1, rel=1e-12)


def test_basis_N2_degree2_is_y1y2():
    b = eigenspace_basis(2, 2, 0.5)
    assert b.dimension == 1
    assert set(b.functions[0].polynomial.terms) == {(1, 1, 0)}
    assert rayleigh_quotient(b.functions[0].polynomial, 2, 0.5) == pytest.approx(6.0, abs=1e-8)


@pytest.mark.parametrize("degree", [2, 4, 6, 8])
def test_N1_even_degrees_are_empty(degree):
    assert eigenspace_of_degree(degree, 1, 0.5).dimension == 0


def test_N1_index_maps_to_odd_degree():
    b = eigenspace_basis(3, 1, 0.25)
    assert b.degree == 5
    assert b.functions[0].eigenvalue == pytest.approx(eigenvalue(3, 1, 0.25))


@pytest.mark.parametrize("N", [1, 2])
@pytest.mark.parametrize("s", S_VALUES)
def test_basis_properties_up_to_order_8(N, s):
    funcs = []
    for m in range(1, 9):
        b = eigenspace_basis(m, N, s)
        assert not b.flagged
        if N == 2:
            assert b.dimension == (m + 1) // 2
        else:
            assert b.dimension == 1
        for Y in b:
            assert Y.residual() < 1e-10
            assert rayleigh_quotient(Y.polynomial, N, s) == pytest.approx(eigenvalue(m, N, s), abs=1e-8)
            # nonvanishing trace on the flat equator
            a = np.linspace(0, 2 * np.pi, 64, endpoint=False)
            eq = np.array([[-1.0, 0.0], [1.0, 0.0]]) if N == 1 else np.column_stack([np.cos(a), np.sin(a), 0 * a])
            assert np.max(np.abs(Y.value(eq))) > 1e-8
            funcs.append(Y)
    rule = half_sphere(N, s)
    vals = np.array([Y.value(rule.points) for Y in funcs])
    gram = (vals * rule.weights) @ vals.T
    assert np.max(np.abs(gram - np.eye(len(funcs)))) < 1e-8


@settings(max_examples=20, deadline=None)
@given(st.sampled_from([1, 2]), st.integers(min_value=1, max_value=5), st.sampled_from(S_VALUES), st.floats(min_value=0.1, max_value=3.0))
def test_homogeneous_extension(N, m, s, r):
    Y = eigenspace_basis(m, N, s).functions[0]
    rule = half_sphere(N, s)
    th = rule.points
    assert Y.degree == (2 * m - 1 if N == 1 else m)
    deg = Y.degree
    np.testing.assert_allclose(Y.value(r * th), r**deg * Y.value(th), rtol=1e-10, atol=1e-12)


@settings(max_examples=25)
@given(
    st.lists(st.tuples(st.integers(0, 3), st.integers(0, 3), st.integers(0, 3), st.integers(-5, 5)), min_size=1, max_size=6),
    st.lists(st.tuples(st.integers(0, 3), st.integers(0, 3), st.integers(0, 3), st.integers(-5, 5)), min_size=1, max_size=6),
)
def test_polynomial_algebra(a, b):
    P = Polynomial([x[:3] for x in a], [x[3] for x in a], 3)
    Q = Polynomial([x[:3] for x in b], [x[3] for x in b], 3)
    z = np.array([[0.3, -0.7, 0.2], [1.1, 0.4, 0.9]])
    np.testing.assert_allclose((P + Q).value(z), P.value(z) + Q.value(z), atol=1e-12)
    np.testing.assert_allclose((P * Q).value(z), P.value(z) * Q.value(z), atol=1e-10)
    np.testing.assert_allclose((P - P).value(z), 0.0, atol=1e-14)
    h = 1e-6
    e = np.array([0.0, h, 0.0])
    fd = (P.value(z + e) - P.value(z - e)) / (2 * h)
    np.testing.assert_allclose(P.gradient(z)[:, 1], fd, rtol=1e-6, atol=1e-6)
