import cmath
import math

import numpy as np
import pytest

from specdet.charfunc import (asymptotics, char_coupled, char_separated, characteristic, floquet_discriminant,
                              krein_c, krein_c_nested, krein_D, weyl_trace_check)
from specdet.sl_core import Coupled, Krein, Separated, SLProblem, floquet, krein_matrix

FLAT = SLProblem(0.0, 1.0)
SMOOTH = SLProblem(0.0, 1.0, p="1 + x/2", q="3*x^2 - 1", r="1 + sin(x)/3")


def _flat_robin(alpha, beta, z, L=1.0):
    k = cmath.sqrt(z)
    ca, sa, cb, sb = math.cos(alpha), math.sin(alpha), math.cos(beta), math.sin(beta)
    return (ca * (-sb * cmath.cos(k * L) + cb * cmath.sin(k * L) / k)
            - sa * (k * sb * cmath.sin(k * L) + cb * cmath.cos(k * L)))


@pytest.mark.parametrize("z", [-4.0, 1.0, 10.0, 3 + 2j])
def test_dirichlet_flat_closed_form(z):
    k = cmath.sqrt(z)
    assert char_separated(FLAT, 0.0, 0.0, z).value == pytest.approx(cmath.sin(k) / k, rel=1e-10, abs=1e-11)


@pytest.mark.parametrize("z", [1.0, 10.0, -4.0])
@pytest.mark.parametrize("alpha,beta", [(0.4, 1.2), (math.pi / 2, math.pi / 3), (2.5, 0.7)])
def test_robin_flat_closed_form(alpha, beta, z):
    assert char_separated(FLAT, alpha, beta, z).value == pytest.approx(_flat_robin(alpha, beta, z), rel=1e-9)


def test_first_dirichlet_eigenvalue_is_a_zero():
    assert abs(char_separated(FLAT, 0.0, 0.0, math.pi**2).value) <= 1e-8


def test_floquet_and_discriminant():
    for z in (2.0, -3.0, 15 + 4j):
        for phase in (0.0, 0.9):
            F = char_coupled(SMOOTH, phase, np.eye(2), z).value
            D = floquet_discriminant(SMOOTH, z)
            assert F == pytest.approx(-2 * cmath.exp(1j * phase) * (D - math.cos(phase)), rel=1e-9, abs=1e-12)
    assert floquet_discriminant(FLAT, 0.0) == pytest.approx(1.0)
    for z in (5.0, -2.0):
        assert floquet_discriminant(FLAT, z) == pytest.approx(cmath.cos(cmath.sqrt(z)), rel=1e-10)
    assert abs(floquet_discriminant(SMOOTH, 7.0).imag) < 1e-12
    assert abs(char_coupled(FLAT, 0.0, np.eye(2), (2 * math.pi) ** 2).value) <= 1e-8


def test_krein_characteristic():
    R = krein_matrix(SMOOTH)
    for z in (1.0, -5.0, 2 + 1j):
        F = char_coupled(SMOOTH, 0.0, R, z).value
        assert F == pytest.approx(-2 * (krein_D(SMOOTH, z) - 1), rel=1e-9)
    assert krein_D(SMOOTH, 0.0) == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("a,b", [(0.0, 1.0), (-1.0, 1.5), (2.0, 2.5)])
def test_krein_c_flat(a, b):
    assert krein_c(SLProblem(a, b)) == pytest.approx(-(b - a) ** 4 / 24, rel=1e-8)


@pytest.mark.parametrize("prob", [SMOOTH, SLProblem(0.0, 2.0, q="-8"), SLProblem(0.0, 1.0, p="2+x", r="x+1")])
def test_krein_c_negative(prob):
    assert krein_c(prob) < 0


def test_krein_c_variable_coefficients_matches_nested_integrals():
    prob = SLProblem(0.0, 1.0, p="2+x", r="x+1")
    assert krein_c(prob, cross_check=False) == pytest.approx(krein_c_nested(prob), rel=1e-6)


def test_conjugate_symmetry_and_derivative():
    bc = Separated(0.3, 2.0)
    a = characteristic(SMOOTH, bc, 4 + 3j)
    b = characteristic(SMOOTH, bc, 4 - 3j)
    assert a.value == pytest.approx(b.value.conjugate(), rel=1e-9)
    for bc in (Separated(0.3, 2.0), Coupled(0.5, ((1.0, 0.5), (0.0, 1.0))), Krein(), floquet(1.0)):
        z, h = 6 - 2j, 1e-5 * 6
        cv = characteristic(SMOOTH, bc, z)
        fd = (characteristic(SMOOTH, bc, z + h).value - characteristic(SMOOTH, bc, z - h).value) / (2 * h)
        assert abs(cv.derivative - fd) <= 1e-5 * max(1.0, abs(cv.derivative))


@pytest.mark.parametrize("bc", [Separated(0.0, 0.0), Separated(0.7, 0.0), Separated(1.1, 2.2),
                                Coupled(0.4, ((2.0, 1.0), (1.0, 1.0))), floquet(0.0)])
def test_potential_shift_covariance(bc):
    c = 2.75
    shifted = SMOOTH.shifted(c)
    for z in (1.0, -3 + 2j, 20.0):
        assert characteristic(shifted, bc, z).value == pytest.approx(
            characteristic(SMOOTH, bc, z - c).value, rel=1e-8, abs=1e-12)


def test_weyl_trace_dirichlet_flat_closed_form():
    # -(d/dz) ln(sinh(1)/1) at z = -1, with k = i: 1/(2z) - (cos k / sin k)/(2 k)
    z = -1.0
    k = cmath.sqrt(z)
    exact = -(-1 / (2 * z) + cmath.cos(k) / cmath.sin(k) / (2 * k))
    assert weyl_trace_check(FLAT, 0.0, 0.0, z) == pytest.approx(exact, rel=1e-9)
    assert weyl_trace_check(FLAT, 0.0, 0.0, z, use_minus_form=True) == pytest.approx(exact, rel=1e-9)


def test_weyl_trace_neumann_flat_closed_form():
    # F = -k sin k for Neumann on (0, 1)
    z = -1.0
    k = cmath.sqrt(z)
    dlog = 1 / (2 * z) + cmath.cos(k) / cmath.sin(k) / (2 * k)
    got = weyl_trace_check(FLAT, math.pi / 2, math.pi / 2, z)
    assert got == pytest.approx(-dlog, rel=1e-9)


def test_weyl_trace_matches_log_derivative():
    rng = np.random.default_rng(5)
    cases = [(0.0, 0.0), (0.0, 1.3), (0.8, 0.0), (0.5, 2.7), (math.pi / 2, math.pi / 2)]
    for i in range(10):
        z = complex(rng.uniform(-40, 40), rng.uniform(1, 40) * rng.choice([-1, 1]))
        al, be = cases[i % len(cases)]
        cv = char_separated(SMOOTH, al, be, z)
        assert weyl_trace_check(SMOOTH, al, be, z) == pytest.approx(-cv.dF / cv.F, rel=1e-7, abs=1e-9)
    z = 3 + 5j
    cv = char_separated(SMOOTH, 0.0, 0.0, z)
    assert weyl_trace_check(SMOOTH, 0.0, 0.0, z, use_minus_form=True) == pytest.approx(-cv.dF / cv.F, rel=1e-7)


@pytest.mark.parametrize("bc", [Separated(0.0, 0.0), Separated(0.0, 1.0), Separated(1.0, 0.0),
                                Separated(1.0, 2.0), Coupled(0.3, ((1.0, 0.7), (0.0, 1.0))), floquet(0.5)])
def test_large_z_asymptotics(bc):
    # F(z) ~ C w^kappa e^{w c} along the cut direction
    asym = asymptotics(SMOOTH, bc)
    z = 1e6 * cmath.exp(0.75j * math.pi)
    cv = characteristic(SMOOTH, bc, z, derivative=False)
    ratio = cmath.exp(cv.log_value() - complex(asym.log_value(z)))
    assert abs(ratio - 1) < 0.01


def test_krein_condition_is_not_shift_covariant():
    # the Krein matrix is built from the zero-energy solutions, so it moves with q
    shifted = SMOOTH.shifted(2.75)
    fixed = Coupled(0.0, tuple(map(tuple, krein_matrix(SMOOTH))))
    assert characteristic(shifted, fixed, 1.0).value == pytest.approx(
        characteristic(SMOOTH, fixed, 1.0 - 2.75).value, rel=1e-8)
    assert abs(characteristic(shifted, Krein(), 1.0).value - characteristic(SMOOTH, Krein(), 1.0 - 2.75).value) > 1e-3
