import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from specdet.coeff_lang import parse_expr
from specdet.halfline import (HalfLineProblem, TailBoundError, bc_trace_diff, bound_states, boundary_value,
                              flat_robin_zeta_prime0, green_trace_oracle, halfline_from_dict,
                              halfline_relative_zeta_prime0, jost, jost_batch, jost_profile, krein_trace_diff,
                              m_function, perturbation_det, perturbation_trace, volterra_jost)
from specdet.sl_core import ValidationError

BUMP = HalfLineProblem(parse_expr("-3*sin(pi*x)^4"), 1.0)
WELL = HalfLineProblem(parse_expr("-8*sin(pi*x/2)^2"), 2.0)  # deep enough for a bound state
FREE = HalfLineProblem(parse_expr("0"))
offcut = st.complex_numbers(max_magnitude=30, allow_nan=False, allow_infinity=False).filter(lambda z: abs(z.imag) > 0.1)


def test_free_jost_solution_is_exact():
    for z in (-2.0, 3 + 1j, 50j):
        jd = jost(FREE, z)
        k = cmath.sqrt(z)
        k = k if k.imag >= 0 else -k
        assert jd.f0 == 1 and jd.f0p == pytest.approx(1j * k, rel=1e-15)
        assert jd.dot_f0 == 0 and jd.dot_f0p == pytest.approx(0.5j / k)


@pytest.mark.parametrize("z", [-1.0, 2.5 + 0.5j, -3 - 4j, 0.7j, 4.0 + 2j, -0.2 + 1e-3j])
def test_backward_integration_against_volterra(z):
    jd = jost(BUMP, z)
    f0, f0p = volterra_jost(BUMP, z, n=513)
    assert abs(jd.f0 - f0) <= 1e-7 and abs(jd.f0p - f0p) <= 1e-7


@settings(max_examples=15, deadline=None)
@given(offcut)
def test_conjugate_symmetry_of_boundary_values(z):
    # off the cut the Jost function satisfies f(conj z) = conj f(-conj z^{1/2}); boundary values flip accordingly
    for alpha in (0.0, 1.1):
        g1, _ = boundary_value(WELL, alpha, z)
        m1 = m_function(WELL, alpha, z)
        m2 = m_function(WELL, alpha, z.conjugate())
        assert m2 == pytest.approx(m1.conjugate(), rel=1e-9, abs=1e-12)


def test_z_derivatives_by_finite_differences():
    rng = np.random.default_rng(3)
    for z in rng.uniform(-6, 6, 6) + 1j * rng.uniform(0.5, 6, 6):
        jd = jost(BUMP, z)
        h = 1e-5
        a, b = jost(BUMP, z + h), jost(BUMP, z - h)
        assert jd.dot_f0 == pytest.approx((a.f0 - b.f0) / (2 * h), rel=1e-7, abs=1e-9)
        assert jd.dot_f0p == pytest.approx((a.f0p - b.f0p) / (2 * h), rel=1e-7, abs=1e-9)


def test_profile_is_plane_wave_beyond_support():
    z = 3.0 + 2j
    k = cmath.sqrt(z)
    tail = jost_profile(BUMP, z, [1.5, 2.0])
    assert tail[0] == pytest.approx(cmath.exp(1j * k * 1.5), rel=1e-9)
    assert tail[1] == pytest.approx(cmath.exp(2j * k), rel=1e-9)


def test_profile_satisfies_the_equation_to_integrator_accuracy():
    # an independent scipy integration of f'' = (q - z) f from the same end data
    from scipy.integrate import solve_ivp
    z = -2.0 + 1.5j
    k = cmath.sqrt(z)
    X = BUMP.x_max

    def ode(x, y):
        return [y[1], (BUMP.q(x) - z) * y[0]]

    ref = solve_ivp(ode, (X, 0.0), [cmath.exp(1j * k * X), 1j * k * cmath.exp(1j * k * X)],
                    method="DOP853", rtol=1e-12, atol=1e-14, dense_output=True)
    xs = np.linspace(0.0, X, 31)
    f = jost_profile(BUMP, z, xs)
    assert np.max(np.abs(f - ref.sol(xs)[0]) / np.abs(f)) <= 1e-8


def test_large_negative_z_asymptotics():
    z = -1e4
    k = 100j
    Q = quad(lambda x: BUMP.q(x), 0, 1)[0]
    jd = jost(BUMP, z)
    lead = -1j * Q / (4 * k**3)
    assert abs(jd.f0 - 1) <= 2 * abs(Q) / abs(k)
    assert abs(jd.dot_f0 - lead) <= 10 * abs(z) ** -2


@settings(max_examples=20, deadline=None)
@given(st.floats(-10, 10), st.floats(1e-3, 10), st.sampled_from([0.0, math.pi / 4, 1.3, 2.8]))
def test_herglotz(x, y, alpha):
    assert m_function(WELL, alpha, complex(x, y)).imag > 0


def test_free_m_function():
    for z in (2 + 1j, -3.0, 0.5j):
        k = cmath.sqrt(z)
        assert m_function(FREE, 0.0, z) == pytest.approx(1j * k)


def test_m_function_angle_map():
    z = 1.0 + 2j
    m0 = m_function(BUMP, 0.0, z)
    a = 0.9
    expect = (-math.sin(a) + math.cos(a) * m0) / (math.cos(a) + math.sin(a) * m0)
    assert m_function(BUMP, a, z) == pytest.approx(expect, rel=1e-12)
    # cos(a2 - a1) + sin(a2 - a1) m_{a1} is the ratio of the a2 and a1 boundary values
    a1, a2 = 0.4, 2.0
    g1, _ = boundary_value(BUMP, a1, z)
    g2, _ = boundary_value(BUMP, a2, z)
    assert math.cos(a2 - a1) + math.sin(a2 - a1) * m_function(BUMP, a1, z) == pytest.approx(g2 / g1, rel=1e-10)


def test_perturbation_det_examples():
    z = 0.5 + 2j
    assert perturbation_det(BUMP, BUMP, 0.7, z) == 1
    f2 = jost(BUMP, z - BUMP.lambda1).f0
    assert perturbation_det(FREE, BUMP, 0.0, z) == pytest.approx(f2, rel=1e-14)
    with pytest.raises(ValidationError):
        perturbation_det(FREE, HalfLineProblem(parse_expr("0"), lambda1=2.0), 0.0, z)


@pytest.mark.parametrize("alpha", [0.0, math.pi / 4, 2.2])
def test_perturbation_trace_against_green_function(alpha):
    for z in (-1.0 + 0.5j, 3.0 + 1j):
        got = perturbation_trace(FREE, WELL, alpha, z)
        assert got == pytest.approx(green_trace_oracle(FREE, WELL, alpha, z), rel=1e-5, abs=1e-8)


def test_bc_trace_diff_examples():
    assert bc_trace_diff(BUMP, 0.5, 0.5, 1j) == 0
    for z in (-3.0, 0.2):
        assert bc_trace_diff(FREE, 0.0, math.pi / 2, z) == pytest.approx(-1 / (2 * (z - 1.0)), rel=1e-12)


@pytest.mark.parametrize("a1,a2", [(0.0, 1.0), (0.3, 2.5), (math.pi / 2, 0.2)])
def test_bc_trace_diff_against_krein_formula(a1, a2):
    for z in (2 + 1j, -4.0 + 0.3j):
        assert bc_trace_diff(WELL, a1, a2, z) == pytest.approx(krein_trace_diff(WELL, a1, a2, z), rel=1e-7, abs=1e-10)


def test_bound_states_are_simple_and_threshold_is_regular():
    for alpha in (0.0, math.pi / 4, math.pi / 2):
        E = bound_states(WELL, alpha)
        assert E and all(e < 0 for e in E)
        for e in E:
            _, dG = boundary_value(WELL, alpha, e)
            assert abs(dG) > 1e-6
        g0, _ = boundary_value(WELL, alpha, -1e-12 + 0j)
        assert abs(g0) > 1e-6
    assert bound_states(FREE, 0.0) == []
    # free Robin with cot(alpha) > 0 has the single bound state -cot(alpha)^2
    assert bound_states(FREE, 2.5) == []
    a = 0.5
    assert bound_states(FREE, a) == pytest.approx([-(1 / math.tan(a)) ** 2], rel=1e-10)


def test_flat_robin_pair():
    a2 = 2 * math.pi / 5
    exact = -math.log(abs(1 - 1 / math.tan(a2)))
    assert flat_robin_zeta_prime0(1.0, a2) == pytest.approx(exact, abs=1e-14)
    r = halfline_relative_zeta_prime0(FREE, FREE, 0.0, a2)
    assert r.re_part == pytest.approx(exact, abs=1e-6)
    d = halfline_relative_zeta_prime0(FREE, FREE, 0.0, a2, method="direct")
    assert d.re_part == pytest.approx(exact, abs=1e-4)
    assert r.diagnostics["lambda1"] == 1.0
    # reversed pair flips the sign
    rev = halfline_relative_zeta_prime0(FREE, FREE, a2, 0.0)
    assert rev.re_part == pytest.approx(-exact, abs=1e-6)


def test_flat_robin_pair_other_shift():
    lam, a2 = 2.5, 1.2
    free = HalfLineProblem(parse_expr("0"), lambda1=lam)
    exact = -math.log(abs(math.sqrt(lam) - 1 / math.tan(a2)))
    assert halfline_relative_zeta_prime0(free, free, 0.0, a2, method="direct").re_part == pytest.approx(exact, abs=1e-4)


def test_same_condition_pair_matches_boundary_values_at_zero():
    # no zero modes, no negatives after the shift: -ln|G2(0)/G1(0)| with shifted arguments
    for alpha in (0.0, 2.0):
        r = halfline_relative_zeta_prime0(FREE, BUMP, alpha, alpha)
        g1, _ = boundary_value(FREE, alpha, -1.0 + 0j)
        g2, _ = boundary_value(BUMP, alpha, -1.0 + 0j)
        assert r.negatives == (0, 0) and r.zero_modes == (0, 0)
        assert r.re_part == pytest.approx(-math.log(abs(g2 / g1)), abs=1e-8)


def test_free_robin_zero_mode_is_detected():
    # cot(pi/4) = 1 = lambda1^{1/2}: the bound state -1 sits at the shifted origin
    r = halfline_relative_zeta_prime0(BUMP, FREE, math.pi / 4, math.pi / 4)
    assert r.zero_modes == (0, 1) and r.negatives == (1, 0)


def test_bound_state_bookkeeping():
    # the well has one bound state below -lambda1 for this alpha: one negative eigenvalue after the shift
    alpha = 1.0
    E = bound_states(WELL, alpha)
    n = sum(1 for e in E if e + 1.0 < 0)
    r = halfline_relative_zeta_prime0(FREE, WELL, alpha, alpha)
    assert r.negatives == (0, n)
    assert r.im_part == pytest.approx(math.pi * n)
    g1, _ = boundary_value(FREE, alpha, -1.0 + 0j)
    g2, _ = boundary_value(WELL, alpha, -1.0 + 0j)
    assert r.re_part == pytest.approx(-math.log(abs(g2 / g1)), abs=1e-7)


def test_three_term_and_direct_agree_with_potential():
    a2 = 1.0
    auto = halfline_relative_zeta_prime0(FREE, BUMP, 0.0, a2)
    direct = halfline_relative_zeta_prime0(FREE, BUMP, 0.0, a2, method="direct")
    assert auto.diagnostics["method"] == "three-term"
    assert auto.re_part == pytest.approx(direct.re_part, abs=1e-4)
    assert set(auto.pieces) == {"robin_pair", "dirichlet_pair", "flat_pair"}


def test_branch_angle_independence():
    from specdet.zeta import ZetaConfig
    a = halfline_relative_zeta_prime0(FREE, BUMP, 1.0, 1.0, ZetaConfig(theta=2 * math.pi / 3)).re_part
    b = halfline_relative_zeta_prime0(FREE, BUMP, 1.0, 1.0, ZetaConfig(theta=3 * math.pi / 4)).re_part
    assert a == pytest.approx(b, abs=1e-7)


def test_trivial_pair_is_zero():
    r = halfline_relative_zeta_prime0(BUMP, BUMP, 0.5, 0.5)
    assert r.value == 0


def test_tail_bounds_and_decay_classes():
    with pytest.raises(ValidationError):
        HalfLineProblem(parse_expr("x"))
    with pytest.raises(ValidationError):
        HalfLineProblem(parse_expr("exp(-x)"), decay="exponential")
    expo = HalfLineProblem(parse_expr("-2*exp(-x)"), decay="exponential", rate=1.0)
    assert expo.tail_bound() < 1e-10
    assert expo.tail_bound(expo.x_max / 1.25) >= 1e-10
    expo.validate()
    short = HalfLineProblem(parse_expr("-2*exp(-x)"), x_max=5.0, decay="exponential", rate=1.0)
    with pytest.raises(TailBoundError):
        short.validate()
    assert BUMP.tail_bound() == 0.0
    assert BUMP.short_range_integral() == pytest.approx(quad(lambda x: 3 * (1 + x) * math.sin(math.pi * x) ** 4, 0, 1)[0])
    with pytest.raises(ValidationError):
        HalfLineProblem(parse_expr("0"), lambda1=0.0)


def test_exponential_potential_pair():
    expo = HalfLineProblem(parse_expr("-2*exp(-x)"), decay="exponential", rate=1.0)
    r = halfline_relative_zeta_prime0(FREE, expo, 0.0, 0.0)
    f2 = jost(expo, -1.0).f0
    assert r.re_part == pytest.approx(-math.log(abs(f2)), abs=1e-8)


def test_batch_matches_single_evaluations():
    zs = [1 + 1j, -2.0, 5j]
    f0, f0p, d0, d0p, _, _ = jost_batch(BUMP, zs)
    for i, z in enumerate(zs):
        jd = jost(BUMP, z)
        # shared step sizes in the batch make the two routes differ at round-off level
        assert [f0[i], f0p[i], d0[i], d0p[i]] == pytest.approx([jd.f0, jd.f0p, jd.dot_f0, jd.dot_f0p], rel=1e-10)


def test_problem_file_dictionary():
    prob, a1, a2 = halfline_from_dict({"halfline": True, "q": "-x*(1-x)", "x_max": 1, "alpha": "pi/4"})
    assert a1 == pytest.approx(math.pi / 4) and a2 is None and prob.x_max == 1.0
    prob, a1, a2 = halfline_from_dict({"halfline": True, "alpha1": 0, "alpha2": "2*pi/5", "lambda1": 2})
    assert (a1, a2, prob.lambda1) == (0.0, pytest.approx(2 * math.pi / 5), 2.0)
    with pytest.raises(ValidationError):
        halfline_from_dict({"q": "0"})


def test_zero_mode_pair_limit():
    # G1 = (1 + ik)/sqrt(2) ~ z / (2 sqrt(2)) at the shifted origin, so the limit is 2 sqrt(2) G2(0)
    alpha = math.pi / 4
    r = halfline_relative_zeta_prime0(FREE, BUMP, alpha, alpha)
    g2, _ = boundary_value(BUMP, alpha, -1.0 + 0j)
    assert r.zero_modes == (1, 0)
    assert r.re_part == pytest.approx(-math.log(abs(2 * math.sqrt(2) * g2)), abs=1e-8)
