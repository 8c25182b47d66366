import cmath
import math

import numpy as np
import pytest

from specdet.charfunc import NearSpectrumError
from specdet.sl_core import Coupled, Krein, Separated, SLProblem, floquet
from specdet.spectra import (SamplingBudgetError, count_nonpositive, eigenvalue_trace_sum, find_eigenvalues,
                             fredholm_det_ratio, product_oracle, trace_resolvent, weyl_ratio)

UNIT = SLProblem(0.0, 1.0)
DD = Separated(0.0, 0.0)


def test_dirichlet_unit_interval_eigenvalues():
    spec = find_eigenvalues(UNIT, DD, count_target=15)
    assert spec.complete_from_bottom and spec.zero_modes == 0 and spec.negatives == 0
    assert np.allclose(spec.values(), (np.arange(1, 16) * math.pi) ** 2, rtol=1e-10)


def test_window_search_agrees_with_count_search():
    prob = SLProblem(0.0, 2.0, q="x^2 - 3")
    by_count = find_eigenvalues(prob, Separated(0.5, 1.0), count_target=12).values()
    by_window = find_eigenvalues(prob, Separated(0.5, 1.0), window=(-10.0, by_count[-1] + 1e-3)).values()
    assert np.allclose(by_count, by_window, rtol=1e-10, atol=1e-10)


def test_window_below_spectrum_counts_as_complete():
    spec = find_eigenvalues(UNIT, DD, window=(-50.0, 50.0))
    assert spec.complete_from_bottom
    assert spec.values() == pytest.approx([math.pi**2, 4 * math.pi**2])


def test_neumann_zero_mode_and_negative_counts():
    spec = find_eigenvalues(UNIT, Separated(math.pi / 2, math.pi / 2), count_target=4)
    assert spec.zero_modes == 1
    assert spec.values()[0] == 0.0
    prob = SLProblem(0.0, math.pi, q="-6.25")
    assert count_nonpositive(prob, DD) == (2, 0)


def test_translation_invariance():
    p1 = SLProblem(0.0, 1.0, q="x^2", p="1 + x", r="2 - x")
    p2 = SLProblem(2.0, 3.0, q="(x-2)^2", p="1 + (x-2)", r="2 - (x-2)")
    for bc in (DD, Separated(0.3, 2.0), floquet(0.7)):
        e1 = find_eigenvalues(p1, bc, count_target=10).values()
        e2 = find_eigenvalues(p2, bc, count_target=10).values()
        assert np.allclose(e1, e2, rtol=1e-9)


def test_periodic_doubles():
    spec = find_eigenvalues(UNIT, floquet(0.0), count_target=7)
    mult = [e.multiplicity for e in spec.eigenvalues]
    assert mult == [1, 2, 2, 2]
    assert spec.zero_modes == 1
    for k, e in enumerate(spec.eigenvalues[1:], start=1):
        assert e.lam == pytest.approx((2 * k * math.pi) ** 2, rel=1e-10)


def test_weight_changes_weyl_constant():
    # p = 1, r = 4 on (0, 1): lambda_n = (n pi / 2)^2
    prob = SLProblem(0.0, 1.0, r="4")
    spec = find_eigenvalues(prob, DD, count_target=40)
    n = np.arange(1, 41)
    assert np.allclose(spec.values(), (n * math.pi / 2) ** 2, rtol=1e-9)
    assert spec.values()[-1] / 40**2 == pytest.approx(math.pi**2 / 4, rel=1e-9)
    assert weyl_ratio(spec, prob) == pytest.approx(1.0, rel=1e-9)


def test_weyl_ratio_needs_enough_eigenvalues():
    with pytest.raises(ValueError):
        weyl_ratio(find_eigenvalues(UNIT, DD, count_target=5), UNIT)


def test_det_ratio_closed_form():
    got = fredholm_det_ratio(UNIT, DD, -math.pi**2, -1.0)
    assert got == pytest.approx((math.sinh(math.pi) / math.pi) / math.sinh(1.0), rel=1e-10)


def test_det_ratio_chain_rule():
    prob = SLProblem(0.0, 1.5, q="cos(3*x) + x", p="1 + x^2/4")
    z1, z2, z3 = 3 + 4j, -20.0, 55 - 2j
    for bc in (DD, Separated(1.0, 0.4), Coupled(0.2, ((1.0, 0.3), (0.0, 1.0))), Krein()):
        r12 = fredholm_det_ratio(prob, bc, z1, z2)
        r23 = fredholm_det_ratio(prob, bc, z2, z3)
        r13 = fredholm_det_ratio(prob, bc, z1, z3)
        assert r12 * r23 == pytest.approx(r13, rel=1e-9)


def test_dirichlet_trace_closed_form():
    # sum 1/(n^2 pi^2 + 1) = (coth 1 - 1) / 2
    exact = (1 / math.tanh(1.0) - 1) / 2
    assert trace_resolvent(UNIT, DD, -1.0) == pytest.approx(exact, rel=1e-9)


def test_periodic_trace_closed_form():
    # 1 + 2 sum 1/(4 pi^2 k^2 + 1) = coth(1/2) / 2
    exact = 0.5 / math.tanh(0.5)
    assert trace_resolvent(UNIT, floquet(0.0), -1.0) == pytest.approx(exact, rel=1e-9)


def test_trace_is_log_derivative_of_det_ratio():
    prob = SLProblem(0.0, 1.0, q="exp(x)")
    z, h = 2 + 3j, 1e-4
    for bc in (DD, Separated(0.6, 2.1)):
        fd = (cmath.log(fredholm_det_ratio(prob, bc, z + h, z)) - cmath.log(fredholm_det_ratio(prob, bc, z - h, z))) / (2 * h)
        assert trace_resolvent(prob, bc, z) == pytest.approx(-fd, rel=1e-7)


def test_trace_sum_matches_resolvent_trace():
    spec = find_eigenvalues(UNIT, DD, count_target=100)
    for z in (-1.0, 5 + 3j, -30 - 10j):
        ts = eigenvalue_trace_sum(spec, z, UNIT)
        assert abs(ts.value - trace_resolvent(UNIT, DD, z)) <= ts.tail_bound + 1e-8


def test_product_matches_det_ratio():
    prob = SLProblem(0.0, 1.0, q="3*x")
    spec = find_eigenvalues(prob, Separated(0.0, 1.0), count_target=150)
    pr = product_oracle(spec, -2.0 + 1j, -1.0, prob)
    det = fredholm_det_ratio(prob, Separated(0.0, 1.0), -2.0 + 1j, -1.0)
    assert abs(pr.value - det) <= pr.tail_bound
    assert pr.tail_bound < 1e-3
    incomplete = product_oracle(find_eigenvalues(prob, Separated(0.0, 1.0), window=(50.0, 500.0)), 1.0, 2.0, prob)
    assert incomplete.tail_bound == math.inf


def test_krein_product_with_zero_modes():
    # the double zero mode contributes (z / z0)^2; the rest comes from the product
    spec = find_eigenvalues(UNIT, Krein(), count_target=150)
    assert spec.zero_modes == 2
    z, z0 = -3.0 + 2j, -1.0
    pr = product_oracle(spec, z, z0, UNIT, skip_zero=True)
    det = fredholm_det_ratio(UNIT, Krein(), z, z0)
    assert (z / z0) ** 2 * pr.value == pytest.approx(det, rel=1e-3)


def test_near_spectrum_is_refused():
    with pytest.raises(NearSpectrumError):
        trace_resolvent(UNIT, DD, math.pi**2)
    with pytest.raises(NearSpectrumError):
        fredholm_det_ratio(UNIT, DD, 1.0, 4 * math.pi**2)


def test_sampling_budget():
    with pytest.raises(SamplingBudgetError):
        find_eigenvalues(UNIT, DD, window=(0.0, 1e6), budget=50)


def test_bad_requests():
    with pytest.raises(ValueError):
        find_eigenvalues(UNIT, DD)
    with pytest.raises(ValueError):
        find_eigenvalues(UNIT, DD, window=(5.0, 1.0))
