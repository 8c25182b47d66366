import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from specdet.coeff_lang import (DomainError, ParseError, UnknownIdentifierError, check_hypothesis,
                                parse_expr, eval_expr, combine, shift_argument, to_text)


def test_constant_and_simple_values():
    e = parse_expr("1")
    assert e.is_constant and e.constant_value == 1.0
    assert eval_expr(parse_expr("cos(x)^2 + 1"), 0.0) == 2.0
    assert eval_expr(parse_expr("pi"), 17.0) == 3.141592653589793
    assert eval_expr(parse_expr("sqrt(x)"), 4.0) == 2.0


def test_x_exp_minus_x_matches_decimal_oracle():
    from decimal import Decimal, getcontext
    getcontext().prec = 40
    ref = float(Decimal(-1).exp())
    assert eval_expr(parse_expr("x*exp(-x)"), 1.0) == pytest.approx(ref, rel=1e-16, abs=0)
    assert ref == 0.36787944117144233


@pytest.mark.parametrize("text,value", [
    ("x^2^3", 2.0 ** 8), ("-x^2", -4.0), ("2^-1", 0.5), ("8/2/2", 2.0), ("1-2-3", -4.0),
    ("-2*-x", 4.0), ("abs(sinh(-x))", math.sinh(2.0)), ("log(exp(x))", 2.0), ("3e-1*x", 0.6),
])
def test_precedence(text, value):
    assert eval_expr(parse_expr(text), 2.0) == pytest.approx(value, rel=1e-15)


@pytest.mark.parametrize("text,func", [("sqrt(x)", "sqrt"), ("log(x)", "log"), ("1/(x+1)", "/")])
def test_domain_errors_name_the_function(text, func):
    with pytest.raises(DomainError) as info:
        eval_expr(parse_expr(text), -1.0)
    assert info.value.func == func
    assert func in str(info.value)


def test_syntax_error_offsets_are_bytes():
    with pytest.raises(ParseError) as info:
        parse_expr("1 +")
    assert info.value.offset == 3 and "x" in info.value.expected
    with pytest.raises(ParseError) as info:
        parse_expr("2*(x")
    assert info.value.offset == 4 and info.value.expected == {")"}
    with pytest.raises(ParseError) as info:
        parse_expr("é+x")
    assert info.value.offset == 0
    with pytest.raises(UnknownIdentifierError) as info:
        parse_expr("x + foo(x)")
    assert info.value.offset == 4 and info.value.name == "foo"
    with pytest.raises(ParseError) as info:
        parse_expr("x+é")
    assert info.value.offset == 2


def test_offsets_after_multibyte_whitespace_count_bytes():
    with pytest.raises(UnknownIdentifierError) as info:
        parse_expr("\u00a0x + foo")
    assert info.value.offset == 6  # the no-break space is two bytes in UTF-8


def test_shift_and_combine():
    e = parse_expr("x^2 + sin(x)")
    s = shift_argument(e, 0.5)
    for x in (0.1, 1.3, -2.0):
        assert s(x) == pytest.approx(e(x - 0.5), rel=1e-15)
    c = combine("*", e, parse_expr("2"))
    assert c(1.1) == pytest.approx(2 * e(1.1), rel=1e-15)


# -- random expression trees ---------------------------------------------------

leaves = st.one_of(st.just("x"), st.just("pi"),
                   st.floats(0.01, 50, allow_nan=False).map(lambda v: repr(round(v, 6))))


def _extend(children):
    return st.one_of(
        st.tuples(children, st.sampled_from("+-*"), children).map(lambda t: f"({t[0]}){t[1]}({t[2]})"),
        st.tuples(st.sampled_from(["sin", "cos", "exp", "abs", "sinh", "cosh"]), children)
        .map(lambda t: f"{t[0]}(({t[1]})/10)"),
        children.map(lambda c: f"-({c})"),
        children.map(lambda c: f"({c})^2"),
    )


exprs = st.recursive(leaves, _extend, max_leaves=8)


@settings(max_examples=60, deadline=None)
@given(exprs)
def test_print_parse_round_trip(text):
    e = parse_expr(text)
    again = parse_expr(to_text(e))
    xs = np.random.default_rng(0).uniform(-3, 3, 1000)
    for x in xs:
        try:
            a = e(x)
        except (DomainError, OverflowError):
            continue
        b = again(x)
        # equivalent trees, so the same floating-point operations happen in the same order
        assert b == pytest.approx(a, rel=1e-14, abs=1e-300) or (math.isinf(a) and a == b)


@settings(max_examples=30, deadline=None)
@given(exprs, st.floats(-5, 5))
def test_evaluation_is_pure(text, x):
    e = parse_expr(text)
    try:
        first = e(x)
    except (DomainError, OverflowError):
        return
    assert e(x) == first or (math.isnan(first) and math.isnan(e(x)))


# -- hypothesis report -----------------------------------------------------------

def test_hypothesis_report_flat_ok():
    rep = check_hypothesis(parse_expr("1"), parse_expr("0"), parse_expr("1"), 0.0, 1.0)
    assert rep.ok and not rep.messages


def test_hypothesis_report_negative_r():
    rep = check_hypothesis(parse_expr("1"), parse_expr("0"), parse_expr("-1"), 0.0, 1.0)
    assert not rep.r_positive and not rep.ok


def test_hypothesis_report_divergent_inverse_p():
    rep = check_hypothesis(parse_expr("x"), parse_expr("0"), parse_expr("1"), 0.0, 1.0)
    assert not rep.inv_p_finite
    assert any("1/p" in m for m in rep.messages)


def test_hypothesis_report_flags_jump():
    rep = check_hypothesis(parse_expr("1 + abs(x - 0.5)/(x - 0.5)/2 + 1"), parse_expr("0"),
                           parse_expr("1"), 0.0, 1.0)
    assert not rep.pr_smooth
