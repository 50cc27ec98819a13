import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from zeronoise.dsl import (
    DriftSyntaxError,
    EvaluationSingularity,
    NonConstantExponent,
    UnknownIdentifier,
    builtin_drift,
    builtin_example1,
    builtin_example2,
    classify_near_zero,
    drift_from_text,
    evaluate,
    parse_drift,
    phi,
    to_text,
)

XS = np.linspace(-3.0, 3.0, 61)


def test_arithmetic_and_precedence():
    d = drift_from_text("1 + 2*x^2 - x/4")
    np.testing.assert_allclose(d(XS), 1 + 2 * XS ** 2 - XS / 4, rtol=1e-15)
    # unary minus binds tighter than "^"
    assert drift_from_text("-x^2").value(3.0) == 9.0
    assert drift_from_text("-(x^2)").value(3.0) == -9.0
    assert drift_from_text("2^-1").value(0.0) == 0.5


def test_functions():
    x = np.array([-2.5, -0.5, 0.5, 2.5])
    np.testing.assert_array_equal(drift_from_text("sign(x)")(x), np.sign(x))
    np.testing.assert_array_equal(drift_from_text("floor(x)")(x), np.floor(x))
    np.testing.assert_array_equal(drift_from_text("min(x, 0)")(x), np.minimum(x, 0))
    np.testing.assert_array_equal(drift_from_text("max(x, 0)")(x), np.maximum(x, 0))
    np.testing.assert_allclose(drift_from_text("sqrt(abs(x))")(x), np.sqrt(np.abs(x)))


def test_indicator_is_half_open():
    d = drift_from_text("ind(0, 1)")
    np.testing.assert_array_equal(d(np.array([-0.1, 0.0, 0.5, 1.0])), [0, 1, 1, 0])


def test_piece():
    d = drift_from_text("piece(x, 1, -2)")
    np.testing.assert_array_equal(d(np.array([-1.0, 0.0, 1.0])), [-2, -2, 1])


def test_phi_parity():
    np.testing.assert_array_equal(phi(np.array([0.5, 1.5, 2.5, -0.5, -1.5])), [-1, 1, -1, 1, -1])


def test_parameters_substituted():
    d = drift_from_text("c*abs(x)^r", {"c": 3.0, "r": 0.5})
    assert d.value(4.0) == pytest.approx(6.0)


@pytest.mark.parametrize("text, column", [("x^^2", 3), ("x +* 2", 4), ("(x + 1", 7), ("x $ 2", 3), ("", 1)])
def test_syntax_error_reports_column(text, column):
    with pytest.raises(DriftSyntaxError) as info:
        parse_drift(text)
    assert info.value.column == column


def test_unknown_identifier():
    with pytest.raises(UnknownIdentifier):
        parse_drift("exp(x)")


def test_non_constant_exponent():
    with pytest.raises(NonConstantExponent):
        parse_drift("x^x")


def test_singularity_is_reported():
    d = drift_from_text("1/x")
    with pytest.raises(EvaluationSingularity):
        d(np.array([0.0, 1.0]))
    assert builtin_example1(0.5).value(0.0) == 0.0


@st.composite
def expressions(draw, depth=3):
    if depth == 0 or draw(st.booleans()):
        return draw(st.sampled_from(["x", "1", "2.5", "0.5", "3"]))
    kind = draw(st.sampled_from(["bin", "neg", "fn", "pow"]))
    a = draw(expressions(depth=depth - 1))
    if kind == "bin":
        b = draw(expressions(depth=depth - 1))
        return f"({a}) {draw(st.sampled_from('+-*'))} ({b})"
    if kind == "neg":
        return f"-({a})"
    if kind == "pow":
        return f"abs({a})^{draw(st.sampled_from(['2', '0.5', '-1', '3']))}"
    fn = draw(st.sampled_from(["abs", "sign", "floor", "phi", "sqrt"]))
    return f"{fn}(abs({a}))" if fn == "sqrt" else f"{fn}({a})"


@given(expressions())
def test_print_parse_round_trip(text):
    node = parse_drift(text)
    again = parse_drift(to_text(node))
    with np.errstate(all="ignore"):
        v1, v2 = evaluate(node, XS), evaluate(again, XS)
    np.testing.assert_array_equal(np.isnan(v1), np.isnan(v2))
    ok = np.isfinite(v1)
    np.testing.assert_allclose(v1[ok], v2[ok], rtol=1e-12, atol=1e-12)


@given(st.floats(-5, 5, allow_nan=False))
def test_reflection(x):
    d = builtin_example1(0.5)
    r = d.reflected()
    assert r.value(x) == pytest.approx(-d.value(-x), abs=1e-15)


def test_breakpoints_of_indicator():
    d = drift_from_text("1 + ind(0.2, 0.7)")
    np.testing.assert_allclose(d.breakpoints(-1, 1), [0.2, 0.7], atol=1e-12)


def test_example1_breakpoints_are_reciprocals():
    bp = builtin_example1(0.5).breakpoints(0.1, 0.6)
    np.testing.assert_allclose(np.sort(1 / bp), [2, 3, 4, 5, 6, 7, 8, 9], atol=1e-9)


def test_builtin_power_sides():
    d = builtin_drift("power", rho=0.5, c=4.0)
    assert d.value(0.25) == pytest.approx(0.5)
    assert d.value(-0.25) == pytest.approx(-2.0)


@pytest.mark.parametrize("text, regime", [
    ("sign(x)*abs(x)^0.5", "repulsive"),
    ("1 + ind(0, 10)", "positive-drift"),
    ("-(abs(x)^0.5) - 1", "negative-drift"),
    ("x", "unsupported"),
    ("-sign(x)*abs(x)^0.5", "unsupported"),
])
def test_classification(text, regime):
    assert classify_near_zero(drift_from_text(text)).regime == regime


def test_classification_osgood_value():
    c = classify_near_zero(drift_from_text("sign(x)*abs(x)^0.5"), delta0=0.25)
    assert c.osgood_right_value == pytest.approx(2 * math.sqrt(0.25), rel=1e-8)


def test_example2_is_unsupported():
    c = classify_near_zero(builtin_example2(0.5))
    assert c.regime == "unsupported"
    assert c.right_sign == "positive"
