import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad

from zeronoise.calculus import (
    CUMULATIVE_GK,
    NODES,
    antiderivative_A,
    antiderivative_B,
    integrate,
    invert_monotone,
    osgood_integral,
)
from zeronoise.dsl import builtin_drift, builtin_example1, drift_from_text


def test_endpoint_singular_integral():
    r = integrate(lambda x: x ** -0.5, 0.0, 1.0, singular="lo")
    assert r.converged
    assert r.value == pytest.approx(2.0, rel=1e-9)


def test_divergence_detected():
    r = integrate(lambda x: 1.0 / x, 0.0, 1.0, singular="lo")
    assert r.verdict == "divergent"


def test_integrate_with_breakpoints():
    f = lambda x: np.where(x < 0.3, 1.0, 2.0)
    r = integrate(f, 0.0, 1.0, points=[0.3])
    assert r.value == pytest.approx(0.3 + 1.4, abs=1e-12)


@given(st.integers(0, 14))
def test_cumulative_rule_exact_for_polynomials(k):
    # int_{-1}^{node} z^k dz at every Kronrod node
    got = CUMULATIVE_GK @ NODES ** k
    want = (NODES ** (k + 1) - (-1.0) ** (k + 1)) / (k + 1)
    np.testing.assert_allclose(got, want, atol=1e-13)


@given(st.floats(0.1, 0.9), st.floats(0.05, 2.0))
def test_osgood_power(rho, R):
    d = drift_from_text("sign(x)*abs(x)^r", {"r": rho})
    r = osgood_integral(d, "right", R)
    assert r.converged
    assert r.value == pytest.approx(R ** (1 - rho) / (1 - rho), rel=1e-7)
    left = osgood_integral(d, "left", R)
    assert left.value == pytest.approx(r.value, rel=1e-7)


def test_osgood_divergent_for_linear_drift():
    assert osgood_integral(drift_from_text("x"), "right", 1.0).verdict == "divergent"


@given(st.floats(0.1, 0.9))
def test_antiderivatives_of_power(rho):
    d = builtin_drift("power", rho=rho, c=1.0)
    A = antiderivative_A(d, "right", 1.0)
    B = antiderivative_B(d, "right", 1.0)
    u = np.array([1e-6, 1e-3, 0.1, 0.5, 1.0])
    np.testing.assert_allclose(A.exact(u), u ** (1 - rho) / (1 - rho), rtol=1e-8)
    np.testing.assert_allclose(B.exact(u), u ** (1 + rho) / (1 + rho), rtol=1e-8)


@given(st.floats(1e-5, 0.99))
def test_inverse_round_trip(u):
    A = antiderivative_A(builtin_drift("power", rho=0.5), "right", 1.0)
    t = float(A.exact(np.array([u]))[0])
    assert float(invert_monotone(A, t)) == pytest.approx(u, rel=1e-8)


def test_invert_plain_callable():
    x = invert_monotone(lambda v: v ** 3, 8.0, bracket=(0.0, 5.0))
    assert x == pytest.approx(2.0, rel=1e-10)
    with pytest.raises(ValueError):
        invert_monotone(lambda v: v, 1.0)


def test_zero_drift_has_no_inverse():
    B = antiderivative_B(drift_from_text("0"), "right", 1.0)
    np.testing.assert_array_equal(B.exact(np.array([0.5, 1.0])), [0.0, 0.0])
    with pytest.raises(ValueError):
        B.inverse(0.1)


# B of the oscillating drift with rho = 1/2, summed cell by cell over
# (1/(n+1), 1/n] in closed form (independent of the package)
EXAMPLE1_B = {
    ("right", 1e-3): 2.107394537944639e-05,
    ("right", 0.25): 0.07583355032588213,
    ("left", 1e-3): 2.108975675613125e-05,
    ("left", 0.25): 0.09083311634080567,
}


@pytest.mark.parametrize("side, u", sorted(EXAMPLE1_B))
def test_example1_B_reference(side, u):
    B = antiderivative_B(builtin_example1(0.5), side, 0.5)
    x = u if side == "right" else -u
    assert float(B.exact(np.array([x]))[0]) == pytest.approx(EXAMPLE1_B[side, u], rel=1e-8)


def test_example1_B_bounds():
    # (1/2)|x|^rho <= |a| <= (3/2)|x|^rho integrates to the same bounds on B
    B = antiderivative_B(builtin_example1(0.3), "right", 1.0)
    u = np.geomspace(1e-6, 1.0, 25)
    v = B.exact(u)
    base = u ** 1.3 / 1.3
    assert np.all(v >= 0.5 * base * (1 - 1e-9))
    assert np.all(v <= 1.5 * base * (1 + 1e-9))


def test_B_matches_scipy_on_smooth_drift():
    d = drift_from_text("1 + 0.5*x")
    B = antiderivative_B(d, "right", 2.0)
    ref = quad(lambda z: 1 + 0.5 * z, 0, 1.7)[0]
    assert float(B.exact(np.array([1.7]))[0]) == pytest.approx(ref, rel=1e-12)
