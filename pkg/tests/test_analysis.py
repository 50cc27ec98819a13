import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from zeronoise import analysis as an
from zeronoise.dsl import builtin_drift, builtin_example1, builtin_example2, drift_from_text

ZERO = drift_from_text("0")


@st.composite
def triples(draw):
    x1, x, x2 = sorted(draw(st.lists(st.floats(-4, 4), min_size=3, max_size=3, unique=True)))
    if x2 - x1 < 1e-3 or min(x - x1, x2 - x) < 1e-4:
        x1, x, x2 = -1.0, 0.2, 1.0
    return x1, x, x2


@given(triples(), st.floats(0.2, 3.0))
def test_zero_drift_exit_probability(tr, eps):
    x1, x, x2 = tr
    p = an.exit_probability(ZERO, eps, x, x1, x2)
    assert p == pytest.approx((x2 - x) / (x2 - x1), abs=1e-12)


@settings(max_examples=15)
@given(triples(), st.floats(0.2, 3.0))
def test_zero_drift_exit_time(tr, eps):
    x1, x, x2 = tr
    u = an.expected_exit_time(ZERO, eps, x, x1, x2)
    assert u == pytest.approx((x - x1) * (x2 - x) / eps ** 2, rel=1e-9)


def test_zero_drift_worked_values():
    assert an.exit_probability(ZERO, 1.0, 0.3, -1.0, 1.0) == pytest.approx(0.35, abs=1e-12)
    assert an.expected_exit_time(ZERO, 1.0, 0.3, -1.0, 1.0) == pytest.approx(0.91, rel=1e-10)


def _constant_reference(c, eps, x, x1, x2):
    # s' = exp(-k c z): both probabilities as ratios of expm1, then optional stopping
    k = 2 * c / eps ** 2
    lo = -math.expm1(-k * (x - x1))
    tot = -math.expm1(-k * (x2 - x1))
    p_hi = lo / tot
    p_lo = math.exp(-k * (x - x1)) * -math.expm1(-k * (x2 - x)) / tot
    return p_lo, (x1 + (x2 - x1) * p_hi - x) / c


@pytest.mark.parametrize("eps", [1.0, 0.3, 0.05, 0.01])
def test_constant_drift_closed_forms(eps):
    d = drift_from_text("1")
    p_lo, u = _constant_reference(1.0, eps, 0.1, -0.5, 0.5)
    assert an.exit_probability(d, eps, 0.1, -0.5, 0.5) == pytest.approx(p_lo, rel=1e-9, abs=1e-300)
    for method in ("phi", "green"):
        got = an.expected_exit_time(d, eps, 0.1, -0.5, 0.5, method=method)
        assert got == pytest.approx(u, rel=1e-8)


def test_exit_probability_has_no_overflow():
    p = an.exit_probability(drift_from_text("1"), 1e-3, 0.0, -0.5, 0.5)
    assert 0.0 <= p < 1e-300


@settings(max_examples=10)
@given(st.floats(0.2, 0.9), st.floats(0.25, 4.0), st.sampled_from([1.0, 0.5, 0.25]))
def test_phi_and_green_routes_agree(rho, c, eps):
    d = builtin_drift("power", rho=rho, c=c)
    u_phi = an.expected_exit_time(d, eps, 0.1, -1.0, 1.0, method="phi")
    u_green = an.expected_exit_time(d, eps, 0.1, -1.0, 1.0, method="green")
    assert u_phi == pytest.approx(u_green, rel=1e-8)


def test_green_function_symmetry_and_zero_drift_form():
    x = np.array([-0.5, 0.0, 0.3])
    y = np.array([0.2, -0.7, 0.3])
    g = an.green_function(ZERO, 1.0, -1.0, 1.0, x, y)
    want = (np.minimum(x, y) + 1) * (1 - np.maximum(x, y)) / 2
    np.testing.assert_allclose(g, want, rtol=1e-12)
    np.testing.assert_allclose(an.green_function(ZERO, 1.0, -1.0, 1.0, y, x), g, rtol=1e-12)


def test_speed_density_of_zero_drift():
    np.testing.assert_allclose(an.speed_density(ZERO, 0.5, np.array([-0.3, 0.4]), -1, 1), 8.0)


def test_scale_function_normalised_at_zero():
    assert an.scale_function(drift_from_text("sign(x)*abs(x)^0.5"), 0.5, 0.0) == 0.0
    assert an.scale_function(ZERO, 0.5, np.array([0.7]))[0] == pytest.approx(0.7, rel=1e-12)


@given(st.floats(0.2, 0.9), st.sampled_from([1.0, 0.1, 0.01, 1e-4]))
def test_odd_drift_weight_is_one_half(rho, eps):
    d = drift_from_text("sign(x)*abs(x)^r", {"r": rho})
    assert an.weight_p_eps(d, eps, -0.5, 0.5) == pytest.approx(0.5, abs=1e-9)


# p_eps of the oscillating drift (rho = 1/2) on (-1/2, 1/2), from a scipy
# quadrature of s built on the cell-wise closed form of B
@pytest.mark.parametrize("eps, ref", [(1.0, 0.4976354926805084), (0.5, 0.4967700616301044)])
def test_example1_weight_reference(eps, ref):
    assert an.weight_p_eps(builtin_example1(0.5), eps, -0.5, 0.5) == pytest.approx(ref, abs=5e-9)


def test_weight_rejects_positive_drift():
    with pytest.raises(an.RegimeMismatch):
        an.weight_p_eps(drift_from_text("1"), 0.1, -0.5, 0.5)


def test_power_weight_at_finite_noise_one_third():
    d = builtin_drift("power", rho=1.0, c=4.0)
    # exact: s(r) = int_0^r exp(-z^2/eps^2) on each side with c = 4 on the left
    eps = 0.05
    ref = (math.erf(2 * 0.5 / eps) / 2) / (math.erf(2 * 0.5 / eps) / 2 + math.erf(0.5 / eps))
    assert an.weight_p_eps(d, eps, -0.5, 0.5) == pytest.approx(ref, rel=1e-9)
    assert ref == pytest.approx(1 / 3, abs=1e-12)


def test_regvar_closed_forms():
    assert an.limit_weight_regvar("a", 1.0, 1.0, 4.0) == pytest.approx(1 / 3)
    assert an.limit_weight_regvar("a", 0.5, 0.5, 0.25) == pytest.approx(1 / (1 + 0.25 ** (2 / 3)))
    assert an.limit_weight_regvar("B", 1.0, 1.0, 1.0) == pytest.approx(0.5)
    assert an.limit_weight_regvar("oscillating", 0.5, 0.5, 1.0) == pytest.approx(0.5)


@settings(max_examples=12)
@given(st.floats(0.2, 1.0), st.floats(0.25, 4.0))
def test_limit_weight_matches_regular_variation(rho, c):
    lw = an.limit_weight(builtin_drift("power", rho=rho, c=c))
    assert lw.status == "converged"
    assert lw.p == pytest.approx(an.limit_weight_regvar("a", rho, rho, c), abs=1e-4)


@pytest.mark.parametrize("rp, rm", [(0.3, 0.7), (0.7, 0.3)])
def test_limit_weight_unequal_indices(rp, rm):
    lw = an.limit_weight(builtin_drift("power", rho=rp, c=1.0, rho_minus=rm))
    assert lw.p == an.limit_weight_regvar("a", rp, rm, 1.0)
    assert lw.p in (0.0, 1.0)


def test_limit_weight_trace():
    lw = an.limit_weight(builtin_example1(0.5))
    assert lw.p == pytest.approx(0.5, abs=1e-6)
    rows = lw.trace()
    assert len(rows) >= 3 and all(len(r) == 2 for r in rows)


def test_aitken_accelerates_geometric_tail():
    s = 1 + 0.5 ** np.arange(12)
    acc = an.aitken(s)
    assert abs(acc[-1] - 1) < 1e-12


def test_mu_of_odd_drift_is_reflection():
    x = np.array([0.01, 0.1, 0.4])
    np.testing.assert_allclose(an.mu_function(drift_from_text("sign(x)*abs(x)^0.5"), x), -x, rtol=1e-8)


def test_approximate_identity_constant_case():
    eps, y = 0.2, np.array([0.0, 0.3, 0.9])
    op = an.ApproxIdentity(lambda x: np.ones_like(x), lambda x: np.ones_like(x), 0.0, 1.0)
    np.testing.assert_allclose(op(eps, y), 1 - np.exp(-(1 - y) / eps ** 2), rtol=1e-10)
    left = an.ApproxIdentity(lambda x: np.ones_like(x), lambda x: np.ones_like(x), 0.0, 1.0, side="left")
    np.testing.assert_allclose(left(eps, y), 1 - np.exp(-y / eps ** 2), rtol=1e-10, atol=1e-300)


def test_approximate_identity_l1_decreases():
    op = an.ApproxIdentity(lambda x: 2 * np.abs(x) ** 0.5, lambda x: 1 / np.abs(x) ** 0.5, 0.0, 1.0)
    l1 = [an.approx_identity_l1(op, 2.0 ** -i) for i in (1, 2, 3)]
    assert l1[0] > l1[1] > l1[2] > 0


@pytest.mark.parametrize("text, regime, p", [
    ("1 + ind(0, 10)", "positive-drift", 1.0),
    ("-1 - ind(-10, 0)", "negative-drift", 0.0),
    ("sign(x)*abs(x)^0.5", "repulsive", 0.5),
])
def test_limit_law(text, regime, p):
    law = an.limit_law(drift_from_text(text), eps_ladder=[0.5, 0.1])
    assert law.regime == regime
    assert law.p == pytest.approx(p)
    json.dumps(law.to_dict())


def test_limit_law_symmetric_method():
    law = an.limit_law(drift_from_text("sign(x)*abs(x)^0.5"), eps_ladder=[0.5])
    assert law.method == "symmetric"
    assert law.p_eps_trace[0][1] == pytest.approx(0.5)


def test_limit_law_unsupported():
    law = an.limit_law(builtin_example2(0.5), eps_ladder=[])
    assert law.regime == "unsupported"
    assert law.p is None
    assert "reason" in law.diagnostics
