import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from zeronoise.deterministic import extremal_solution
from zeronoise.dsl import builtin_example1, drift_from_text
from zeronoise.montecarlo import (
    Path,
    SimConfig,
    coupled_comparison,
    em_path,
    empirical_cdf,
    hitting_time,
    path_key,
    perturbation_convergence_check,
    simulate_ensemble,
    splitmix64,
)

SQRT = drift_from_text("sign(x)*abs(x)^0.5")


def small(**kw):
    base = dict(eps_list=[0.1], dt=1e-2, t_final=0.5, n_paths=64, master_seed=7)
    base.update(kw)
    return SimConfig(**base)


def test_splitmix_reference_value():
    # first output of the reference splitmix64 generator seeded with 0
    assert splitmix64(0) == 0xE220A8397B1DCDAF


@given(st.integers(0, 2 ** 32), st.integers(0, 50), st.integers(0, 10 ** 6))
def test_path_keys_are_distinct(seed, e, i):
    k = path_key(seed, e, i)
    assert k != path_key(seed, e, i + 1)
    assert k != path_key(seed, e + 1, i)
    assert k != path_key(seed + 1, e, i)
    assert 0 <= k < 2 ** 64


@settings(max_examples=10)
@given(st.integers(1, 64), st.sampled_from([1, 2, 4]))
def test_results_independent_of_grouping(chunk, workers):
    ref = simulate_ensemble(SQRT, small(record="full-paths", chunk_size=64, workers=1))
    got = simulate_ensemble(SQRT, small(record="full-paths", chunk_size=chunk, workers=workers))
    np.testing.assert_array_equal(ref.per_eps[0].paths, got.per_eps[0].paths)
    np.testing.assert_array_equal(ref.per_eps[0].final, got.per_eps[0].final)


def test_single_path_matches_ensemble():
    cfg = small(record="full-paths")
    s = simulate_ensemble(SQRT, cfg).per_eps[0]
    for i in (0, 17, 63):
        p = em_path(SQRT, 0.1, cfg, i)
        np.testing.assert_array_equal(p.values, s.paths[i])
        assert p.seed == int(s.seeds[i])


def test_seed_changes_paths():
    a = simulate_ensemble(SQRT, small()).per_eps[0].final
    b = simulate_ensemble(SQRT, small(master_seed=8)).per_eps[0].final
    assert not np.array_equal(a, b)


def test_zero_noise_is_the_euler_scheme():
    cfg = small(eps_list=[0.0], x0=0.25, n_paths=3, record="full-paths")
    s = simulate_ensemble(SQRT, cfg).per_eps[0]
    x = 0.25
    for _ in range(cfg.n_steps):
        x = x + math.sqrt(x) * cfg.dt
    assert s.final[0] == pytest.approx(x, rel=1e-14)
    assert np.all(s.final == s.final[0])


def test_brownian_variance():
    cfg = SimConfig([0.5], dt=1e-2, t_final=1.0, n_paths=4000, master_seed=3)
    fin = simulate_ensemble(drift_from_text("0"), cfg).per_eps[0].final
    assert abs(fin.mean()) < 4 * 0.5 / math.sqrt(4000)
    assert np.var(fin) == pytest.approx(0.25, rel=0.08)


def test_stored_grid_and_stride():
    cfg = small(record="full-paths", path_stride=5)
    s = simulate_ensemble(SQRT, cfg).per_eps[0]
    assert s.paths.shape == (64, len(cfg.stored_times))
    np.testing.assert_allclose(cfg.stored_times, np.arange(0, 51, 5) * 1e-2)
    full = simulate_ensemble(SQRT, small(record="full-paths")).per_eps[0]
    np.testing.assert_array_equal(s.paths, full.paths[:, ::5])


def test_hitting_times_of_constant_drift():
    cfg = SimConfig([0.0], dt=1e-2, t_final=1.0, n_paths=2, levels=[0.355])
    m, v, n, cens = simulate_ensemble(drift_from_text("1"), cfg).per_eps[0].hit_mean(0.355)
    assert m == pytest.approx(0.355, abs=1e-12)
    assert cens == 0


def test_hitting_time_interpolates_and_censors():
    p = Path(0.1, 0, np.array([0.0, 0.1, 0.2]), np.array([0.0, 0.2, 0.6]), 0)
    h = hitting_time(p, 0.4)
    assert h.time == pytest.approx(0.15)
    assert not h.censored
    miss = hitting_time(p, 1.0)
    assert miss.censored and miss.time == pytest.approx(0.2)  # censored at T


@given(st.lists(st.floats(-10, 10), min_size=1, max_size=200))
def test_empirical_cdf_is_a_distribution(xs):
    cdf = empirical_cdf(xs)
    vals = [v for v, _ in cdf]
    fr = [f for _, f in cdf]
    assert vals == sorted(set(vals))
    assert all(a < b for a, b in zip(fr, fr[1:]))
    assert fr[-1] == pytest.approx(1.0)


def test_exit_recording_and_stop():
    cfg = SimConfig([0.5], dt=1e-3, t_final=20.0, n_paths=200, master_seed=1,
                    exit_interval=(-0.5, 0.5), stop_on_exit=True)
    s = simulate_ensemble(drift_from_text("0"), cfg).per_eps[0]
    assert np.all(np.abs(s.exit_side) == 1)
    assert np.all(np.abs(s.final) >= 0.5)
    # zero drift from the centre: mean exit time 1/eps^2 * 0.25, half exit on top
    m, v, n, _ = s.exit_mean()
    assert m == pytest.approx(1.0, abs=4 * math.sqrt(v / n) + 0.02)
    assert abs(s.exit_fraction_hi() - 0.5) < 4 * 0.5 / math.sqrt(200)


def test_sup_distance_to_reference():
    d = drift_from_text("1 + ind(0, 10)")
    psi = extremal_solution(d, "plus", 0.5)
    cfg = SimConfig([0.0], dt=1e-3, t_final=0.5, n_paths=2)
    s = simulate_ensemble(d, cfg, references={"plus": psi}).per_eps[0]
    assert s.sup_distance["plus"][0] < 5e-3


def test_comparison_has_no_violations():
    cfg = small(n_paths=200)
    for a1, a2 in [("0", "1"), ("sign(x)*abs(x)^0.5", "sign(x)*abs(x)^0.5 + 0.1")]:
        r = coupled_comparison(drift_from_text(a1), drift_from_text(a2), cfg)[0]
        assert r.n_violations == 0
    # the oscillating drift jumps, so the Euler map is order preserving only
    # up to rare sub-step crossings at a fine enough step
    d = builtin_example1(0.5)
    fine = SimConfig([2.0 ** -4], dt=2.5e-3, t_final=0.5, n_paths=200, master_seed=7)
    assert coupled_comparison(d, d.shifted(0.05), fine)[0].fraction <= 1e-3


def test_comparison_rejects_unordered_drifts():
    with pytest.raises(ValueError):
        coupled_comparison(drift_from_text("1"), drift_from_text("0"), small())


def test_perturbation_convergence():
    seq = [drift_from_text(f"sign(x)*abs(x)^0.5 + {1 / n!r}") for n in (2, 8, 32)]
    med = perturbation_convergence_check(seq, SQRT, small(eps_list=[0.05], n_paths=200))
    assert med[0] > med[1] > med[2]


@pytest.mark.parametrize("kw", [dict(dt=0.0), dict(n_paths=0), dict(record="x"),
                                dict(exit_interval=(1.0, -1.0))])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        small(**kw)


def test_full_path_cap():
    with pytest.raises(MemoryError):
        simulate_ensemble(SQRT, SimConfig([0.1], dt=1e-5, t_final=10.0, n_paths=100,
                                          record="full-paths"))
