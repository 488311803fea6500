import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from branchfluct import stats
from branchfluct.limit_laws import StableLimitLaw

LAW = StableLimitLaw(1.5, 1.0)
Z = stats.default_z_grid(2.0, 16)


def rng(seed):
    return np.random.default_rng(seed)


@given(st.lists(st.floats(-50, 50), min_size=1, max_size=50), st.floats(-5, 5))
def test_ecf_properties(xs, z):
    e = stats.ecf(xs, [0.0, z, -z])
    assert e[0] == pytest.approx(1.0)
    assert abs(e[1]) <= 1 + 1e-12
    assert e[2] == pytest.approx(np.conj(e[1]), abs=1e-12)


def test_ecf_chunking_is_invisible():
    x = rng(0).normal(size=5000)
    assert np.allclose(stats.ecf(x, Z), stats.ecf(x, Z, chunk=1000), atol=1e-13)


def test_ecf_matches_gaussian_cf():
    x = rng(1).normal(size=200_000)
    assert np.max(np.abs(stats.ecf(x, Z) - np.exp(-Z ** 2 / 2))) < 4 / math.sqrt(len(x))


def test_z_grid_symmetric_without_zero():
    z = stats.default_z_grid(3.0, 5)
    assert len(z) == 10 and 0.0 not in z
    assert np.allclose(z, -z[::-1])


def test_cf_distance_accepts_own_law_and_rejects_shift():
    x = LAW.sample(5000, rng(2))
    ok = stats.cf_distance(x, LAW, Z, seed=1, n_resample=200)
    assert ok.passed
    assert ok.statistic < 4 / math.sqrt(len(x))
    bad = stats.cf_distance(x + 0.3, LAW, Z, seed=1, n_resample=200)
    assert not bad.passed


def test_cf_distance_root_n_scaling():
    meds = [stats.cf_distance(LAW.sample(n, rng(3)), LAW, Z, seed=2, n_resample=100).details["null_median"]
            for n in (1000, 16000)]
    assert meds[0] / meds[1] == pytest.approx(4.0, rel=0.2)


def test_cf_distance_deterministic_and_guarded():
    x = LAW.sample(500, rng(4))
    a = stats.cf_distance(x, LAW, Z, seed=9, n_resample=50)
    b = stats.cf_distance(x, LAW, Z, seed=9, n_resample=50)
    assert a == b
    with pytest.raises(stats.InsufficientSample):
        stats.cf_distance(x[:10], LAW, Z)


@pytest.mark.parametrize("draw,index", [
    (lambda g, n: StableLimitLaw(1.5, 1.0).sample(n, g), 1.5),
    (lambda g, n: g.normal(size=n), 2.0),
    (lambda g, n: g.standard_cauchy(size=n), 1.0),
])
def test_index_estimate_known_laws(draw, index):
    x = draw(rng(5), 50_000)
    est = stats.stability_index_estimate(x, seed=1, n_boot=20)
    assert est.index == pytest.approx(index, abs=0.05)
    assert est.ci[0] <= est.index <= est.ci[1]


def test_index_estimate_scale_and_fixed_index():
    law = StableLimitLaw(1.5, 2.0)
    est = stats.stability_index_estimate(law.sample(50_000, rng(6)), seed=1, n_boot=10, fixed_index=1.5)
    assert est.fixed_index_scale == pytest.approx(law.scale, rel=0.03)
    assert est.scale == pytest.approx(law.scale, rel=0.1)


def test_index_estimate_needs_enough_data():
    with pytest.raises(stats.InsufficientSample):
        stats.stability_index_estimate(np.zeros(10))
    with pytest.raises(ValueError):
        stats.stability_index_estimate(np.zeros(20_000))


def test_independence_detects_identical_pair():
    x = LAW.sample(3000, rng(7))
    dep = stats.increment_independence_stat(np.column_stack([x, x]), Z[16:], seed=1, n_resample=100)
    assert not dep.passed


def test_independence_accepts_independent_pair():
    g = rng(8)
    pairs = np.column_stack([LAW.sample(3000, g), LAW.sample(3000, g)])
    assert stats.increment_independence_stat(pairs, Z[16:], seed=1, n_resample=100).passed


def test_independence_gap_vanishes_at_zero_frequency():
    x = LAW.sample(500, rng(9))
    res = stats.increment_independence_stat(np.column_stack([x, x]), [0.0], [0.7, 1.3], seed=1, n_resample=20)
    assert res.statistic < 1e-12


def test_independence_shape_check():
    with pytest.raises(ValueError):
        stats.increment_independence_stat(np.zeros((200, 3)), Z)


def test_tail_bound_trivial_and_doubling():
    g = rng(10)
    inc = {(1.0, 0.5, 0.5): np.zeros(1000), (1.0, 0.5, 0.6): g.normal(scale=0.1, size=4000),
           (1.0, 0.5, 0.7): g.normal(scale=0.1 * math.sqrt(2), size=4000)}
    rep = stats.tail_bound_check(inc, [0.1, 0.2], min_exceed=10)
    zero = [r for r in rep.rows if r["dt"] == 0]
    assert all(r["p_hat"] == 0 for r in zero)
    assert rep.envelope_holds
    cells = {(r["dt"], r["delta"]): r["p_hat"] for r in rep.rows if r["dt"] > 0}
    # a larger threshold never has more exceedances
    for (dt, delta), p in cells.items():
        if delta == 0.1:
            assert cells[(dt, 0.2)] <= p
    assert rep.C == pytest.approx(max(r["p_hat"] * r["delta"] / r["dt"] for r in rep.rows if r["dt"] > 0))


def test_tail_bound_slope_of_linear_law():
    # increments with P(|D| > delta) = dt / delta exactly in the tail: slope 1
    g = rng(11)
    inc = {}
    for dt in (0.025, 0.05, 0.1, 0.2):
        u = g.random(200_000)
        inc[(1.0, 0.5, 0.5 + dt)] = np.where(u < dt, 1.0, 0.0)
    rep = stats.tail_bound_check(inc, [0.5])
    assert rep.min_slope == pytest.approx(1.0, abs=0.05)
    assert rep.C == pytest.approx(0.5, rel=0.05)


def test_calibration_rates_are_nominal():
    cal = stats.calibrate_cf_distance(LAW, 1000, Z, reps=300, seed=3, n_resample=300)
    assert abs(cal["rejection_rate"] - 0.05) < 0.04
    ind = stats.calibrate_independence(LAW, 1000, Z[16:], reps=100, seed=3, n_resample=100)
    assert abs(ind["rejection_rate"] - 0.05) < 0.06


def test_ks_against_law():
    x = LAW.sample(20_000, rng(12))
    assert stats.ks_against_law(x, LAW) < 1.63 / math.sqrt(len(x))
    assert stats.ks_against_law(x + 0.5, LAW) > 0.05


def test_sample_rejects_nonfinite():
    with pytest.raises(ValueError):
        stats.Sample([1.0, np.nan])
    with pytest.raises(stats.InsufficientSample):
        stats.Sample(np.zeros(5)).require()
