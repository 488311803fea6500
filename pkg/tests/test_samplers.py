import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats as sst

from branchfluct.model import offspring_pmf, offspring_survival
from branchfluct.samplers import (RandomStream, SkewedStableSpec, box_volume, cube, kanter_positive_stable,
                                  sample_isotropic_increment, sample_offspring, sample_poisson_field,
                                  sample_skewed_stable, sample_subordinator)


def ecf(x, z):
    return np.exp(1j * np.outer(z, x)).mean(axis=1)


def test_streams_deterministic_and_distinct():
    a = RandomStream(5, 3).generator().random(4)
    b = RandomStream(5, 3).generator().random(4)
    c = RandomStream(5, 4).generator().random(4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_kanter_laplace_transform():
    rng = np.random.default_rng(0)
    s = kanter_positive_stable(0.75, 400_000, rng)
    for lam in (0.5, 1.0, 2.0):
        est = np.exp(-lam * s)
        assert abs(est.mean() - math.exp(-lam ** 0.75)) < 4 * est.std() / math.sqrt(len(s))


def test_subordinator_alpha_two_is_constant():
    assert np.all(sample_subordinator(2.0, 0.3, 5, np.random.default_rng(0)) == 0.3)


def test_brownian_variance():
    x = sample_isotropic_increment(3, 2.0, 1.0, np.random.default_rng(1), 1_000_000)
    var = x.var(axis=0)
    se = 2.0 * math.sqrt(2.0 / len(x))
    assert np.all(np.abs(var - 2.0) < 3 * se)


@pytest.mark.parametrize("alpha, d", [(0.5, 2), (1.5, 1), (2.0, 3)])
def test_increment_ecf(alpha, d):
    n = 200_000
    x = sample_isotropic_increment(d, alpha, 0.7, np.random.default_rng(2), n)
    z = np.linspace(0.1, 3.0, 12)
    for k in range(d):
        gap = np.abs(ecf(x[:, k], z) - np.exp(-0.7 * z ** alpha))
        assert gap.max() < 4 / math.sqrt(n)


def test_increment_rotational_symmetry():
    n = 200_000
    x = sample_isotropic_increment(2, 0.8, 1.0, np.random.default_rng(3), n)
    th = 0.77
    R = np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
    zs = np.array([[0.3, 0.1], [1.0, -0.4], [0.0, 1.5]])
    a = np.exp(1j * x @ zs.T).mean(axis=0)
    b = np.exp(1j * (x @ R.T) @ zs.T).mean(axis=0)
    assert np.abs(a - b).max() < 8 / math.sqrt(n)


def test_per_row_time_steps():
    dt = np.array([0.0, 1.0, 4.0])
    x = sample_isotropic_increment(1, 1.0, dt, np.random.default_rng(0), 3)
    assert x[0, 0] == 0.0


@pytest.mark.parametrize("beta", [0.25, 0.5, 0.75])
def test_offspring_pmf_cells(beta):
    n = 1_000_000
    k = sample_offspring(beta, np.random.default_rng(4), n)
    law = offspring_pmf(beta, 50)
    counts = np.bincount(np.minimum(k, 50), minlength=51)
    for j in range(10):
        p = law.pmf[j]
        assert abs(counts[j] - n * p) <= 3 * math.sqrt(n * p * (1 - p)) + 1e-9
    p_big = float(offspring_survival(beta, 99))
    big = int(np.sum(k >= 100))
    assert abs(big - n * p_big) <= 3 * math.sqrt(n * p_big)


def test_offspring_mean_heavy_tail_aware():
    # infinite variance: use the truncated mean E[min(K, m)] which has a closed form
    n, m = 1_000_000, 1000
    k = sample_offspring(0.5, np.random.default_rng(5), n)
    law = offspring_pmf(0.5, m)
    kk = np.arange(m + 1)
    exact = float(np.sum(kk * law.pmf)) + m * law.tail_mass
    est = np.minimum(k, m)
    assert abs(est.mean() - exact) < 4 * est.std() / math.sqrt(n)


def test_offspring_table_method_agrees():
    law = offspring_pmf(0.5, 10_000)
    u = np.random.default_rng(6)
    a = sample_offspring(law, u, 100_000, method="table")
    b = sample_offspring(law, np.random.default_rng(6), 100_000, method="exact")
    assert np.mean(a == b) > 0.999


def test_binary_offspring():
    k = sample_offspring(1.0, np.random.default_rng(7), 10_000)
    assert set(np.unique(k)) <= {0, 2}


def test_poisson_field_empty_and_mean():
    assert len(sample_poisson_field(1.0, [(0.0, 0.0), (0.0, 1.0)], np.random.default_rng(0))) == 0
    rng = np.random.default_rng(8)
    box = cube(2.0, 2)
    n = np.array([len(sample_poisson_field(1.5, box, rng)) for _ in range(2000)])
    mean = 1.5 * box_volume(box)
    assert abs(n.mean() - mean) < 3 * math.sqrt(mean / len(n))


def test_poisson_subbox_independence():
    rng = np.random.default_rng(9)
    box = [(0.0, 2.0)]
    left, right = [], []
    for _ in range(3000):
        pts = sample_poisson_field(2.0, box, rng)[:, 0]
        left.append(np.sum(pts < 1.0))
        right.append(np.sum(pts >= 1.0))
    table = np.zeros((3, 3))
    for a, b in zip(left, right):
        table[min(a // 2, 2), min(b // 2, 2)] += 1
    assert sst.chi2_contingency(table)[1] > 0.001


@given(st.floats(0.1, 5.0), st.integers(1, 3))
def test_cube_volume(L, d):
    assert box_volume(cube(L, d)) == pytest.approx((2 * L) ** d)


@pytest.mark.parametrize("index", [1.25, 1.5, 1.75])
def test_skewed_stable_ecf(index):
    n = 200_000
    spec = SkewedStableSpec.from_time(index, 1.0)
    x = sample_skewed_stable(spec, np.random.default_rng(10), n)
    z = np.array([-2, -1, -0.5, 0.5, 1, 2.0])
    assert np.abs(ecf(x, z) - spec.cf(z)).max() < 4 / math.sqrt(n)


def test_skewed_cf_example():
    spec = SkewedStableSpec.from_time(1.5, 1.0)
    assert spec.cf(1.0) == pytest.approx(np.exp(-(1 + 1j)))
    z = np.linspace(-3, 3, 13)
    assert np.allclose(np.abs(spec.cf(z)), np.exp(-np.abs(z) ** 1.5))
