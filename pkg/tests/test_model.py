import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from branchfluct.model import (ModelParams, Regime, classify_regime, critical_dimension, norming, offspring_pmf,
                               offspring_survival, offspring_tail_mean)


@pytest.mark.parametrize("d, alpha, beta, regime", [
    (2, 0.5, 0.5, Regime.LARGE),
    (1, 1 / 3, 0.5, Regime.CRITICAL),
    (1, 0.8, 0.9, Regime.INTERMEDIATE),
    (1, 1.5, 0.5, Regime.BELOW_INTERMEDIATE),
])
def test_regimes(d, alpha, beta, regime):
    assert classify_regime(ModelParams(d, alpha, beta)).regime is regime


def test_critical_dimension_value():
    assert critical_dimension(0.5, 0.5) == pytest.approx(1.5)
    assert ModelParams(2, 0.5, 0.5).critical_dimension == pytest.approx(1.5)


@pytest.mark.parametrize("bad", [dict(d=0, alpha=1, beta=.5), dict(d=1, alpha=2.5, beta=.5),
                                 dict(d=1, alpha=1, beta=1.0), dict(d=1, alpha=1, beta=.5, V=-1)])
def test_params_rejected(bad):
    with pytest.raises(ValueError):
        ModelParams(**bad)


def test_norming_examples():
    assert norming(ModelParams(2, 0.5, 0.5), 8.0) == pytest.approx(4.0)
    crit = ModelParams(1, 1 / 3, 0.5)
    assert norming(crit, math.e) == pytest.approx(math.e ** (2 / 3))
    # (100 ln 100)^(2/3) evaluates to 59.634
    assert norming(crit, 100.0) == pytest.approx(59.634, abs=1e-3)
    with pytest.raises(ValueError):
        norming(crit, 1.0)


def test_norming_below_intermediate_undefined():
    with pytest.raises(ValueError):
        norming(ModelParams(1, 1.5, 0.5), 10.0)


def test_pmf_golden_values():
    law = offspring_pmf(0.5, 1000)
    assert law.pmf[0] == pytest.approx(2 / 3, abs=1e-15)
    assert law.pmf[1] == 0.0
    assert law.pmf[2] == pytest.approx(1 / 4, abs=1e-15)
    assert law.pmf[3] == pytest.approx(1 / 24, abs=1e-15)


def test_binary_branching_oracle():
    law = offspring_pmf(1.0, 10)
    assert law.pmf[:4].tolist() == [0.5, 0.0, 0.5, 0.0]
    assert law.mean == 1.0


@pytest.mark.parametrize("beta", [0.25, 0.5, 0.75])
def test_pmf_sum_and_mean(beta):
    law = offspring_pmf(beta, 10_000)
    assert math.fsum(law.pmf) + law.tail_mass == pytest.approx(1.0, abs=1e-12)
    assert law.mean == pytest.approx(1.0, abs=1e-10)


@given(st.floats(0.05, 0.95), st.integers(1, 5000))
def test_survival_matches_pmf_tail(beta, k):
    law = offspring_pmf(beta, 6000)
    tail = 1.0 - math.fsum(law.pmf[:k + 1])
    assert float(offspring_survival(beta, k)) == pytest.approx(tail, abs=1e-12)


@given(st.floats(0.05, 0.95), st.integers(3, 3000))
def test_tail_mean_matches_sum(beta, k):
    law = offspring_pmf(beta, 4000)
    kk = np.arange(len(law.pmf))
    direct = 1.0 - math.fsum(kk[:k + 1] * law.pmf[:k + 1])
    assert offspring_tail_mean(beta, k) == pytest.approx(direct, abs=1e-11)


@given(st.floats(0.05, 0.95))
def test_survival_monotone(beta):
    s = offspring_survival(beta, np.arange(200))
    assert np.all(np.diff(s) <= 0)
    assert s[0] == pytest.approx(beta / (1 + beta))
