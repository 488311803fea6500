import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import levy_stable

from branchfluct import limit_laws
from branchfluct.limit_laws import StableLimitLaw
from branchfluct.model import ModelParams
from branchfluct.stable_numerics.constants import constant_K
from branchfluct.testfunctions import TestFunction, TimeProfile

LARGE = ModelParams(2, 0.5, 0.5)
CRIT = ModelParams(1, 1.0 / 3.0, 0.5)
PHI2 = TestFunction.gaussian(2, 1.0, 1.0)
PHI1 = TestFunction.gaussian(1, 1.0, 1.0)


@pytest.fixture
def s1(monkeypatch):
    monkeypatch.setattr(levy_stable, "parameterization", "S1")
    return levy_stable


@pytest.mark.parametrize("index,rate", [(1.5, 0.7), (1.25, 2.0), (1.8, 0.3)])
def test_cdf_matches_scipy(s1, index, rate):
    law = StableLimitLaw(index, rate)
    for x in (-2.0, 0.0, 1.0, 3.0):
        ref = s1.cdf(x, index, 1.0, scale=rate ** (1 / index))
        assert law.cdf(x) == pytest.approx(ref, abs=1e-7)


def test_positivity_parameter():
    # P(Y <= 0) = 1/index for a centred spectrally positive law
    for index in (1.2, 1.5, 1.9):
        assert StableLimitLaw(index, 1.3).cdf(0.0) == pytest.approx(1 / index, abs=1e-9)


def test_symmetric_median_and_gaussian_limit():
    assert StableLimitLaw(1.5, 1.0, skew=0.0).cdf(0.0) == pytest.approx(0.5, abs=1e-10)
    g = StableLimitLaw(2.0, 0.5)  # variance 1
    assert g.cdf(1.0) == pytest.approx(0.8413447460685429, abs=1e-12)
    near = StableLimitLaw(1.99999, 0.5)
    for x in (-1.0, 0.3, 1.0):
        assert near.cdf(x) == pytest.approx(g.cdf(x), abs=1e-4)


@given(st.floats(1.05, 2.0), st.floats(0.01, 5.0), st.floats(-20, 20))
def test_cf_modulus(index, rate, z):
    law = StableLimitLaw(index, rate)
    assert abs(law.cf(z)) <= 1 + 1e-15
    assert law.cf(0.0) == 1.0
    assert abs(law.cf(-z) - np.conj(law.cf(z))) < 1e-14


@given(st.floats(0.05, 4.0), st.floats(-5, 5))
def test_at_time_is_convolution_power(factor, z):
    law = StableLimitLaw(1.5, 0.8)
    expo = -law.rate * abs(z) ** 1.5 * (1 - 1j * np.sign(z) * law.skew_term)
    assert abs(law.at_time(factor).cf(z) - np.exp(factor * expo)) < 1e-12


def test_validation():
    for bad in ((0.0, 1.0), (2.5, 1.0), (1.5, -1.0)):
        with pytest.raises(ValueError):
            StableLimitLaw(*bad)
    with pytest.raises(ValueError):
        StableLimitLaw(1.5, 1.0, skew=2.0)
    with pytest.raises(ValueError):
        limit_laws.large_regime_law(CRIT, PHI1)
    with pytest.raises(ValueError):
        limit_laws.critical_law(LARGE, PHI2)


def test_large_law_reference_values():
    law = limit_laws.large_regime_law(LARGE, PHI2)
    assert law.index == 1.5 and law.skew == 1.0
    assert law.meta["G_power_integral"] == pytest.approx(13.2512, rel=1e-4)
    assert law.rate == pytest.approx(constant_K(1.0, 0.5) ** 1.5 * law.meta["G_power_integral"], rel=1e-12)
    assert law.rate == pytest.approx(6.2467, rel=1e-4)


def test_large_law_time_scaling():
    a = limit_laws.large_regime_law(LARGE, PHI2, 1.0)
    b = limit_laws.large_regime_law(LARGE, PHI2, 0.4)
    assert b.rate == pytest.approx(0.4 * a.rate, rel=1e-12)
    z = np.linspace(-1, 1, 7)
    assert np.allclose(limit_laws.limit_cf_large(LARGE, PHI2, 0.4, z, law=a), b.cf(z), atol=1e-14)


def test_critical_law_is_scaled_xi():
    k1 = 0.43102912003274163
    law = limit_laws.critical_law(CRIT, PHI1, 0.5, K1=k1)
    lam = PHI1.integral()
    assert law.rate == pytest.approx(0.5 * (k1 * lam) ** 1.5, rel=1e-14)
    # homogeneity in phi: doubling phi doubles the variable
    law2 = limit_laws.critical_law(CRIT, TestFunction.gaussian(1, 1.0, 2.0), 0.5, K1=k1)
    z = np.linspace(-2, 2, 9)
    assert np.allclose(law2.cf(z), law.cf(2 * z), atol=1e-14)


def test_spacetime_constant_profile():
    A = 13.251196936193644
    law = limit_laws.spacetime_law(LARGE, PHI2, TimeProfile("constant", 1.0), G_power=A)
    # int_0^1 (1 - s)**1.5 ds = 1 / 2.5
    assert law.rate == pytest.approx(constant_K(1.0, 0.5) ** 1.5 * A / 2.5, rel=1e-8)
    assert law.skew == pytest.approx(1.0)


def test_spacetime_point_profile_matches_marginal():
    A = 13.251196936193644
    law = limit_laws.spacetime_law(LARGE, PHI2, TimeProfile("point", 1.0, 0.6), G_power=A)
    assert law.rate == pytest.approx(constant_K(1.0, 0.5) ** 1.5 * A * 0.6, rel=1e-12)


def test_spacetime_zero_profile_is_degenerate():
    law = limit_laws.spacetime_law(LARGE, PHI2, TimeProfile("constant", 0.0), G_power=1.0)
    assert law.rate == 0.0
    assert np.allclose(law.cf(np.linspace(-3, 3, 5)), 1.0)
    assert law.cdf(-0.1) == 0.0 and law.cdf(0.0) == 1.0


def test_laplace_exponent_against_samples():
    law = StableLimitLaw(1.5, 0.6)
    y = law.sample(400_000, np.random.default_rng(5))
    mc = np.exp(-y)
    assert math.log(mc.mean()) == pytest.approx(limit_laws.laplace_exponent(law), abs=4 * mc.std() / mc.mean() / 600)


def test_sampler_agrees_with_cdf():
    law = StableLimitLaw(1.5, 0.6)
    y = law.sample(200_000, np.random.default_rng(6))
    for x in (-1.0, 0.0, 2.0):
        p = law.cdf(x)
        assert np.mean(y <= x) == pytest.approx(p, abs=4 * math.sqrt(p * (1 - p) / len(y)))
