"""Stable limit laws of the occupation-time fluctuations.

Large dimensions: ``<X(t), phi>`` has CF
``exp{-K**(1+beta) t int |G phi|**(1+beta) (1 - i sgn(z G phi) tan(pi (1+beta)/2)) |z|**(1+beta)}``.
Critical dimension: ``<X(t), phi> = K1 lambda(phi) xi_t`` with ``xi`` the
standard totally skewed (1+beta)-stable process.  CFs are exposed as functions
of a real multiplier ``z`` (the law of ``z <X, phi>``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

from .model import ModelParams, Regime, classify_regime
from .samplers import SkewedStableSpec, as_generator, sample_skewed_stable
from .stable_numerics.constants import constant_K, constant_K1
from .stable_numerics.radial import potential_power_integral
from .testfunctions import TestFunction, TimeProfile


@dataclass(frozen=True)
class StableLimitLaw:
    """``CF(z) = exp(i loc z - rate |z|**index (1 - i skew sgn(z) tan(pi index/2)))``.

    ``rate`` is ``scale**index`` in the usual parametrisation; ``index = 2``
    is the Gaussian with variance ``2 rate``.
    """

    index: float
    rate: float
    skew: float = 1.0
    location: float = 0.0
    regime: str = "reference"
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not 0.0 < self.index <= 2.0:
            raise ValueError("index must lie in (0, 2]")
        if self.rate < 0:
            raise ValueError("rate must be nonnegative")
        if not -1.0 <= self.skew <= 1.0:
            raise ValueError("skew must lie in [-1, 1]")
        if self.index == 1.0 and self.skew != 0.0:
            raise ValueError("index 1 is supported only without skew")

    @property
    def scale(self) -> float:
        return self.rate ** (1.0 / self.index)

    @property
    def skew_term(self) -> float:
        return 0.0 if self.index in (1.0, 2.0) else self.skew * math.tan(math.pi * self.index / 2.0)

    def cf(self, z):
        z = np.asarray(z, dtype=float)
        return np.exp(1j * self.location * z
                      - self.rate * np.abs(z) ** self.index * (1.0 - 1j * np.sign(z) * self.skew_term))

    def at_time(self, factor: float) -> "StableLimitLaw":
        """Law of the process at ``factor`` times the current time (rate scales linearly)."""
        return StableLimitLaw(self.index, self.rate * factor, self.skew, self.location * factor, self.regime,
                              dict(self.meta))

    def sample(self, size, rng) -> np.ndarray:
        """Draws (totally skewed laws only)."""
        if self.skew != 1.0 or not 1.0 < self.index < 2.0:
            raise ValueError("sampling is implemented for totally skewed laws with index in (1, 2)")
        spec = SkewedStableSpec(self.index, max(self.scale, 1e-300), self.location)
        return sample_skewed_stable(spec, as_generator(rng), size)

    def cdf(self, x) -> float:
        return stable_cdf(self, x)

    def cf_table(self, z_grid):
        """Rows ``(z, Re CF, Im CF)``."""
        c = self.cf(z_grid)
        return np.column_stack([np.asarray(z_grid, float), c.real, c.imag])


# ---------------------------------------------------------------------------
# constructors


def _require(params, regime):
    info = classify_regime(params)
    if info.regime is not regime:
        raise ValueError(f"regime is {info.regime.value}, expected {regime.value}")


def large_regime_law(params: ModelParams, phi: TestFunction, t: float = 1.0) -> StableLimitLaw:
    """Limit law of ``<X(t), phi>`` in large dimensions (nonnegative concentric ``phi``)."""
    _require(params, Regime.LARGE)
    b1 = 1.0 + params.beta
    A = potential_power_integral(params.alpha, params.d, phi, b1)
    rate = constant_K(params.V, params.beta) ** b1 * t * A
    return StableLimitLaw(b1, rate, 1.0, 0.0, "large", {"G_power_integral": A, "t": t})


def critical_law(params: ModelParams, phi: TestFunction, t: float = 1.0, *, K1: float | None = None) -> StableLimitLaw:
    """Limit law ``K1 lambda(phi) xi_t`` at the critical dimension."""
    _require(params, Regime.CRITICAL)
    b1 = 1.0 + params.beta
    k1 = constant_K1(params).value if K1 is None else K1
    lam = phi.integral()
    return StableLimitLaw(b1, t * (k1 * lam) ** b1, 1.0, 0.0, "critical", {"K1": k1, "t": t, "lambda_phi": lam})


def limit_cf_large(params: ModelParams, phi: TestFunction, t: float, z, *, law: StableLimitLaw | None = None):
    """CF of ``z <X(t), phi>``; ``law`` may carry a precomputed ``t = 1`` law."""
    law = law.at_time(t) if law is not None else large_regime_law(params, phi, t)
    return law.cf(z)


def limit_cf_critical(params: ModelParams, phi: TestFunction, t: float, z, *, K1: float | None = None):
    """``exp{-t |K1 lambda(phi) z|**(1+beta) (1 - i sgn(z) tan(pi (1+beta)/2))}``."""
    return critical_law(params, phi, t, K1=K1).cf(z)


def spacetime_law(params: ModelParams, phi: TestFunction, psi: TimeProfile, *, G_power: float | None = None
                  ) -> StableLimitLaw:
    """Law of ``<X~, phi psi>`` (large regime); ``G psi-part`` factorises as ``G phi chi``."""
    _require(params, Regime.LARGE)
    b1 = 1.0 + params.beta
    A = potential_power_integral(params.alpha, params.d, phi, b1) if G_power is None else G_power
    if psi.kind == "point":
        mag = abs(psi.value) ** b1 * psi.t1
        signed = math.copysign(mag, psi.value)
    else:
        f = lambda s: float(psi.tail_integral(s))
        pts = [p for p in (psi.t1, psi.a, psi.b) if 0 < p < 1]
        mag = integrate.quad(lambda s: abs(f(s)) ** b1, 0, 1, points=pts or None, limit=200)[0]
        signed = integrate.quad(lambda s: math.copysign(abs(f(s)) ** b1, f(s)), 0, 1, points=pts or None,
                                limit=200)[0]
    rate = constant_K(params.V, params.beta) ** b1 * A * mag
    skew = signed / mag if mag > 0 else 1.0
    return StableLimitLaw(b1, rate, skew, 0.0, "large-spacetime", {"G_power_integral": A, "chi_power_integral": mag})


def limit_cf_spacetime(params: ModelParams, phi: TestFunction, psi: TimeProfile, z, **kw):
    return spacetime_law(params, phi, psi, **kw).cf(z)


def laplace_exponent(law: StableLimitLaw) -> float:
    """``log E exp(-Y)`` for a totally skewed law with index in (1, 2) and zero location.

    Equals ``-rate / cos(pi index / 2)``.
    """
    if law.skew != 1.0 or not 1.0 < law.index < 2.0:
        raise ValueError("needs a totally skewed law with index in (1, 2)")
    return -law.rate / math.cos(math.pi * law.index / 2.0)


# ---------------------------------------------------------------------------
# CDF by CF inversion


@dataclass(frozen=True)
class CDFValue:
    value: float
    error: float
    z_max: float


def stable_cdf_result(law: StableLimitLaw, x: float, *, tol: float = 1e-12) -> CDFValue:
    """Gil-Pelaez ``F(x) = 1/2 - (1/pi) int_0^inf Im(exp(-izx) CF(z)) / z dz``.

    The integral is truncated where ``|CF| < tol`` and split into panels of
    a quarter period of the oscillation.
    """
    if law.rate == 0:
        return CDFValue(float(x >= law.location), 0.0, 0.0)
    if law.index == 2.0:
        sd = math.sqrt(2 * law.rate)
        return CDFValue(float(special.ndtr((x - law.location) / sd)), 0.0, 0.0)
    z_max = (math.log(1 / tol) / law.rate) ** (1 / law.index)
    shift = x - law.location

    def f(z):
        if z == 0.0:
            return 0.0
        return float(np.imag(np.exp(-1j * z * x) * law.cf(z))) / z

    # phase speed: |shift| plus the skew part of the exponent
    speed = abs(shift) + law.rate * abs(law.skew_term) * z_max ** (law.index - 1) + 1.0
    n = int(min(4000, max(8, z_max * speed / (0.5 * math.pi))))
    edges = np.concatenate([[0.0], np.geomspace(min(1e-6, z_max / 10), z_max, n)])
    total, err = 0.0, 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        v, e = integrate.quad(f, a, b, epsabs=1e-13, epsrel=1e-10, limit=100)
        total += v
        err += e
    val = 0.5 - total / math.pi
    return CDFValue(min(max(val, 0.0), 1.0), err / math.pi + tol, z_max)


def stable_cdf(law: StableLimitLaw, x) -> float | np.ndarray:
    if np.ndim(x) == 0:
        return stable_cdf_result(law, float(x)).value
    return np.array([stable_cdf_result(law, float(xi)).value for xi in np.ravel(x)]).reshape(np.shape(x))
