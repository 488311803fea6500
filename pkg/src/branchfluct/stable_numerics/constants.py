"""Closed-form and quadrature constants of the limit laws."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from ..model import ModelParams, Regime, classify_regime
from .density import radial_density, sphere_area
from .scaling import p1_table


def constant_K(V: float, beta: float) -> float:
    """``(-V/(1+beta) cos(pi (1+beta)/2))**(1/(1+beta))``; positive for 0 < beta < 1."""
    if V <= 0:
        raise ValueError("V must be positive")
    if not 0.0 < beta <= 1.0:
        raise ValueError("beta must lie in (0, 1]")
    return (-V / (1.0 + beta) * math.cos(math.pi * (1.0 + beta) / 2.0)) ** (1.0 / (1.0 + beta))


@dataclass(frozen=True)
class QuadratureValue:
    value: float
    error: float
    method: str


def _k2_integrand_table(params: ModelParams):
    tb = p1_table(params.alpha, params.d)
    a, d, b = params.alpha, params.d, params.beta

    def f(lr):
        r = np.exp(np.atleast_1d(lr))
        A = a * r ** (a - d) * tb.Q(1, r)
        return r ** d * A ** b * tb.p1(r)

    return f


def _unit_time_integral(alpha, d, r, epsrel):
    f = lambda l: math.exp(l) * radial_density(alpha, d, math.exp(l), r, rtol=1e-10)
    return integrate.quad(f, -60.0, 0.0, limit=200, epsrel=epsrel)[0]


def constant_K2(params: ModelParams, *, method: str = "table", epsrel: float = 1e-9) -> QuadratureValue:
    """``V int_{R^d} (int_0^1 p_u(x) du)**beta p_1(x) dx``.

    ``method='table'`` uses the self-similar representation of the inner time
    integral; ``method='direct'`` integrates the density over ``u`` at every
    outer node (slow, used as an independent check).
    """
    if params.V <= 0:
        raise ValueError("V must be positive")
    params.require_transient()
    d, a, b = params.d, params.alpha, params.beta
    lo, hi = -30.0, 25.0
    edges = np.linspace(lo, hi, 23)
    if method == "table":
        f = _k2_integrand_table(params)
        g = lambda lr: float(f(lr)[0])
        eps = epsrel
    elif method == "direct":
        def g(lr):
            r = math.exp(lr)
            A = _unit_time_integral(a, d, r, 1e-8)
            return r ** d * A ** b * radial_density(a, d, 1.0, r, rtol=1e-10)
        eps = max(epsrel, 1e-6)
    else:
        raise ValueError(f"unknown method {method!r}")
    val = 0.0
    err = 0.0
    for x0, x1 in zip(edges[:-1], edges[1:]):
        v, e = integrate.quad(g, x0, x1, epsrel=eps, epsabs=0.0, limit=200)
        val += v
        err += e
    # outside [e^lo, e^hi] the integrand is below r^(d+(a-d)b) at the left and r^(-a) p-tail at the right;
    # both are orders of magnitude below the quadrature error and are bounded, not added
    c = params.V * sphere_area(d)
    return QuadratureValue(c * val, c * err, method)


def constant_K1(params: ModelParams, *, method: str = "table", require_critical: bool = True) -> QuadratureValue:
    """``(-cos(pi (1+beta)/2) K_2)**(1/(1+beta))``."""
    if require_critical and classify_regime(params).regime is not Regime.CRITICAL:
        raise ValueError("K1 is defined for the critical dimension")
    k2 = constant_K2(params, method=method)
    c = -math.cos(math.pi * (1.0 + params.beta) / 2.0)
    p = 1.0 / (1.0 + params.beta)
    val = (c * k2.value) ** p
    err = val * p * k2.error / k2.value
    return QuadratureValue(val, err, k2.method)
