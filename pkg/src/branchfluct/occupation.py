"""Occupation integrals, centering and fluctuation pairings.

The simulator records ``Y_k = <N_{t_k}, phi>`` on the grid ``t_k = k dt``.
The occupation up to ``t_k`` is the trapezoid sum of ``Y``; the fluctuation
path is ``X_T(t) = (occupation(Tt) - centering(Tt)) / F_T`` on the grid
``t = t_k / T``.  Every pairing used downstream is a fixed linear functional
``sum_k c_k (Y_k - E Y_k)``; :func:`pairing_weights` returns the ``c_k`` so the
deterministic side of the Laplace identity can be written for exactly the
functional the simulation computes.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize, special

from .model import ModelParams
from .stable_numerics.potential import SubordinatorQuadrature
from .testfunctions import TestFunction, TimeProfile

__all__ = [
    "Centering", "FluctuationRecord", "TestFunction", "TimeProfile", "accumulate_occupation",
    "box_mass", "choose_box_half_width", "expected_pairing", "far_field_bias", "fluctuation_path",
    "fluctuation_value", "pairing_weights", "refinement_slope", "spacetime_pairing",
]


class Centering(enum.Enum):
    EXACT = "exact"  # intensity * lambda(phi) * s, the infinite-system mean
    TRUNCATED = "truncated"  # the exact mean of the system started in the box


@dataclass
class FluctuationRecord:
    """Fluctuation values of one replica."""

    replica_id: int
    T: float
    t_values: np.ndarray
    values: np.ndarray
    pairing: float | None = None
    meta: dict = field(default_factory=dict)


def accumulate_occupation(values: np.ndarray, dt: float) -> np.ndarray:
    """Cumulative trapezoid of grid values along the last axis (first entry 0)."""
    return integrate.cumulative_trapezoid(values, dx=dt, axis=-1, initial=0.0)


# ---------------------------------------------------------------------------
# means of the box-started system


def _box_array(box, d):
    box = np.asarray(box, dtype=float)
    if box.shape != (d, 2):
        raise ValueError(f"box must have shape ({d}, 2)")
    return box


def box_mass(alpha: float, phi: TestFunction, t, box, *, quad: SubordinatorQuadrature | None = None) -> np.ndarray:
    """``int_B (T_t phi)(x) dx`` for each time in ``t``.

    Conditionally on the subordinator ``S_t`` the semigroup is a Gaussian with
    variance ``2 S_t`` per coordinate, so the box mass is an expectation of a
    product of normal CDF differences.
    """
    d = phi.d
    box = _box_array(box, d)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if alpha < 2.0 and quad is None:
        quad = SubordinatorQuadrature(alpha)
    out = np.zeros(len(t))
    for c, s, h in phi.components:
        if h == 0:
            continue
        pref = h * (2 * math.pi * s * s) ** (d / 2.0)
        lo = box[:, 0] - c
        hi = box[:, 1] - c

        def g(S):
            sd = np.sqrt(s * s + 2.0 * S)[..., None]
            return np.prod(special.ndtr(hi / sd) - special.ndtr(lo / sd), axis=-1)

        for i, ti in enumerate(t):
            if ti == 0:
                out[i] += pref * float(g(np.zeros(1))[0])
            elif alpha == 2.0:
                out[i] += pref * float(g(np.array([ti]))[0])
            else:
                out[i] += pref * quad.expect(g, ti)
    return out


def expected_pairing(params: ModelParams, phi: TestFunction, times, box=None, *, quad=None) -> np.ndarray:
    """``E <N_t, phi>`` for the infinite system (``box=None``) or the box-started one."""
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if box is None:
        return np.full(len(times), params.intensity * phi.integral())
    return params.intensity * box_mass(params.alpha, phi, times, box, quad=quad)


def _bias_quadrature(alpha: float) -> SubordinatorQuadrature:
    # a lighter rule than the default: the bias is a diagnostic and agrees
    # with the full rule to ~1e-5 relative at a seventh of the cost
    return SubordinatorQuadrature(alpha, n_u=96, n_panels=60)


def far_field_bias(params: ModelParams, phi: TestFunction, horizon: float, box, *, quad=None) -> float:
    """Mean occupation up to ``horizon`` contributed by ancestors outside ``box``.

    ``intensity * int_0^h (lambda(phi) - int_B T_s phi) ds``; this is the
    bias of an exactly centered occupation of the box-started system.
    """
    quad = quad if quad is not None or params.alpha == 2.0 else _bias_quadrature(params.alpha)
    lam = phi.integral()
    f = lambda s: lam - float(box_mass(params.alpha, phi, s, box, quad=quad)[0])
    xs, ws = np.polynomial.legendre.leggauss(24)
    # the integrand grows like s**(1/alpha)-ish at small s; graded panels in s
    edges = np.concatenate([[0.0], horizon * np.geomspace(1e-4, 1.0, 12)])
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        s = 0.5 * (a + b) + 0.5 * (b - a) * xs
        total += 0.5 * (b - a) * sum(w * f(si) for si, w in zip(s, ws))
    return params.intensity * max(total, 0.0)


def choose_box_half_width(params: ModelParams, phi: TestFunction, horizon: float, budget: float, *,
                          scale: float = 1.0, l_min: float = 1.0, l_max: float = 1e12) -> float:
    """Smallest cube half-width with ``far_field_bias / scale <= budget``."""
    quad = _bias_quadrature(params.alpha) if params.alpha < 2.0 else None
    d = params.d
    cube = lambda L: np.tile([-L, L], (d, 1))
    f = lambda lL: math.log(far_field_bias(params, phi, horizon, cube(math.exp(lL)), quad=quad) / scale + 1e-300) \
        - math.log(budget)
    if f(math.log(l_min)) <= 0:
        return l_min
    if f(math.log(l_max)) > 0:
        raise ValueError("no feasible box below l_max")
    return math.exp(optimize.brentq(f, math.log(l_min), math.log(l_max), xtol=1e-6))


# ---------------------------------------------------------------------------
# fluctuations


def _centering_path(params, phi, n_times, dt, centering, box, quad=None):
    times = dt * np.arange(n_times)
    if centering is Centering.EXACT or box is None:
        m = expected_pairing(params, phi, times)
    else:
        m = expected_pairing(params, phi, times, box, quad=quad)
    return m


def fluctuation_path(values: np.ndarray, dt: float, params: ModelParams, phi: TestFunction, norming: float, *,
                     centering: Centering = Centering.EXACT, box=None, mean_values=None) -> np.ndarray:
    """``X_T(t_k / T)`` on the grid for every replica (last axis = time).

    ``mean_values`` (the means ``E Y_k``) may be passed to avoid recomputing
    the box masses.
    """
    values = np.asarray(values, dtype=float)
    if mean_values is None:
        mean_values = _centering_path(params, phi, values.shape[-1], dt, Centering(centering), box)
    return accumulate_occupation(values - mean_values, dt) / norming


def fluctuation_value(values, dt, params, phi, norming, t: float, *, centering=Centering.EXACT, box=None,
                      mean_values=None) -> np.ndarray:
    """``X_T(t)`` for ``t`` in [0, 1] on the grid (``t * K`` must be an integer)."""
    values = np.asarray(values, dtype=float)
    K = values.shape[-1] - 1
    j = t * K
    if abs(j - round(j)) > 1e-9:
        raise ValueError("t is not on the observation grid")
    path = fluctuation_path(values, dt, params, phi, norming, centering=centering, box=box, mean_values=mean_values)
    return path[..., int(round(j))]


def pairing_weights(psi: TimeProfile, n_times: int, dt: float, norming: float) -> np.ndarray:
    """Weights ``c_k`` with ``<X_T, phi psi> = sum_k c_k (Y_k - E Y_k)``.

    ``X_T`` is the grid trapezoid occupation path and the time pairing is the
    trapezoid rule on the same grid (or point evaluation for a point mass).
    """
    K = n_times - 1
    if psi.kind == "point":
        j = psi.t1 * K
        if abs(j - round(j)) > 1e-9:
            raise ValueError("point-mass time is not on the observation grid")
        j = int(round(j))
        c = np.zeros(n_times)
        if j > 0:
            c[:j + 1] = dt
            c[0] = c[j] = 0.5 * dt
        return psi.value * c / norming
    g = _time_weights(psi, K)
    g[0] = 0.0  # X_T(0) = 0
    tail = np.concatenate([np.cumsum(g[::-1])[::-1][1:], [0.0]])  # sum_{j > k} g_j
    c = dt * (0.5 * g + tail)
    c[0] = dt * 0.5 * g[1:].sum()
    return c / norming


def spacetime_pairing(path: np.ndarray, psi: TimeProfile) -> np.ndarray:
    """``int_0^1 X(t) psi(t) dt`` for a grid path on ``t_k = k / K`` (trapezoid)."""
    path = np.asarray(path, dtype=float)
    K = path.shape[-1] - 1
    if psi.kind == "point":
        j = psi.t1 * K
        if abs(j - round(j)) > 1e-9:
            raise ValueError("point-mass time is not on the observation grid")
        return psi.value * path[..., int(round(j))]
    return path @ _time_weights(psi, K)


def _time_weights(psi: TimeProfile, K: int) -> np.ndarray:
    """Weights ``w_k`` with ``int_0^1 f(t) psi(t) dt ~ sum_k w_k f(k / K)``.

    Trapezoid rule on the product; an indicator whose cut lies on the grid is
    integrated exactly up to the cut instead of smearing the jump over a cell.
    """
    w = np.full(K + 1, 1.0 / K)
    w[0] = w[-1] = 0.5 / K
    if psi.kind == "indicator":
        j = psi.t1 * K
        if abs(j - round(j)) <= 1e-9:
            j = int(round(j))
            w[j] = 0.5 / K if j > 0 else 0.0
            w[j + 1:] = 0.0
            return psi.value * w
    return w * psi(np.arange(K + 1) / K)


def refinement_slope(values: np.ndarray, dt: float, levels: int = 4):
    """Convergence order of the grid occupation in the grid step.

    ``values`` are grid values on the finest grid; coarser grids are exact
    subsamples of the same paths.  Returns ``(steps, errors, slope)`` where
    ``errors[j]`` is the mean absolute difference between the total occupation
    on grid ``j`` and on the next finer grid, and ``slope`` is the least-squares
    log-log slope.
    """
    values = np.asarray(values, dtype=float)
    K = values.shape[-1] - 1
    if K % (2 ** levels):
        raise ValueError("number of steps must be divisible by 2**levels")
    totals = [integrate.trapezoid(values[..., ::2 ** j], dx=dt * 2 ** j, axis=-1) for j in range(levels + 1)]
    steps = np.array([dt * 2 ** j for j in range(1, levels + 1)])
    errors = np.array([np.mean(np.abs(totals[j] - totals[j - 1])) for j in range(1, levels + 1)])
    slope = float(np.polyfit(np.log(steps), np.log(errors), 1)[0])
    return steps, errors, slope
