"""Transition density of the isotropic alpha-stable process in R^d.

The Fourier symbol is ``exp(-t |z|**alpha)``.  The density is radial, and three
independent evaluation routes are available:

* the power series around the origin (entire for alpha > 1, radius ``t`` for
  alpha = 1, asymptotic for alpha < 1),
* the inverse-power series at infinity (entire in ``r**-alpha`` for alpha < 1,
  asymptotic for alpha > 1),
* direct radial Fourier inversion by quadrature.

Series are summed in multiprecision with the working precision chosen from the
largest term, so cancellation never costs accuracy.  ``method='auto'`` picks
the cheapest route that certifies the requested relative tolerance.
"""

from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass

import mpmath as mp
import numpy as np
from scipy import integrate, special

DEFAULT_RTOL = 1e-12
_MAX_TERMS = 20_000
_MAX_DPS = 2_000


class QuadratureWarning(UserWarning):
    pass


@dataclass(frozen=True)
class StableKernel:
    """Isotropic alpha-stable kernel in dimension ``d``."""

    d: int
    alpha: float

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise ValueError("d must be a positive integer")
        object.__setattr__(self, "d", int(self.d))
        if not 0.0 < self.alpha <= 2.0:
            raise ValueError("alpha must lie in (0, 2]")

    def symbol(self, t, k):
        return np.exp(-t * np.abs(k) ** self.alpha)

    def density(self, t, x, **kw):
        return density_pt(self, t, x, **kw)

    def radial(self, t, r, **kw):
        return radial_density(self.alpha, self.d, t, r, **kw)


@dataclass
class SeriesResult:
    value: float
    error: float
    method: str


def sphere_area(d: int) -> float:
    """Surface area of the unit sphere in R^d."""
    return 2.0 * math.pi ** (d / 2.0) / math.gamma(d / 2.0)


def density_at_origin(alpha: float, d: int, t: float) -> float:
    return (2.0 ** (1 - d) * math.pi ** (-d / 2.0) * math.gamma(d / alpha)
            * t ** (-d / alpha) / (alpha * math.gamma(d / 2.0)))


# ---------------------------------------------------------------------------
# series


# Origin series:  p_t(r) = P0 t**(-d/alpha) sum_n c_n (-x)**n,   x = (r/2)**2 t**(-2/alpha),
#   c_n = Gamma((2n+d)/alpha) / (n! Gamma(n+d/2)),  P0 = 2**(1-d) pi**(-d/2) / alpha.
# Tail series:    p_t(r) = P1 r**(-d) sum_{n>=1} e_n y**n,           y = t 2**alpha r**(-alpha),
#   e_n = (-1)**(n+1) Gamma((d+n alpha)/2) Gamma(n alpha/2+1) sin(n pi alpha/2) / n!,
#   P1 = pi**(-d/2-1).


def _log_coeffs(alpha, d, kind, n_terms):
    n = np.arange(n_terms, dtype=float)
    if kind == "origin":
        return special.gammaln((2 * n + d) / alpha) - special.gammaln(n + 1) - special.gammaln(n + d / 2.0)
    m = n + 1
    return special.gammaln((d + m * alpha) / 2.0) + special.gammaln(m * alpha / 2.0 + 1) - special.gammaln(m + 1)


@functools.lru_cache(maxsize=64)
def _mp_coeffs(alpha, d, kind, n_terms, dps):
    with mp.workdps(dps):
        a = mp.mpf(alpha)
        out = []
        for n in range(n_terms):
            if kind == "origin":
                c = mp.gamma((2 * n + d) / a) * mp.rgamma(n + 1) * mp.rgamma(n + mp.mpf(d) / 2)
                out.append(c if n % 2 == 0 else -c)
            else:
                m = n + 1
                s = mp.sinpi(m * a / 2)
                c = mp.gamma((d + m * a) / 2) * mp.gamma(m * a / 2 + 1) * s * mp.rgamma(m + 1)
                out.append(c if m % 2 == 1 else -c)
        return out


def _bucket(n, step):
    return int(step * math.ceil(max(n, 1) / step))


def _series_sum(alpha, d, kind, logvar, var, n_stop, dps):
    n_terms = _bucket(n_stop, 256)
    coeffs = _mp_coeffs(alpha, d, kind, n_terms, _bucket(dps, 40))
    with mp.workdps(dps):
        v = mp.mpf(var)
        p = mp.mpf(1) if kind == "origin" else v
        s = mp.mpf(0)
        for c in coeffs[:n_stop]:
            s += c * p
            p *= v
        return s


def _log_terms(alpha, d, kind, logvar, n_terms):
    """Log magnitudes of the terms.

    For the tail series the bounded factor ``sin(n pi alpha/2)`` is left out so
    accidental near-zeros never pass for convergence.
    """
    lc = _log_coeffs(alpha, d, kind, n_terms)
    idx = np.arange(n_terms) + (1 if kind == "tail" else 0)
    lt = lc + idx * logvar
    return lt, lt


def _series(alpha, d, kind, logvar, var, rtol, asymptotic):
    """Sum a series ``sum c_n var**n`` returning ``(sum, abs error)`` or None."""
    n_terms = 64
    while True:
        lt, lt_sig = _log_terms(alpha, d, kind, logvar, n_terms)
        if n_terms >= _MAX_TERMS:
            break
        if asymptotic and (np.argmin(lt_sig) < n_terms - 8
                           or np.any(lt_sig < lt_sig[0] + math.log(rtol) - 12)):
            break
        if not asymptotic and lt_sig[-1] < lt.max() - 60 and np.argmax(lt) < n_terms - 8:
            break
        n_terms *= 2
    peak = float(lt.max())
    if asymptotic:
        # stop once terms are negligible, else truncate optimally at the smallest term
        n_min = int(np.argmin(lt_sig))
        tiny = np.nonzero(lt_sig[:n_min + 1] < lt_sig[0] + math.log(rtol) - 12)[0]
        if len(tiny):
            n_min = int(tiny[0])
        if n_min == 0:
            return None
        total = _series_sum(alpha, d, kind, logvar, var, n_min, 30)
        if total == 0:
            return None
        return float(total), math.exp(float(lt_sig[n_min]))
    if lt_sig[-1] > peak - 60:
        return None
    dps = 25 + int(max(peak, 0.0) / math.log(10))
    for _ in range(6):
        if dps > _MAX_DPS:
            return None
        floor = peak - dps * math.log(10)
        while lt_sig[-1] > floor and n_terms < _MAX_TERMS:
            n_terms *= 2
            lt, lt_sig = _log_terms(alpha, d, kind, logvar, n_terms)
        past_peak = np.arange(n_terms) > np.argmax(lt)
        below = np.nonzero(past_peak & (lt_sig < floor))[0]
        n_stop = int(below[0]) + 1 if len(below) else n_terms
        total = _series_sum(alpha, d, kind, logvar, var, n_stop, dps)
        if total == 0:
            dps *= 2
            continue
        ls = float(mp.log(abs(total)))
        lost = (peak - ls) / math.log(10)
        need = lost - math.log10(rtol) + 6
        if need <= dps:
            return float(total), abs(float(total)) * 10.0 ** (lost - dps + 2)
        # a result that is pure rounding noise looks like a small loss; grow geometrically
        dps = max(int(need) + 10, int(1.6 * dps))
    return None


def origin_series(alpha, d, t, r, rtol=DEFAULT_RTOL, asymptotic=None):
    """Power series in ``r`` around the origin."""
    if r == 0:
        v = density_at_origin(alpha, d, t)
        return SeriesResult(v, 0.0, "origin")
    asymptotic = alpha < 1 if asymptotic is None else asymptotic
    with mp.workdps(40):
        x = (mp.mpf(r) / 2) ** 2 * mp.power(t, -2 / mp.mpf(alpha))
        logx = float(mp.log(x))
        pref = float(mp.power(2, 1 - d) * mp.power(mp.pi, -mp.mpf(d) / 2) / alpha
                     * mp.power(t, -d / mp.mpf(alpha)))
    res = _series(alpha, d, "origin", logx, x, rtol, asymptotic)
    if res is None:
        return None
    return SeriesResult(pref * res[0], pref * res[1], "origin-asymptotic" if asymptotic else "origin")


def tail_series(alpha, d, t, r, rtol=DEFAULT_RTOL, asymptotic=None):
    """Series in inverse powers of ``r``."""
    if r == 0 or alpha == 2.0:
        return None
    asymptotic = alpha > 1 if asymptotic is None else asymptotic
    with mp.workdps(40):
        y = mp.mpf(t) * mp.power(2, alpha) * mp.power(r, -mp.mpf(alpha))
        logy = float(mp.log(y))
        pref = float(mp.power(mp.pi, -mp.mpf(d) / 2 - 1) * mp.power(r, -d))
    res = _series(alpha, d, "tail", logy, y, rtol, asymptotic)
    if res is None:
        return None
    return SeriesResult(pref * res[0], pref * res[1], "tail-asymptotic" if asymptotic else "tail")


# ---------------------------------------------------------------------------
# radial Fourier inversion


def radial_inverse(F, d: int, r: float, k_max: float, *, epsabs=0.0, epsrel=1e-11, limit=2000):
    """Inverse Fourier transform of a radial function ``F(|k|)`` at radius ``r``.

    ``f(r) = (2 pi)**(-d/2) r**(1 - d/2) int_0^inf F(k) J_{d/2-1}(k r) k**(d/2) dk``;
    ``F`` must be negligible beyond ``k_max``.  Returns ``(value, error)``.
    """
    if r == 0.0:
        c = sphere_area(d) / (2.0 * math.pi) ** d
        val, err = integrate.quad(lambda k: F(k) * k ** (d - 1), 0.0, k_max, epsabs=epsabs,
                                  epsrel=epsrel, limit=limit)
        return c * val, c * err
    if d == 1:
        val, err = integrate.quad(F, 0.0, k_max, weight="cos", wvar=r, epsabs=epsabs,
                                  epsrel=epsrel, limit=limit)
        return val / math.pi, err / math.pi
    if d == 3:
        val, err = integrate.quad(lambda k: k * F(k), 0.0, k_max, weight="sin", wvar=r,
                                  epsabs=epsabs, epsrel=epsrel, limit=limit)
        c = 1.0 / (2.0 * math.pi ** 2 * r)
        return c * val, c * err
    nu = d / 2.0 - 1.0
    # split at Bessel zeros so each panel is non-oscillatory
    n_osc = int(k_max * r / math.pi) + 2
    if n_osc > 4000:
        zeros = np.arange(1, 4001) * math.pi / r * (k_max * r / math.pi / 4000)
    else:
        zeros = special.jn_zeros(int(nu), n_osc) / r if nu == int(nu) else np.arange(1, n_osc + 1) * math.pi / r
    edges = np.concatenate([[0.0], zeros[zeros < k_max], [k_max]])
    f = lambda k: F(k) * special.jv(nu, k * r) * k ** (d / 2.0)
    total = 0.0
    err = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        v, e = integrate.quad(f, a, b, epsabs=epsabs, epsrel=epsrel, limit=200)
        total += v
        err += e
    c = (2.0 * math.pi) ** (-d / 2.0) * r ** (1.0 - d / 2.0)
    return c * total, c * err


def density_quadrature(alpha, d, t, r, rtol=1e-11):
    """Radial Fourier inversion of ``exp(-t k**alpha)``."""
    k_max = (745.0 / t) ** (1.0 / alpha)
    F = lambda k: math.exp(-t * k ** alpha)
    # long oscillatory range: cap k_max where the symbol is below machine tiny relative to p_t(0)
    k_max = min(k_max, (60.0 / t) ** (1.0 / alpha))
    val, err = radial_inverse(F, d, r, k_max, epsrel=rtol, epsabs=1e-15 * density_at_origin(alpha, d, t))
    return SeriesResult(val, err, "quadrature")


# ---------------------------------------------------------------------------
# public entry points


def radial_density_result(alpha: float, d: int, t: float, r: float, *, rtol: float = DEFAULT_RTOL,
                          method: str = "auto") -> SeriesResult:
    """Density ``p_t`` at distance ``r`` from the origin, with an error estimate."""
    if t <= 0:
        raise ValueError("t must be positive")
    r = abs(float(r))
    if method == "origin":
        res = origin_series(alpha, d, t, r, rtol)
    elif method == "tail":
        res = tail_series(alpha, d, t, r, rtol)
    elif method == "quadrature":
        res = density_quadrature(alpha, d, t, r)
    elif method == "auto":
        res = _auto(alpha, d, t, r, rtol)
    else:
        raise ValueError(f"unknown method {method!r}")
    if res is None:
        raise RuntimeError(f"density route {method!r} failed at alpha={alpha}, d={d}, t={t}, r={r}")
    if res.value < 0:
        if res.value < -1e-9:
            warnings.warn(f"density dipped to {res.value:.3e}; clamped at 0", QuadratureWarning)
        res = SeriesResult(0.0, res.error, res.method)
    return res


def _auto(alpha, d, t, r, rtol):
    if r == 0:
        return origin_series(alpha, d, t, r, rtol)
    z = r * t ** (-1.0 / alpha)
    if alpha == 1.0:
        if z < 0.6:
            return origin_series(alpha, d, t, r, rtol, asymptotic=False)
        if z > 1.6:
            return tail_series(alpha, d, t, r, rtol, asymptotic=False)
        return density_quadrature(alpha, d, t, r)
    if alpha == 2.0:
        return origin_series(alpha, d, t, r, rtol, asymptotic=False)
    # the asymptotic route is cheap when it works: try it first
    if alpha > 1.0:
        first = lambda: tail_series(alpha, d, t, r, rtol, asymptotic=True)
        second = lambda: origin_series(alpha, d, t, r, rtol, asymptotic=False)
    else:
        first = lambda: origin_series(alpha, d, t, r, rtol, asymptotic=True)
        second = lambda: tail_series(alpha, d, t, r, rtol, asymptotic=False)
    res = first()
    if res is not None and res.error <= rtol * abs(res.value):
        return res
    res2 = second()
    if res2 is not None:
        return res2
    return density_quadrature(alpha, d, t, r)


def radial_density(alpha: float, d: int, t: float, r, *, rtol: float = DEFAULT_RTOL, method: str = "auto"):
    """Vectorised :func:`radial_density_result` returning values only."""
    r_arr = np.asarray(r, dtype=float)
    out = np.array([radial_density_result(alpha, d, t, float(ri), rtol=rtol, method=method).value
                    for ri in r_arr.ravel()])
    return out.reshape(r_arr.shape) if r_arr.ndim else float(out[0])


def density_pt(kernel: StableKernel, t: float, x, *, rtol: float = DEFAULT_RTOL, method: str = "auto"):
    """``p_t(x)`` for a point ``x`` (shape ``(d,)``) or points (shape ``(n, d)``).

    In one dimension scalars and 1-d arrays of positions are also accepted.
    """
    x = np.asarray(x, dtype=float)
    d = kernel.d
    if d == 1 and (x.ndim == 0 or x.shape[-1] != 1):
        r = np.abs(x)
    else:
        if x.shape[-1] != d:
            raise ValueError(f"points must have trailing dimension {d}")
        r = np.linalg.norm(x, axis=-1)
    return radial_density(kernel.alpha, d, t, r, rtol=rtol, method=method)
