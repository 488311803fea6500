"""Tables of the unit-time radial density and its truncated moments.

For the time integrals of the density, self-similarity gives

    int_0^tau u**(m-1) p_u(rho) du = alpha rho**(m alpha - d) Q_m(rho tau**(-1/alpha)),
    Q_m(z) = int_z^inf s**(d - m alpha - 1) p_1(s) ds.

``P1Table`` evaluates ``p_1`` at Gauss nodes on a logarithmic grid, accumulates
``Q_m`` from the right, and closes the grid with the inverse-power series
(integrated term by term) beyond the last node and the origin series below the
first node.
"""

from __future__ import annotations

import functools
import math

import mpmath as mp
import numpy as np
from scipy.interpolate import CubicSpline

from .density import radial_density, density_at_origin


def _tail_coeffs(alpha, d, n_terms):
    # p_1(s) ~ sum_n e_n s**(-d - n alpha), e_n = pi^(-d/2-1) (-1)^(n+1)/n! 2^(n alpha)
    #          Gamma((d+n alpha)/2) Gamma(n alpha/2+1) sin(n pi alpha/2)
    out = []
    for n in range(1, n_terms + 1):
        e = (math.pi ** (-d / 2.0 - 1.0) * (-1) ** (n + 1) / math.factorial(n) * 2.0 ** (n * alpha)
             * math.gamma((d + n * alpha) / 2.0) * math.gamma(n * alpha / 2.0 + 1.0)
             * math.sin(n * math.pi * alpha / 2.0))
        out.append(e)
    return np.array(out)


def _origin_coeffs(alpha, d, n_terms):
    # p_1(s) ~ sum_n c_n s**(2n), c_n = 2^(1-d) pi^(-d/2)/alpha (-1)^n Gamma((2n+d)/alpha)/(n! Gamma(n+d/2)) 4^-n
    return np.array([2.0 ** (1 - d) * math.pi ** (-d / 2.0) / alpha * (-1) ** n
                     * math.gamma((2 * n + d) / alpha) / (math.factorial(n) * math.gamma(n + d / 2.0)) / 4.0 ** n
                     for n in range(n_terms)])


class P1Table:
    """Unit-time radial density and ``Q_m`` for ``m`` in ``moments``.

    Parameters
    ----------
    alpha, d : kernel parameters
    s_min, s_max : extent of the logarithmic grid
    per_decade : grid panels per decade
    order : Gauss-Legendre nodes per panel
    """

    def __init__(self, alpha: float, d: int, *, s_min: float = 1e-5, s_max: float = 1e4,
                 per_decade: int = 16, order: int = 8, moments=(1, 2)):
        self.alpha = float(alpha)
        self.d = int(d)
        self.moments = tuple(moments)
        n_pan = int(round(per_decade * math.log10(s_max / s_min)))
        self.edges = np.geomspace(s_min, s_max, n_pan + 1)
        xg, wg = np.polynomial.legendre.leggauss(order)
        le = np.log(self.edges)
        mid = 0.5 * (le[1:] + le[:-1])
        half = 0.5 * (le[1:] - le[:-1])
        self._lnodes = mid[:, None] + half[:, None] * xg[None, :]
        self._lweights = half[:, None] * wg[None, :]
        nodes = np.exp(self._lnodes)
        self.node_values = np.asarray(radial_density(self.alpha, self.d, 1.0, nodes.ravel())).reshape(nodes.shape)
        self.edge_values = np.asarray(radial_density(self.alpha, self.d, 1.0, self.edges))
        self._tail_e = _tail_coeffs(self.alpha, self.d, 8)
        self._origin_c = _origin_coeffs(self.alpha, self.d, 3)
        self._p1_spline = CubicSpline(np.log(self.edges), np.log(self.edge_values))
        self._q = {}
        self._q_spline = {}
        for m in self.moments:
            e = self.d - m * self.alpha
            panel = np.sum(self._lweights * nodes ** e * self.node_values, axis=1)  # ds = s dlog s
            q_edges = np.concatenate([np.cumsum(panel[::-1])[::-1], [0.0]]) + self._q_tail(m, self.edges[-1])
            self._q[m] = q_edges
            self._q_spline[m] = CubicSpline(np.log(self.edges), np.log(q_edges))

    # -- p_1 ---------------------------------------------------------------
    def p1(self, s):
        s = np.asarray(s, dtype=float)
        out = np.empty_like(s)
        lo = s < self.edges[0]
        hi = s > self.edges[-1]
        mid = ~(lo | hi)
        out[mid] = np.exp(self._p1_spline(np.log(s[mid])))
        out[hi] = self._tail_sum(s[hi], 0.0)
        out[lo] = np.polyval(self._origin_c[::-1], s[lo] ** 2)
        return out

    def _tail_sum(self, s, m):
        # sum_n e_n s**(-m alpha - n alpha) / ((m + n) alpha), or the plain series when m == 0
        s = np.asarray(s, dtype=float)
        n = np.arange(1, len(self._tail_e) + 1)
        if m == 0:
            return np.sum(self._tail_e[:, None] * s[None, :] ** (-self.d - n[:, None] * self.alpha), axis=0)
        return np.sum(self._tail_e[:, None] * s[None, :] ** (-(m + n[:, None]) * self.alpha)
                      / ((m + n[:, None]) * self.alpha), axis=0)

    def _q_tail(self, m, z):
        return float(self._tail_sum(np.array([z]), m)[0])

    # -- Q_m ---------------------------------------------------------------
    def Q(self, m: int, z):
        """``Q_m(z) = int_z^inf s**(d - m alpha - 1) p_1(s) ds``."""
        if m not in self._q:
            raise KeyError(f"moment {m} not tabulated")
        z = np.asarray(z, dtype=float)
        out = np.empty_like(z)
        lo = z < self.edges[0]
        hi = z > self.edges[-1]
        mid = ~(lo | hi)
        out[mid] = np.exp(self._q_spline[m](np.log(z[mid])))
        out[hi] = self._tail_sum(z[hi], m)
        if np.any(lo):
            e = self.d - m * self.alpha
            z0 = self.edges[0]
            k = np.arange(len(self._origin_c))
            # int_z^{z0} s^(e-1) sum c_k s^(2k) ds
            def prim(x):
                x = np.asarray(x, dtype=float)
                return np.sum(self._origin_c[:, None] * x[None, :] ** (e + 2 * k[:, None]) / (e + 2 * k[:, None]),
                              axis=0)
            out[lo] = self._q[m][0] + prim(np.array([z0]))[0] - prim(z[lo])
        return out

    def Q0(self, m: int) -> float:
        """``Q_m(0)``; finite only when ``d > m alpha``."""
        e = self.d - m * self.alpha
        if e <= 0:
            return math.inf
        z0 = self.edges[0]
        k = np.arange(len(self._origin_c))
        head = float(np.sum(self._origin_c * z0 ** (e + 2 * k) / (e + 2 * k)))
        return float(self._q[m][0] + head)

    # -- time integrals of the density ------------------------------------
    def time_integral(self, m: int, rho, tau: float):
        """``int_0^tau u**(m-1) p_u(rho) du`` for radii ``rho > 0``."""
        rho = np.asarray(rho, dtype=float)
        return self.alpha * rho ** (m * self.alpha - self.d) * self.Q(m, rho * tau ** (-1.0 / self.alpha))


@functools.lru_cache(maxsize=16)
def p1_table(alpha: float, d: int, moments=(1, 2)) -> P1Table:
    """Cached :class:`P1Table` with default resolution."""
    return P1Table(alpha, d, moments=moments)
