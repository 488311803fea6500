"""Semigroup action and potential operator on Gaussian-sum test functions.

Three routes to ``G phi`` are provided and are independent of each other:

* ``potential_G``: Riesz-kernel form ``C_{alpha,d} int phi(y) |x-y|**(alpha-d) dy``
  in polar coordinates around ``x``; the angular integral of a Gaussian is
  exact (modified Bessel function) and ``rho = s**(1/alpha)`` removes the
  kernel singularity.
* ``potential_G_time_integral``: ``int_0^inf T_t phi(x) dt`` with ``T_t phi``
  from radial Fourier inversion.
* ``potential_G_fourier``: radial inversion of ``phi_hat(k) |k|**(-alpha)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

from ..testfunctions import TestFunction
from .density import StableKernel, density_at_origin, radial_inverse, sphere_area


def riesz_constant(alpha: float, d: int) -> float:
    """``C_{alpha,d} = Gamma((d-alpha)/2) / (2**alpha pi**(d/2) Gamma(alpha/2))``."""
    if not d > alpha:
        raise ValueError(f"the potential operator needs d > alpha (d={d}, alpha={alpha})")
    return math.gamma((d - alpha) / 2.0) / (2.0 ** alpha * math.pi ** (d / 2.0) * math.gamma(alpha / 2.0))


def _points(x, d):
    x = np.asarray(x, dtype=float)
    if d == 1 and (x.ndim == 0 or x.shape[-1] != 1):
        x = x[..., None]
    if x.shape[-1] != d:
        raise ValueError(f"points must have trailing dimension {d}")
    return x


def _map_points(fn, x, d):
    pts = _points(x, d)
    flat = pts.reshape(-1, d)
    out = np.array([fn(p) for p in flat])
    return out.reshape(pts.shape[:-1]) if pts.ndim > 1 else float(out[0])


# ---------------------------------------------------------------------------
# semigroup


def _gaussian_k_max(sigma, tol=1e-18):
    return math.sqrt(2.0 * math.log(1.0 / tol)) / sigma


def semigroup_apply(kernel: StableKernel, t: float, phi: TestFunction, x, *, epsrel: float = 1e-11):
    """``(p_t * phi)(x)`` by radial Fourier inversion, component by component."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    if phi.d != kernel.d:
        raise ValueError("dimension mismatch between kernel and test function")
    if t == 0:
        return _map_points(lambda p: float(phi(p[None, :])[0]), x, kernel.d)
    d, alpha = kernel.d, kernel.alpha

    def one(p):
        total = 0.0
        for c, s, h in phi.components:
            if h == 0:
                continue
            a = float(np.linalg.norm(p - c))
            amp = h * (2.0 * math.pi * s * s) ** (d / 2.0)
            F = lambda k, s=s: math.exp(-t * k ** alpha - 0.5 * s * s * k * k)
            k_max = min(_gaussian_k_max(s), (42.0 / t) ** (1.0 / alpha))
            val, _ = radial_inverse(F, d, a, k_max, epsrel=epsrel, epsabs=1e-17)
            total += amp * val
        return total

    return _map_points(one, x, d)


def gaussian_semigroup_given_variance(phi: TestFunction, x, extra_var):
    """``E phi(x + sqrt(extra_var) Z)`` for standard normal ``Z``; vectorised in ``extra_var``."""
    x = np.asarray(x, dtype=float).reshape(-1)
    v = np.asarray(extra_var, dtype=float)
    out = np.zeros_like(v)
    for c, s, h in phi.components:
        a2 = float(np.sum((x - c) ** 2))
        tot = s * s + v
        out += h * (s * s / tot) ** (phi.d / 2.0) * np.exp(-a2 / (2.0 * tot))
    return out


# ---------------------------------------------------------------------------
# expectations over the subordinator


@dataclass(frozen=True)
class SubordinatorQuadrature:
    """Tensor Gauss rule for ``E g(S)`` with ``S`` positive (alpha/2)-stable, ``E e^{-lam S} = e^{-lam**(alpha/2)}``.

    Kanter's representation writes ``S = (A(u) / w)**((1-a)/a)`` with ``a = alpha/2``,
    ``u ~ U(0, pi)`` and ``w ~ Exp(1)``; the ``w`` integral is taken in ``log w``.
    """

    alpha: float
    n_u: int = 256
    n_panels: int = 120
    order: int = 8
    nodes: np.ndarray = field(init=False, repr=False)
    weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        a = self.alpha / 2.0
        if not 0.0 < a < 1.0:
            raise ValueError("subordinator quadrature needs 0 < alpha < 2")
        xu, wu = np.polynomial.legendre.leggauss(self.n_u)
        u = 0.5 * math.pi * (xu + 1.0)
        wu = 0.5 * math.pi * wu / math.pi
        A = (np.sin(a * u) ** (a / (1.0 - a)) * np.sin(u) ** (-1.0 / (1.0 - a)) * np.sin((1.0 - a) * u))
        xg, wg = np.polynomial.legendre.leggauss(self.order)
        edges = np.linspace(-40.0, 4.0, self.n_panels + 1)
        mid = 0.5 * (edges[1:] + edges[:-1])
        half = 0.5 * (edges[1:] - edges[:-1])
        v = (mid[:, None] + half[:, None] * xg[None, :]).ravel()
        wv = (half[:, None] * wg[None, :]).ravel() * np.exp(v - np.exp(v))
        p = (1.0 - a) / a
        S = (A[:, None] * np.exp(-v)[None, :]) ** p
        W = wu[:, None] * wv[None, :]
        keep = W > 1e-300
        object.__setattr__(self, "nodes", S[keep])
        object.__setattr__(self, "weights", W[keep] / W[keep].sum())

    def expect(self, g, t: float = 1.0):
        """``E g(S_t)`` where ``S_t = t**(2/alpha) S``; ``g`` must be vectorised."""
        return float(np.dot(self.weights, g(t ** (2.0 / self.alpha) * self.nodes)))


def semigroup_apply_subordinated(kernel: StableKernel, t: float, phi: TestFunction, x,
                                 quad: SubordinatorQuadrature | None = None):
    """Second route to ``T_t phi(x)``: average the Gaussian smoothing over the subordinator."""
    if kernel.alpha == 2.0:
        return _map_points(lambda p: float(gaussian_semigroup_given_variance(phi, p, 2.0 * t)), x, kernel.d)
    quad = quad or SubordinatorQuadrature(kernel.alpha)
    return _map_points(lambda p: quad.expect(lambda S: gaussian_semigroup_given_variance(phi, p, 2.0 * S), t),
                       x, kernel.d)


# ---------------------------------------------------------------------------
# potential operator


def sphere_gaussian_mass(d: int, rho, a: float, sigma: float):
    """``int_{S^{d-1}} exp(-|rho theta - a e|**2 / (2 sigma**2)) dtheta``.

    Equals ``(2 pi)**(d/2) exp(-(rho**2 + a**2)/(2 sigma**2)) u**(1-d/2) I_{d/2-1}(u)``
    with ``u = rho a / sigma**2``; evaluated with the scaled Bessel function.
    """
    rho = np.asarray(rho, dtype=float)
    u = rho * a / (sigma * sigma)
    nu = d / 2.0 - 1.0
    near = np.exp(-(rho - a) ** 2 / (2.0 * sigma * sigma))
    small = u < 1e-8
    out = np.empty_like(rho)
    # u -> 0 limit: the sphere area times the Gaussian at distance sqrt(rho^2 + a^2)
    out[small] = sphere_area(d) * np.exp(-(rho[small] ** 2 + a * a) / (2.0 * sigma * sigma))
    us = u[~small]
    out[~small] = ((2.0 * math.pi) ** (d / 2.0) * near[~small] * us ** (1.0 - d / 2.0)
                   * special.ive(nu, us))
    return out


def _riesz_component(alpha, d, a, s, epsrel):
    # int_0^inf rho^(alpha-1) M(rho) d rho with rho = q^(1/alpha): (1/alpha) int M(q^(1/alpha)) dq
    width = 13.0 * s
    lo = max(0.0, a - width)
    hi = a + width
    f = lambda q: float(sphere_gaussian_mass(d, np.array([q ** (1.0 / alpha)]), a, s)[0]) / alpha
    pts = [lo ** alpha, a ** alpha, hi ** alpha] if a > 0 else [0.0, hi ** alpha]
    pts = sorted(set(pts))
    total = 0.0
    err = 0.0
    for p0, p1 in zip(pts[:-1], pts[1:]):
        if p1 <= p0:
            continue
        v, e = integrate.quad(f, p0, p1, epsabs=0.0, epsrel=epsrel, limit=400)
        total += v
        err += e
    return total, err


def potential_G(kernel: StableKernel, phi: TestFunction, x, *, epsrel: float = 1e-10):
    """``G phi(x) = C_{alpha,d} int phi(y) |x - y|**(alpha - d) dy`` (Riesz-kernel route)."""
    d, alpha = kernel.d, kernel.alpha
    C = riesz_constant(alpha, d)

    def one(p):
        total = 0.0
        for c, s, h in phi.components:
            if h == 0:
                continue
            a = float(np.linalg.norm(p - c))
            total += h * _riesz_component(alpha, d, a, s, epsrel)[0]
        return C * total

    return _map_points(one, x, d)


def potential_G_time_integral(kernel: StableKernel, phi: TestFunction, x, *, t_max: float | None = None,
                              epsrel: float = 1e-8):
    """``int_0^inf T_t phi(x) dt``: ``T_t phi`` by Fourier inversion, tail beyond ``t_max`` analytic.

    For ``t > t_max`` the semigroup is replaced by ``phi_total * p_t(0)`` whose
    integral is ``phi_total p_1(0) t_max**(1 - d/alpha) / (d/alpha - 1)``; the
    neglected correction is of relative order ``R**2 t_max**(-2/alpha)`` where
    ``R`` bounds the centres and widths.
    """
    d, alpha = kernel.d, kernel.alpha
    riesz_constant(alpha, d)
    if phi.is_zero:
        return _map_points(lambda p: 0.0, x, d)
    scale = max(phi.support_radius(1e-3), 1.0)
    if t_max is None:
        t_max = (1e5 * scale) ** alpha

    def one(p):
        reach = scale + float(np.linalg.norm(p))
        t_max_p = max(t_max, (1e5 * reach) ** alpha)
        g = lambda lt: math.exp(lt) * float(semigroup_apply(kernel, math.exp(lt), phi, p, epsrel=1e-10))
        edges = np.linspace(-30.0, math.log(t_max_p), 25)
        body = 0.0
        for a, b in zip(edges[:-1], edges[1:]):
            body += integrate.quad(g, a, b, epsabs=0.0, epsrel=epsrel, limit=200)[0]
        tail = phi.integral() * density_at_origin(alpha, d, 1.0) * t_max_p ** (1.0 - d / alpha) / (d / alpha - 1.0)
        return body + tail

    return _map_points(one, x, d)


def potential_G_fourier(kernel: StableKernel, phi: TestFunction, x, *, epsrel: float = 1e-10):
    """Radial inversion of ``phi_hat(k) |k|**(-alpha)`` (the potential's symbol)."""
    d, alpha = kernel.d, kernel.alpha
    riesz_constant(alpha, d)

    def one(p):
        total = 0.0
        for c, s, h in phi.components:
            if h == 0:
                continue
            a = float(np.linalg.norm(p - c))
            amp = h * (2.0 * math.pi * s * s) ** (d / 2.0)
            F = lambda k, s=s: k ** (-alpha) * math.exp(-0.5 * s * s * k * k) if k > 0 else 0.0
            if a == 0.0:
                cst = sphere_area(d) / (2.0 * math.pi) ** d
                v = integrate.quad(lambda k: k ** (d - 1 - alpha) * math.exp(-0.5 * s * s * k * k),
                                   0.0, _gaussian_k_max(s), epsrel=epsrel, limit=400)[0] * cst
            else:
                # the k^(d-1-alpha) endpoint singularity is integrable; split near zero
                k_brk = min(1.0 / a, _gaussian_k_max(s)) * 1e-3
                head = _radial_small_k(d, alpha, a, s, k_brk, epsrel)
                F2 = lambda k, s=s: k ** (-alpha) * math.exp(-0.5 * s * s * k * k)
                v = head + _radial_from(F2, d, a, k_brk, _gaussian_k_max(s), epsrel)
            total += amp * v
        return total

    return _map_points(one, x, d)


def _radial_from(F, d, r, k0, k1, epsrel):
    nu = d / 2.0 - 1.0
    c = (2.0 * math.pi) ** (-d / 2.0) * r ** (1.0 - d / 2.0)
    f = lambda k: F(k) * special.jv(nu, k * r) * k ** (d / 2.0)
    n = max(2, int((k1 - k0) * r / math.pi) + 2)
    edges = np.linspace(k0, k1, min(n, 4000) + 1)
    return c * sum(integrate.quad(f, a, b, epsrel=epsrel, limit=200)[0] for a, b in zip(edges[:-1], edges[1:]))


def _radial_small_k(d, alpha, r, s, k0, epsrel):
    # on [0, k0] J_nu(kr)(kr)^(-nu) is analytic; integrate k^(d-1-alpha) times it with the weight
    nu = d / 2.0 - 1.0
    c = (2.0 * math.pi) ** (-d / 2.0) * r ** (1.0 - d / 2.0)
    # k^(d/2 - alpha) J_nu(k r) = r^nu k^(d-1-alpha) [J_nu(kr) (kr)^-nu]
    g = lambda k: special.jv(nu, k * r) * (k * r) ** (-nu) * math.exp(-0.5 * s * s * k * k) if k > 0 else 1.0 / (2 ** nu * math.gamma(nu + 1))
    v = integrate.quad(g, 0.0, k0, weight="alg", wvar=(d - 1 - alpha, 0.0), epsrel=epsrel)[0]
    return c * r ** nu * v


# ---------------------------------------------------------------------------
# decay check


@dataclass
class DecayReport:
    radii: np.ndarray
    G_values: np.ndarray
    weighted: np.ndarray
    sup: float
    plateau_slope: float
    tail_exponent: float
    plateau: bool
    violations: list


def potential_decay_check(kernel: StableKernel, phi: TestFunction, radius_grid, *, direction=None,
                          plateau_from: float = 10.0, slope_tol: float = 0.05,
                          exponent_rtol: float = 0.05) -> DecayReport:
    """Tabulate ``(1 + |x|**(d-alpha)) |G phi(x)|`` along a ray and check it levels off.

    The plateau holds when the log-log slope of the weighted values over radii
    ``>= plateau_from`` stays within ``slope_tol`` of zero.  The decay exponent of
    ``G phi`` itself on the same range is reported and compared with ``d - alpha``.
    """
    d, alpha = kernel.d, kernel.alpha
    radii = np.asarray(radius_grid, dtype=float)
    e = np.zeros(d)
    e[0] = 1.0
    if direction is not None:
        e = np.asarray(direction, dtype=float)
        e = e / np.linalg.norm(e)
    pts = radii[:, None] * e[None, :]
    G = np.atleast_1d(potential_G(kernel, phi, pts))
    weighted = (1.0 + radii ** (d - alpha)) * np.abs(G)
    violations = []
    if not np.all(np.isfinite(weighted)):
        violations.append("non-finite potential values")
    far = radii >= plateau_from
    slope = 0.0
    exponent = float("nan")
    if phi.is_zero:
        plateau = True
    elif far.sum() >= 2 and np.all(G[far] > 0):
        lr = np.log(radii[far])
        slope = float(np.polyfit(lr, np.log(weighted[far]), 1)[0])
        exponent = -float(np.polyfit(lr, np.log(G[far]), 1)[0])
        plateau = abs(slope) <= slope_tol
        if not plateau:
            violations.append(f"weighted potential still trending (slope {slope:.3g})")
        if abs(exponent / (d - alpha) - 1.0) > exponent_rtol:
            violations.append(f"decay exponent {exponent:.4g} differs from d-alpha={d - alpha:.4g}")
    else:
        plateau = False
        violations.append("not enough positive values beyond the plateau radius")
    return DecayReport(radii, G, weighted, float(weighted.max()), slope, exponent,
                       plateau and not violations, violations)
