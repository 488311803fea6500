"""Radial quadrature for convolutions of radial kernels with concentric Gaussian bumps.

Used for spatial integrals of powers of ``G phi`` and of time-integrated
semigroups, where the near field needs the Gaussian convolution and the far
field (beyond ``near`` bump widths) is well approximated by a point mass.
"""

from __future__ import annotations

import math

import numpy as np

from ..testfunctions import TestFunction
from .density import sphere_area
from .potential import riesz_constant, sphere_gaussian_mass


def gauss_panels(edges, order):
    """Nodes and weights of composite Gauss-Legendre on consecutive ``edges``."""
    xg, wg = np.polynomial.legendre.leggauss(order)
    edges = np.asarray(edges, dtype=float)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    return (mid[:, None] + half[:, None] * xg).ravel(), (half[:, None] * wg).ravel()


def concentric(phi: TestFunction):
    """``[(sigma, height), ...]`` of a test function whose bumps share one centre."""
    comps = [(c, s, h) for c, s, h in phi.components if h > 0]
    if not comps:
        return []
    c0 = comps[0][0]
    if any(np.any(c != c0) for c, _, _ in comps):
        raise ValueError("radial quadrature needs concentric bumps")
    return [(float(s), float(h)) for _, s, h in comps]


def radial_convolve(kernel, alpha, d, phi_parts, a, order=24):
    """``(k * phi)(x)`` at ``|x - centre| = a`` for a radial kernel ``k``.

    ``kernel(rho)`` may return shape ``(..., n_rho)``.  Near the origin the
    radial integral is taken in ``q = rho**alpha``, which makes the
    ``rho**(alpha - d)`` behaviour of potential-type kernels smooth.
    """
    total = 0.0
    for s, h in phi_parts:
        w13 = 13.0 * s
        if a > 2 * w13:
            rho, w = gauss_panels(np.linspace(a - w13, a + w13, 9), order)
        else:
            brk = [0.0] + ([max(a - w13, 0.0) ** alpha] if a > w13 else []) + ([a ** alpha] if a > 0 else []) \
                + [(a + w13) ** alpha]
            edges = np.unique(np.concatenate([np.linspace(brk[i], brk[i + 1], 5) for i in range(len(brk) - 1)]))
            q, wq = gauss_panels(edges, order)
            rho = q ** (1.0 / alpha)
            w = wq * rho ** (1.0 - alpha) / alpha
        m = sphere_gaussian_mass(d, rho, a, s) * rho ** (d - 1)
        total = total + h * (kernel(rho) @ (w * m))
    return total


def radial_nodes(s, alpha, T=1.0, near=1e3, per_decade=12, order=8):
    """Near-field nodes on ``[0, near s]`` and log-spaced far-field nodes beyond.

    The far field extends ``1e5`` times past the diffusive radius ``T**(1/alpha)``.
    """
    r_near, w_near = gauss_panels(np.concatenate([np.linspace(0, 16 * s, 17), np.geomspace(16 * s, near * s, 40)[1:]]),
                                  order)
    far_hi = near * s * max(T, 1.0) ** (1 / alpha) * 1e5
    n = int(per_decade * math.log10(far_hi / (near * s))) + 1
    lr, wl = gauss_panels(np.linspace(math.log(near * s), math.log(far_hi), n + 1), order)
    r_far = np.exp(lr)
    return r_near, w_near, r_far, wl * r_far


def potential_power_integral(alpha: float, d: int, phi: TestFunction, p: float, *, near: float = 1e3) -> float:
    """``int_{R^d} (G phi)**p dx`` for nonnegative concentric bumps.

    The far field uses ``G phi ~ lambda(phi) C |x|**(alpha - d)`` with an
    analytic tail; needs ``(d - alpha) p > d``.
    """
    parts = concentric(phi)
    if not parts:
        return 0.0
    e = (alpha - d) * p + d
    if e >= 0:
        raise ValueError("(G phi)**p is not integrable")
    C = riesz_constant(alpha, d)
    lam = phi.integral()
    s = max(s for s, _ in parts)
    r_near, w_near, _, _ = radial_nodes(s, alpha, near=near)
    G = np.array([radial_convolve(lambda r: C * r ** (alpha - d), alpha, d, parts, rr) for rr in r_near])
    R = near * s
    return float(sphere_area(d) * (np.dot(w_near, G ** p * r_near ** (d - 1)) + (lam * C) ** p * R ** e / (-e)))
