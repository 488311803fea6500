"""Exact random generation for the particle system.

Isotropic alpha-stable increments are built by Gaussian subordination:
``X = sqrt(2 S) Z`` with ``Z`` standard normal in R^d and ``S`` a positive
(alpha/2)-stable variable with ``E exp(-lam S) = exp(-dt lam**(alpha/2))``.
Then ``E exp(i z.X) = E exp(-|z|^2 S) = exp(-dt |z|^alpha)``.  ``S`` is drawn
with Kanter's representation of the one-sided stable law.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

from .model import OffspringLaw, offspring_survival

_BITGEN = np.random.PCG64


@dataclass(frozen=True)
class RandomStream:
    """Deterministic stream keyed by ``(seed, stream_id)``.

    Streams with different ids are statistically independent children of the
    same root ``SeedSequence``.
    """

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,))
        return np.random.Generator(_BITGEN(ss))


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RandomStream):
        return rng.generator()
    return np.random.default_rng(rng)


# ---------------------------------------------------------------------------
# one-sided stable subordinator


def kanter_positive_stable(a: float, size, rng: np.random.Generator) -> np.ndarray:
    """Positive a-stable variates with Laplace transform ``exp(-lam**a)``, 0 < a < 1."""
    if not 0.0 < a < 1.0:
        raise ValueError(f"a must lie in (0, 1), got {a}")
    u = rng.uniform(0.0, math.pi, size)
    w = rng.standard_exponential(size)
    # guard the measure-zero endpoint u == 0 (sin(u) underflow)
    u = np.maximum(u, 1e-300)
    return (np.sin(a * u) / np.sin(u) ** (1.0 / a)) * (np.sin((1.0 - a) * u) / w) ** ((1.0 - a) / a)


def sample_subordinator(alpha: float, dt, size, rng: np.random.Generator) -> np.ndarray:
    """Variance mixer ``S`` with ``E exp(-lam S) = exp(-dt lam**(alpha/2))``.

    ``dt`` may be a scalar or an array broadcastable to ``size``.  For
    ``alpha == 2`` the mixer is the constant ``dt``.
    """
    dt = np.asarray(dt, dtype=float)
    if alpha == 2.0:
        return np.broadcast_to(dt, size).astype(float)
    s1 = kanter_positive_stable(alpha / 2.0, size, rng)
    return dt ** (2.0 / alpha) * s1


def sample_isotropic_increment(d: int, alpha: float, dt, rng, size: int | None = None) -> np.ndarray:
    """Increments with characteristic function ``exp(-dt |z|**alpha)`` in R^d.

    Returns an array of shape ``(size, d)`` (or ``(d,)`` when ``size`` is None).
    ``dt`` may be an array of per-row time steps.
    """
    rng = as_generator(rng)
    n = 1 if size is None else int(size)
    dt = np.asarray(dt, dtype=float)
    if np.any(dt < 0):
        raise ValueError("dt must be nonnegative")
    s = sample_subordinator(alpha, np.broadcast_to(dt, (n,)), (n,), rng)
    z = rng.standard_normal((n, d))
    x = np.sqrt(2.0 * s)[:, None] * z
    return x[0] if size is None else x


# ---------------------------------------------------------------------------
# offspring


_SMALL_K = 4096


@functools.lru_cache(maxsize=16)
def _survival_table(beta: float) -> np.ndarray:
    return offspring_survival(beta, np.arange(_SMALL_K + 1))


def _exact_offspring(beta: float, w: np.ndarray) -> np.ndarray:
    """Smallest k with P(K > k) <= w, evaluated with the closed-form survival.

    Small k come from a cached survival table.  Beyond the table the asymptotic
    inverse ``(c/w)**(1/(1+beta))`` is within a few units of the answer and is
    corrected by an exact local walk.
    """
    surv = _survival_table(beta)
    # surv is nonincreasing; index of first entry <= w
    out = np.searchsorted(-surv, -w, side="left").astype(np.int64)
    far = out > _SMALL_K
    if np.any(far):
        wf = w[far]
        c = beta / ((1.0 + beta) * math.gamma(1.0 - beta))
        k = np.maximum(np.floor((c / wf) ** (1.0 / (1.0 + beta))), float(_SMALL_K))
        for _ in range(10_000):
            up = offspring_survival(beta, k) > wf
            if not up.any():
                break
            k[up] += 1.0
        for _ in range(10_000):
            down = (k > _SMALL_K) & (offspring_survival(beta, k - 1.0) <= wf)
            if not down.any():
                break
            k[down] -= 1.0
        out[far] = k.astype(np.int64)
    return out


def sample_offspring(law: OffspringLaw | float, rng, size=None, method: str = "exact"):
    """Offspring counts with probabilities ``p_k``.

    ``method='exact'`` inverts the closed-form survival function and has no
    truncation.  ``method='table'`` uses inverse CDF over ``law.pmf`` with the
    tail mass lumped at ``k_max``.
    """
    rng = as_generator(rng)
    beta = law if isinstance(law, float) else law.beta
    n = 1 if size is None else size
    w = 1.0 - rng.random(n)  # in (0, 1]
    if beta == 1.0:
        out = np.where(w <= 0.5, 2, 0).astype(np.int64)
    elif method == "exact":
        out = _exact_offspring(beta, np.atleast_1d(w)).reshape(np.shape(w))
    elif method == "table":
        if isinstance(law, float):
            raise ValueError("table method needs an OffspringLaw")
        cdf = law.cdf_table()
        out = np.searchsorted(cdf, 1.0 - w, side="left").astype(np.int64)
        out = np.minimum(out, law.k_max)
    else:
        raise ValueError(f"unknown method {method!r}")
    return int(out.ravel()[0]) if size is None else out


# ---------------------------------------------------------------------------
# initial field


def sample_poisson_field(intensity: float, box, rng) -> np.ndarray:
    """Poisson points with intensity ``intensity * Lebesgue`` in an axis-aligned box.

    ``box`` is a sequence of ``(low, high)`` pairs, one per coordinate.
    """
    rng = as_generator(rng)
    box = np.asarray(box, dtype=float).reshape(-1, 2)
    side = box[:, 1] - box[:, 0]
    if np.any(side < 0):
        raise ValueError("box must have low <= high")
    vol = float(np.prod(side))
    n = rng.poisson(intensity * vol) if vol > 0 else 0
    return box[:, 0] + side * rng.random((n, len(box)))


def box_volume(box) -> float:
    box = np.asarray(box, dtype=float).reshape(-1, 2)
    return float(np.prod(box[:, 1] - box[:, 0]))


def cube(half_width: float, d: int) -> np.ndarray:
    return np.tile([-half_width, half_width], (d, 1)).astype(float)


# ---------------------------------------------------------------------------
# totally skewed stable reference law


@dataclass(frozen=True)
class SkewedStableSpec:
    """Law with CF ``exp(i loc z - t |z|**index (1 - i sgn(z) tan(pi index / 2)))``.

    ``scale`` is ``t**(1/index)``.
    """

    index: float
    scale: float = 1.0
    location: float = 0.0

    def __post_init__(self):
        if not 1.0 < self.index < 2.0:
            raise ValueError("index must lie in (1, 2)")
        if self.scale <= 0:
            raise ValueError("scale must be positive")

    @classmethod
    def from_time(cls, index: float, t: float, location: float = 0.0) -> "SkewedStableSpec":
        return cls(index, t ** (1.0 / index), location)

    def cf(self, z):
        z = np.asarray(z, dtype=float)
        g = self.index
        t = self.scale ** g
        return np.exp(1j * self.location * z
                      - t * np.abs(z) ** g * (1.0 - 1j * np.sign(z) * math.tan(math.pi * g / 2.0)))


def sample_skewed_stable(spec: SkewedStableSpec, rng, size=None):
    """Chambers-Mallows-Stuck draw with skewness +1.

    With ``g = index`` and ``tau = tan(pi g / 2)`` the standard variate is
    ``A sin(g (U + B)) / cos(U)**(1/g) * (cos(U - g (U + B)) / W)**((1 - g)/g)``
    where ``B = arctan(tau)/g``, ``A = (1 + tau**2)**(1/(2g))``, ``U ~ U(-pi/2, pi/2)``
    and ``W ~ Exp(1)``.  Its CF is ``exp(-|z|**g (1 - i sgn(z) tau))``.
    """
    rng = as_generator(rng)
    g = spec.index
    tau = math.tan(math.pi * g / 2.0)
    b = math.atan(tau) / g
    a = (1.0 + tau * tau) ** (1.0 / (2.0 * g))
    n = 1 if size is None else size
    u = rng.uniform(-math.pi / 2.0, math.pi / 2.0, n)
    w = rng.standard_exponential(n)
    x = a * np.sin(g * (u + b)) / np.cos(u) ** (1.0 / g) * (np.cos(u - g * (u + b)) / w) ** ((1.0 - g) / g)
    x = spec.scale * x + spec.location
    return float(x[0]) if size is None else x
