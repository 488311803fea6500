"""Model parameters, dimension regimes, norming and the offspring law.

The offspring law has generating function ``s + (1 - s)**(1 + beta) / (1 + beta)``.
Its coefficients are ``p_0 = 1/(1+beta)``, ``p_1 = 0`` and, for k >= 2,
``p_k = (-1)**k * binom(1+beta, k) / (1+beta)``.  Partial sums of alternating
binomial coefficients telescope, which gives the closed-form survival function

    P(K > k) = beta * Gamma(k - beta) / ((1 + beta) * Gamma(1 - beta) * Gamma(k + 1)),

valid for k >= 1.  Both the table and the exact sampler are built on it.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gamma, poch

CRITICAL_RTOL = 1e-12


class Regime(enum.Enum):
    BELOW_INTERMEDIATE = "below-intermediate"
    INTERMEDIATE = "intermediate"
    CRITICAL = "critical"
    LARGE = "large"


@dataclass(frozen=True)
class ModelParams:
    """Parameter bundle of the branching system.

    ``V = 0`` is accepted as a degenerate no-branching oracle; everything that
    needs a branching rate (constants, limit laws) rejects it.
    """

    d: int
    alpha: float
    beta: float
    V: float = 1.0
    intensity: float = 1.0

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise ValueError(f"d must be a positive integer, got {self.d}")
        object.__setattr__(self, "d", int(self.d))
        if not 0.0 < self.alpha <= 2.0:
            raise ValueError(f"alpha must lie in (0, 2], got {self.alpha}")
        if not 0.0 < self.beta < 1.0:
            raise ValueError(f"beta must lie in (0, 1), got {self.beta}")
        if self.V < 0.0:
            raise ValueError(f"V must be nonnegative, got {self.V}")
        if self.intensity < 0.0:
            raise ValueError(f"intensity must be nonnegative, got {self.intensity}")

    @property
    def critical_dimension(self) -> float:
        return critical_dimension(self.alpha, self.beta)

    @property
    def regime(self) -> Regime:
        return classify_regime(self).regime

    def require_transient(self):
        """Raise unless d > alpha (needed whenever the potential operator is used)."""
        if not self.d > self.alpha:
            raise ValueError(f"potential operator needs d > alpha (d={self.d}, alpha={self.alpha})")


@dataclass(frozen=True)
class RegimeInfo:
    regime: Regime
    critical_dimension: float
    lower_dimension: float


def critical_dimension(alpha: float, beta: float) -> float:
    return alpha * (1.0 + beta) / beta


def classify_regime(params: ModelParams) -> RegimeInfo:
    """Place ``d`` relative to ``alpha/beta`` and ``alpha(1+beta)/beta``."""
    dc = critical_dimension(params.alpha, params.beta)
    lower = params.alpha / params.beta
    d = float(params.d)
    if abs(d - dc) <= CRITICAL_RTOL * dc:
        regime = Regime.CRITICAL
    elif d > dc:
        regime = Regime.LARGE
    elif d > lower and abs(d - lower) > CRITICAL_RTOL * lower:
        regime = Regime.INTERMEDIATE
    else:
        regime = Regime.BELOW_INTERMEDIATE
    return RegimeInfo(regime, dc, lower)


def intermediate_exponent(params: ModelParams, corrected: bool = False) -> float:
    """Exponent of T in the intermediate-dimension norming.

    ``corrected=False`` gives ``(2 - beta - (d/alpha) beta) / (1 + beta)`` exactly
    as printed in the source; ``corrected=True`` gives the variant with ``+beta``
    that is continuous with the critical-dimension norming.  Neither is used by
    any limit law in this package.
    """
    b, r = params.beta, params.d / params.alpha
    sign = 1.0 if corrected else -1.0
    return (2.0 + sign * b - r * b) / (1.0 + b)


def norming(params: ModelParams, T: float, *, corrected_intermediate: bool = False) -> float:
    """Norming F_T for the regime of ``params``.

    Large: ``T**(1/(1+beta))``.  Critical: ``(T ln T)**(1/(1+beta))`` with the
    natural logarithm.  Intermediate: ``T**e`` with ``e`` from
    :func:`intermediate_exponent`.
    """
    if T <= 0:
        raise ValueError("T must be positive")
    info = classify_regime(params)
    p = 1.0 / (1.0 + params.beta)
    if info.regime is Regime.LARGE:
        return T ** p
    if info.regime is Regime.CRITICAL:
        if T <= 1.0:
            raise ValueError("critical norming needs T > 1 (log T must be positive)")
        return (T * math.log(T)) ** p
    if info.regime is Regime.INTERMEDIATE:
        return T ** intermediate_exponent(params, corrected_intermediate)
    raise ValueError(f"no norming defined for regime {info.regime.value}")


# ---------------------------------------------------------------------------
# offspring law


def _check_beta(beta: float, allow_one: bool = False):
    hi_ok = beta <= 1.0 if allow_one else beta < 1.0
    if not (0.0 < beta and hi_ok):
        raise ValueError(f"beta must lie in (0, 1), got {beta}")


def offspring_survival(beta: float, k) -> np.ndarray:
    """P(K > k) for integer k >= 0 (vectorised, exact closed form)."""
    _check_beta(beta)
    k = np.asarray(k, dtype=float)
    out = np.empty_like(k)
    zero = k < 2  # p_1 = 0, so P(K > 1) = P(K > 0) exactly
    out[zero] = beta / (1.0 + beta)
    # Gamma(k-beta)/Gamma(k+1) = 1/poch(k-beta, 1+beta); poch stays accurate for huge k
    out[~zero] = beta / ((1.0 + beta) * gamma(1.0 - beta) * poch(k[~zero] - beta, 1.0 + beta))
    return out


def offspring_tail_mean(beta: float, k: int) -> float:
    """E[K; K > k] in closed form.

    Uses ``E[K; K>k] = k P(K>k) + sum_{j>=k} P(K>j)`` and the Sibuya-type
    identity ``sum_{j>=k} P(K>j) = Gamma(k-beta) / ((1+beta) Gamma(1-beta) Gamma(k))``.
    """
    _check_beta(beta)
    if k < 1:
        return 1.0
    tail_sum = 1.0 / ((1.0 + beta) * gamma(1.0 - beta) * poch(k - beta, beta))
    return k * float(offspring_survival(beta, k)) + tail_sum


@dataclass(frozen=True)
class OffspringLaw:
    """Offspring pmf table ``p_0..p_kmax`` plus the exact mass beyond ``k_max``."""

    beta: float
    pmf: np.ndarray = field(repr=False)
    tail_mass: float
    tail_mean: float

    @property
    def k_max(self) -> int:
        return len(self.pmf) - 1

    @property
    def truncated_mean(self) -> float:
        k = np.arange(len(self.pmf))
        return float(math.fsum(k * self.pmf))

    @property
    def mean(self) -> float:
        return self.truncated_mean + self.tail_mean

    @property
    def truncated_mean_deviation(self) -> float:
        return 1.0 - self.truncated_mean

    def cdf_table(self) -> np.ndarray:
        """Cumulative table with the tail mass lumped at ``k_max``."""
        c = np.cumsum(self.pmf)
        c[-1] = 1.0
        return c


def offspring_pmf(beta: float, k_max: int = 10_000, *, tail_tol: float | None = None,
                  max_table: int = 50_000_000) -> OffspringLaw:
    """Coefficients of the offspring generating function up to ``k_max``.

    Uses ``p_{k+1} = p_k (k - 1 - beta) / (k + 1)`` from ``p_2 = beta/2``.  With
    ``tail_tol`` set, ``k_max`` is raised until the exact tail mass drops below
    it (bounded by ``max_table``).  ``beta = 1`` is accepted as the binary
    branching oracle.
    """
    _check_beta(beta, allow_one=True)
    if k_max < 2:
        raise ValueError("k_max must be at least 2")
    if beta == 1.0:
        pmf = np.zeros(k_max + 1)
        pmf[0] = pmf[2] = 0.5
        return OffspringLaw(beta, pmf, 0.0, 0.0)
    if tail_tol is not None:
        k_max = max(k_max, _kmax_for_tail(beta, tail_tol))
        if k_max > max_table:
            raise ValueError(f"tail {tail_tol} needs k_max={k_max} > max_table={max_table}")
    k = np.arange(2, k_max)
    ratios = (k - 1.0 - beta) / (k + 1.0)
    pmf = np.empty(k_max + 1)
    pmf[0] = 1.0 / (1.0 + beta)
    pmf[1] = 0.0
    pmf[2] = beta / 2.0
    # cumprod of ratios < 1 cannot overflow; underflow is impossible at these sizes
    pmf[3:] = pmf[2] * np.cumprod(ratios)
    tail = float(offspring_survival(beta, k_max))
    return OffspringLaw(beta, pmf, tail, offspring_tail_mean(beta, k_max))


def _kmax_for_tail(beta: float, tol: float) -> int:
    c = beta / ((1.0 + beta) * math.gamma(1.0 - beta))
    k = int((c / tol) ** (1.0 / (1.0 + beta))) + 2
    while float(offspring_survival(beta, k)) >= tol:
        k = int(k * 1.1) + 1
    while k > 2 and float(offspring_survival(beta, k - 1)) < tol:
        k -= 1
    return k
