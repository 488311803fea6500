"""Empirical characteristic function tests for the stable limits.

Every statistic is a deterministic function of the sample; thresholds use
seeded resampling (parametric bootstrap under the reference law, or
permutation for independence) with ``N_RESAMPLE = 400`` draws.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .limit_laws import StableLimitLaw, stable_cdf

N_RESAMPLE = 400
MIN_COUNT = 100
ECF_WINDOW = (0.2, 0.8)


class InsufficientSample(ValueError):
    pass


@dataclass
class Sample:
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).ravel()
        if not np.all(np.isfinite(self.values)):
            raise ValueError("sample contains non-finite values")

    def __len__(self):
        return len(self.values)

    def require(self, n=MIN_COUNT):
        if len(self) < n:
            raise InsufficientSample(f"need at least {n} values, have {len(self)}")
        return self


def _values(sample):
    return sample.values if isinstance(sample, Sample) else np.asarray(sample, dtype=float).ravel()


def ecf(sample, z_grid, *, chunk: int = 2_000_000) -> np.ndarray:
    """``(1/n) sum_j exp(i z X_j)`` for each ``z``."""
    x = _values(sample)
    if len(x) == 0:
        raise ValueError("empty sample")
    z = np.atleast_1d(np.asarray(z_grid, dtype=float))
    out = np.zeros(len(z), dtype=complex)
    step = max(1, chunk // max(len(z), 1))
    for i in range(0, len(x), step):
        out += np.exp(1j * np.outer(z, x[i:i + step])).sum(axis=1)
    return out / len(x)


def default_z_grid(z_max: float, n: int = 32) -> np.ndarray:
    """Symmetric grid on ``[-z_max, z_max]`` without zero (both signs matter for skewed laws)."""
    pos = np.linspace(z_max / n, z_max, n)
    return np.concatenate([-pos[::-1], pos])


# ---------------------------------------------------------------------------
# goodness of fit


@dataclass
class TestResult:
    statistic: float
    threshold: float
    level: float = 0.95
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return bool(self.statistic <= self.threshold)


def _sup_gap(x, cf_values, z):
    return float(np.max(np.abs(ecf(x, z) - cf_values)))


def cf_distance(sample, law, z_grid, *, seed: int = 0, n_resample: int = N_RESAMPLE, level: float = 0.95,
                threshold: bool = True) -> TestResult:
    """``sup_z |ECF(z) - CF(z)|`` with a parametric-bootstrap threshold.

    ``law`` is a :class:`StableLimitLaw` (or any object with ``cf`` and
    ``sample``); the threshold is the ``level`` quantile of the statistic over
    ``n_resample`` samples of the same size drawn from ``law``.
    """
    x = _values(sample)
    if len(x) < MIN_COUNT:
        raise InsufficientSample(f"need at least {MIN_COUNT} values")
    z = np.asarray(z_grid, dtype=float)
    cfv = law.cf(z)
    stat = _sup_gap(x, cfv, z)
    if not threshold:
        return TestResult(stat, math.nan, level)
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(7,)))
    null = np.array([_sup_gap(law.sample(len(x), rng), cfv, z) for _ in range(n_resample)])
    return TestResult(stat, float(np.quantile(null, level)), level,
                      {"n": len(x), "z_max": float(np.max(np.abs(z))), "null_median": float(np.median(null))})


def ks_against_law(sample, law: StableLimitLaw, *, n_nodes: int = 400) -> float:
    """Kolmogorov-Smirnov distance to the law's CDF (interpolated from CF inversion)."""
    x = np.sort(_values(sample))
    # nodes equally spaced in probability keep the interpolation error uniform
    nodes = np.unique(np.quantile(x, np.linspace(0.0, 1.0, n_nodes)))
    F = np.interp(x, nodes, stable_cdf(law, nodes))
    n = len(x)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))


# ---------------------------------------------------------------------------
# index and scale


@dataclass
class IndexEstimate:
    index: float
    ci: tuple
    rate: float
    scale: float
    z_window: tuple
    n_points: int
    fixed_index_scale: float | None = None


def _ecf_regression(x, z):
    m = np.abs(ecf(x, z))
    keep = (m >= ECF_WINDOW[0]) & (m <= ECF_WINDOW[1])
    if keep.sum() < 3:
        raise ValueError("ECF window degenerate: fewer than 3 grid points with |ECF| in [0.2, 0.8]")
    lz = np.log(z[keep])
    ly = np.log(-np.log(m[keep]))
    slope, intercept = np.polyfit(lz, ly, 1)
    return slope, intercept, z[keep], m[keep]


def _window_grid(x, n=48):
    # bracket the window from a robust spread, then zoom in
    iqr = np.subtract(*np.quantile(x, [0.75, 0.25]))
    iqr = iqr if iqr > 0 else max(np.std(x), 1e-12)
    z = np.geomspace(1e-3 / iqr, 1e3 / iqr, 200)
    m = np.abs(ecf(x, z))
    inside = np.nonzero((m >= ECF_WINDOW[0]) & (m <= ECF_WINDOW[1]))[0]
    if len(inside) < 2:
        raise ValueError("ECF window degenerate")
    return np.geomspace(z[inside[0]], z[inside[-1]], n)


def stability_index_estimate(sample, *, z_grid=None, seed: int = 0, n_boot: int = 50, min_count: int = 10_000,
                             fixed_index: float | None = None) -> IndexEstimate:
    """Slope of ``log(-log |ECF(z)|)`` on ``log z`` over ``|ECF| in [0.2, 0.8]``.

    The intercept gives the rate ``-log|CF(z)| / |z|**index``; the scale is
    ``rate**(1/index)``.  The CI is a seeded nonparametric bootstrap (2.5% and
    97.5% quantiles).  With ``fixed_index`` the scale is also refitted with the
    slope held at that index.
    """
    x = _values(sample)
    if len(x) < min_count:
        raise InsufficientSample(f"index estimation needs n >= {min_count}")
    z = _window_grid(x) if z_grid is None else np.asarray(z_grid, dtype=float)
    slope, intercept, zw, mw = _ecf_regression(x, z)
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(11,)))
    boots = []
    for _ in range(n_boot):
        xb = x[rng.integers(0, len(x), len(x))]
        try:
            boots.append(_ecf_regression(xb, zw)[0])
        except ValueError:
            continue
    ci = tuple(np.quantile(boots, [0.025, 0.975])) if boots else (math.nan, math.nan)
    rate = math.exp(intercept)
    fixed = None
    if fixed_index is not None:
        fixed = float(np.exp(np.mean(np.log(-np.log(mw)) - fixed_index * np.log(zw)))) ** (1 / fixed_index)
    return IndexEstimate(float(slope), (float(ci[0]), float(ci[1])), rate, float(rate ** (1 / slope)),
                         (float(zw[0]), float(zw[-1])), int(len(zw)), fixed)


# ---------------------------------------------------------------------------
# independence of increments


def _joint_gap(a, b, z1, z2):
    E1 = np.exp(1j * np.outer(z1, a))  # (m1, n)
    E2 = np.exp(1j * np.outer(z2, b))  # (m2, n)
    return _gap_from_exps(E1, E2, np.outer(E1.mean(axis=1), E2.mean(axis=1)))


def _gap_from_exps(E1, E2, prod):
    return float(np.max(np.abs(E1 @ E2.T / E1.shape[1] - prod)))


def increment_independence_stat(pairs, z_grid, z_grid2=None, *, seed: int = 0, n_resample: int = N_RESAMPLE,
                                level: float = 0.95) -> TestResult:
    """``sup |ECF_joint(z1, z2) - ECF_1(z1) ECF_2(z2)|`` with a permutation threshold.

    ``pairs`` has shape (n, 2).  Permuting the second column keeps both
    marginals and destroys any dependence, so the permutation quantile is a
    calibrated null threshold.
    """
    pairs = np.asarray(pairs, dtype=float)
    if pairs.ndim != 2 or pairs.shape[1] != 2:
        raise ValueError("pairs must have shape (n, 2)")
    if len(pairs) < MIN_COUNT:
        raise InsufficientSample(f"need at least {MIN_COUNT} pairs")
    z1 = np.asarray(z_grid, dtype=float)
    z2 = z1 if z_grid2 is None else np.asarray(z_grid2, dtype=float)
    a, b = pairs[:, 0], pairs[:, 1]
    E1 = np.exp(1j * np.outer(z1, a))
    E2 = np.exp(1j * np.outer(z2, b))
    # permuting b permutes the columns of E2 and leaves both marginal ECFs alone
    prod = np.outer(E1.mean(axis=1), E2.mean(axis=1))
    stat = _gap_from_exps(E1, E2, prod)
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(13,)))
    null = np.array([_gap_from_exps(E1, E2[:, rng.permutation(len(b))], prod) for _ in range(n_resample)])
    return TestResult(stat, float(np.quantile(null, level)), level, {"n": len(a), "null_median": float(np.median(null))})


# ---------------------------------------------------------------------------
# tail envelope


@dataclass
class TailBoundReport:
    rows: list
    C: float
    slopes: dict
    min_slope: float
    flagged: list

    @property
    def envelope_holds(self) -> bool:
        return all(r["p_hat"] <= self.C * r["dt"] / r["delta"] + 1e-15 for r in self.rows)


def tail_bound_check(increments: dict, delta_grid, *, min_exceed: int = 10) -> TailBoundReport:
    """Exceedance probabilities ``P(|increment| > delta)`` against ``C |t2 - t1| / delta``.

    ``increments`` maps ``(T, t1, t2)`` to arrays of increment samples.  ``C``
    is the smallest constant making the envelope hold on every cell; slopes of
    ``log p`` in ``log |t2 - t1|`` are fitted per ``(T, delta)`` over cells with
    at least ``min_exceed`` exceedances (others are flagged).
    """
    rows = []
    for (T, t1, t2), vals in sorted(increments.items()):
        vals = np.asarray(vals, dtype=float)
        dt = abs(t2 - t1)
        for delta in delta_grid:
            k = int(np.sum(np.abs(vals) > delta))
            rows.append({"T": T, "t1": t1, "t2": t2, "dt": dt, "delta": float(delta), "exceed": k,
                         "n": len(vals), "p_hat": k / len(vals) if len(vals) else math.nan})
    ratios = [r["p_hat"] * r["delta"] / r["dt"] for r in rows if r["dt"] > 0]
    C = max(ratios) if ratios else 0.0
    slopes = {}
    flagged = []
    for T in sorted({r["T"] for r in rows}):
        for delta in delta_grid:
            cells = [r for r in rows if r["T"] == T and r["delta"] == delta and r["dt"] > 0]
            good = [r for r in cells if r["exceed"] >= min_exceed]
            flagged += [r for r in cells if r["exceed"] < min_exceed]
            if len({r["dt"] for r in good}) >= 2:
                slopes[(T, float(delta))] = float(np.polyfit(np.log([r["dt"] for r in good]),
                                                             np.log([r["p_hat"] for r in good]), 1)[0])
    return TailBoundReport(rows, C, slopes, min(slopes.values()) if slopes else math.nan, flagged)


# ---------------------------------------------------------------------------
# calibration on synthetic null data


def calibrate_cf_distance(law: StableLimitLaw, n: int, z_grid, *, reps: int = 200, seed: int = 0,
                          n_resample: int = N_RESAMPLE) -> dict:
    """Rejection rate of :func:`cf_distance` on samples drawn from ``law`` itself."""
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(17,)))
    z = np.asarray(z_grid, dtype=float)
    cfv = law.cf(z)
    null = np.array([_sup_gap(law.sample(n, rng), cfv, z) for _ in range(n_resample)])
    thr = float(np.quantile(null, 0.95))
    stats = np.array([_sup_gap(law.sample(n, rng), cfv, z) for _ in range(reps)])
    return {"rejection_rate": float(np.mean(stats > thr)), "threshold": thr, "reps": reps, "n": n,
            "four_over_sqrt_n": 4 / math.sqrt(n), "median": float(np.median(stats))}


def calibrate_independence(law: StableLimitLaw, n: int, z_grid, *, reps: int = 200, seed: int = 0,
                           n_resample: int = 100) -> dict:
    """Rejection rate of :func:`increment_independence_stat` on independent pairs."""
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(19,)))
    rej = 0
    for r in range(reps):
        pairs = np.column_stack([law.sample(n, rng), law.sample(n, rng)])
        rej += not increment_independence_stat(pairs, z_grid, seed=seed + r + 1, n_resample=n_resample).passed
    return {"rejection_rate": rej / reps, "reps": reps, "n": n}
