"""Exact Laplace-functional machinery and its Monte Carlo cross-checks.

For a space-time test function with time profile ``psi`` let
``Psi_T(x, s) = phi(x) chi(s/T) / F_T`` with ``chi(t) = int_t^1 psi``.  The
single-ancestor Laplace functional

    v(x, t) = 1 - E exp{-int_0^t <N^x_r, Psi_T(., T - t + r)> dr}

solves ``dv/dt = L v + Psi_T(., T - t)(1 - v) - V/(1+beta) v**(1+beta)``,
``v(., 0) = 0``, where ``L`` is the generator of the stable motion, and the
population Laplace functional is

    E exp{-<X~_T, Phi>} = exp{intensity (I1 + V/(1+beta) (I2 - I3))}

with ``I1 = int int Psi_T(x, T-r) v(x, r)``, ``I2 = int int u**(1+beta)``,
``I3 = int int (u**(1+beta) - v**(1+beta))`` and ``u`` the solution of the
linear equation (no branching term, forcing ``Psi_T`` alone), which dominates
``v``.  The solver works in d = 1 on a periodic grid: the semigroup is applied
exactly in Fourier space and the pointwise reaction by RK4, combined by Strang
splitting with a step-doubling error estimate.

A second solver treats the functional ``sum_k c_k <N_{t_k}, phi>`` that the
simulation actually computes (grid trapezoids): jumps
``v <- 1 - exp(-c_k phi)(1 - v)`` at the grid times and the branching
equation (with its exact reaction flow) in between.  Comparing it with the
Monte Carlo estimate involves no discretization error on either side.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import occupation
from .branching_sim import PairingObserver, run_population, run_single_ancestor
from .model import ModelParams, Regime, classify_regime
from .samplers import RandomStream
from .stable_numerics.constants import constant_K2
from .stable_numerics.scaling import p1_table
from .stable_numerics.density import sphere_area
from .stable_numerics.radial import concentric, gauss_panels, potential_power_integral, radial_convolve, radial_nodes
from .testfunctions import TestFunction, TimeProfile

INVARIANT_TOL = 1e-8


class InvariantViolation(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# space-time test functions


@dataclass(frozen=True)
class PsiProfile:
    """``Psi(x, t) = sum_j phi_j(x) chi_j(t)`` with ``chi_j(t) = int_t^1 psi_j``.

    A single ``(phi, psi)`` pair is the smooth product case; point-mass time
    profiles give the step form ``sum_j phi_j(x) 1[t < t_j]``.
    """

    terms: tuple

    @classmethod
    def product(cls, phi: TestFunction, psi: TimeProfile = TimeProfile()) -> "PsiProfile":
        return cls(((phi, psi),))

    @classmethod
    def steps(cls, phis, times) -> "PsiProfile":
        return cls(tuple((p, TimeProfile("point", 1.0, t1=float(t))) for p, t in zip(phis, times)))

    @property
    def d(self) -> int:
        return self.terms[0][0].d

    @property
    def is_zero(self) -> bool:
        return all(p.is_zero or psi.value == 0 for p, psi in self.terms)

    def __call__(self, x, t) -> np.ndarray:
        """``Psi(x, t)``; zero for ``t >= 1``."""
        t = np.asarray(t, dtype=float)
        return sum(p(x) * psi.tail_integral(np.minimum(t, 1.0)) for p, psi in self.terms)

    def scaled(self, x, s, T: float, norming: float) -> np.ndarray:
        """``Psi_T(x, s) = Psi(x, s / T) / F_T``."""
        return self(x, s / T) / norming

    def breakpoints(self) -> list:
        """Times in (0, 1) where some ``chi_j`` is not smooth."""
        out = set()
        for _, psi in self.terms:
            if psi.kind in ("indicator", "point") and 0.0 < psi.t1 < 1.0:
                out.add(psi.t1)
            if psi.kind == "bump":
                out.update(v for v in (psi.a, psi.b) if 0.0 < v < 1.0)
        return sorted(out)


# ---------------------------------------------------------------------------
# grids


@dataclass(frozen=True)
class GridConfig:
    """Periodic spatial grid ``[-half_width, half_width)`` and time-step controls."""

    half_width: float = 4096.0
    dx: float = 0.25
    dt: float = 0.02
    substeps: int = 4
    rk_substeps: int = 1

    @property
    def n(self) -> int:
        n = int(round(2 * self.half_width / self.dx))
        return n + (n % 2)

    def x(self) -> np.ndarray:
        return -self.half_width + self.dx * np.arange(self.n)

    def halved(self) -> "GridConfig":
        return GridConfig(self.half_width, self.dx, self.dt / 2, self.substeps * 2, self.rk_substeps)


class _Semigroup:
    def __init__(self, alpha: float, grid: GridConfig):
        self.k = 2 * math.pi * np.fft.rfftfreq(grid.n, grid.dx)
        self.ka = self.k ** alpha
        self._cache = {}

    def __call__(self, f, tau):
        m = self._cache.get(tau)
        if m is None:
            m = self._cache[tau] = np.exp(-tau * self.ka)
        return np.fft.irfft(np.fft.rfft(f) * m, n=len(f))


@dataclass
class VTField:
    """Grid solution of the Laplace-functional equation.

    ``v[i]`` and ``u[i]`` are the nonlinear solution and its linear dominator
    at backward time ``t[i]`` (the horizon remaining for a particle started at
    real time ``T - t[i]``).
    """

    x: np.ndarray
    t: np.ndarray
    v: np.ndarray
    u: np.ndarray
    integrals: dict
    meta: dict = field(default_factory=dict)
    refined: "VTField | None" = None

    @property
    def dx(self) -> float:
        return float(self.x[1] - self.x[0])

    def at(self, x, t) -> float:
        """Linear interpolation of ``v`` at ``(x, t)`` (``t`` on the stored grid)."""
        i = int(np.argmin(np.abs(self.t - t)))
        if abs(self.t[i] - t) > 1e-9 * max(1.0, abs(t)):
            raise ValueError("t is not a stored time")
        return float(np.interp(x, self.x, self.v[i]))


def _check_invariants(v, u, where):
    lo = float(v.min())
    hi = float(v.max())
    dom = float((v - u).max())
    if lo < -INVARIANT_TOL or hi > 1 + INVARIANT_TOL or dom > INVARIANT_TOL:
        raise InvariantViolation(f"{where}: min v={lo:.3e}, max v={hi:.3e}, max(v-u)={dom:.3e}")


def _solve_continuous(params, psi: PsiProfile, T, norming, grid: GridConfig, store_every: int):
    x = grid.x()
    h = grid.dt
    n_steps = int(round(T / h))
    if abs(n_steps * h - T) > 1e-9 * T:
        raise ValueError("T must be a multiple of the time step")
    for b in psi.breakpoints():
        r = T * (1 - b) / h
        if abs(r - round(r)) > 1e-6:
            raise ValueError(f"time profile breakpoint {b} is not on the time grid")
    kappa = params.V / (1 + params.beta)
    b1 = 1 + params.beta
    S = _Semigroup(params.alpha, grid)
    spatial = [p(x) / norming for p, _ in psi.terms]

    def forcing(r):
        # Psi_T(x, T - r) at backward time r; profiles are right-continuous in real time
        s = np.atleast_1d((T - r) / T)
        return sum(f * float(prof.tail_integral(np.minimum(s, 1.0))[0]) for f, (_, prof) in zip(spatial, psi.terms))

    def forcing_mid(r0, r1):
        # one-sided values so that steps never straddle a jump
        eps = 1e-12 * (r1 - r0)
        return forcing(r0 + eps), forcing(0.5 * (r0 + r1)), forcing(r1 - eps)

    def reaction(v, u, r0, r1):
        f0, fm, f1 = forcing_mid(r0, r1)
        dt = r1 - r0
        rhs = lambda vv, f: f * (1 - vv) - kappa * np.maximum(vv, 0.0) ** b1
        k1 = rhs(v, f0)
        k2 = rhs(v + 0.5 * dt * k1, fm)
        k3 = rhs(v + 0.5 * dt * k2, fm)
        k4 = rhs(v + dt * k3, f1)
        v = v + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        u = u + dt / 6 * (f0 + 4 * fm + f1)
        return v, u

    v = np.zeros_like(x)
    u = np.zeros_like(x)
    I1 = I2 = Iv = 0.0
    ts, vs, us = [0.0], [v.copy()], [u.copy()]

    def snap(r, v, u):
        f = forcing(r + 1e-12 * h) if r < T else forcing(T)
        return (float(np.sum(f * v)) * grid.dx, float(np.sum(u ** b1)) * grid.dx, float(np.sum(v ** b1)) * grid.dx)

    prev = snap(0.0, v, u)
    # I1 needs the forcing at r from the left of each step: use the step-interior values
    for j in range(n_steps):
        r0, r1 = j * h, (j + 1) * h
        rm = 0.5 * (r0 + r1)
        v0, u0 = v, u
        v, u = reaction(v, u, r0, rm)
        v, u = S(v, h), S(u, h)
        v, u = reaction(v, u, rm, r1)
        f_lo = forcing(r0 + 1e-12 * h)
        f_hi = forcing(r1 - 1e-12 * h)
        I1 += 0.5 * h * (float(np.sum(f_lo * v0)) + float(np.sum(f_hi * v))) * grid.dx
        cur = (0.0, float(np.sum(u ** b1)) * grid.dx, float(np.sum(v ** b1)) * grid.dx)
        I2 += 0.5 * h * (prev[1] + cur[1])
        Iv += 0.5 * h * (prev[2] + cur[2])
        prev = cur
        if (j + 1) % store_every == 0 or j + 1 == n_steps:
            ts.append(r1)
            vs.append(v.copy())
            us.append(u.copy())
    V_, U_ = np.array(vs), np.array(us)
    _check_invariants(V_, U_, "continuous solver")
    total_forcing = sum(p.integral() * prof_integral(prof) for p, prof in psi.terms) * T / norming
    integrals = {"I1": I1, "I2": I2, "I3": I2 - Iv, "int_v_pow": Iv, "forcing_total": total_forcing,
                 "mass_v_T": float(np.sum(v)) * grid.dx, "mass_u_T": float(np.sum(u)) * grid.dx}
    return VTField(x, np.array(ts), V_, U_, integrals, {"scheme": "strang-rk4", "dt": h, "dx": grid.dx,
                                                         "half_width": grid.half_width, "T": T})


def prof_integral(prof: TimeProfile) -> float:
    """``int_0^1 chi(t) dt`` for a time profile."""
    if prof.kind == "constant":
        return prof.value / 2
    if prof.kind == "indicator":
        return prof.value * prof.t1 ** 2 / 2
    if prof.kind == "point":
        return prof.value * prof.t1
    from scipy import integrate
    return integrate.quad(lambda t: float(prof.tail_integral(t)), 0, 1, points=[prof.a, prof.b])[0]


def solve_vT(params: ModelParams, psi: PsiProfile, T: float, norming: float, grid: GridConfig = GridConfig(), *,
             store_every: int = 1, refine: bool = True) -> VTField:
    """Solve for ``v`` and ``u`` over ``[0, T]`` (d = 1).

    With ``refine`` the problem is solved again at half the time step; the
    returned field is the refined one with the coarse solution attached, and
    ``meta['richardson']`` holds the step-doubling estimate of each integral.
    """
    if params.d != 1:
        raise ValueError("the grid solver is one-dimensional")
    if psi.d != 1:
        raise ValueError("test functions must be one-dimensional")
    coarse = _solve_continuous(params, psi, T, norming, grid, store_every)
    if not refine:
        return coarse
    fine = _solve_continuous(params, psi, T, norming, grid.halved(), 2 * store_every)
    fine.refined = coarse
    fine.meta["richardson"] = {k: abs(fine.integrals[k] - coarse.integrals[k]) / 3 for k in fine.integrals}
    fine.meta["max_abs_v_change"] = float(np.max(np.abs(fine.v - coarse.v)))
    return fine


# ---------------------------------------------------------------------------
# functional of the simulated grid values


def _reaction_flow(z, kappa, beta, tau):
    # exact solution of z' = -kappa z**(1+beta) over time tau
    z = np.maximum(z, 0.0)
    return z / (1.0 + kappa * beta * tau * z ** beta) ** (1.0 / beta)


def _solve_grid(params, phi: TestFunction, weights, dt, grid: GridConfig):
    x = grid.x()
    K = len(weights) - 1
    kappa = params.V / (1 + params.beta)
    S = _Semigroup(params.alpha, grid)
    fx = phi(x)
    tau = dt / grid.substeps
    v = np.zeros_like(x)
    u = np.zeros_like(x)
    vs = np.empty((K + 1, len(x)))
    us = np.empty((K + 1, len(x)))
    for j in range(K, -1, -1):
        if j < K:
            for _ in range(grid.substeps):
                v = _reaction_flow(v, kappa, params.beta, tau / 2)
                v = S(v, tau)
                v = _reaction_flow(v, kappa, params.beta, tau / 2)
            u = S(u, dt)
        v = 1.0 - np.exp(-weights[j] * fx) * (1.0 - v)
        u = u + weights[j] * fx
        vs[j] = v
        us[j] = u
    _check_invariants(vs, us, "grid-matched solver")
    t = dt * (K - np.arange(K + 1))  # remaining horizon at each grid time
    return VTField(x, t, vs, us, {}, {"scheme": "grid-matched", "dt": dt, "substeps": grid.substeps,
                                     "dx": grid.dx, "half_width": grid.half_width})


def solve_vT_grid(params: ModelParams, phi: TestFunction, weights, dt: float, grid: GridConfig = GridConfig(), *,
                  refine: bool = True) -> VTField:
    """Laplace functional of ``sum_k c_k <N_{t_k}, phi>`` for one ancestor (d = 1).

    ``v[j]`` is the value for a particle started at grid time ``t_j``.
    """
    if params.d != 1:
        raise ValueError("the grid solver is one-dimensional")
    coarse = _solve_grid(params, phi, np.asarray(weights, float), dt, grid)
    if not refine:
        return coarse
    fine = _solve_grid(params, phi, np.asarray(weights, float), dt, GridConfig(grid.half_width, grid.dx, grid.dt,
                                                                              2 * grid.substeps))
    fine.refined = coarse
    fine.meta["max_abs_v_change"] = float(np.max(np.abs(fine.v - coarse.v)))
    return fine


def _box_weights(x, dx, box_half_width):
    if box_half_width is None:
        return np.full(len(x), dx)
    w = np.where(np.abs(x) < box_half_width, dx, 0.0)
    w[np.isclose(np.abs(x), box_half_width)] = dx / 2
    return w


# ---------------------------------------------------------------------------
# right-hand sides


@dataclass
class LaplaceRHS:
    value: float
    log_value: float
    uncertainty: float
    I1: float = math.nan
    I2: float = math.nan
    I3: float = math.nan
    log_direct: float = math.nan
    details: dict = field(default_factory=dict)


def laplace_rhs(field: VTField, params: ModelParams) -> LaplaceRHS:
    """``exp{intensity (I1 + V/(1+beta) (I2 - I3))}`` from a continuous-time solution.

    The uncertainty combines the step-doubling estimate with the gap between
    this decomposition and the directly integrated form
    ``int int Psi_T - int v(., T)`` (equal in exact arithmetic).
    """
    I = field.integrals
    lam = params.intensity
    kappa = params.V / (1 + params.beta)
    log_val = lam * (I["I1"] + kappa * (I["I2"] - I["I3"]))
    log_direct = lam * (I["forcing_total"] - I["mass_v_T"])
    rich = field.meta.get("richardson", {})
    err_log = lam * (rich.get("I1", 0.0) + kappa * (rich.get("I2", 0.0) + rich.get("I3", 0.0)))
    err_log += abs(log_val - log_direct)
    val = math.exp(log_val)
    return LaplaceRHS(val, log_val, val * math.expm1(err_log) if err_log < 1 else math.inf,
                      I["I1"], I["I2"], I["I3"], log_direct,
                      {"richardson_log": err_log, "decomposition_gap": log_val - log_direct})


def laplace_rhs_grid(field: VTField, params: ModelParams, box_half_width: float | None = None) -> LaplaceRHS:
    """``exp{intensity int_B (u - v)}`` for the simulated functional (box-started system).

    ``u`` integrated over the box is the exact mean of the functional, i.e.
    the truncated centering.
    """
    lam = params.intensity
    w = _box_weights(field.x, field.dx, box_half_width)

    def logv(f):
        return lam * float(np.dot(w, f.u[0] - f.v[0]))

    lv = logv(field)
    err = abs(lv - logv(field.refined)) / 3 if field.refined is not None else 0.0
    val = math.exp(lv)
    return LaplaceRHS(val, lv, val * math.expm1(err), log_direct=lv,
                      details={"richardson_log": err, "mean": lam * float(np.dot(w, field.u[0])),
                               "tail_u": lam * float(np.dot(np.full(len(w), field.dx) - w, field.u[0]))})


def truncation_half_width(field: VTField, params: ModelParams, budget: float) -> float:
    """Smallest grid half-width ``L`` with ``intensity int_{|x| > L} u(., T) <= budget``."""
    u = field.u[0] if field.meta.get("scheme") == "grid-matched" else field.u[-1]
    x = field.x
    order = np.argsort(-np.abs(x))
    tail = params.intensity * np.cumsum(u[order]) * field.dx
    ok = np.nonzero(tail > budget)[0]
    if len(ok) == 0:
        return 0.0
    return float(np.abs(x[order][ok[0]]))


# ---------------------------------------------------------------------------
# Monte Carlo sides


@dataclass
class MCEstimate:
    estimate: float
    stderr: float
    n: int
    samples: np.ndarray | None = None
    details: dict = field(default_factory=dict)


def _mean_stderr(vals):
    vals = np.asarray(vals, dtype=float)
    n = len(vals)
    if n == 0:
        return math.nan, math.nan
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(n)) if n > 1 else math.inf


def mc_laplace_lhs(params: ModelParams, phi: TestFunction, psi: TimeProfile, T: float, norming: float, *,
                   replicas: int, seed: int, box_half_width: float, dt: float, block_size: int = 200,
                   keep_samples: bool = False) -> MCEstimate:
    """Monte Carlo ``E exp{-<X~_T, phi psi>}`` for the box-started system, truncated centering.

    The pairing is computed from the occupation module (grid trapezoids);
    block ``b`` of replicas uses the stream ``RandomStream(seed, b)``.
    """
    if phi.is_zero or (psi.kind != "point" and psi.value == 0):
        return MCEstimate(1.0, 0.0, replicas, np.ones(replicas) if keep_samples else None)
    box = np.tile([-box_half_width, box_half_width], (params.d, 1))
    K = int(round(T / dt))
    times = dt * np.arange(K + 1)
    mean = occupation.expected_pairing(params, phi, times, box)
    c = occupation.pairing_weights(psi, K + 1, dt, norming)
    vals = []
    n_failed = 0
    for b, start in enumerate(range(0, replicas, block_size)):
        n = min(block_size, replicas - start)
        res = run_population(params, box, T, dt, [PairingObserver(phi)], RandomStream(seed, b).generator(), n_rep=n)
        Y = res[0][:, 0, :]
        pairing = (Y - mean) @ c
        n_failed += int(res.failed.sum())
        vals.append(np.exp(-pairing[~res.failed]))
    vals = np.concatenate(vals)
    est, se = _mean_stderr(vals)
    return MCEstimate(est, se, len(vals), vals if keep_samples else None,
                      {"failed": n_failed, "box_half_width": box_half_width, "dt": dt,
                       "mean_functional": float(mean @ c)})


def vT_mc_oracle(params: ModelParams, x: float, phi: TestFunction, weights, dt: float, start_index: int, *,
                 replicas: int, seed: int, block_size: int = 5000) -> MCEstimate:
    """Monte Carlo ``1 - E exp{-sum_{k >= j} c_k <N^x_{t_k - t_j}, phi>}`` from one ancestor at ``x``.

    This is ``v`` of :func:`solve_vT_grid` at grid index ``j = start_index``.
    """
    c = np.asarray(weights, dtype=float)[start_index:]
    K = len(c) - 1
    if phi.is_zero or not np.any(c):
        return MCEstimate(0.0, 0.0, replicas)
    vals = []
    for b, start in enumerate(range(0, replicas, block_size)):
        n = min(block_size, replicas - start)
        if K == 0:
            Y = np.full((n, 1), float(phi(np.atleast_1d(x))[0]))
        else:
            res = run_single_ancestor(params, x, K * dt, dt, [PairingObserver(phi)], RandomStream(seed, b).generator(),
                                      n_rep=n)
            Y = res[0][:, 0, :]
        vals.append(-np.expm1(-(Y @ c)))
    est, se = _mean_stderr(np.concatenate(vals))
    return MCEstimate(est, se, replicas)


# ---------------------------------------------------------------------------
# deterministic limits


@dataclass
class LimitTable:
    T: np.ndarray
    values: np.ndarray
    limit: float
    gaps: np.ndarray
    details: dict = field(default_factory=dict)

    @property
    def monotone(self) -> bool:
        return bool(np.all(np.diff(self.gaps) < 0))

    def rows(self):
        return [{"T": float(t), "value": float(v), "limit": self.limit, "relative_gap": float(g)}
                for t, v, g in zip(self.T, self.values, self.gaps)]


def _chi_power_integral(psi: TimeProfile, p: float) -> float:
    if psi.kind == "constant":
        return abs(psi.value) ** p / (1 + p)
    if psi.kind == "indicator":
        return abs(psi.value) ** p * psi.t1 ** (1 + p) / (1 + p)
    if psi.kind == "point":
        return abs(psi.value) ** p * psi.t1
    from scipy import integrate
    return integrate.quad(lambda t: float(psi.tail_integral(t)) ** p, 0, 1, points=[psi.a, psi.b])[0]


def _dominator_factory(params, psi: TimeProfile, T, norming, tb):
    """``u_T(rho, t)`` for a point mass of unit weight at the origin, ``rho`` radial.

    ``u_T(x, t) = F_T**-1 int_0^t T_v phi(x) chi((T - t + v)/T) dv`` and for the
    supported profiles ``chi`` is piecewise linear, so everything reduces to
    ``A_tau = int_0^tau p_v`` and ``B_tau = int_0^tau v p_v``.
    """
    a, d = params.alpha, params.d

    def A(rho, tau):
        return np.where(tau > 0, a * rho ** (a - d) * tb.Q(1, rho * np.maximum(tau, 1e-300) ** (-1 / a)), 0.0)

    def B(rho, tau):
        return np.where(tau > 0, a * rho ** (2 * a - d) * tb.Q(2, rho * np.maximum(tau, 1e-300) ** (-1 / a)), 0.0)

    val = psi.value
    if psi.kind == "constant":
        lag = 0.0
    elif psi.kind in ("indicator", "point"):
        lag = (1 - psi.t1) * T
    else:
        raise NotImplementedError("deterministic limits support constant, indicator and point profiles")

    def u(rho, t):
        tau = np.maximum(t - lag, 0.0)
        if psi.kind == "point":
            return val * A(rho, tau) / norming
        return val * (tau * A(rho, tau) - B(rho, tau)) / (T * norming)

    return u


def deterministic_limit_I2(params: ModelParams, phi: TestFunction, psi: TimeProfile, T_list, *,
                           norming=None) -> LimitTable:
    """``I2(T) = int_{R^d} int_0^T u_T(x, t)**(1+beta) dt dx`` against ``int (G phi)**(1+beta) int chi**(1+beta)``.

    ``u_T`` is the linear dominator for ``Psi_T`` with the large-regime norming
    ``F_T = T**(1/(1+beta))`` unless ``norming`` (a function of T) is given.
    """
    info = classify_regime(params)
    if info.regime is not Regime.LARGE:
        raise ValueError("the I2 limit holds in the large regime")
    if params.d > 2:
        raise ValueError("implemented for d <= 2")
    b1 = 1 + params.beta
    T_list = np.asarray(T_list, dtype=float)
    if phi.is_zero or psi.value == 0:
        return LimitTable(T_list, np.zeros(len(T_list)), 0.0, np.zeros(len(T_list)))
    parts = concentric(phi)
    s = max(sg for sg, _ in parts)
    a, d = params.alpha, params.d
    lam = phi.integral()
    tb = p1_table(a, d)
    omega = sphere_area(d)
    norm_fn = norming or (lambda T: T ** (1.0 / b1))
    G_int = potential_power_integral(a, d, phi, b1)
    limit = float(G_int * _chi_power_integral(psi, b1))

    values = []
    for T in T_list:
        F = norm_fn(T)
        u = _dominator_factory(params, psi, T, F, tb)
        lt, wt = gauss_panels(np.linspace(math.log(T) - 40, math.log(T), 161), 8)
        t = np.exp(lt)
        wt = wt * t
        r_near, w_near, r_far, w_far = radial_nodes(s, a, T)
        near = np.array([radial_convolve(lambda r: u(r[None, :], t[:, None]), a, d, parts, rr) for rr in r_near])
        far = lam * u(r_far[:, None], t[None, :])
        tot = np.dot(w_near * r_near ** (d - 1), (np.maximum(near, 0) ** b1) @ wt)
        tot += np.dot(w_far * r_far ** (d - 1), (np.maximum(far, 0) ** b1) @ wt)
        values.append(omega * tot)
    values = np.array(values)
    return LimitTable(T_list, values, limit, np.abs(values - limit) / limit,
                      {"G_pow_integral": G_int, "chi_pow_integral": _chi_power_integral(psi, b1)})


def critical_log_limit(params: ModelParams, phi: TestFunction, T_list) -> LimitTable:
    """``(log T)**-1 int (int_0^T T_u phi du)**(1+beta) dx`` against ``(1+beta)/V K2 lambda(phi)**(1+beta)``."""
    info = classify_regime(params)
    if info.regime is not Regime.CRITICAL:
        raise ValueError("the logarithmic limit holds at the critical dimension")
    if params.d not in (1, 2):
        raise ValueError("implemented for d in {1, 2}")
    b1 = 1 + params.beta
    a, d = params.alpha, params.d
    T_list = np.asarray(T_list, dtype=float)
    if phi.is_zero:
        return LimitTable(T_list, np.zeros(len(T_list)), 0.0, np.zeros(len(T_list)))
    parts = concentric(phi)
    s = max(sg for sg, _ in parts)
    lam = phi.integral()
    tb = p1_table(a, d)
    omega = sphere_area(d)
    k2 = constant_K2(params)
    limit = b1 / params.V * k2.value * lam ** b1
    values = []
    for T in T_list:
        A = lambda r: a * r ** (a - d) * tb.Q(1, r * T ** (-1 / a))
        r_near, w_near, r_far, w_far = radial_nodes(s, a, T)
        near = np.array([radial_convolve(A, a, d, parts, rr) for rr in r_near])
        far = lam * A(r_far)
        tot = np.dot(w_near * r_near ** (d - 1), near ** b1) + np.dot(w_far * r_far ** (d - 1), far ** b1)
        values.append(omega * tot / math.log(T))
    values = np.array(values)
    return LimitTable(T_list, values, limit, np.abs(values - limit) / limit, {"K2": k2.value, "K2_error": k2.error})
