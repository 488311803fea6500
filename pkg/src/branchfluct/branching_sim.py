"""Simulation of the branching alpha-stable particle system.

All replicas of a block advance together over a fixed observation grid
``t_k = k * dt``.  Between grid times a particle either survives (one exact
stable increment to the next grid time) or dies inside the step; a dying
particle is moved exactly to its death time and place, replaced by its
offspring there, and the children are processed in the same step until every
particle of the block is alive at ``t_{k+1}`` or gone.  Lifetimes are drawn
at birth (memorylessness makes this exact), so the grid sees the exact law of
the process at grid times.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .model import ModelParams
from .samplers import as_generator, sample_isotropic_increment, sample_offspring, sample_poisson_field
from .testfunctions import TestFunction

DEFAULT_MAX_POPULATION = 4_000_000


class PopulationExplosion(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# observers


class Observer:
    """Receives grid snapshots (and optionally birth/death events) of a block."""

    wants_events = False

    def start(self, n_rep: int, n_times: int, d: int):
        pass

    def observe(self, k: int, t: float, pos: np.ndarray, rep: np.ndarray):
        pass

    def on_death(self, t, pos, rep, pid):
        pass

    def on_birth(self, t, pos, rep, pid, parent):
        pass

    def kill(self, replicas: np.ndarray, k: int):
        pass

    def result(self):
        return None


class PairingObserver(Observer):
    """``<N_{t_k}, phi_j>`` per replica, test function and grid time."""

    def __init__(self, phis):
        self.phis = [phis] if isinstance(phis, TestFunction) else list(phis)

    def start(self, n_rep, n_times, d):
        self.values = np.zeros((n_rep, len(self.phis), n_times))
        self.n_rep = n_rep
        self.dead = np.zeros(n_rep, dtype=bool)

    def observe(self, k, t, pos, rep):
        for j, phi in enumerate(self.phis):
            self.values[:, j, k] = np.bincount(rep, weights=phi(pos), minlength=self.n_rep)
        self.values[self.dead, :, k] = np.nan

    def kill(self, replicas, k):
        self.dead[replicas] = True
        self.values[replicas, :, k:] = np.nan

    def result(self):
        return self.values


class PopulationObserver(Observer):
    """Live particle counts per replica and grid time."""

    def start(self, n_rep, n_times, d):
        self.counts = np.zeros((n_rep, n_times), dtype=np.int64)
        self.n_rep = n_rep
        self.dead = np.zeros(n_rep, dtype=bool)

    def observe(self, k, t, pos, rep):
        self.counts[:, k] = np.bincount(rep, minlength=self.n_rep)
        self.counts[self.dead, k] = -1

    def kill(self, replicas, k):
        self.dead[replicas] = True
        self.counts[replicas, k:] = -1

    def result(self):
        return self.counts


class EventLogObserver(Observer):
    """Event log rows ``(replica, time, event, particle id, parent id, position...)``."""

    wants_events = True

    def start(self, n_rep, n_times, d):
        self.rows = []

    def on_death(self, t, pos, rep, pid):
        for i in range(len(t)):
            self.rows.append((int(rep[i]), float(t[i]), "death", int(pid[i]), -1, *map(float, pos[i])))

    def on_birth(self, t, pos, rep, pid, parent):
        for i in range(len(t)):
            self.rows.append((int(rep[i]), float(t[i]), "birth", int(pid[i]), int(parent[i]), *map(float, pos[i])))

    def result(self):
        return self.rows

    def write(self, path, d):
        cols = ["replica", "time", "event", "particle", "parent"] + [f"x{i}" for i in range(d)]
        with open(path, "w") as fh:
            fh.write("\t".join(cols) + "\n")
            for row in self.rows:
                fh.write("\t".join(repr(v) if isinstance(v, float) else str(v) for v in row) + "\n")


# ---------------------------------------------------------------------------
# engine


@dataclass
class SimulationStats:
    births: int = 0
    deaths: int = 0
    max_population: int = 0
    particle_steps: int = 0
    killed: list = field(default_factory=list)
    wall_time: float = 0.0


@dataclass
class BlockResult:
    observers: list
    stats: SimulationStats
    n_times: int
    dt: float
    failed: np.ndarray

    def __getitem__(self, i):
        return self.observers[i].result()


def _grid_steps(horizon: float, dt: float) -> int:
    k = int(round(horizon / dt))
    if k < 1 or abs(k * dt - horizon) > 1e-9 * max(1.0, horizon):
        raise ValueError(f"horizon {horizon} is not a positive multiple of dt {dt}")
    return k


def simulate_block(params: ModelParams, positions: np.ndarray, replica: np.ndarray, n_rep: int,
                   horizon: float, dt: float, observers, rng, *, max_population: int = DEFAULT_MAX_POPULATION,
                   offspring_method: str = "exact") -> BlockResult:
    """Run the branching system for a block of replicas.

    Parameters
    ----------
    positions : (n, d) initial particle positions (all born at time 0)
    replica : (n,) replica index in ``[0, n_rep)`` of each initial particle
    horizon, dt : the grid is ``k * dt`` for ``k = 0..horizon/dt``
    observers : list of :class:`Observer`
    max_population : per-replica cap; a replica exceeding it is killed and
        reported in ``stats.killed`` (its observer values become NaN / -1)
    """
    rng = as_generator(rng)
    t0 = time.perf_counter()
    d, alpha, V, beta = params.d, params.alpha, params.V, params.beta
    K = _grid_steps(horizon, dt)
    pos = np.asarray(positions, dtype=float).reshape(-1, d).copy()
    rep = np.asarray(replica, dtype=np.int64).copy()
    n0 = len(pos)
    death = rng.exponential(1.0 / V, n0) if V > 0 else np.full(n0, np.inf)
    pid = np.arange(n0, dtype=np.int64)
    next_id = n0
    stats = SimulationStats()
    events = any(o.wants_events for o in observers)
    failed = np.zeros(n_rep, dtype=bool)
    for o in observers:
        o.start(n_rep, K + 1, d)
    for o in observers:
        o.observe(0, 0.0, pos, rep)

    for k in range(K):
        t_now = k * dt
        t_next = (k + 1) * dt
        dies = death <= t_next
        keep = ~dies
        stats.particle_steps += len(pos)
        # survivors: one increment to the next grid time
        out_pos = [pos[keep] + sample_isotropic_increment(d, alpha, dt, rng, int(keep.sum()))]
        out_death = [death[keep]]
        out_rep = [rep[keep]]
        out_pid = [pid[keep]]
        p_pos, p_t, p_death, p_rep, p_pid = pos[dies], np.full(int(dies.sum()), t_now), death[dies], rep[dies], pid[dies]
        while len(p_pos):
            # move each pending particle to its death time (if inside the step) or to t_next
            dying = p_death <= t_next
            tgt = np.where(dying, p_death, t_next)
            p_pos = p_pos + sample_isotropic_increment(d, alpha, tgt - p_t, rng, len(p_pos))
            out_pos.append(p_pos[~dying])
            out_death.append(p_death[~dying])
            out_rep.append(p_rep[~dying])
            out_pid.append(p_pid[~dying])
            if not dying.any():
                break
            dpos, dt_death, drep, dpid = p_pos[dying], p_death[dying], p_rep[dying], p_pid[dying]
            stats.deaths += len(dpos)
            if events:
                for o in observers:
                    o.on_death(dt_death, dpos, drep, dpid)
            n_off = sample_offspring(beta, rng, len(dpos), method=offspring_method)
            n_child = int(n_off.sum())
            stats.births += n_child
            if n_child > max_population * max(1, n_rep):
                raise PopulationExplosion(f"{n_child} offspring in a single step")
            p_pos = np.repeat(dpos, n_off, axis=0)
            p_t = np.repeat(dt_death, n_off)
            p_rep = np.repeat(drep, n_off)
            parent = np.repeat(dpid, n_off)
            p_pid = np.arange(next_id, next_id + n_child, dtype=np.int64)
            next_id += n_child
            p_death = p_t + (rng.exponential(1.0 / V, n_child) if V > 0 else np.inf)
            if events and n_child:
                for o in observers:
                    o.on_birth(p_t, p_pos, p_rep, p_pid, parent)
        pos = np.concatenate(out_pos) if len(out_pos) > 1 else out_pos[0]
        death = np.concatenate(out_death)
        rep = np.concatenate(out_rep)
        pid = np.concatenate(out_pid)
        counts = np.bincount(rep, minlength=n_rep)
        stats.max_population = max(stats.max_population, int(counts.max(initial=0)))
        over = np.nonzero(counts > max_population)[0]
        if len(over):
            failed[over] = True
            stats.killed.extend((int(r), k + 1) for r in over)
            alive = ~np.isin(rep, over)
            pos, death, rep, pid = pos[alive], death[alive], rep[alive], pid[alive]
            for o in observers:
                o.kill(over, k + 1)
        for o in observers:
            o.observe(k + 1, t_next, pos, rep)
    stats.wall_time = time.perf_counter() - t0
    return BlockResult(list(observers), stats, K + 1, dt, failed)


def run_population(params: ModelParams, box, horizon: float, dt: float, observers, rng, n_rep: int = 1,
                   **kw) -> BlockResult:
    """Replicas started from a Poisson field with intensity ``params.intensity`` on ``box``."""
    rng = as_generator(rng)
    fields = [sample_poisson_field(params.intensity, box, rng) for _ in range(n_rep)]
    positions = np.concatenate(fields) if fields else np.zeros((0, params.d))
    replica = np.repeat(np.arange(n_rep), [len(f) for f in fields])
    return simulate_block(params, positions.reshape(-1, params.d), replica, n_rep, horizon, dt, observers, rng, **kw)


def run_single_ancestor(params: ModelParams, x, horizon: float, dt: float, observers, rng, n_rep: int = 1,
                        **kw) -> BlockResult:
    """Replicas started from one particle at ``x``."""
    x = np.asarray(x, dtype=float).reshape(1, params.d)
    positions = np.repeat(x, n_rep, axis=0)
    return simulate_block(params, positions, np.arange(n_rep), n_rep, horizon, dt, observers, rng, **kw)


def path_positions(params: ModelParams, start, grid, rng) -> np.ndarray:
    """Positions of one particle at the times of ``grid`` (first grid time = start time).

    Consecutive positions differ by independent exact stable increments over
    the grid spacings.
    """
    rng = as_generator(rng)
    grid = np.asarray(grid, dtype=float)
    if np.any(np.diff(grid) < 0):
        raise ValueError("grid must be nondecreasing")
    start = np.asarray(start, dtype=float).reshape(params.d)
    steps = np.diff(grid)
    inc = sample_isotropic_increment(params.d, params.alpha, steps, rng, len(steps)) if len(steps) else np.zeros((0, params.d))
    return np.vstack([start[None, :], start[None, :] + np.cumsum(inc, axis=0)])
