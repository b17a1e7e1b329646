"""N-particle simulation of the mean-field dissipative contact process."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import _kernels as K
from .laws import InitialLaw, atom_at_zero_mixture
from .macro import integrate_from_law, macro_rhs
from .model import ModelParams
from .rng import make_rng, map_replicas


class AbsorbedError(RuntimeError):
    """The null state was reached: no further events are possible."""


@dataclass
class ParticleSystem:
    params: ModelParams
    tau: np.ndarray
    order: np.ndarray
    pos: np.ndarray
    fs: np.ndarray
    ist: np.ndarray
    rng: np.random.Generator | None = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.tau.size

    @property
    def clock(self) -> float:
        return float(self.fs[0])

    @property
    def sum_x(self) -> float:
        return float(self.fs[1])

    @property
    def sum_x2(self) -> float:
        return float(self.fs[2])

    @property
    def infected_count(self) -> int:
        return int(self.ist[0])

    @property
    def events(self) -> int:
        return int(self.ist[1])

    @property
    def absorbed(self) -> bool:
        return self.infected_count == 0

    def infected(self) -> np.ndarray:
        mask = np.zeros(self.n, dtype=bool)
        mask[self.order[: self.infected_count]] = True
        return mask

    def loads(self) -> np.ndarray:
        x = np.exp(-self.params.alpha * (self.clock - self.tau))
        return np.where(self.infected(), x, 0.0)

    def aggregates(self) -> tuple[float, float, float]:
        """(m_N, v_N, v_N2) from the cached sums."""
        return self.infected_count / self.n, self.sum_x / self.n, self.sum_x2 / self.n

    def refresh(self) -> float:
        """Recompute the cached sums from particle states; returns the change in sum_x."""
        before = self.sum_x
        K.refresh(self.tau, self.order, self.fs, self.ist, self.params.alpha)
        return self.sum_x - before


def from_loads(params: ModelParams, x: np.ndarray, clock: float = 0.0, rng=None) -> ParticleSystem:
    """Build a system from explicit loads (0 = susceptible)."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or np.any(x > 1):
        raise ValueError("loads must lie in [0, 1]")
    with np.errstate(divide="ignore"):
        logs = np.log(x)
    return _from_logs(params, logs, clock, rng)


def _from_logs(params, logs, clock, rng):
    n = logs.size
    infected = np.isfinite(logs)
    tau = np.where(infected, clock + logs / params.alpha, -np.inf)
    order = np.concatenate([np.flatnonzero(infected), np.flatnonzero(~infected)]).astype(np.int64)
    pos = np.empty(n, dtype=np.int64)
    pos[order] = np.arange(n)
    fs = np.array([clock, 0.0, 0.0])
    ist = np.array([int(infected.sum()), 0, 0], dtype=np.int64)
    sys = ParticleSystem(params, tau, order, pos, fs, ist, rng)
    sys.refresh()
    return sys


def init(params: ModelParams, n: int, mu0: InitialLaw, seed: int | np.random.Generator) -> ParticleSystem:
    """n particles drawn i.i.d. from ``mu0``; the generator is kept on the system."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else make_rng(int(seed))
    return _from_logs(params, mu0.sample_log(rng, n), 0.0, rng)


@dataclass(frozen=True)
class EventRecord:
    kind: str  # "up", "down", "absorbed" or "horizon"
    time: float
    particle: int


_KIND_NAMES = {K.UP: "up", K.DOWN: "down", K.ABSORBED: "absorbed", K.HORIZON: "horizon"}


def step_exact(sys: ParticleSystem, rng: np.random.Generator | None = None, t_max: float = math.inf) -> EventRecord:
    """Advance to the next jump; if it would fall after ``t_max`` stop there instead."""
    rng = rng or sys.rng
    p = sys.params
    kind, i = K.step_exact(sys.tau, sys.order, sys.pos, sys.fs, sys.ist, p.lam, p.alpha, p.r, rng, t_max)
    return EventRecord(_KIND_NAMES[kind], sys.clock, int(i))


def step_euler(sys: ParticleSystem, dt: float, rng: np.random.Generator | None = None, uniforms=None) -> None:
    """One Euler step of length dt with exact in-step decay and exponential jump probabilities.

    Particle i uses ``uniforms[i]``; by default these are ``rng.random(n)``.
    """
    if dt <= 0:
        raise ValueError("dt must be > 0")
    rng = rng or sys.rng
    u = rng.random(sys.n) if uniforms is None else np.asarray(uniforms, dtype=float)
    flags = np.zeros(sys.n, dtype=np.int8)
    p = sys.params
    K.step_euler(sys.tau, sys.order, sys.pos, sys.fs, sys.ist, p.lam, p.alpha, p.r, dt, u, flags)


@dataclass
class TrajectorySample:
    grid: np.ndarray
    m_N: np.ndarray
    v_N: np.ndarray
    v_N2: np.ndarray
    seed: int | None = None
    mode: str = "exact"
    events: int = 0
    wall_time: float = 0.0
    absorbed: bool = False

    def table(self) -> tuple[list[str], list[np.ndarray]]:
        return ["t", "m_N", "v_N", "v_N2"], [self.grid, self.m_N, self.v_N, self.v_N2]


def run(
    sys: ParticleSystem,
    T: float,
    grid,
    mode: str = "exact",
    dt: float = 1e-3,
    rng: np.random.Generator | None = None,
    seed: int | None = None,
) -> TrajectorySample:
    """Simulate up to T and sample (m_N, v_N, v_N2) on ``grid``.

    Once absorbed the remaining grid is filled with zeros.
    """
    rng = rng or sys.rng
    grid = np.ascontiguousarray(grid, dtype=float)
    if grid.size and (grid[0] < sys.clock - 1e-12 or grid[-1] > T + 1e-12 or np.any(np.diff(grid) <= 0)):
        raise ValueError("grid must be strictly increasing inside [clock, T]")
    out = [np.zeros(grid.size) for _ in range(3)]
    p = sys.params
    start = time.perf_counter()
    events0 = sys.events
    if mode == "exact":
        K.run_exact(sys.tau, sys.order, sys.pos, sys.fs, sys.ist, p.lam, p.alpha, p.r, rng, grid, T, *out)
    elif mode == "euler":
        nsteps = int(round((T - sys.clock) / dt))
        if not math.isclose(sys.clock + nsteps * dt, T, rel_tol=1e-9, abs_tol=1e-12):
            raise ValueError("T - clock must be a multiple of dt in euler mode")
        K.run_euler(sys.tau, sys.order, sys.pos, sys.fs, sys.ist, p.lam, p.alpha, p.r, rng, dt, nsteps, grid, *out)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return TrajectorySample(
        grid, out[0], out[1], out[2], seed=seed, mode=mode, events=sys.events - events0,
        wall_time=time.perf_counter() - start, absorbed=sys.absorbed,
    )


def _replica_job(args):
    params, n, mu0, T, grid, mode, dt, seed, replica = args
    rng = make_rng(seed, replica)
    sys = init(params, n, mu0, rng)
    return run(sys, T, grid, mode=mode, dt=dt, rng=rng, seed=seed)


def simulate_replicas(
    params: ModelParams,
    n: int,
    mu0: InitialLaw,
    T: float,
    grid,
    replicas: int,
    seed: int,
    mode: str = "exact",
    dt: float = 1e-3,
    workers: int = 1,
) -> list[TrajectorySample]:
    """Independent replicas; replica i uses the stream (seed, i)."""
    grid = np.asarray(grid, dtype=float)
    jobs = [(params, n, mu0, T, grid, mode, dt, seed, i) for i in range(replicas)]
    return map_replicas(_replica_job, jobs, workers)


@dataclass
class CouplingResult:
    n_ladder: list[int]
    sup_errors: np.ndarray
    sup_error_se: np.ndarray
    fitted_slope: float
    slope_stderr: float
    intercept: float
    per_replica: np.ndarray = field(repr=False)

    def table(self):
        return ["n", "mean_sup_error", "stderr"], [np.asarray(self.n_ladder, float), self.sup_errors, self.sup_error_se]


def _coupled_job(args):
    params, n, mu0, T, h, v, dv, seed, j, rep = args
    rng = make_rng(seed, j, rep)
    logs = mu0.sample_log(rng, n)
    sig = np.isfinite(logs).astype(np.int8)
    tau = np.where(sig == 1, logs / params.alpha, -np.inf)
    err = K.run_coupled(tau, sig, params.lam, params.alpha, params.r, T, rng, h, v, dv)
    return float(err.mean())


def coupled_chaos_experiment(
    params: ModelParams,
    n_ladder,
    T: float,
    replicas: int,
    seed: int,
    mu0: InitialLaw | None = None,
    h: float = 1e-3,
    workers: int = 1,
) -> CouplingResult:
    """Mean coupling error between particles and limit copies for each N, with a log-log slope fit."""
    n_ladder = [int(n) for n in n_ladder]
    if any(b <= a for a, b in zip(n_ladder, n_ladder[1:])):
        raise ValueError("n_ladder must be strictly increasing")
    mu0 = mu0 or atom_at_zero_mixture(0.5)
    macro = integrate_from_law(params, mu0, T, h, richardson=False)
    y = macro.values
    v = np.ascontiguousarray(y[:, 1])
    dv = np.ascontiguousarray(macro_rhs(params, y)[:, 1])
    hh = macro.h if macro.grid.size > 1 else h
    jobs = [(params, n, mu0, T, hh, v, dv, seed, j, rep) for j, n in enumerate(n_ladder) for rep in range(replicas)]
    errs = np.array(map_replicas(_coupled_job, jobs, workers)).reshape(len(n_ladder), replicas)
    mean = errs.mean(axis=1)
    se = errs.std(axis=1, ddof=1) / math.sqrt(replicas) if replicas > 1 else np.zeros(len(n_ladder))
    slope = intercept = slope_se = math.nan
    if len(n_ladder) >= 2 and np.all(mean > 0):
        fit = stats.linregress(np.log(n_ladder), np.log(mean))
        slope, intercept = fit.slope, fit.intercept
        slope_se = fit.stderr if len(n_ladder) > 2 else math.nan
    return CouplingResult(n_ladder, mean, se, float(slope), float(slope_se), float(intercept), errs)
