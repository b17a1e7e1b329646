"""Deterministic limit objects: mean ODEs, second moment, zero-mass k(t) and marginal laws."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numba
import numpy as np
from scipy import integrate
from scipy.interpolate import CubicHermiteSpline

from .laws import InitialLaw, PointMass, StationaryLaw
from .model import ModelParams

ORDER_TOL = 1e-6


class StepSizeError(RuntimeError):
    """Raised when the integrated moments leave the admissible region; refine the step."""


@numba.njit(cache=True)
def _rhs(lam, alpha, r, y, out):
    m, v, x2, k = y[0], y[1], y[2], y[3]
    inf = lam * (1.0 - m) * v
    out[0] = inf - r * m
    out[1] = inf - (r + alpha) * v
    out[2] = -(2.0 * alpha + r) * x2 + inf
    out[3] = r * (1.0 - k) - lam * v * k


@numba.njit(cache=True)
def _rk4(lam, alpha, r, y0, h, nsteps):
    out = np.empty((nsteps + 1, 4))
    out[0] = y0
    y = y0.copy()
    k1 = np.empty(4)
    k2 = np.empty(4)
    k3 = np.empty(4)
    k4 = np.empty(4)
    tmp = np.empty(4)
    for i in range(nsteps):
        _rhs(lam, alpha, r, y, k1)
        for j in range(4):
            tmp[j] = y[j] + 0.5 * h * k1[j]
        _rhs(lam, alpha, r, tmp, k2)
        for j in range(4):
            tmp[j] = y[j] + 0.5 * h * k2[j]
        _rhs(lam, alpha, r, tmp, k3)
        for j in range(4):
            tmp[j] = y[j] + h * k3[j]
        _rhs(lam, alpha, r, tmp, k4)
        for j in range(4):
            y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
        out[i + 1] = y
    return out


def macro_rhs(p: ModelParams, y: np.ndarray) -> np.ndarray:
    """Vectorised right-hand side; ``y`` has shape (..., 4) ordered (m, v, x2, k)."""
    y = np.asarray(y, dtype=float)
    m, v, x2, k = y[..., 0], y[..., 1], y[..., 2], y[..., 3]
    inf = p.lam * (1.0 - m) * v
    return np.stack(
        [inf - p.r * m, inf - (p.r + p.alpha) * v, -(2 * p.alpha + p.r) * x2 + inf, p.r * (1 - k) - p.lam * v * k],
        axis=-1,
    )


@dataclass
class MacroState:
    """Trajectory of (m, v, E[x^2], k) on a uniform grid, with cubic Hermite dense output."""

    params: ModelParams
    grid: np.ndarray
    m: np.ndarray
    v: np.ndarray
    x2: np.ndarray
    k: np.ndarray
    step_error: float = math.nan

    @property
    def values(self) -> np.ndarray:
        return np.column_stack([self.m, self.v, self.x2, self.k])

    @property
    def h(self) -> float:
        return float(self.grid[1] - self.grid[0]) if self.grid.size > 1 else math.nan

    @cached_property
    def interpolant(self) -> CubicHermiteSpline:
        y = self.values
        return CubicHermiteSpline(self.grid, y, macro_rhs(self.params, y), axis=0)

    def at(self, t) -> np.ndarray:
        """Interpolated (m, v, x2, k) at time(s) t; shape (..., 4)."""
        t = np.asarray(t, dtype=float)
        if self.grid.size == 1:
            return np.broadcast_to(self.values[0], t.shape + (4,)).copy()
        lo, hi = self.grid[0], self.grid[-1]
        if np.any(t < lo - 1e-12) or np.any(t > hi + 1e-12):
            raise ValueError(f"time outside integrated range [{lo}, {hi}]")
        return self.interpolant(np.clip(t, lo, hi))

    def v_at(self, t):
        return self.at(t)[..., 1]

    def k_at(self, t):
        return self.at(t)[..., 3]

    def table(self, every: int = 1) -> tuple[list[str], list[np.ndarray]]:
        sl = slice(None, None, every)
        idx = np.arange(self.grid.size)[sl]
        if idx[-1] != self.grid.size - 1:
            idx = np.append(idx, self.grid.size - 1)
        return ["t", "m", "v", "x2", "k"], [a[idx] for a in (self.grid, self.m, self.v, self.x2, self.k)]


def _check_order(y: np.ndarray) -> None:
    if not np.all(np.isfinite(y)):
        raise StepSizeError("integration blew up (non-finite values); refine the step")
    m, v, x2, k = y[:, 0], y[:, 1], y[:, 2], y[:, 3]
    worst = max(
        float(np.max(-x2)), float(np.max(x2 - v)), float(np.max(v - m)), float(np.max(m - 1.0)),
        float(np.max(-k)), float(np.max(k - 1.0)),
    )
    if worst > ORDER_TOL:
        raise StepSizeError(f"ordering 0 <= x2 <= v <= m <= 1, 0 <= k <= 1 violated by {worst:.3g}; refine the step")


def integrate_macro(
    p: ModelParams,
    m0: float,
    v0: float,
    x2_0: float,
    k0: float,
    T: float,
    h: float = 1e-3,
    richardson: bool = True,
) -> MacroState:
    """Classical RK4 for the coupled (m, v, E[x^2], k) system on [0, T].

    The step actually used is T / ceil(T / h). With ``richardson`` the run is
    repeated at half step; 16/15 of the max difference on the common grid
    estimates the error of the returned trajectory and is stored as
    ``step_error``.
    """
    if h <= 0 or T < 0:
        raise ValueError("need h > 0 and T >= 0")
    if not (0 <= x2_0 <= v0 <= m0 <= 1 and 0 <= k0 <= 1):
        raise ValueError("initial data must satisfy 0 <= x2_0 <= v0 <= m0 <= 1 and 0 <= k0 <= 1")
    y0 = np.array([m0, v0, x2_0, k0], dtype=float)
    nsteps = max(int(math.ceil(T / h - 1e-9)), 0)
    hh = T / nsteps if nsteps else 0.0
    y = _rk4(p.lam, p.alpha, p.r, y0, hh, nsteps)
    _check_order(y)
    err = math.nan
    if richardson and nsteps:
        y_half = _rk4(p.lam, p.alpha, p.r, y0, hh / 2, 2 * nsteps)
        err = float(np.max(np.abs(y_half[::2] - y))) * 16.0 / 15.0
    grid = np.linspace(0.0, T, nsteps + 1)
    return MacroState(p, grid, y[:, 0].copy(), y[:, 1].copy(), y[:, 2].copy(), y[:, 3].copy(), err)


def integrate_from_law(p: ModelParams, mu0: InitialLaw, T: float, h: float = 1e-3, **kw) -> MacroState:
    """integrate_macro with initial data given by the moments of ``mu0``."""
    return integrate_macro(p, mu0.p_positive(), mu0.mean(), mu0.moment(2), mu0.atom_zero(), T, h, **kw)


@dataclass
class LimitLaw:
    """Marginal law at time t of the limit process.

    Pieces: ``atom_zero`` (mass k(t) at 0), the transported initial law
    (``travel_atoms`` plus ``travel_density`` on (0, e^{-alpha t}]) carrying
    total mass e^{-r t} P(x0 > 0), and the density g_t on (e^{-alpha t}, 1].
    """

    t: float
    params: ModelParams
    atom_zero: float
    travel_atoms: list[tuple[float, float]]
    travel_density: Callable | None
    macro: MacroState = field(repr=False)
    k_macro: MacroState = field(repr=False)

    @property
    def lower(self) -> float:
        return math.exp(-self.params.alpha * self.t)

    @property
    def atom_traveling(self) -> float:
        return sum(w for _, w in self.travel_atoms)

    def g(self, x):
        """Density of the re-infected part, supported on (e^{-alpha t}, 1]."""
        p = self.params
        x = np.asarray(x, dtype=float)
        inside = (x > self.lower) & (x <= 1.0)
        safe = np.where(inside, x, 1.0)
        s = np.clip(self.t + np.log(safe) / p.alpha, 0.0, self.t)
        v = self.macro.v_at(s)
        k = self.k_macro.k_at(s)
        val = p.lam * k * v / p.alpha * safe ** ((p.r - p.alpha) / p.alpha)
        return np.where(inside, val, 0.0)

    def density(self, x):
        x = np.asarray(x, dtype=float)
        out = self.g(x)
        if self.travel_density is not None:
            out = out + self.travel_density(x)
        return out

    def g_mass(self, epsabs: float = 1e-12) -> float:
        """Integral of g_t, computed in the variable s with x = e^{-alpha s} (smooth integrand)."""
        p = self.params
        if self.t == 0:
            return 0.0

        def f(s):
            ret = self.t - s
            return p.lam * float(self.k_macro.k_at(ret)) * float(self.macro.v_at(ret)) * math.exp(-p.r * s)

        val, _ = integrate.quad(f, 0.0, self.t, epsabs=epsabs, epsrel=1e-10, limit=200)
        return val

    def travel_mass(self) -> float:
        mass = self.atom_traveling
        if self.travel_density is not None:
            # substitute x = e^{-alpha t} u, u in (0, 1]
            lo = self.lower
            val, _ = integrate.quad(lambda u: float(self.travel_density(lo * u)) * lo, 0.0, 1.0,
                                    epsabs=1e-12, epsrel=1e-10, limit=200)
            mass += val
        return mass

    def total_mass(self) -> float:
        return self.atom_zero + self.travel_mass() + self.g_mass()

    def table(self, x_grid) -> tuple[list[str], list[np.ndarray]]:
        x_grid = np.asarray(x_grid, dtype=float)
        return ["x", "density"], [x_grid, self.density(x_grid)]

    def atoms(self) -> list[dict]:
        return [{"x": 0.0, "mass": self.atom_zero}] + [{"x": x, "mass": w} for x, w in self.travel_atoms]


def limit_law(
    p: ModelParams,
    mu0: InitialLaw,
    t: float,
    x0: float | None = None,
    h: float = 1e-3,
    macro: MacroState | None = None,
) -> LimitLaw:
    """Law at time t of the limit process in a population started from ``mu0``.

    With ``x0`` given, returns the law of a tagged particle started at x0
    (the mean field v(t) still comes from ``mu0``); otherwise the particle
    itself is distributed as ``mu0``.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    if macro is None or macro.grid[-1] < t:
        macro = integrate_from_law(p, mu0, t, h)
    tagged = mu0 if x0 is None else PointMass(x0)
    k0 = tagged.atom_zero()
    if x0 is None:
        k_macro = macro
    else:
        k_macro = integrate_macro(p, macro.m[0], macro.v[0], macro.x2[0], k0, macro.grid[-1], macro.h if macro.grid.size > 1 else h)
    k_t = float(k_macro.k_at(t)) if t > 0 else k0
    decay = math.exp(-p.r * t)
    shrink = math.exp(-p.alpha * t)
    travel_atoms = [(x * shrink, w * decay) for x, w in tagged.atoms() if x > 0]
    travel_density = None
    if tagged.has_density:
        def travel_density(x, _law=tagged, _t=t):
            x = np.asarray(x, dtype=float)
            grow = math.exp(p.alpha * _t)
            inside = (x > 0) & (x <= math.exp(-p.alpha * _t))
            return np.where(inside, _law.density(np.where(inside, x * grow, 1.0)) * grow * math.exp(-p.r * _t), 0.0)
    return LimitLaw(t, p, k_t, travel_atoms, travel_density, macro, k_macro)


def stationary_law(p: ModelParams) -> StationaryLaw:
    """The non-trivial stationary law; raises ValueError for subcritical parameters."""
    return StationaryLaw(p)


def stationary_moment(p: ModelParams, k: int) -> float:
    """E[x^k] under the stationary law: r (1 - (r+alpha)/lam) / (r + k alpha)."""
    if int(k) != k or k < 1:
        raise ValueError("moment order must be a positive integer")
    return StationaryLaw(p).moment(int(k))
