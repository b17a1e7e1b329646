"""Gaussian fluctuation process: drift F(t), diffusion A(t), Euler-Maruyama ensembles, Lyapunov covariance."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .macro import MacroState, stationary_moment
from .model import ModelParams, endemic_point
from .rng import make_rng

PSD_CLAMP = 1e-12


@dataclass(frozen=True)
class FluctState:
    xi: float = 0.0
    eta: float = 0.0
    t: float = 0.0


@dataclass(frozen=True)
class DriftDiffusion:
    F: np.ndarray
    A: np.ndarray
    Sigma: np.ndarray
    min_eig: float


def drift_matrix(p: ModelParams, m, v) -> np.ndarray:
    m, v = np.broadcast_arrays(np.asarray(m, float), np.asarray(v, float))
    F = np.empty(m.shape + (2, 2))
    F[..., 0, 0] = -(p.lam * v + p.r)
    F[..., 0, 1] = p.lam * (1.0 - m)
    F[..., 1, 0] = -p.lam * v
    F[..., 1, 1] = p.lam * (1.0 - m) - p.r - p.alpha
    return F


def diffusion_matrix(p: ModelParams, m, v, x2) -> np.ndarray:
    """A(t): infections move (m, v) by (1, 1)/N, a recovery by (1, x_i)/N."""
    m, v, x2 = np.broadcast_arrays(*(np.asarray(a, float) for a in (m, v, x2)))
    inf = p.lam * (1.0 - m) * v
    A = np.empty(m.shape + (2, 2))
    A[..., 0, 0] = inf + p.r * m
    A[..., 0, 1] = A[..., 1, 0] = inf + p.r * v
    A[..., 1, 1] = inf + p.r * x2
    return A


def _eig_min_2x2(A):
    a, b, d = A[..., 0, 0], A[..., 0, 1], A[..., 1, 1]
    return 0.5 * (a + d) - np.sqrt(0.25 * (a - d) ** 2 + b * b)


def sqrtm_psd(A) -> np.ndarray:
    """Symmetric PSD square root of (a stack of) symmetric 2x2 matrices.

    Uses (A + sqrt(det A) I) / sqrt(tr A + 2 sqrt(det A)); returns 0 where
    that denominator vanishes (only for A = 0). Negative determinants from
    round-off are clamped to 0.
    """
    A = np.asarray(A, dtype=float)
    det = A[..., 0, 0] * A[..., 1, 1] - A[..., 0, 1] * A[..., 1, 0]
    s = np.sqrt(np.maximum(det, 0.0))
    denom_sq = A[..., 0, 0] + A[..., 1, 1] + 2.0 * s
    ok = denom_sq > 0
    denom = np.sqrt(np.where(ok, denom_sq, 1.0))
    eye = np.eye(2)
    out = (A + s[..., None, None] * eye) / denom[..., None, None]
    return np.where(ok[..., None, None], out, 0.0)


def _clamped(A, where: str):
    lo = _eig_min_2x2(A)
    worst = float(np.min(lo)) if np.size(lo) else 0.0
    if worst < -PSD_CLAMP:
        warnings.warn(f"diffusion matrix not PSD at {where}: min eigenvalue {worst:.3g}", RuntimeWarning)
    return worst


def drift_diffusion_at(p: ModelParams, macro: MacroState, t: float) -> DriftDiffusion:
    m, v, x2, _ = macro.at(t)
    F = drift_matrix(p, m, v)
    A = diffusion_matrix(p, m, v, x2)
    worst = _clamped(A, f"t={t}")
    return DriftDiffusion(F, A, sqrtm_psd(A), worst)


def stationary_drift_diffusion(p: ModelParams) -> DriftDiffusion:
    """Limits of F(t), A(t) at the endemic point (x2 from the stationary law)."""
    fp = endemic_point(p)
    F = drift_matrix(p, fp.m_star, fp.v_star)
    F[1, 1] = 0.0  # lam (1 - m*) = r + alpha exactly
    A = diffusion_matrix(p, fp.m_star, fp.v_star, stationary_moment(p, 2))
    return DriftDiffusion(F, A, sqrtm_psd(A), _clamped(A, "stationarity"))


def lyapunov_2x2(F, A) -> np.ndarray:
    """Solve F C + C F^T + A = 0 for Hurwitz 2x2 F in closed form."""
    F = np.asarray(F, dtype=float)
    A = np.asarray(A, dtype=float)
    tr = F[0, 0] + F[1, 1]
    det = F[0, 0] * F[1, 1] - F[0, 1] * F[1, 0]
    if not (tr < 0 and det > 0):
        raise ValueError(f"drift matrix is not Hurwitz (trace {tr:g}, det {det:g})")
    G = F - tr * np.eye(2)
    C = (det * A + G @ A @ G.T) / (-2.0 * tr * det)
    return 0.5 * (C + C.T)


def initial_covariance(mu0) -> np.ndarray:
    """Covariance of (1{x > 0}, x) under mu0, the Gaussian limit of sqrt(N) times the initial deviations."""
    m, v, x2 = mu0.p_positive(), mu0.mean(), mu0.moment(2)
    c = v * (1.0 - m)
    return np.array([[m * (1.0 - m), c], [c, x2 - v * v]])


def stationary_covariance(p: ModelParams) -> np.ndarray:
    """Covariance of the stationary fluctuation process; needs supercritical parameters."""
    dd = stationary_drift_diffusion(p)
    return lyapunov_2x2(dd.F, dd.A)


@dataclass
class FluctEnsemble:
    grid: np.ndarray
    paths: np.ndarray  # (replicas, samples, 2)
    mean: np.ndarray  # (samples, 2)
    cov: np.ndarray  # (samples, 2, 2)
    seed: int | None = None

    def table(self, max_replicas: int | None = None):
        R = self.paths.shape[0] if max_replicas is None else min(max_replicas, self.paths.shape[0])
        S = self.grid.size
        t = np.tile(self.grid, R)
        xi = self.paths[:R, :, 0].ravel()
        eta = self.paths[:R, :, 1].ravel()
        rep = np.repeat(np.arange(R), S).astype(float)
        return ["t", "xi", "eta", "replica"], [t, xi, eta, rep]


def simulate_fluct(
    p: ModelParams,
    macro: MacroState | None,
    x0: FluctState | tuple = FluctState(),
    T: float = 1.0,
    h: float = 1e-3,
    seed: int = 0,
    replicas: int = 1000,
    x0_cov=None,
    sample_every: int | None = None,
) -> FluctEnsemble:
    """Euler-Maruyama ensemble of dX = F(t) X dt + Sigma(t) dW.

    ``macro=None`` freezes the coefficients at stationarity. ``x0_cov``
    draws a Gaussian start with that covariance around ``x0``. Paths are
    kept every ``sample_every`` steps (about 100 samples by default).
    """
    if h <= 0:
        raise ValueError("h must be > 0")
    nsteps = max(int(math.ceil(T / h - 1e-9)), 0)
    hh = T / nsteps if nsteps else 0.0
    times = np.linspace(0.0, T, nsteps + 1)
    if macro is None:
        dd = stationary_drift_diffusion(p)
        F = np.broadcast_to(dd.F, (nsteps + 1, 2, 2))
        S = np.broadcast_to(dd.Sigma, (nsteps + 1, 2, 2))
    else:
        if macro.grid[-1] < T - 1e-12:
            raise ValueError("macro trajectory does not cover [0, T]")
        y = macro.at(times)
        F = drift_matrix(p, y[:, 0], y[:, 1])
        A = diffusion_matrix(p, y[:, 0], y[:, 1], y[:, 2])
        _clamped(A, "along the trajectory")
        S = sqrtm_psd(A)
    rng = make_rng(seed)
    start = np.array([x0.xi, x0.eta] if isinstance(x0, FluctState) else x0, dtype=float)
    X = np.tile(start, (replicas, 1))
    if x0_cov is not None:
        X = X + rng.standard_normal((replicas, 2)) @ sqrtm_psd(x0_cov)
    every = sample_every or max(1, nsteps // 100)
    idx = list(range(0, nsteps + 1, every))
    if idx[-1] != nsteps:
        idx.append(nsteps)
    keep = set(idx)
    out = np.empty((replicas, len(idx), 2))
    j = 0
    sq = math.sqrt(hh)
    for k in range(nsteps + 1):
        if k in keep:
            out[:, j] = X
            j += 1
        if k == nsteps:
            break
        dW = rng.standard_normal((replicas, 2)) * sq
        X = X + hh * (X @ F[k].T) + dW @ S[k].T
    mean = out.mean(axis=0)
    centred = out - mean
    cov = np.einsum("rsi,rsj->sij", centred, centred) / max(replicas - 1, 1)
    return FluctEnsemble(times[idx], out, mean, cov, seed)
