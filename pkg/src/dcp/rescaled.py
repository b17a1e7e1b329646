"""Fast-decay regime: rescaled fluctuations of the particle system and the limiting noisy oscillator."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from . import micro
from .laws import InitialLaw, StationaryLaw
from .model import ModelParams, endemic_point
from .rng import make_rng, map_replicas


class ScalingWarning(UserWarning):
    """sqrt(lambda_N) is not small compared with log n."""


def _check_rho(rho):
    if not 0 < rho < 1:
        raise ValueError("rho must lie in (0, 1)")


def oscillator_frequency(r: float, rho: float) -> float:
    return math.sqrt(r * (1.0 - rho))


def default_noise(r: float, rho: float) -> float:
    """Noise coefficient of the limit: the eta martingale has quadratic variation r (1 - rho) t."""
    return math.sqrt(r * (1.0 - rho))


def scaling_health(lambda_N: float, n: int) -> tuple[float, bool]:
    """(sqrt(lambda_N) / log n, healthy); healthy means the ratio is below 1."""
    ratio = math.sqrt(lambda_N) / math.log(n) if n > 1 else math.inf
    return ratio, ratio <= 1.0


def rescale(m, v, m_star: float, v_star: float, n: int, lambda_N: float):
    """xi_hat = sqrt(n) (m - m*) / lambda_N^(1/4), eta_hat = lambda_N^(1/4) sqrt(n) (v - v*)."""
    q = lambda_N**0.25
    sn = math.sqrt(n)
    xi = sn * (np.asarray(m, dtype=float) - m_star) / q
    eta = q * sn * (np.asarray(v, dtype=float) - v_star)
    return xi, eta


@dataclass
class RescaledPath:
    grid: np.ndarray
    xi_hat: np.ndarray
    eta_hat: np.ndarray
    lambda_N: float
    alpha_N: float
    n: int
    r: float
    rho: float
    seed: int | None = None
    health_ratio: float = math.nan
    healthy: bool = True
    events: int = 0

    def table(self):
        return ["t", "xi_hat", "eta_hat"], [self.grid, self.xi_hat, self.eta_hat]


def rescaled_from_micro(
    r: float,
    rho: float,
    lambda_N: float,
    n: int,
    T: float,
    seed: int,
    dt: float = 0.01,
    mu0: InitialLaw | None = None,
    replica: int = 0,
) -> RescaledPath:
    """Particle system with (lambda_N, rho lambda_N, r), observed on the rescaled clock t / sqrt(lambda_N).

    ``T`` and ``dt`` are in rescaled time. The initial law defaults to the
    stationary law, which has P(x > 0) = m* and E x = v*.
    """
    _check_rho(rho)
    p = ModelParams(lambda_N, rho * lambda_N, r)
    fp = endemic_point(p)
    mu0 = mu0 or StationaryLaw(p)
    ratio, healthy = scaling_health(lambda_N, n)
    if not healthy:
        warnings.warn(f"sqrt(lambda_N)/log n = {ratio:.3g} > 1: far from the asymptotic regime", ScalingWarning)
    steps = int(round(T / dt))
    grid = np.arange(steps + 1) * dt
    speed = math.sqrt(lambda_N)
    rng = make_rng(seed, replica)
    sys = micro.init(p, n, mu0, rng)
    traj = micro.run(sys, grid[-1] / speed, grid / speed, mode="exact", rng=rng, seed=seed)
    xi, eta = rescale(traj.m_N, traj.v_N, fp.m_star, fp.v_star, n, lambda_N)
    return RescaledPath(grid, xi, eta, lambda_N, p.alpha, n, r, rho, seed, ratio, healthy, traj.events)


def _rescaled_job(args):
    r, rho, lambda_N, n, T, seed, dt, replica = args
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ScalingWarning)
        return rescaled_from_micro(r, rho, lambda_N, n, T, seed, dt, replica=replica)


def rescaled_replicas(r, rho, lambda_N, n, T, seed, replicas, dt=0.01, workers=1) -> list[RescaledPath]:
    ratio, healthy = scaling_health(lambda_N, n)
    if not healthy:
        warnings.warn(f"sqrt(lambda_N)/log n = {ratio:.3g} > 1: far from the asymptotic regime", ScalingWarning)
    jobs = [(r, rho, lambda_N, n, T, seed, dt, i) for i in range(replicas)]
    return map_replicas(_rescaled_job, jobs, workers)


# --- limiting oscillator ----------------------------------------------------

def oscillator_matrices(r: float, rho: float, noise: float | None = None):
    """Drift matrix M and noise coefficient of d(xi, eta) = M (xi, eta) dt + (0, noise) dW."""
    _check_rho(rho)
    M = np.array([[0.0, rho], [-(r / rho) * (1.0 - rho), 0.0]])
    return M, default_noise(r, rho) if noise is None else float(noise)


def _moment_system(r, rho, noise):
    """d/dt (Exx, Exy, Eyy) = B (Exx, Exy, Eyy) + c."""
    k = (r / rho) * (1.0 - rho)
    B = np.array([[0.0, 2 * rho, 0.0], [-k, 0.0, rho], [0.0, -2 * k, 0.0]])
    c = np.array([0.0, 0.0, noise**2])
    return B, c


def moment_odes(r: float, rho: float, T: float, h: float = 1e-4, noise: float | None = None, y0=(0.0, 0.0, 0.0)):
    """RK4 for the second moments (E xi^2, E xi eta, E eta^2) of the oscillator; returns (grid, values)."""
    if h <= 0 or T < 0:
        raise ValueError("need h > 0 and T >= 0")
    _, noise = oscillator_matrices(r, rho, noise)
    B, c = _moment_system(r, rho, noise)
    nsteps = max(int(math.ceil(T / h - 1e-9)), 0)
    hh = T / nsteps if nsteps else 0.0
    # one RK4 step of a linear system is y <- P y + Q c
    hB = hh * B
    I = np.eye(3)
    P = I + hB + hB @ hB / 2 + hB @ hB @ hB / 6 + hB @ hB @ hB @ hB / 24
    Q = hh * (I + hB / 2 + hB @ hB / 6 + hB @ hB @ hB / 24)
    qc = Q @ c
    out = np.empty((nsteps + 1, 3))
    y = np.asarray(y0, dtype=float).copy()
    out[0] = y
    for i in range(nsteps):
        y = P @ y + qc
        out[i + 1] = y
    return np.linspace(0.0, T, nsteps + 1), out


def moments_exact(r: float, rho: float, t, noise: float | None = None) -> np.ndarray:
    """Second moments from zero start via the matrix exponential of the augmented linear system."""
    _, noise = oscillator_matrices(r, rho, noise)
    B, c = _moment_system(r, rho, noise)
    aug = np.zeros((4, 4))
    aug[:3, :3] = B
    aug[:3, 3] = c
    e = np.zeros(4)
    e[3] = 1.0
    return np.array([(linalg.expm(aug * s) @ e)[:3] for s in np.atleast_1d(t)])


@dataclass
class OscillatorEnsemble:
    grid: np.ndarray
    paths: np.ndarray  # (replicas, samples, 2)
    moment_grid: np.ndarray
    moments: np.ndarray  # (steps, 3): E xi^2, E xi eta, E eta^2
    r: float
    rho: float
    noise: float
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    def empirical_moments(self) -> np.ndarray:
        xi, eta = self.paths[..., 0], self.paths[..., 1]
        return np.stack([(xi * xi).mean(0), (xi * eta).mean(0), (eta * eta).mean(0)], axis=-1)

    def moments_at_samples(self) -> np.ndarray:
        return np.column_stack([np.interp(self.grid, self.moment_grid, self.moments[:, j]) for j in range(3)])

    def table(self, max_replicas: int | None = None):
        R = self.paths.shape[0] if max_replicas is None else min(max_replicas, self.paths.shape[0])
        S = self.grid.size
        return ["t", "xi_hat", "eta_hat", "replica"], [
            np.tile(self.grid, R), self.paths[:R, :, 0].ravel(), self.paths[:R, :, 1].ravel(),
            np.repeat(np.arange(R), S).astype(float),
        ]

    def moment_table(self, every: int = 1):
        idx = np.arange(0, self.moment_grid.size, every)
        if idx[-1] != self.moment_grid.size - 1:
            idx = np.append(idx, self.moment_grid.size - 1)
        m = self.moments[idx]
        return ["t", "e_xi2", "e_xi_eta", "e_eta2"], [self.moment_grid[idx], m[:, 0], m[:, 1], m[:, 2]]


def simulate_oscillator(
    r: float,
    rho: float,
    T: float,
    h: float,
    seed: int,
    replicas: int,
    noise: float | None = None,
    x0=(0.0, 0.0),
    sample_every: int | None = None,
    moment_h: float = 1e-4,
) -> OscillatorEnsemble:
    """Euler-Maruyama ensemble of the oscillator plus its moment-ODE trajectory.

    ``noise`` defaults to sqrt(r (1 - rho)); pass 0 for the deterministic
    oscillator. The moment ODEs assume a deterministic start at ``x0``.
    """
    if h <= 0:
        raise ValueError("h must be > 0")
    M, noise = oscillator_matrices(r, rho, noise)
    nsteps = max(int(math.ceil(T / h - 1e-9)), 0)
    hh = T / nsteps if nsteps else 0.0
    every = sample_every or max(1, nsteps // 1000)
    idx = np.arange(0, nsteps + 1, every)
    if idx[-1] != nsteps:
        idx = np.append(idx, nsteps)
    rng = make_rng(seed)
    x = np.full(replicas, float(x0[0]))
    y = np.full(replicas, float(x0[1]))
    out = np.empty((replicas, idx.size, 2))
    a, b = M[0, 1], M[1, 0]
    sq = noise * math.sqrt(hh)
    j = 0
    for k in range(nsteps + 1):
        if j < idx.size and idx[j] == k:
            out[:, j, 0] = x
            out[:, j, 1] = y
            j += 1
        if k == nsteps:
            break
        dW = rng.standard_normal(replicas) if noise else 0.0
        x, y = x + hh * a * y, y + hh * b * x + sq * dW
    x0 = np.asarray(x0, dtype=float)
    mg, mom = moment_odes(r, rho, T, min(moment_h, h), noise, (x0[0] ** 2, x0[0] * x0[1], x0[1] ** 2))
    grid = np.linspace(0.0, T, nsteps + 1)[idx]
    return OscillatorEnsemble(grid, out, mg, mom, r, rho, noise, seed, {"h": hh, "replicas": replicas})


def energy(r: float, rho: float, xi, eta):
    """(r/rho)(1-rho) xi^2 + rho eta^2, conserved by the noiseless flow."""
    return (r / rho) * (1.0 - rho) * np.asarray(xi) ** 2 + rho * np.asarray(eta) ** 2


def dominant_frequency(paths, dt: float, pad: int = 8, burn_in: float = 0.0) -> float:
    """Angular frequency of the largest averaged periodogram ordinate (zero-padded, mean removed)."""
    paths = np.atleast_2d(np.asarray(paths, dtype=float))
    paths = paths[:, int(burn_in * paths.shape[1]):]
    L = paths.shape[1]
    X = np.fft.rfft(paths - paths.mean(axis=1, keepdims=True), n=pad * L, axis=1)
    P = (np.abs(X) ** 2).mean(axis=0)
    omega = 2 * np.pi * np.fft.rfftfreq(pad * L, dt)
    P[0] = 0.0
    return float(omega[np.argmax(P)])


def window_amplitudes(path, dt: float, window: float) -> np.ndarray:
    """RMS of a path over consecutive disjoint windows of the given duration."""
    path = np.asarray(path, dtype=float)
    w = int(round(window / dt))
    if w < 1 or w > path.size:
        raise ValueError("window must cover between one sample and the whole path")
    k = path.size // w
    return np.sqrt((path[: k * w].reshape(k, w) ** 2).mean(axis=1))


@dataclass
class ConvergenceReport:
    ladder: list[tuple[float, int]]
    T: float
    target_variance: float
    oscillator_variance: float
    micro_variance: list[float]
    micro_variance_se: list[float]
    gaps: list[float]
    health_ratio: list[float]
    monotone_up_to_one_inversion: bool

    def to_dict(self) -> dict:
        return {
            "ladder": [{"lambda_N": float(l), "n": int(n)} for l, n in self.ladder],
            "T": self.T,
            "target_variance": self.target_variance,
            "oscillator_variance": self.oscillator_variance,
            "micro_variance": self.micro_variance,
            "micro_variance_se": self.micro_variance_se,
            "gaps": self.gaps,
            "health_ratio": self.health_ratio,
            "monotone_up_to_one_inversion": self.monotone_up_to_one_inversion,
        }


def _inversions(xs) -> int:
    return sum(1 for a, b in zip(xs, xs[1:]) if b > a)


def convergence_study(
    r: float,
    rho: float,
    ladder,
    T: float,
    replicas: int,
    seed: int = 0,
    dt: float = 0.01,
    h: float = 1e-3,
    noise: float | None = None,
    workers: int = 1,
) -> ConvergenceReport:
    """Variance of xi_hat(T) along a ladder of (lambda_N, n) against the oscillator.

    Gaps are relative to the moment-ODE variance; the oscillator ensemble
    variance (same replica count) is reported alongside.
    """
    ladder = [(float(l), int(n)) for l, n in ladder]
    ratios = [scaling_health(l, n)[0] for l, n in ladder]
    if any(b >= a for a, b in zip(ratios, ratios[1:])):
        raise ValueError("ladder must have decreasing sqrt(lambda_N)/log n")
    _, mom = moment_odes(r, rho, T, 1e-4, noise)
    target = float(mom[-1, 0])
    osc = simulate_oscillator(r, rho, T, h, seed, replicas, noise=noise)
    osc_var = float(np.var(osc.paths[:, -1, 0], ddof=1))
    variances, ses, gaps = [], [], []
    for j, (lam_N, n) in enumerate(ladder):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ScalingWarning)
            paths = rescaled_replicas(r, rho, lam_N, n, T, seed + 1 + j, replicas, dt, workers)
        end = np.array([p.xi_hat[-1] for p in paths])
        var = float(np.var(end, ddof=1))
        variances.append(var)
        # normal-theory standard error of a sample variance
        ses.append(var * math.sqrt(2.0 / max(replicas - 1, 1)))
        gaps.append(abs(var / target - 1.0))
    return ConvergenceReport(ladder, T, target, osc_var, variances, ses, gaps, ratios, _inversions(gaps) <= 1)
