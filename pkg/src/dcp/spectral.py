"""Power spectral densities of the stationary fluctuations: closed forms, large-lam asymptotics, periodograms.

All densities use the two-sided convention S(w) = lim (1/t) E|int_0^t X e^{-iws} ds|^2,
tabulated for w >= 0, so that int_R S dw / (2 pi) is the variance.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .fluct import stationary_drift_diffusion
from .model import ModelParams


@dataclass
class SpectrumTable:
    omega: np.ndarray
    s11: np.ndarray
    s22: np.ndarray
    kind: str
    meta: dict = field(default_factory=dict)

    def table(self):
        return ["omega", "s11", "s22"], [self.omega, self.s11, self.s22]

    def peak(self, component: str = "s11") -> float:
        values = getattr(self, component)
        mask = self.omega > 0
        return float(self.omega[mask][np.argmax(values[mask])])


def _check_grid(omega):
    omega = np.asarray(omega, dtype=float)
    if omega.ndim != 1 or np.any(np.diff(omega) <= 0):
        raise ValueError("frequency grid must be one-dimensional and strictly increasing")
    return omega


def psd_from_matrices(F, A, omega) -> tuple[np.ndarray, np.ndarray]:
    """Diagonal spectral densities of dX = F X dt + Sigma dW with Sigma Sigma^T = A."""
    (F11, F12), (F21, F22) = np.asarray(F, float)
    a11, a12, a21, a22 = A[0][0], A[0][1], A[1][0], A[1][1]
    w2 = np.asarray(omega, float) ** 2
    det = F11 * F22 - F12 * F21
    tr = F11 + F22
    denom = (w2 - det) ** 2 + w2 * tr**2
    s11 = (a11 * w2 + a11 * F22**2 + a22 * F12**2 - 2 * F12 * F22 * a12) / denom
    s22 = (a22 * w2 + a22 * F11**2 + a11 * F21**2 - 2 * F11 * F21 * a21) / denom
    return s11, s22


def analytic_psd(p: ModelParams, omega) -> SpectrumTable:
    omega = _check_grid(omega)
    dd = stationary_drift_diffusion(p)
    s11, s22 = psd_from_matrices(dd.F, dd.A, omega)
    return SpectrumTable(omega, s11, s22, "analytic", {"params": p.as_dict(), "omega_star": p.omega_star})


def asymptotic_psd(r: float, rho: float, lam: float, omega) -> SpectrumTable:
    """Large-lam approximations of S11, S22 at fixed r and rho = alpha / lam."""
    if not 0 < rho < 1:
        raise ValueError("rho must lie in (0, 1)")
    omega = _check_grid(omega)
    w2 = omega**2
    q = 1.0 - rho
    denom = (w2 - r * q * lam) ** 2 + (r / rho) ** 2 * w2
    s11 = (2 * r * q * w2 + r * q * rho**2 * lam**2) / denom
    s22 = (r * q * w2 + r**3 * q / rho**2 + 2 * r**3 * q**3 / rho**2 - 2 * r**3 * q**2 / rho**2) / denom
    meta = {"r": r, "rho": rho, "lam": lam, "omega_star": math.sqrt(r * q * lam)}
    return SpectrumTable(omega, s11, s22, "asymptotic", meta)


def peak_grid(omega_star: float, points: int = 4096) -> np.ndarray:
    """Log-spaced search grid on [omega*/20, 20 omega*]."""
    return np.geomspace(omega_star / 20.0, omega_star * 20.0, points)


def _periodograms(paths, dt, nseg, taper):
    L = paths.shape[1]
    nsegs = L // nseg
    segs = paths[:, : nsegs * nseg].reshape(paths.shape[0] * nsegs, nseg)
    if taper == "hann":
        w = np.hanning(nseg)
    elif taper in (None, "none"):
        w = np.ones(nseg)
    else:
        raise ValueError(f"unknown taper {taper!r}")
    X = np.fft.rfft(segs * w, axis=1)
    P = dt * np.abs(X) ** 2 / (nseg * np.mean(w**2))
    return P.mean(axis=0), segs.shape[0]


def estimate_psd(
    paths,
    dt: float,
    window: str = "none",
    burn_in: float = 0.2,
    segment_length: float | None = None,
    eta_paths=None,
    omega_star: float | None = None,
) -> SpectrumTable:
    """Averaged periodogram of uniformly sampled paths (rows), after dropping a burn-in fraction.

    ``segment_length`` (time units) splits each path into non-overlapping
    segments whose periodograms are averaged too; the default keeps whole
    paths. The grid is one-sided, from 0 up to pi/dt.
    """
    paths = np.atleast_2d(np.asarray(paths, dtype=float))
    skip = int(math.floor(burn_in * paths.shape[1]))
    kept = paths[:, skip:]
    nseg = kept.shape[1] if segment_length is None else int(round(segment_length / dt))
    if nseg < 2 or nseg > kept.shape[1]:
        raise ValueError("segment length must cover at least two samples of the kept path")
    s11, count = _periodograms(kept, dt, nseg, window)
    if eta_paths is not None:
        eta = np.atleast_2d(np.asarray(eta_paths, dtype=float))[:, skip:]
        s22, _ = _periodograms(eta, dt, nseg, window)
    else:
        s22 = np.full_like(s11, np.nan)
    omega = 2 * np.pi * np.arange(s11.size) / (nseg * dt)
    duration = nseg * dt
    meta = {
        "dt": dt,
        "taper": window or "none",
        "burn_in": burn_in,
        "segment_duration": duration,
        "segments_averaged": count,
        "detrend": "none",
        "convention": "two-sided density tabulated on omega >= 0",
    }
    if omega_star:
        meta["omega_star"] = omega_star
        meta["short_segment"] = bool(duration < 8 * 2 * math.pi / omega_star)
    return SpectrumTable(omega, s11, s22, "estimated", meta)


def band_relative_error(estimate: SpectrumTable, reference, lo: float, hi: float, component: str = "s11") -> float:
    """Max relative error of ``estimate`` against reference(omega) on [lo, hi]."""
    mask = (estimate.omega >= lo) & (estimate.omega <= hi)
    if not np.any(mask):
        raise ValueError("no estimated frequencies in band")
    ref = reference(estimate.omega[mask])
    return float(np.max(np.abs(getattr(estimate, component)[mask] / ref - 1.0)))
