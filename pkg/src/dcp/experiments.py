"""Seeded experiment recipes writing CSV tables plus config and metadata echoes."""
from __future__ import annotations

import dataclasses
import math
import platform
import sys
import time
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import fluct, io, macro, micro, rescaled, spectral
from .config import ConfigError, ExperimentConfig, check
from .laws import law_from_dict
from .model import ModelParams, endemic_point, stability

# recipe defaults; explicit config values always win
FIGURE2_DEFAULTS = {
    "params": {"lam": 100.0, "rho": 0.7, "r": 5.0},
    "n": 10_000,
    "replicas": 100,
    "T": 100.0,
    "dt": 1e-3,
    "sample_dt": 1e-2,
    "segment_length": 10.0,
    "initial": {"kind": "stationary"},
}
FIGURE3_DEFAULTS = {
    "params": {"lam": 50.0, "rho": 0.7, "r": 5.0},
    "n": 100_000,
    "replicas": 1,
    "T": 30.0,
    "h": 1e-3,
    "sample_dt": 1e-2,
}
SPECTRUM_DEFAULTS = {"sample_dt": 1e-2, "segment_length": 10.0}
STATIONARY_KINDS = ("spectrum", "figure2", "rescaled", "figure3")


@dataclass(frozen=True)
class Diagnostic:
    level: str  # "error", "warning" or "info"
    message: str

    def __str__(self):
        return f"{self.level}: {self.message}"


@dataclass
class RunResult:
    output_dir: Path
    digests: dict
    meta: dict


def with_defaults(cfg: ExperimentConfig) -> ExperimentConfig:
    """A copy of ``cfg`` with the recipe defaults of its kind filled in."""
    defaults = {"figure2": FIGURE2_DEFAULTS, "figure3": FIGURE3_DEFAULTS, "spectrum": SPECTRUM_DEFAULTS}.get(cfg.kind, {})
    base = ExperimentConfig(kind=cfg.kind)
    updates = {}
    for key, val in defaults.items():
        current = getattr(cfg, key)
        if current is None or current == getattr(base, key) or (key == "params" and not current):
            updates[key] = val
    return dataclasses.replace(cfg, **updates) if updates else dataclasses.replace(cfg)


def validate(cfg: ExperimentConfig) -> list[Diagnostic]:
    """Schema problems and regime diagnostics; ``cfg`` is left untouched."""
    cfg = with_defaults(cfg)
    out = [Diagnostic("error", msg) for msg in check(cfg)]
    if out:
        return out
    p = cfg.model_params()
    if p.supercritical:
        fp = endemic_point(p)
        rep = stability(p)
        out.append(Diagnostic("info", f"supercritical: (r+alpha)/lam = {p.threshold:.6g} < 1, endemic point "
                                      f"(m*, v*) = ({fp.m_star:.6g}, {fp.v_star:.6g})"))
        out.append(Diagnostic("info", f"stability class {rep.cls.value}; spiral window "
                                      f"lam in ({rep.lambda_minus:.6g}, {rep.lambda_plus:.6g})"))
    else:
        out.append(Diagnostic("info", f"subcritical: (r+alpha)/lam = {p.threshold:.6g} >= 1, the origin is the only fixed point"))
        if cfg.kind in STATIONARY_KINDS:
            out.append(Diagnostic("error", "subcritical: stationary spectrum undefined"))
    if p.rho < 1:
        out.append(Diagnostic("info", f"omega* = {p.omega_star:.6g}"))
    if cfg.kind in ("rescaled", "figure3"):
        ratio, healthy = rescaled.scaling_health(p.lam, cfg.n)
        level = "info" if healthy else "warning"
        out.append(Diagnostic(level, f"scaling health sqrt(lambda_N)/log n = {ratio:.4g} ({'ok' if healthy else 'unhealthy'})"))
        for lam_N, n in cfg.ladder or []:
            ratio, healthy = rescaled.scaling_health(lam_N, n)
            out.append(Diagnostic("info" if healthy else "warning",
                                  f"ladder ({lam_N:g}, {n}): sqrt(lambda_N)/log n = {ratio:.4g}"))
    return out


def _versions() -> dict:
    import numba
    import scipy

    return {
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "numba": numba.__version__,
    }


def _grid(T: float, step: float) -> np.ndarray:
    k = max(int(round(T / step)), 1)
    return np.linspace(0.0, T, k + 1)


def _law(cfg: ExperimentConfig, p: ModelParams):
    try:
        return law_from_dict(cfg.initial or {"kind": "stationary"}, p)
    except (KeyError, ValueError, TypeError) as e:
        raise ConfigError(f"initial: {e}") from None


class _Writer:
    """Collects output tables and writes them once computation has finished."""

    def __init__(self):
        self.csv = {}
        self.json = {}

    def table(self, name, header, columns):
        self.csv[name] = (header, columns)

    def document(self, name, obj):
        self.json[name] = obj

    def flush(self, out: Path) -> dict:
        out.mkdir(parents=True, exist_ok=True)
        digests = {}
        for name, (header, cols) in self.csv.items():
            (out / name).parent.mkdir(parents=True, exist_ok=True)
            path = io.write_csv(out / name, header, cols)
            digests[name] = io.file_digest(path)
        for name, obj in self.json.items():
            io.write_json(out / name, obj)
        return digests


def _run_micro(cfg, w: _Writer) -> dict:
    p = cfg.model_params()
    law = _law(cfg, p)
    grid = _grid(cfg.T, cfg.sample_dt or cfg.T / 1000)
    samples = micro.simulate_replicas(p, cfg.n, law, cfg.T, grid, cfg.replicas, cfg.seed, cfg.mode, cfg.dt, cfg.workers)
    for i, s in enumerate(samples):
        w.table(f"trajectories/replica_{i:04d}.csv", *s.table())
    lim = macro.integrate_from_law(p, law, cfg.T, cfg.h, richardson=False).at(grid)
    M = np.array([s.m_N for s in samples])
    V = np.array([s.v_N for s in samples])
    ddof = 1 if cfg.replicas > 1 else 0
    w.table("micro_summary.csv", ["t", "m_mean", "m_var", "v_mean", "v_var", "m", "v"],
            [grid, M.mean(0), M.var(0, ddof=ddof), V.mean(0), V.var(0, ddof=ddof), lim[:, 0], lim[:, 1]])
    return {
        "mode": cfg.mode,
        "events": int(sum(s.events for s in samples)),
        "events_per_replica": [s.events for s in samples],
        "absorbed_replicas": int(sum(s.absorbed for s in samples)),
        "final_mean_m_N": float(M[:, -1].mean()),
        "final_m": float(lim[-1, 0]),
    }


def _run_macro(cfg, w: _Writer) -> dict:
    p = cfg.model_params()
    law = _law(cfg, p)
    state = macro.integrate_from_law(p, law, cfg.T, cfg.h)
    every = max(int(round(cfg.sample_dt / state.h)), 1) if cfg.sample_dt and state.grid.size > 1 else 1
    w.table("macro.csv", *state.table(every))
    x = np.linspace(0.0, 1.0, cfg.law_points)[1:]
    lw = macro.limit_law(p, law, cfg.T, h=cfg.h, macro=state)
    w.table("limit_law.csv", *lw.table(x))
    atoms = lw.atoms()
    w.document("limit_law_atoms.json", atoms)
    return {
        "final": {"m": state.m[-1], "v": state.v[-1], "x2": state.x2[-1], "k": state.k[-1]},
        "step_error": state.step_error,
        "limit_law_total_mass": lw.total_mass(),
    }


def _run_fluct(cfg, w: _Writer) -> dict:
    p = cfg.model_params()
    law = _law(cfg, p)
    state = macro.integrate_from_law(p, law, cfg.T, cfg.h, richardson=False)
    every = max(int(round(cfg.sample_dt / cfg.h)), 1) if cfg.sample_dt else None
    x0_cov = fluct.initial_covariance(law) if cfg.gaussian_start else None
    ens = fluct.simulate_fluct(p, state, fluct.FluctState(), cfg.T, cfg.h, cfg.seed, cfg.replicas,
                               x0_cov=x0_cov, sample_every=every)
    w.table("fluct_paths.csv", *ens.table())
    w.table("fluct_moments.csv", ["t", "mean_xi", "mean_eta", "var_xi", "cov_xi_eta", "var_eta"],
            [ens.grid, ens.mean[:, 0], ens.mean[:, 1], ens.cov[:, 0, 0], ens.cov[:, 0, 1], ens.cov[:, 1, 1]])
    out = {"final_cov": ens.cov[-1]}
    if p.supercritical:
        out["stationary_covariance"] = fluct.stationary_covariance(p)
    return out


def _spectrum_summary(p, est):
    lo, hi = 0.5 * p.omega_star, 1.5 * p.omega_star
    peak = spectral.analytic_psd(p, spectral.peak_grid(p.omega_star)).peak()
    return {
        "omega_star": p.omega_star,
        "band": [lo, hi],
        "band_relative_error_s11": spectral.band_relative_error(est, lambda w: spectral.analytic_psd(p, w).s11, lo, hi),
        "analytic_peak": peak,
        "analytic_peak_offset": abs(peak / p.omega_star - 1.0),
        "estimator": est.meta,
    }


def _run_spectrum(cfg, w: _Writer) -> dict:
    p = cfg.model_params()
    omega = spectral.peak_grid(p.omega_star, cfg.omega_points)
    ana = spectral.analytic_psd(p, omega)
    asy = spectral.asymptotic_psd(p.r, p.rho, p.lam, omega)
    w.table("psd_analytic.csv", *ana.table())
    w.table("psd_asymptotic.csv", *asy.table())
    every = max(int(round(cfg.sample_dt / cfg.h)), 1)
    ens = fluct.simulate_fluct(p, None, fluct.FluctState(), cfg.T, cfg.h, cfg.seed, cfg.replicas,
                               x0_cov=fluct.stationary_covariance(p), sample_every=every)
    dt = float(ens.grid[1] - ens.grid[0])
    est = spectral.estimate_psd(ens.paths[..., 0], dt, cfg.window, cfg.burn_in, cfg.segment_length,
                                eta_paths=ens.paths[..., 1], omega_star=p.omega_star)
    w.table("psd_estimated.csv", *est.table())
    return _spectrum_summary(p, est)


def _run_figure2(cfg, w: _Writer) -> dict:
    p = cfg.model_params()
    law = _law(cfg, p)
    fp = endemic_point(p)
    step = cfg.sample_dt or cfg.dt
    grid = _grid(cfg.T, step)
    samples = micro.simulate_replicas(p, cfg.n, law, cfg.T, grid, cfg.replicas, cfg.seed, cfg.mode, cfg.dt, cfg.workers)
    # started at the stationary law the limit stays at (m*, v*)
    xi = np.sqrt(cfg.n) * (np.array([s.m_N for s in samples]) - fp.m_star)
    eta = np.sqrt(cfg.n) * (np.array([s.v_N for s in samples]) - fp.v_star)
    est = spectral.estimate_psd(xi, float(grid[1] - grid[0]), cfg.window, cfg.burn_in, cfg.segment_length,
                                eta_paths=eta, omega_star=p.omega_star)
    ana = spectral.analytic_psd(p, est.omega)
    asy = spectral.asymptotic_psd(p.r, p.rho, p.lam, est.omega)
    w.table("psd_estimated.csv", *est.table())
    w.table("psd_analytic.csv", *ana.table())
    w.table("psd_asymptotic.csv", *asy.table())
    out = _spectrum_summary(p, est)
    out["events"] = int(sum(s.events for s in samples))
    out["absorbed_replicas"] = int(sum(s.absorbed for s in samples))
    return out


def _rho_params(cfg):
    p = cfg.model_params()
    return p.r, cfg.rho, p.lam


def _run_rescaled(cfg, w: _Writer) -> dict:
    r, rho, lam_N = _rho_params(cfg)
    step = cfg.sample_dt or 1e-2
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", rescaled.ScalingWarning)
        paths = rescaled.rescaled_replicas(r, rho, lam_N, cfg.n, cfg.T, cfg.seed, cfg.replicas, step, cfg.workers)
    R, S = len(paths), paths[0].grid.size
    w.table("rescaled_paths.csv", ["replica", "t", "xi_hat", "eta_hat"], [
        np.repeat(np.arange(R), S).astype(float), np.concatenate([q.grid for q in paths]),
        np.concatenate([q.xi_hat for q in paths]), np.concatenate([q.eta_hat for q in paths]),
    ])
    every = max(int(round(step / cfg.h)), 1)
    osc = rescaled.simulate_oscillator(r, rho, cfg.T, cfg.h, cfg.seed + 1, cfg.replicas, noise=cfg.noise, sample_every=every)
    w.table("oscillator_paths.csv", *osc.table())
    w.table("oscillator_moments.csv", *osc.moment_table(every=max(int(round(step / 1e-4)), 1)))
    ratio, healthy = rescaled.scaling_health(lam_N, cfg.n)
    out = {
        "lambda_N": lam_N,
        "alpha_N": rho * lam_N,
        "scaling_health_ratio": ratio,
        "scaling_healthy": healthy,
        "target_frequency": rescaled.oscillator_frequency(r, rho),
        "micro_dominant_frequency": rescaled.dominant_frequency([q.xi_hat for q in paths], step),
        "oscillator_dominant_frequency": rescaled.dominant_frequency(osc.paths[..., 0], float(osc.grid[1] - osc.grid[0])),
        "oscillator_noise": osc.noise,
        "events": int(sum(q.events for q in paths)),
    }
    if cfg.ladder:
        rep = rescaled.convergence_study(r, rho, cfg.ladder, cfg.T, cfg.replicas, cfg.seed, step, cfg.h, cfg.noise, cfg.workers)
        w.document("convergence.json", rep.to_dict())
        out["convergence_gaps"] = rep.gaps
    return out


def _run_figure3(cfg, w: _Writer) -> dict:
    r, rho, lam_N = _rho_params(cfg)
    step = cfg.sample_dt
    every = max(int(round(step / cfg.h)), 1)
    osc = rescaled.simulate_oscillator(r, rho, cfg.T, cfg.h, cfg.seed, cfg.replicas, noise=cfg.noise, sample_every=every)
    w.table("figure3_oscillator.csv", *osc.table())
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", rescaled.ScalingWarning)
        path = rescaled.rescaled_from_micro(r, rho, lam_N, cfg.n, cfg.T, cfg.seed, step)
    w.table("figure3_micro.csv", *path.table())
    window = 2 * math.pi / rescaled.oscillator_frequency(r, rho)
    amps = rescaled.window_amplitudes(osc.paths[0, :, 0], float(osc.grid[1] - osc.grid[0]), window)
    return {
        "target_frequency": rescaled.oscillator_frequency(r, rho),
        "oscillator_dominant_frequency": rescaled.dominant_frequency(osc.paths[..., 0], float(osc.grid[1] - osc.grid[0])),
        "micro_dominant_frequency": rescaled.dominant_frequency(path.xi_hat, step),
        "oscillator_amplitude_cv": float(amps.std(ddof=1) / amps.mean()) if amps.size > 1 else math.nan,
        "scaling_health_ratio": path.health_ratio,
        "events": path.events,
    }


def _run_chaos(cfg, w: _Writer) -> dict:
    p = cfg.model_params()
    law = _law(cfg, p) if cfg.initial else None
    res = micro.coupled_chaos_experiment(p, cfg.n_ladder, cfg.T, cfg.replicas, cfg.seed, law, cfg.h, cfg.workers)
    w.table("chaos.csv", *res.table())
    fit = {"slope": res.fitted_slope, "slope_stderr": res.slope_stderr, "intercept": res.intercept}
    w.document("chaos_fit.json", fit)
    return fit


RUNNERS = {
    "micro": _run_micro,
    "macro": _run_macro,
    "fluct": _run_fluct,
    "spectrum": _run_spectrum,
    "rescaled": _run_rescaled,
    "chaos": _run_chaos,
    "figure2": _run_figure2,
    "figure3": _run_figure3,
}


def run_experiment(cfg: ExperimentConfig) -> RunResult:
    """Run ``cfg`` and write its artifacts; raises ConfigError for unusable configs."""
    eff = with_defaults(cfg)
    errors = [d.message for d in validate(eff) if d.level == "error"]
    if errors:
        raise ConfigError("; ".join(errors))
    out = eff.resolve_output_dir()
    w = _Writer()
    start = time.perf_counter()
    summary = RUNNERS[eff.kind](eff, w)
    wall = time.perf_counter() - start
    meta = {
        "kind": eff.kind,
        "seed": eff.seed,
        "versions": _versions(),
        "argv": sys.argv,
        "wall_time_s": wall,
        "summary": summary,
    }
    w.document("config.json", eff.to_dict())
    digests = w.flush(out)
    meta["csv_sha256"] = digests
    io.write_json(out / "meta.json", meta)
    return RunResult(out, digests, meta)
