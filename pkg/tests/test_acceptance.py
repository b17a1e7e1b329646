"""Acceptance criteria; each test prints one PASS/FAIL line with the measured value."""
import math
import time
import warnings

import numpy as np
import pytest
from scipy import integrate, linalg, stats

from dcp import fluct, micro, rescaled
from dcp.config import ExperimentConfig
from dcp.experiments import run_experiment
from dcp.laws import StationaryLaw, atom_at_zero_mixture
from dcp.macro import integrate_macro
from dcp.model import FixedPointKind, ModelParams, StabilityClass, fixed_points, stability
from dcp.spectral import analytic_psd

pytestmark = pytest.mark.acceptance


@pytest.fixture
def report(capsys):
    def emit(label, ok, detail):
        with capsys.disabled():
            print(f"\n[acceptance] {label}: {'PASS' if ok else 'FAIL'} ({detail})")
        return ok
    return emit


def test_1_fixed_points(report):
    start = time.perf_counter()
    p = ModelParams(100.0, 70.0, 5.0)
    endemic = [fp for fp in fixed_points(p) if fp.kind == FixedPointKind.ENDEMIC][0]
    fp_err = max(abs(endemic.m_star - 0.25), abs(endemic.v_star - 1 / 60))
    cls = stability(p).cls
    # a few hundred relaxation times of the slowest mode, 1/|Re| = 0.3
    ode = integrate_macro(p, 0.9, 0.9, 0.9, 0.1, 60.0, 1e-4, richardson=False)
    ode_err = max(abs(ode.m[-1] - 0.25), abs(ode.v[-1] - 1 / 60))
    wall = time.perf_counter() - start
    ok = fp_err <= 1e-12 and cls == StabilityClass.STABLE_SPIRAL and ode_err <= 1e-6 and wall < 1.0
    assert report("criterion 1 fixed points", ok,
                  f"closed-form err {fp_err:.1e}, {cls.value}, ODE err {ode_err:.1e}, {wall:.2f}s")


def test_2_stationary_law(report):
    p = ModelParams(100.0, 70.0, 5.0)
    law = StationaryLaw(p)
    n = 100_000
    sys = micro.init(p, n, atom_at_zero_mixture(0.75), 0)
    # snapshots pooled after the burn-in average out the collective oscillation of m_N
    snaps = []
    for t in np.arange(5.0, 25.0 + 1e-9, 0.5):
        micro.run(sys, t, [t])
        snaps.append(sys.loads().copy())
    x = np.concatenate(snaps)
    atom = float(np.mean(x == 0))
    sigma = math.sqrt(0.75 * 0.25 / n)
    pos = x[x > 0]
    ks = stats.kstest(pos, law.cdf_continuous).statistic
    crit = 1.628 / math.sqrt(np.mean([np.count_nonzero(s) for s in snaps]))
    x2_target = 5 * 0.25 / (5 + 140)
    assert law.moment(2) == pytest.approx(x2_target, rel=1e-14)
    se = float(np.std(snaps[0] ** 2) / math.sqrt(n))
    x2 = float(np.mean(x**2))
    ok = abs(atom - 0.75) <= 3 * sigma and ks < crit and abs(x2 - x2_target) <= 3 * se
    assert report("criterion 2 stationary law", ok,
                  f"atom {atom:.5f} ({(atom - 0.75) / sigma:+.2f} sigma), KS {ks:.4f} < {crit:.4f}, "
                  f"E x^2 {x2:.6f} vs {x2_target:.6f} ({(x2 - x2_target) / se:+.2f} SE)")


def test_3_chaos_rate(report):
    res = micro.coupled_chaos_experiment(ModelParams(4.0, 1.0, 1.0), [100, 400, 1600, 6400], 2.0, 50, 0)
    ok = -0.65 <= res.fitted_slope <= -0.35
    assert report("criterion 3 propagation of chaos", ok,
                  f"slope {res.fitted_slope:.3f} +- {res.slope_stderr:.3f}, errors {np.round(res.sup_errors, 4).tolist()}")


def _clt_variances(replicas, seed, workers=1):
    p = ModelParams(4.0, 1.0, 1.0)
    law = atom_at_zero_mixture(0.5)
    N, T = 10_000, 2.0
    mac = integrate_macro(p, law.p_positive(), law.mean(), law.moment(2), law.atom_zero(), T, 1e-3, richardson=False)
    ens = fluct.simulate_fluct(p, mac, fluct.FluctState(), T, 1e-3, 1, 100_000, x0_cov=fluct.initial_covariance(law))
    sde = float(ens.cov[-1, 0, 0])
    runs = micro.simulate_replicas(p, N, law, T, [T], replicas, seed, workers=workers)
    xi = math.sqrt(N) * (np.array([s.m_N[-1] for s in runs]) - mac.m[-1])
    return float(np.var(xi, ddof=1)), sde


def test_4_fluctuation_clt(report):
    var, sde = _clt_variances(200, 0)
    rel = var / sde - 1
    ok = abs(rel) <= 0.10
    # sample variance of 200 draws has relative standard error sqrt(2/199) ~ 0.10
    assert report("criterion 4 fluctuation CLT", ok,
                  f"micro var {var:.4f} vs SDE {sde:.4f}, rel {rel:+.3f}, sampling SE {math.sqrt(2 / 199):.3f}")


def test_4_fluctuation_clt_high_power(report):
    var, sde = _clt_variances(4000, 99, workers=2)
    se = var * math.sqrt(2 / 3999)
    ok = abs(var - sde) <= 3 * se
    assert report("criterion 4 supplement (4000 replicas)", ok,
                  f"micro var {var:.4f} vs SDE {sde:.4f}, {(var - sde) / se:+.2f} SE")


def _quadrature(F, A):
    f = lambda s: (linalg.expm(F * s) @ A @ linalg.expm(F.T * s)).ravel()
    val, _ = integrate.quad_vec(f, 0, np.inf, epsabs=1e-14, epsrel=1e-12)
    return val.reshape(2, 2)


def test_5_lyapunov(report):
    rng = np.random.default_rng(5)
    worst_res = worst_quad = 0.0
    for _ in range(100):
        alpha = rng.uniform(0.1, 100)
        r = rng.uniform(0.1, 50)
        p = ModelParams((r + alpha) * rng.uniform(1.05, 20), alpha, r)
        dd = fluct.stationary_drift_diffusion(p)
        C = fluct.stationary_covariance(p)
        worst_res = max(worst_res, np.abs(dd.F @ C + C @ dd.F.T + dd.A).max())
        worst_quad = max(worst_quad, np.abs(C - _quadrature(dd.F, dd.A)).max() / np.abs(C).max())
    ok = worst_res <= 1e-10 and worst_quad <= 1e-6
    assert report("criterion 5 Lyapunov", ok, f"max residual {worst_res:.1e}, max quadrature gap {worst_quad:.1e}")


@pytest.fixture(scope="module")
def figure2_summary(tmp_path_factory):
    cfg = ExperimentConfig(kind="figure2", seed=20, output_dir=str(tmp_path_factory.mktemp("figure2")))
    return run_experiment(cfg).meta["summary"]


def test_6a_spectrum_band(report, figure2_summary):
    err = figure2_summary["band_relative_error_s11"]
    assert report("criterion 6a S11 estimate vs closed form on [0.5, 1.5] omega*", err <= 0.25,
                  f"max relative error {err:.3f}")


def test_6b_spectrum_peak(report, figure2_summary):
    off = figure2_summary["analytic_peak_offset"]
    assert report("criterion 6b analytic peak within 5% of omega*", off <= 0.05,
                  f"peak {figure2_summary['analytic_peak']:.4f} vs omega* {figure2_summary['omega_star']:.4f}, "
                  f"offset {off:.3f}")


def test_7a_noiseless_oscillator(report):
    r, rho = 5.0, 0.7
    w = rescaled.oscillator_frequency(r, rho)
    hs = (1e-3, 5e-4, 2.5e-4)
    errs = []
    for h in hs:
        ens = rescaled.simulate_oscillator(r, rho, 10.0, h, 0, 1, noise=0.0, x0=(1.0, 0.0))
        errs.append(np.abs(ens.paths[0, :, 0] - np.cos(w * ens.grid)).max())
    slope = float(np.polyfit(np.log(hs), np.log(errs), 1)[0])
    assert report("criterion 7a noiseless oscillator", abs(slope - 1) < 0.1,
                  f"error slope {slope:.3f}, errors {[f'{e:.2e}' for e in errs]}")


def test_7b_oscillator_moments(report):
    r, rho, T = 5.0, 0.7, 10.0
    ens = rescaled.simulate_oscillator(r, rho, T, 1e-3, 2, 10_000)
    emp = ens.empirical_moments()[-1]
    ref = rescaled.moment_odes(r, rho, T, 1e-4)[1][-1]
    scale = math.sqrt(ref[0] * ref[2])
    gaps = [abs(emp[0] / ref[0] - 1), abs(emp[1] - ref[1]) / scale, abs(emp[2] / ref[2] - 1)]
    assert report("criterion 7b oscillator second moments", max(gaps) <= 0.05,
                  f"relative gaps xi^2 {gaps[0]:.3f}, xi eta {gaps[1]:.3f}, eta^2 {gaps[2]:.3f}")


def test_7c_rescaled_micro_frequency(report):
    r, rho = 5.0, 0.7
    target = rescaled.oscillator_frequency(r, rho)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", rescaled.ScalingWarning)
        paths = rescaled.rescaled_replicas(r, rho, 50.0, 100_000, 60.0, 7, 4, dt=0.01)
    peak = rescaled.dominant_frequency([q.xi_hat for q in paths], 0.01)
    off = abs(peak / target - 1)
    # the closed-form stationary spectrum at the same lambda, on the rescaled clock
    p = ModelParams.from_rho(50.0, rho, r)
    w = np.linspace(0.0, 3 * p.omega_star, 30_001)
    finite = w[np.argmax(analytic_psd(p, w).s11)] / math.sqrt(50.0)
    assert report("criterion 7c rescaled micro peak within 10%", off <= 0.10,
                  f"peak {peak:.4f} vs {target:.4f}, offset {off:.3f}; closed-form peak at this lambda {finite:.4f}; "
                  f"sqrt(lambda)/log n {paths[0].health_ratio:.2f}")


def test_8_determinism(report, tmp_path):
    base = dict(seed=3)
    cfgs = [
        ExperimentConfig(kind="figure2", n=500, replicas=3, T=12.0, segment_length=4.0, **base),
        ExperimentConfig(kind="micro", params={"lam": 4.0, "alpha": 1.0, "r": 1.0}, n=300, T=2.0, replicas=3,
                         initial={"kind": "uniform"}, sample_dt=0.05, **base),
        ExperimentConfig(kind="rescaled", params={"lam": 25.0, "rho": 0.7, "r": 5.0}, n=2000, T=2.0, replicas=3, **base),
        ExperimentConfig(kind="chaos", params={"lam": 4.0, "alpha": 1.0, "r": 1.0}, n_ladder=[50, 100], T=1.0,
                         replicas=3, **base),
        ExperimentConfig(kind="fluct", params={"lam": 4.0, "alpha": 1.0, "r": 1.0}, T=1.0, replicas=50,
                         initial={"kind": "uniform"}, gaussian_start=True, **base),
    ]
    same = []
    for cfg in cfgs:
        digests = []
        for tag, workers in (("a", 1), ("b", 1), ("c", 2)):
            cfg.output_dir = str(tmp_path / f"{cfg.kind}_{tag}")
            cfg.workers = workers
            digests.append(run_experiment(cfg).digests)
        same.append(digests[0] == digests[1] == digests[2] and len(digests[0]) > 0)
    assert report("criterion 8 determinism", all(same),
                  ", ".join(f"{c.kind} {'identical' if s else 'DIFFERENT'}" for c, s in zip(cfgs, same)))
