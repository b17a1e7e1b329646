import json
import math
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dcp import config as config_mod
from dcp import io
from dcp.cli import EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, main
from dcp.config import ConfigError, ExperimentConfig, check
from dcp.experiments import run_experiment, validate, with_defaults

FIG2 = {"lam": 100.0, "rho": 0.7, "r": 5.0}


def write_yaml(tmp_path, text, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(text)
    return path


@given(st.floats(allow_nan=True, allow_infinity=True, width=64))
def test_fmt_round_trip(x):
    back = float(io.fmt(x))
    assert (math.isnan(x) and math.isnan(back)) or back == x


def test_csv_round_trip(tmp_path):
    cols = [np.array([0.1, 1 / 3, 1e-300]), np.array([np.pi, -2.0, 7.0])]
    io.write_csv(tmp_path / "a.csv", ["a", "b"], cols)
    header, data = io.read_csv(tmp_path / "a.csv")
    assert header == ["a", "b"]
    assert np.array_equal(data, np.column_stack(cols))
    with pytest.raises(ValueError):
        io.write_csv(tmp_path / "b.csv", ["a"], cols)


def test_config_round_trip(tmp_path):
    cfg = ExperimentConfig(kind="micro", params={"lam": 4.0, "alpha": 1.0, "r": 1.0}, n=100, T=1.0,
                           replicas=2, initial={"kind": "uniform"}, h=2e-4)
    assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg
    path = config_mod.save(cfg, tmp_path / "c.yaml")
    assert config_mod.load(path) == cfg


def test_yaml_exponent_strings_are_numbers(tmp_path):
    path = write_yaml(tmp_path, "kind: macro\nparams: {lam: 4.0, alpha: 1e-1, r: 1.0}\nT: 1\nh: 1e-3\ninitial: {kind: uniform}\n")
    cfg = config_mod.load(path)
    assert cfg.h == 1e-3 and cfg.params["alpha"] == 0.1


def test_unknown_field_rejected():
    with pytest.raises(ConfigError, match="bogus"):
        ExperimentConfig.from_dict({"kind": "macro", "bogus": 1})


def test_missing_field_is_named():
    cfg = ExperimentConfig(kind="micro", params={"lam": 4.0, "alpha": 1.0, "r": 1.0}, n=10, T=1.0, initial={"kind": "uniform"})
    problems = check(cfg)
    assert any(p.startswith("replicas") for p in problems)
    cfg = ExperimentConfig(kind="macro", params={"lam": 4.0, "r": 1.0}, T=1.0, initial={"kind": "uniform"})
    assert any("alpha" in p for p in check(cfg))


def test_bad_values_are_reported():
    cfg = ExperimentConfig(kind="macro", params={"lam": 4.0, "alpha": 1.0, "r": 1.0}, T=-1.0, h=0.0,
                           initial={"kind": "uniform"}, burn_in=1.5, mode="leapfrog")
    msgs = " | ".join(check(cfg))
    for field in ("T:", "h:", "burn_in:", "mode:"):
        assert field in msgs


def test_validate_fig2_diagnostics():
    diags = validate(ExperimentConfig(kind="figure2"))
    text = "\n".join(str(d) for d in diags)
    assert "stable-spiral" in text
    assert "omega* = 12.2474" in text
    assert not any(d.level == "error" for d in diags)


def test_validate_subcritical_spectrum():
    cfg = ExperimentConfig(kind="spectrum", params={"lam": 10.0, "rho": 0.7, "r": 5.0}, T=10.0, replicas=2)
    diags = validate(cfg)
    assert any(d.level == "error" and d.message == "subcritical: stationary spectrum undefined" for d in diags)
    with pytest.raises(ConfigError):
        run_experiment(cfg)


def test_validate_scaling_health():
    cfg = ExperimentConfig(kind="rescaled", params={"lam": 400.0, "rho": 0.7, "r": 5.0}, n=1000, T=1.0, replicas=1)
    assert any(d.level == "warning" and "unhealthy" in d.message for d in validate(cfg))


def test_with_defaults_keeps_explicit_values():
    cfg = with_defaults(ExperimentConfig(kind="figure2", replicas=3))
    assert cfg.replicas == 3 and cfg.n == 10_000 and cfg.params == FIG2


def test_macro_example(tmp_path):
    cfg = ExperimentConfig(kind="macro", params={"lam": 4.0, "alpha": 1.0, "r": 1.0},
                           initial={"kind": "moments", "m0": 0.9, "v0": 0.9}, T=60.0, sample_dt=0.01,
                           output_dir=str(tmp_path / "macro"))
    res = run_experiment(cfg)
    header, data = io.read_csv(res.output_dir / "macro.csv")
    assert header[:3] == ["t", "m", "v"]
    assert data[-1, 1] == pytest.approx(0.5, abs=1e-8) and data[-1, 2] == pytest.approx(0.25, abs=1e-8)
    assert (res.output_dir / "limit_law.csv").exists()
    meta = json.loads((res.output_dir / "meta.json").read_text())
    assert set(meta["csv_sha256"]) == {"macro.csv", "limit_law.csv"}
    assert "numpy" in meta["versions"]


def small_fig2(tmp_path, name, workers=1):
    return ExperimentConfig(kind="figure2", n=400, replicas=4, T=12.0, segment_length=4.0, seed=5,
                            workers=workers, output_dir=str(tmp_path / name))


def test_figure2_small_shares_grid(tmp_path):
    res = run_experiment(small_fig2(tmp_path, "a"))
    grids = [io.read_csv(res.output_dir / f)[1][:, 0] for f in ("psd_estimated.csv", "psd_analytic.csv", "psd_asymptotic.csv")]
    assert np.array_equal(grids[0], grids[1]) and np.array_equal(grids[0], grids[2])
    assert res.meta["summary"]["estimator"]["segments_averaged"] > 1


def test_runs_are_bit_identical(tmp_path):
    a = run_experiment(small_fig2(tmp_path, "a"))
    b = run_experiment(small_fig2(tmp_path, "b", workers=2))
    assert a.digests == b.digests


def test_micro_run_layout(tmp_path):
    cfg = ExperimentConfig(kind="micro", params={"lam": 4.0, "alpha": 1.0, "r": 1.0}, n=50, T=1.0,
                           replicas=2, initial={"kind": "uniform"}, sample_dt=0.1, output_dir=str(tmp_path / "m"))
    res = run_experiment(cfg)
    header, data = io.read_csv(res.output_dir / "trajectories" / "replica_0001.csv")
    assert header == ["t", "m_N", "v_N", "v_N2"] and data.shape[0] == 11


def test_cli_exit_codes(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("DCP_OUTPUT_ROOT", str(tmp_path / "root"))
    good = write_yaml(tmp_path, "kind: macro\nname: tiny\nparams: {lam: 4.0, alpha: 1.0, r: 1.0}\nT: 1.0\ninitial: {kind: uniform}\n")
    assert main(["run", str(good)]) == EXIT_OK
    assert (tmp_path / "root" / "tiny" / "macro.csv").exists()
    assert main(["validate", str(good)]) == EXIT_OK
    assert main(["describe", str(good)]) == EXIT_OK
    assert "kind: macro" in capsys.readouterr().out

    bad = write_yaml(tmp_path, "kind: micro\nparams: {lam: 4.0, alpha: 1.0, r: 1.0}\nT: 1.0\n", "bad.yaml")
    assert main(["run", str(bad)]) == EXIT_CONFIG
    assert "replicas" in capsys.readouterr().err
    assert main(["validate", str(tmp_path / "missing.yaml")]) == EXIT_CONFIG

    # well-formed, but the step is far too coarse for lam = 1e6
    broken = write_yaml(tmp_path, "kind: macro\nparams: {lam: 1e6, alpha: 1.0, r: 1.0}\nT: 1.0\nh: 0.5\n"
                                  "initial: {kind: uniform}\n", "broken.yaml")
    assert main(["run", str(broken), "-o", str(tmp_path / "x")]) == EXIT_RUNTIME


def test_console_script_entry(tmp_path):
    cfg = write_yaml(tmp_path, "kind: figure2\n")
    out = subprocess.run([sys.executable, "-m", "dcp.cli", "validate", str(cfg)], capture_output=True, text=True)
    assert out.returncode == 0 and "omega*" in out.stdout
