"""Experiment configuration: a YAML file mapped onto a flat dataclass."""
from __future__ import annotations

import math
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import yaml

from .model import ModelParams

KINDS = ("micro", "macro", "fluct", "spectrum", "rescaled", "chaos", "figure2", "figure3")

# fields that must be present (non-null) for each kind; figure recipes fill their own defaults
REQUIRED = {
    "micro": ("n", "T", "replicas", "initial"),
    "macro": ("T", "initial"),
    "fluct": ("T", "replicas", "initial"),
    "spectrum": ("T", "replicas"),
    "rescaled": ("n", "T", "replicas"),
    "chaos": ("n_ladder", "T", "replicas"),
    "figure2": (),
    "figure3": (),
}

OUTPUT_ROOT_ENV = "DCP_OUTPUT_ROOT"
FLOAT_FIELDS = ("T", "h", "dt", "sample_dt", "burn_in", "segment_length", "noise")


class ConfigError(ValueError):
    """The configuration is malformed or inconsistent."""


@dataclass
class ExperimentConfig:
    kind: str
    params: dict = field(default_factory=dict)
    seed: int = 0
    name: str | None = None
    output_dir: str | None = None
    initial: dict | None = None
    n: int | None = None
    n_ladder: list | None = None
    ladder: list | None = None
    T: float | None = None
    h: float = 1e-3
    dt: float = 1e-3
    sample_dt: float | None = None
    replicas: int | None = None
    burn_in: float = 0.2
    segment_length: float | None = None
    window: str = "none"
    mode: str = "exact"
    workers: int = 1
    noise: float | None = None
    gaussian_start: bool = False
    omega_points: int = 4096
    law_points: int = 201

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError("configuration must be a mapping")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown field(s): {', '.join(unknown)}")
        if "kind" not in d:
            raise ConfigError("missing field: kind")
        d = dict(d)
        # YAML 1.1 reads 1e-3 as a string
        for name in FLOAT_FIELDS:
            d[name] = _number(d[name]) if name in d else d.get(name, getattr(cls, name, None))
        if isinstance(d.get("params"), dict):
            d["params"] = {k: _number(v) for k, v in d["params"].items()}
        d = {k: v for k, v in d.items() if k in known}
        return cls(**d)

    def model_params(self) -> ModelParams:
        """(lam, alpha, r); ``rho`` may replace alpha as alpha = rho * lam."""
        p = self.params or {}
        try:
            lam, r = float(p["lam"]), float(p["r"])
        except KeyError as e:
            raise ConfigError(f"params: missing field {e.args[0]}") from None
        if p.get("alpha") is not None:
            alpha = float(p["alpha"])
        elif p.get("rho") is not None:
            alpha = float(p["rho"]) * lam
        else:
            raise ConfigError("params: missing field alpha (or rho)")
        try:
            return ModelParams(lam, alpha, r)
        except ValueError as e:
            raise ConfigError(f"params: {e}") from None

    @property
    def rho(self) -> float:
        p = self.params or {}
        if p.get("rho") is not None:
            return float(p["rho"])
        mp = self.model_params()
        return mp.alpha / mp.lam

    def resolve_output_dir(self) -> Path:
        if self.output_dir:
            return Path(self.output_dir)
        root = os.environ.get(OUTPUT_ROOT_ENV, "runs")
        return Path(root) / (self.name or self.kind)


def _number(x):
    if isinstance(x, str):
        try:
            return float(x)
        except ValueError:
            return x
    return x


def check(cfg: ExperimentConfig) -> list[str]:
    """Schema problems, one message per problem; empty when the config is usable."""
    problems = []
    if cfg.kind not in KINDS:
        return [f"kind: unknown kind {cfg.kind!r} (expected one of {', '.join(KINDS)})"]
    for name in REQUIRED[cfg.kind]:
        if getattr(cfg, name) is None:
            problems.append(f"{name}: required for kind={cfg.kind}")
    if cfg.kind != "figure3" or cfg.params:
        try:
            cfg.model_params()
        except ConfigError as e:
            problems.append(str(e))
    for name in ("h", "dt", "sample_dt", "T", "segment_length", "n", "replicas", "workers", "omega_points", "law_points"):
        val = getattr(cfg, name)
        if val is None:
            continue
        if isinstance(val, bool) or not isinstance(val, (int, float)) or not math.isfinite(val) or val <= 0:
            problems.append(f"{name}: must be a positive number, got {val!r}")
    for name in ("n", "replicas", "workers", "omega_points", "law_points", "seed"):
        val = getattr(cfg, name)
        if val is not None and (isinstance(val, bool) or not isinstance(val, int)):
            problems.append(f"{name}: must be an integer, got {val!r}")
    if isinstance(cfg.seed, int) and cfg.seed < 0:
        problems.append("seed: must be >= 0")
    if not (isinstance(cfg.burn_in, (int, float)) and 0 <= cfg.burn_in < 1):
        problems.append(f"burn_in: must lie in [0, 1), got {cfg.burn_in!r}")
    if cfg.mode not in ("exact", "euler"):
        problems.append(f"mode: expected exact or euler, got {cfg.mode!r}")
    if cfg.window not in ("none", "hann"):
        problems.append(f"window: expected none or hann, got {cfg.window!r}")
    if cfg.noise is not None and (not isinstance(cfg.noise, (int, float)) or cfg.noise < 0):
        problems.append("noise: must be >= 0")
    if cfg.n_ladder is not None:
        if not (isinstance(cfg.n_ladder, list) and all(isinstance(x, int) and x > 0 for x in cfg.n_ladder)):
            problems.append("n_ladder: must be a list of positive integers")
    if cfg.ladder is not None:
        ok = isinstance(cfg.ladder, list) and all(
            isinstance(x, (list, tuple)) and len(x) == 2 and x[0] > 0 and isinstance(x[1], int) and x[1] > 1
            for x in cfg.ladder
        )
        if not ok:
            problems.append("ladder: must be a list of [lambda_N, n] pairs")
    if cfg.kind in ("rescaled", "figure3") and cfg.params:
        p = cfg.params
        if p.get("rho") is None:
            problems.append(f"params: rho required for kind={cfg.kind}")
        elif not 0 < float(p["rho"]) < 1:
            problems.append("params: rho must lie in (0, 1)")
    if cfg.initial is not None and not isinstance(cfg.initial, dict):
        problems.append("initial: must be a mapping")
    return problems


def load(path) -> ExperimentConfig:
    text = Path(path).read_text()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigError(f"cannot parse {path}: {e}") from None
    try:
        return ExperimentConfig.from_dict(data)
    except TypeError as e:
        raise ConfigError(str(e)) from None


def dump(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)


def save(cfg: ExperimentConfig, path) -> Path:
    path = Path(path)
    path.write_text(dump(cfg))
    return path
