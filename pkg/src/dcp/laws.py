"""Laws on [0, 1] used as initial conditions, plus the stationary limit law.

A law is an optional set of atoms plus an optional density on (0, 1].
Particles are initialised from ``sample_log``, which returns log-loads
(``-inf`` for susceptible individuals) so that very small loads never
underflow to an exact zero.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import ModelParams, endemic_point


class InitialLaw:
    """Base class: subclasses provide atoms, density and sampling."""

    def atoms(self) -> list[tuple[float, float]]:
        return []

    def density(self, x):
        """Density of the continuous part on (0, 1] (zero when absent)."""
        return np.zeros_like(np.asarray(x, dtype=float))

    @property
    def has_density(self) -> bool:
        return False

    def atom_zero(self) -> float:
        return sum(w for x, w in self.atoms() if x == 0.0)

    def p_positive(self) -> float:
        return 1.0 - self.atom_zero()

    def moment(self, k: int) -> float:
        raise NotImplementedError

    def mean(self) -> float:
        return self.moment(1)

    def sample_log(self, rng: np.random.Generator, n: int) -> np.ndarray:
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return np.exp(self.sample_log(rng, n))

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class PointMass(InitialLaw):
    x0: float

    def __post_init__(self):
        if not 0.0 <= self.x0 <= 1.0:
            raise ValueError(f"point mass location must lie in [0, 1], got {self.x0}")

    def atoms(self):
        return [(self.x0, 1.0)]

    def moment(self, k):
        return self.x0**k

    def sample_log(self, rng, n):
        return np.full(n, math.log(self.x0) if self.x0 > 0 else -np.inf)

    def to_dict(self):
        return {"kind": "point", "x0": self.x0}


@dataclass(frozen=True)
class UniformLaw(InitialLaw):
    """Uniform law on (0, 1]."""

    def density(self, x):
        x = np.asarray(x, dtype=float)
        return np.where((x > 0) & (x <= 1), 1.0, 0.0)

    @property
    def has_density(self):
        return True

    def moment(self, k):
        return 1.0 / (k + 1)

    def sample_log(self, rng, n):
        # 1 - U lies in (0, 1]
        return np.log1p(-rng.random(n))

    def to_dict(self):
        return {"kind": "uniform"}


@dataclass(frozen=True)
class Mixture(InitialLaw):
    components: tuple
    weights: tuple

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if len(self.components) != len(w) or len(w) == 0:
            raise ValueError("mixture needs one weight per component")
        if np.any(w < 0) or not np.isclose(w.sum(), 1.0, rtol=0, atol=1e-12):
            raise ValueError(f"invalid mixture weights {list(self.weights)}: must be >= 0 and sum to 1")

    def atoms(self):
        out: dict[float, float] = {}
        for comp, w in zip(self.components, self.weights):
            for x, a in comp.atoms():
                out[x] = out.get(x, 0.0) + w * a
        return sorted(out.items())

    def density(self, x):
        return sum(w * comp.density(x) for comp, w in zip(self.components, self.weights))

    @property
    def has_density(self):
        return any(c.has_density for c in self.components)

    def moment(self, k):
        return sum(w * comp.moment(k) for comp, w in zip(self.components, self.weights))

    def sample_log(self, rng, n):
        which = rng.choice(len(self.weights), size=n, p=np.asarray(self.weights, dtype=float))
        out = np.empty(n)
        for j, comp in enumerate(self.components):
            idx = np.flatnonzero(which == j)
            out[idx] = comp.sample_log(rng, idx.size)
        return out

    def to_dict(self):
        return {
            "kind": "mixture",
            "weights": list(self.weights),
            "components": [c.to_dict() for c in self.components],
        }


@dataclass(frozen=True)
class StationaryLaw(InitialLaw):
    """Stationary law: atom (r+alpha)/lam at 0 plus c * x^((r-alpha)/alpha) on (0, 1]."""

    params: ModelParams = field(repr=True)

    def __post_init__(self):
        if not self.params.supercritical:
            raise ValueError(
                f"subcritical parameters (r+alpha)/lam = {self.params.threshold:g} >= 1: "
                "the only stationary law is the point mass at 0"
            )
        fp = endemic_point(self.params)
        k_alt = self.params.r / (self.params.lam * fp.v_star + self.params.r)
        if not math.isclose(k_alt, self.k_star, rel_tol=1e-12):
            raise AssertionError("k* mismatch between closed forms")

    @property
    def k_star(self) -> float:
        return self.params.threshold

    @property
    def atom_zero_mass(self) -> float:
        return self.params.threshold

    @property
    def coefficient(self) -> float:
        p = self.params
        return p.r / p.alpha * (1.0 - p.threshold)

    @property
    def exponent(self) -> float:
        p = self.params
        return (p.r - p.alpha) / p.alpha

    def atoms(self):
        return [(0.0, self.atom_zero_mass)]

    def density(self, x):
        x = np.asarray(x, dtype=float)
        inside = (x > 0) & (x <= 1)
        safe = np.where(inside, x, 1.0)
        return np.where(inside, self.coefficient * safe**self.exponent, 0.0)

    @property
    def has_density(self):
        return True

    def moment(self, k):
        p = self.params
        return p.r * (1.0 - p.threshold) / (p.r + k * p.alpha)

    def cdf_continuous(self, x):
        """CDF of the continuous part normalised to a probability law: x^(r/alpha)."""
        return np.clip(np.asarray(x, dtype=float), 0.0, 1.0) ** (self.params.r / self.params.alpha)

    def sample_log(self, rng, n):
        p = self.params
        zero = rng.random(n) < self.atom_zero_mass
        # inverse CDF on the continuous part: x = U^(alpha/r)
        logs = (p.alpha / p.r) * np.log1p(-rng.random(n))
        return np.where(zero, -np.inf, logs)

    def to_dict(self):
        return {"kind": "stationary"}


def law_from_dict(d: dict, params: ModelParams | None = None) -> InitialLaw:
    kind = d.get("kind")
    if kind == "point":
        return PointMass(float(d["x0"]))
    if kind == "uniform":
        return UniformLaw()
    if kind == "mixture":
        comps = tuple(law_from_dict(c, params) for c in d["components"])
        return Mixture(comps, tuple(float(w) for w in d["weights"]))
    if kind == "moments":
        return two_point_law(float(d["m0"]), float(d["v0"]))
    if kind == "stationary":
        if params is None:
            raise ValueError("stationary initial law needs model parameters")
        return StationaryLaw(params)
    raise ValueError(f"unknown initial law kind {kind!r}")


def atom_at_zero_mixture(p0: float, rest: InitialLaw | None = None) -> Mixture:
    """Mixture with mass p0 at 0 and 1 - p0 on ``rest`` (uniform by default)."""
    return Mixture((PointMass(0.0), rest or UniformLaw()), (p0, 1.0 - p0))


def two_point_law(m0: float, v0: float) -> InitialLaw:
    """Mass 1 - m0 at 0 and m0 at v0 / m0: the simplest law with P(x > 0) = m0 and E x = v0."""
    if not 0 <= v0 <= m0 <= 1:
        raise ValueError("need 0 <= v0 <= m0 <= 1")
    if m0 == 0:
        return PointMass(0.0)
    if m0 == 1:
        return PointMass(v0)
    return Mixture((PointMass(0.0), PointMass(v0 / m0)), (1.0 - m0, m0))
