"""Model parameters, fixed points, linear stability and propagation-of-chaos constants."""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from enum import Enum


@dataclass(frozen=True)
class ModelParams:
    """Rates of the mean-field dissipative contact process.

    ``lam`` is the infection rate, ``alpha`` the viral-load decay rate and
    ``r`` the recovery rate (all in 1/time).
    """

    lam: float
    alpha: float
    r: float

    def __post_init__(self):
        for name in ("lam", "alpha", "r"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be a positive finite number, got {value!r}")

    @property
    def rho(self) -> float:
        return self.alpha / self.lam

    @property
    def threshold(self) -> float:
        """(r + alpha) / lam; the endemic point exists iff this is < 1."""
        return (self.r + self.alpha) / self.lam

    @property
    def supercritical(self) -> bool:
        return self.threshold < 1.0

    @property
    def omega_star(self) -> float:
        """Large-lam peak frequency sqrt(r (1 - rho) lam) of the fluctuation spectrum."""
        return math.sqrt(self.r * (1.0 - self.rho) * self.lam) if self.rho < 1 else math.nan

    @classmethod
    def from_rho(cls, lam: float, rho: float, r: float) -> "ModelParams":
        return cls(lam=lam, alpha=rho * lam, r=r)

    def as_dict(self) -> dict:
        return {"lam": self.lam, "alpha": self.alpha, "r": self.r}


class FixedPointKind(str, Enum):
    ORIGIN = "origin"
    ENDEMIC = "endemic"


@dataclass(frozen=True)
class FixedPoint:
    m_star: float
    v_star: float
    kind: FixedPointKind


class StabilityClass(str, Enum):
    STABLE_NODE = "stable-node"
    STABLE_SPIRAL = "stable-spiral"
    ORIGIN_STABLE = "origin-stable"


@dataclass(frozen=True)
class StabilityReport:
    jacobian: tuple[tuple[float, float], tuple[float, float]]
    eigenvalues: tuple[complex, complex]
    cls: StabilityClass
    lambda_minus: float
    lambda_plus: float


@dataclass(frozen=True)
class ChaosBound:
    """Constants of the O(1/sqrt(N)) bounds for a horizon T (may be inf)."""

    T: float
    A_T: float
    B_T: float
    C_T: float
    K1: float


def vector_field(p: ModelParams, m: float, v: float) -> tuple[float, float]:
    """Right-hand side of the (m, v) mean equations."""
    infection = p.lam * (1.0 - m) * v
    return infection - p.r * m, infection - (p.r + p.alpha) * v


def jacobian(p: ModelParams, m: float, v: float) -> tuple[tuple[float, float], tuple[float, float]]:
    """Jacobian of the (m, v) vector field; also the fluctuation drift matrix F(t)."""
    return (
        (-(p.lam * v + p.r), p.lam * (1.0 - m)),
        (-p.lam * v, p.lam * (1.0 - m) - (p.r + p.alpha)),
    )


def fixed_points(p: ModelParams) -> list[FixedPoint]:
    points = [FixedPoint(0.0, 0.0, FixedPointKind.ORIGIN)]
    if p.supercritical:
        m_star = 1.0 - p.threshold
        points.append(FixedPoint(m_star, p.r / (p.r + p.alpha) * m_star, FixedPointKind.ENDEMIC))
    return points


def endemic_point(p: ModelParams) -> FixedPoint:
    """The endemic fixed point; raises ValueError in the subcritical regime."""
    points = fixed_points(p)
    if len(points) < 2:
        raise ValueError(f"subcritical parameters (r+alpha)/lam = {p.threshold:g} >= 1: no endemic point")
    return points[1]


def spiral_thresholds(p: ModelParams) -> tuple[float, float]:
    """(lambda_minus, lambda_plus): the endemic point is a spiral strictly between them."""
    s = p.r + p.alpha
    scale = 2.0 * s * s / p.r
    root = math.sqrt(p.alpha / s)
    return scale * (1.0 - root), scale * (1.0 + root)


def eigenvalues_2x2(J) -> tuple[complex, complex]:
    """Eigenvalues of a real 2x2 matrix by the quadratic formula, larger real part first."""
    (a, b), (c, d) = J
    tr = a + d
    det = a * d - b * c
    disc = tr * tr - 4.0 * det
    if disc >= 0:
        sq = math.sqrt(disc)
        # avoid cancellation in the smaller-magnitude root
        q = 0.5 * (tr + math.copysign(sq, tr)) if tr != 0 else 0.5 * sq
        if q == 0.0:  # tr == det == 0
            return complex(0.0), complex(0.0)
        roots = sorted([q, det / q], reverse=True)
        return complex(roots[0]), complex(roots[1])
    sq = cmath.sqrt(disc)
    return 0.5 * (tr + sq), 0.5 * (tr - sq)


def stability(p: ModelParams) -> StabilityReport:
    lo, hi = spiral_thresholds(p)
    if not p.supercritical:
        J = jacobian(p, 0.0, 0.0)
        return StabilityReport(J, eigenvalues_2x2(J), StabilityClass.ORIGIN_STABLE, lo, hi)
    fp = endemic_point(p)
    J = jacobian(p, fp.m_star, fp.v_star)
    cls = StabilityClass.STABLE_SPIRAL if lo < p.lam < hi else StabilityClass.STABLE_NODE
    return StabilityReport(J, eigenvalues_2x2(J), cls, lo, hi)


def _safe_exp(x: float) -> float:
    try:
        return math.exp(x)
    except OverflowError:
        return math.inf


def _mul(a: float, b: float) -> float:
    # 0 * inf must stay 0 (the T = 0 prefactor)
    if a == 0.0 or b == 0.0:
        return 0.0
    return a * b


def chaos_bounds(p: ModelParams, T: float, K1: float = 1.0) -> ChaosBound:
    """A_T, B_T, C_T of the propagation-of-chaos estimates; overflow reports inf.

    K1 stands for the L^1 Burkholder-Davis-Gundy constant, which has no
    agreed numerical value; every bound is linear in it or in exp terms.
    """
    if T < 0 or K1 <= 0:
        raise ValueError("need T >= 0 and K1 > 0")
    growth = _safe_exp((p.alpha + 3.0 * p.lam + 2.0 * p.r) * T)
    A_T = _mul(p.lam * T, growth)
    B_T = _mul(p.lam * T + 1.0 + K1 * math.sqrt(T * (p.lam + p.r)), growth)
    D_T = 1.0 + p.lam * T + K1 * (3.0 * math.sqrt(p.lam) + math.sqrt(p.r)) * math.sqrt(T)
    C_T = 2.0 * A_T + _mul(D_T, _safe_exp((2.0 * p.alpha + p.r) * T))
    return ChaosBound(T=T, A_T=A_T, B_T=B_T, C_T=C_T, K1=K1)
