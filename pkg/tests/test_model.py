import math

import numpy as np
import pytest
from hypothesis import given

from conftest import params, supercritical_params
from dcp.model import (
    FixedPointKind,
    ModelParams,
    StabilityClass,
    chaos_bounds,
    eigenvalues_2x2,
    endemic_point,
    fixed_points,
    jacobian,
    spiral_thresholds,
    stability,
    vector_field,
)


def test_rejects_nonpositive_rates():
    for bad in [(0, 1, 1), (1, -1, 1), (1, 1, math.nan), (1, 1, math.inf)]:
        with pytest.raises(ValueError):
            ModelParams(*bad)


def test_endemic_point_fig2_parameters(fig2_params):
    pts = fixed_points(fig2_params)
    assert [p.kind for p in pts] == [FixedPointKind.ORIGIN, FixedPointKind.ENDEMIC]
    fp = pts[1]
    assert fp.m_star == pytest.approx(0.25, abs=1e-12)
    assert fp.v_star == pytest.approx(1 / 60, abs=1e-12)


def test_subcritical_has_only_origin():
    pts = fixed_points(ModelParams(1.0, 1.0, 1.0))
    assert len(pts) == 1 and pts[0].m_star == 0 and pts[0].v_star == 0
    with pytest.raises(ValueError):
        endemic_point(ModelParams(1.0, 1.0, 1.0))


def test_endemic_point_moderate(moderate_params):
    fp = endemic_point(moderate_params)
    assert (fp.m_star, fp.v_star) == pytest.approx((0.5, 0.25), abs=1e-15)
    assert np.max(np.abs(vector_field(moderate_params, fp.m_star, fp.v_star))) < 1e-10


def test_stability_fig2_is_spiral(fig2_params):
    rep = stability(fig2_params)
    lo, hi = spiral_thresholds(fig2_params)
    assert lo == pytest.approx(2250 * (1 - math.sqrt(70 / 75)))
    assert lo == pytest.approx(76.1, rel=5e-3)
    assert hi == pytest.approx(4424, abs=0.5)
    assert rep.cls is StabilityClass.STABLE_SPIRAL
    assert all(abs(e.imag) > 0 for e in rep.eigenvalues)


def test_boundary_is_origin_stable():
    assert stability(ModelParams(2.0, 1.0, 1.0)).cls is StabilityClass.ORIGIN_STABLE


def test_node_below_lambda_minus():
    # lam just above r + alpha but below lambda_minus
    p = ModelParams(2.2, 1.0, 1.0)
    assert p.supercritical and p.lam < spiral_thresholds(p)[0]
    rep = stability(p)
    assert rep.cls is StabilityClass.STABLE_NODE
    assert all(e.imag == 0 for e in rep.eigenvalues)


def test_eigenvalues_match_numpy():
    rng = np.random.default_rng(0)
    for _ in range(200):
        J = rng.normal(size=(2, 2)) * 10 ** rng.uniform(-3, 3)
        ours = np.sort_complex(np.array(eigenvalues_2x2(J)))
        ref = np.sort_complex(np.linalg.eigvals(J))
        assert np.allclose(ours, ref, rtol=1e-9, atol=1e-12 * np.abs(J).max())


def test_eigenvalues_stiff_real_roots_are_accurate():
    # widely separated roots: the small one must not cancel
    J = ((-1e8, 0.0), (0.0, -1e-8))
    ev = sorted(e.real for e in eigenvalues_2x2(J))
    assert ev[0] == pytest.approx(-1e8) and ev[1] == pytest.approx(-1e-8, rel=1e-12)


def test_chaos_bounds_examples():
    p = ModelParams(1.0, 1.0, 1.0)
    assert chaos_bounds(p, 0.0).A_T == 0.0
    assert chaos_bounds(p, 1.0).A_T == pytest.approx(math.exp(6), rel=1e-14)
    fig2 = ModelParams(100.0, 70.0, 5.0)
    # e^380 is still a finite double
    large = chaos_bounds(fig2, 1.0)
    assert large.A_T == pytest.approx(100 * math.exp(380), rel=1e-12)
    huge = chaos_bounds(fig2, 2.0)
    assert huge.A_T == math.inf and huge.B_T == math.inf and huge.C_T == math.inf
    assert huge.K1 == 1.0


def test_chaos_bounds_depend_on_k1():
    p = ModelParams(1.0, 1.0, 1.0)
    a, b = chaos_bounds(p, 1.0, K1=1.0), chaos_bounds(p, 1.0, K1=2.0)
    assert a.A_T == b.A_T and b.B_T > a.B_T


@given(supercritical_params())
def test_endemic_point_is_zero_of_vector_field(p):
    fp = endemic_point(p)
    f = vector_field(p, fp.m_star, fp.v_star)
    assert max(abs(f[0]), abs(f[1])) <= 1e-12 * max(1.0, p.lam)


@given(params())
def test_threshold_ordering(p):
    lo, hi = spiral_thresholds(p)
    assert lo < hi
    assert p.r + p.alpha < lo


@given(supercritical_params())
def test_endemic_point_is_stable(p):
    rep = stability(p)
    assert all(e.real < 0 for e in rep.eigenvalues)
    tr = rep.jacobian[0][0] + rep.jacobian[1][1]
    assert tr == pytest.approx(-p.r * p.lam / (p.r + p.alpha), rel=1e-9, abs=1e-9)


@given(supercritical_params())
def test_class_matches_eigenvalue_type(p):
    rep = stability(p)
    lo, hi = rep.lambda_minus, rep.lambda_plus
    # skip draws too close to a threshold to resolve in floating point
    if min(abs(p.lam - lo), abs(p.lam - hi)) < 1e-6 * p.lam:
        return
    complex_pair = any(abs(e.imag) > 0 for e in rep.eigenvalues)
    assert complex_pair == (rep.cls is StabilityClass.STABLE_SPIRAL)


def test_jacobian_at_origin():
    p = ModelParams(3.0, 1.0, 0.5)
    assert np.allclose(jacobian(p, 0, 0), [[-0.5, 3.0], [0.0, 3.0 - 1.5]])
