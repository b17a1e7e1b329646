import math

import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from dcp.model import ModelParams

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

rates = st.floats(min_value=0.05, max_value=200.0, allow_nan=False, allow_infinity=False)


@st.composite
def params(draw):
    return ModelParams(draw(rates), draw(rates), draw(rates))


@st.composite
def supercritical_params(draw):
    alpha = draw(st.floats(0.05, 100.0))
    r = draw(st.floats(0.05, 50.0))
    # lam strictly above r + alpha
    factor = draw(st.floats(1.05, 50.0))
    return ModelParams((r + alpha) * factor, alpha, r)


@pytest.fixture
def fig2_params():
    return ModelParams(100.0, 70.0, 5.0)


@pytest.fixture
def moderate_params():
    return ModelParams(4.0, 1.0, 1.0)


def close(a, b, tol):
    return math.isclose(a, b, rel_tol=0, abs_tol=tol)
