import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from wetsim.eh import (
    PAPER_LOGISTIC,
    PAPER_PIECEWISE,
    IdealLinear,
    Logistic,
    Piecewise,
    dbm_to_linear,
    efficiency,
    harvest,
    linear_to_dbm,
)
from wetsim.errors import DomainError, ValidationError


def test_dbm_conversions():
    assert dbm_to_linear(0.0) == 1.0
    assert dbm_to_linear(-22.0) == pytest.approx(6.3096e-3, rel=1e-4)
    assert dbm_to_linear(-4.8) == pytest.approx(0.33113, rel=1e-4)
    assert linear_to_dbm(dbm_to_linear(-13.7)) == pytest.approx(-13.7)


def test_piecewise_regions():
    g = PAPER_PIECEWISE
    assert g.w1 == pytest.approx(10**-2.2) and g.w2 == pytest.approx(10**-0.48)
    assert harvest(g, 1e-3) == 0.0
    assert harvest(g, 0.1) == pytest.approx(0.025)
    assert harvest(g, g.w2) == pytest.approx(g.eta * g.w2)
    assert harvest(g, 50.0) == pytest.approx(g.eta * g.w2)


def test_ideal():
    assert harvest(IdealLinear(0.5), 3.0) == 1.5
    assert efficiency(IdealLinear(0.5)) == 0.5


def test_logistic():
    g = PAPER_LOGISTIC
    assert harvest(g, 0.0) == pytest.approx(0.0, abs=1e-15)
    # input in microwatts: p2 + 2000/p1 uW
    x = (g.p2 + 2000 / g.p1) * 1e-3
    assert harvest(g, x) == pytest.approx(g.ceiling, abs=1e-6)
    assert harvest(g, 1e3) <= g.ceiling
    assert harvest(g, 0.1) < harvest(g, 0.2) < g.ceiling


@given(st.lists(st.floats(0, 10.0), min_size=2, max_size=30))
def test_models_monotone(xs):
    x = np.sort(np.array(xs))
    for g in (IdealLinear(0.7), PAPER_PIECEWISE, PAPER_LOGISTIC):
        y = harvest(g, x)
        assert np.all(np.diff(y) >= -1e-15)
        assert np.all(y >= 0)
    assert np.all(harvest(PAPER_PIECEWISE, x) <= PAPER_PIECEWISE.eta * PAPER_PIECEWISE.w2 + 1e-15)


def test_model_validation():
    with pytest.raises((DomainError, ValidationError)):
        IdealLinear(1.5)
    with pytest.raises((DomainError, ValidationError)):
        Piecewise(0.5, 1.0, 0.5)
    with pytest.raises((DomainError, ValidationError)):
        Logistic(-1.0, 1.0, 1.0)
    with pytest.raises(DomainError):
        harvest(IdealLinear(1.0), -1.0)
