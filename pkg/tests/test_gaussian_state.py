import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from coherent_inflation.errors import DomainError
from coherent_inflation.gaussian_state import (
    GaussianState,
    coherence_speed,
    diagnostics,
    ground_state,
    inflated_state,
)
from coherent_inflation.quantities import HBAR, VELOCITY, Quantity

MASS = 3.6e-14
W0 = 2 * math.pi * 1e5


def test_ground_state_is_pure_minimum_uncertainty():
    gs = ground_state(MASS, W0)
    assert gs.v_x * gs.v_p == pytest.approx(HBAR**2 / 4, rel=1e-15)
    assert gs.purity == 1.0
    assert gs.coherence_length == pytest.approx(math.sqrt(8 * gs.v_x), rel=1e-15)


def test_ground_state_accepts_quantities():
    from coherent_inflation.quantities import MASS as MASS_DIM, RATE

    gs = ground_state(Quantity(MASS, MASS_DIM), Quantity(W0, RATE))
    assert gs.v_x == ground_state(MASS, W0).v_x


def test_heisenberg_violation_rejected():
    with pytest.raises(DomainError):
        GaussianState(1.0, 1e-3, HBAR**2 / 4 / 1e-3 * 0.5, 0.0)


def test_nonpositive_moments_rejected():
    with pytest.raises(DomainError):
        GaussianState(1.0, 0.0, 1.0, 0.0)
    with pytest.raises(DomainError):
        GaussianState(-1.0, 1.0, 1.0, 0.0)


def test_inconsistent_uncertainty_rejected():
    gs = ground_state(MASS, W0)
    with pytest.raises(DomainError):
        GaussianState(MASS, gs.v_x, gs.v_p, 0.0, uncertainty=2 * gs.v_x * gs.v_p)


def test_mixed_state_purity_and_coherence():
    gs = ground_state(MASS, W0)
    mixed = GaussianState(MASS, gs.v_x, 4 * gs.v_p, 0.0)
    assert mixed.purity == pytest.approx(0.5, rel=1e-14)
    assert mixed.coherence_length == pytest.approx(0.5 * gs.coherence_length, rel=1e-14)


@given(st.floats(1.0, 1e3), st.floats(1.0, 1e3))
def test_inflated_state_stays_pure(g_x, g_p):
    gs = ground_state(MASS, W0)
    inf = inflated_state(gs, g_x, g_p)
    assert inf.purity == 1.0
    assert inf.v_x == pytest.approx(g_x**2 * gs.v_x, rel=1e-14)
    assert inf.v_p == pytest.approx(g_p**2 * gs.v_p, rel=1e-14)
    direct = inf.v_x * inf.v_p - inf.c**2
    assert direct == pytest.approx(HBAR**2 / 4, rel=1e-6)


def test_inflated_state_needs_gain_above_one():
    with pytest.raises(DomainError):
        inflated_state(ground_state(MASS, W0), 0.5, 1.0)


def test_record_round_trip():
    gs = GaussianState(MASS, 2e-24, 3e-20, 1e-22)
    assert GaussianState.from_record(gs.to_record()) == gs


def test_coherence_speed():
    gs = ground_state(MASS, W0)
    v = coherence_speed(gs)
    assert v.dim == VELOCITY
    assert v.value == pytest.approx(math.sqrt(8 * gs.v_p) / MASS, rel=1e-15)


def test_diagnostics():
    d = diagnostics(ground_state(MASS, W0))
    assert d.purity == 1.0
    assert d.position_stdev == pytest.approx(math.sqrt(HBAR / (2 * MASS * W0)))
