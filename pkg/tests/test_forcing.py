import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from levyhomog import (GOLDEN, MultiscaleForcing, build_trig_truncation, check_nonresonance,
                       constant_forcing, geometric_series, orbit_density, term)


def two_scale():
    return MultiscaleForcing([term(1.0, 1, 0, 2), term(0.5, 2, 1, 2, phase=0.3)], (1.0, 1 / GOLDEN))


def test_evaluate_matches_lift():
    f = two_scale()
    y = np.linspace(0, 3, 101)
    want = np.cos(2 * np.pi * y / 0.1) + 0.5 * np.cos(4 * np.pi * y / (0.1 * GOLDEN) + 0.3)
    assert np.allclose(f.evaluate(y, 0.1), want, atol=1e-9)
    assert f.mean() == 0.0
    assert f.sup_bound() == 1.5


def test_constant_forcing_and_shift():
    f = constant_forcing(2.5, M=2)
    assert f.M == 2
    assert np.allclose(f.evaluate(np.linspace(0, 1, 7)), 2.5)
    assert f.shifted(1.0).mean() == 3.5


def test_holder_constant_bounds_increments():
    assert two_scale().check_holder(500) <= 1.0


def test_term_validation():
    with pytest.raises(ValueError):
        MultiscaleForcing([term(1.0, 1, 0, 3)], (1.0, 2.0))
    with pytest.raises(ValueError):
        MultiscaleForcing([], (1.0, 0.0))


@pytest.mark.parametrize("vals,ok", [((1.0, GOLDEN), True), ((1.0, math.sqrt(2)), True),
                                     ((1.0, 3 / 7), False), ((2.0, 0.5), False),
                                     ((1.0, math.sqrt(2), math.sqrt(3)), True)])
def test_nonresonance_examples(vals, ok):
    rep = check_nonresonance(vals, 20)
    assert rep.passed is ok
    if not ok:
        assert abs(np.dot(rep.witness, vals)) <= 1e-9


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 15), st.integers(1, 15), st.floats(0.1, 10))
def test_rational_ratios_are_resonant_and_scale_invariant(p, q, s):
    rep = check_nonresonance((s, s * p / q), 20)
    assert not rep.passed
    assert check_nonresonance((s * p / q, s), 20).passed == rep.passed


def test_truncation_amplitudes():
    series = geometric_series(5)
    prev = np.inf
    for M in range(1, 6):
        gM, cM = build_trig_truncation(series, M)
        assert cM <= prev
        prev = cM
        y = np.linspace(0, 5, 2001)
        assert np.max(np.abs(series.evaluate(y) - gM.evaluate(y))) <= cM + 1e-12
    assert prev == 0.0


def test_truncation_rejects_non_summable():
    bad = MultiscaleForcing([term(np.inf, 1, 0, 1)] if False else [], (1.0,), tail_bound=np.inf)
    with pytest.raises(ValueError):
        build_trig_truncation(bad, 1)


def test_orbit_density():
    rep = orbit_density(GOLDEN, 0.1)
    assert rep.covered and rep.visited == 100 and rep.covering_time > 0
    bad = orbit_density(2.0, 0.1)
    assert not bad.covered and bad.witness is not None
