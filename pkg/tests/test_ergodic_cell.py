import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from levyhomog import (GOLDEN, CellProblemSpec, CoefficientField, ControlField, MultiscaleForcing,
                       build_kernel, constant_forcing, control_value_oracle, ergodic_constant,
                       holder_diagnostic, term, torus_grid, verify_weak_solution)


def golden(amp=1.0):
    return MultiscaleForcing([term(amp, 1, 0, 2), term(amp, 1, 1, 2)], (1.0, 1 / GOLDEN))


@settings(max_examples=10, deadline=None)
@given(st.floats(0.2, 3.0), st.floats(-2, 2), st.floats(-2, 2))
def test_constant_data_exact(a0, I0, g0):
    spec = CellProblemSpec("III", 0.0, 0.0, I0, ControlField.none(), CoefficientField(a0),
                           constant_forcing(g0), kernel=build_kernel(1.0, 1 / 32))
    res = ergodic_constant(spec, (0.1, 0.01))
    assert res.d == pytest.approx(a0 * I0 + g0, abs=1e-9)
    assert not res.flagged


def test_lifted_ergodic_constant_and_trace(tmp_path):
    spec = CellProblemSpec("III", 0.5, 0.0, 0.5, ControlField.none(), CoefficientField(1.0),
                           golden(), kernel=build_kernel(1.0, 1 / 32, fold_tail=False))
    res = ergodic_constant(spec)
    assert abs(res.d_extrapolated - 0.5) <= 5e-3
    assert res.bound_ok
    res.write_trace(tmp_path / "trace.csv")
    lines = (tmp_path / "trace.csv").read_text().splitlines()
    assert lines[0].startswith("lambda,") and len(lines) == 6


def test_ergodic_constant_rejects_bad_schedule():
    spec = CellProblemSpec("III", 0.0, 0.0, 0.0, ControlField.none(), CoefficientField(1.0),
                           constant_forcing(0.0), kernel=build_kernel(1.0, 1 / 16))
    for sched in ([], [0.01, 0.1], [1e-5]):
        with pytest.raises(ValueError):
            ergodic_constant(spec, sched)


def test_case_validation():
    k1 = build_kernel(1.0, 1 / 16)
    with pytest.raises(ValueError):
        CellProblemSpec("I", 0, 0, 0, ControlField([1.0]), CoefficientField(1.0),
                        lambda y: y * 0, alpha=1.5, n=16)
    with pytest.raises(ValueError):
        CellProblemSpec("II", 0, 0, 0, ControlField.none(), CoefficientField(1.0),
                        lambda y: y * 0, kernel=k1)
    with pytest.raises(ValueError):
        CellProblemSpec("IV", 0, 0, 0, ControlField.none(), CoefficientField(1.0),
                        lambda y: y * 0, kernel=k1)


def test_holder_diagnostic():
    u = torus_grid(64, f=lambda y: np.sin(2 * np.pi * y))
    q = holder_diagnostic(u, 1.0)
    assert 2 * np.pi * 0.9 <= q <= 2 * np.pi
    assert holder_diagnostic(np.ones(16), 0.5) == 0.0
    with pytest.raises(ValueError):
        holder_diagnostic(u, 0.0)


def test_weak_solution_and_floor():
    spec = CellProblemSpec("III", 0.5, 0.0, 0.5, ControlField.none(), CoefficientField(1.0),
                           golden(), kernel=build_kernel(1.5, 1 / 32, far_radius=8.0,
                                                         fold_tail=False))
    d = ergodic_constant(spec).d
    assert verify_weak_solution(spec, d, 1e-2).passed
    low = verify_weak_solution(spec, d, 1e-6)
    assert not low.passed and "floor" in low.note


def test_control_oracle_matches_min_and_warns():
    f = lambda y: 1 - np.cos(2 * np.pi * y)
    spec = CellProblemSpec("I", 0.0, 0.0, 0.0, ControlField([1.0, -1.0]), CoefficientField(1.0),
                           f, alpha=0.5, n=128)
    orc = control_value_oracle(spec, 1e-3, n_fine=512)
    assert orc.controllable and abs(1e-3 * orc.value) <= 2e-2
    one_way = CellProblemSpec("I", 0.0, 0.0, 0.0, ControlField([1.0]), CoefficientField(1.0),
                              f, alpha=0.5, n=128)
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        control_value_oracle(one_way, 0.1, n_fine=256)
    assert any(issubclass(x.category, RuntimeWarning) for x in w)


def _cell(g, I=0.0, kappa=0.0):
    return CellProblemSpec("III", 0.2, 0.5, I, ControlField([1.0, -1.0], [0.0, 0.3]),
                           CoefficientField(lambda y: 1.5 + 0.5 * np.cos(2 * np.pi * y), a0=1.0),
                           lambda y: g(y) + kappa, kernel=build_kernel(1.5, 1 / 64))


def test_constant_shift_of_forcing_shifts_d():
    g = lambda y: np.sin(2 * np.pi * y)
    d0 = ergodic_constant(_cell(g)).d
    d1 = ergodic_constant(_cell(g, kappa=0.7)).d
    assert d1 - d0 == pytest.approx(0.7, abs=1e-8)


def test_linear_in_I_for_constant_a_and_zero_drift():
    k = build_kernel(1.0, 1 / 64)
    spec = lambda I: CellProblemSpec("III", 0, 0, I, ControlField.none(), CoefficientField(2.0),
                                     lambda y: np.cos(2 * np.pi * y), kernel=k)
    assert ergodic_constant(spec(0.75)).d - ergodic_constant(spec(0.0)).d == pytest.approx(1.5,
                                                                                          abs=1e-9)


def test_oscillation_decays_along_schedule():
    res = ergodic_constant(_cell(lambda y: np.sin(2 * np.pi * y)))
    osc = res.oscillations
    assert all(b <= a + 1e-12 for a, b in zip(osc, osc[1:]))
