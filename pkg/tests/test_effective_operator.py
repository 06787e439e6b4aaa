import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from levyhomog import (CellProblemSpec, CoefficientField, ControlField, EffectiveOperatorTable,
                       OutOfTableRange, build_kernel, check_continuity, check_subellipticity,
                       solve_effective, tabulate)


def linear_table(a0=1.0):
    x, p, I = np.linspace(0, 1, 3), np.linspace(-1, 1, 3), np.linspace(-1, 1, 4)
    X, P, II = np.meshgrid(x, p, I, indexing="ij")
    vals = -a0 * II + 0.3 * P + 0.1 * X
    return EffectiveOperatorTable(x, p, I, vals, np.zeros_like(vals), a0)


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 1), st.floats(-1, 1), st.floats(-1, 1))
def test_trilinear_reproduces_linear_data(x, p, I):
    t = linear_table()
    val, dp, dI = t.query_with_grad(x, p, I)
    assert val == pytest.approx(-I + 0.3 * p + 0.1 * x, abs=1e-12)
    assert dp == pytest.approx(0.3) and dI == pytest.approx(-1.0)


def test_out_of_box_query_names_axis():
    with pytest.raises(OutOfTableRange, match="p outside"):
        linear_table().query(0.5, 2.0, 0.0)


def test_save_load_roundtrip(tmp_path):
    t = linear_table()
    t.save(tmp_path / "t.csv")
    s = EffectiveOperatorTable.load(tmp_path / "t.csv", 1.0)
    assert np.array_equal(s.values, t.values)
    assert (tmp_path / "t.csv").read_text().splitlines()[0] == "x,p,I,value,uncertainty"


def test_subellipticity_and_corruption():
    t = linear_table()
    assert check_subellipticity(t).passed
    bad = check_subellipticity(t.corrupted((1, 1, 2), 0.5))
    assert not bad.passed and bad.worst == (0.5, 0.0, pytest.approx(1 / 3))


def test_continuity_flags_step():
    t = linear_table()
    assert check_continuity(t).passed
    assert not check_continuity(t.corrupted((1, 1, 1), 1.0)).passed


def test_tabulate_linear_in_I():
    kern = build_kernel(1.5, 1 / 64)
    controls = ControlField([1.0, -1.0])
    fam = lambda x, p, I: CellProblemSpec("III", x, p, I, controls, CoefficientField(2.0),
                                          lambda y: np.cos(2 * np.pi * y), kernel=kern)
    t = tabulate(fam, [0.0], [0.0, 1.0], [0.0, 0.5, 1.0], a0=2.0, workers=2)
    assert np.allclose(np.diff(t.values, axis=2), -1.0, atol=1e-9)
    assert not t.partial
    again = tabulate(fam, [0.0], [0.0, 1.0], [0.0, 0.5, 1.0], a0=2.0)
    assert np.array_equal(again.values, t.values)


def test_effective_solve_constant_table():
    x, p, I = [0.0, 1.0], [-50.0, 50.0], [-50.0, 50.0]
    vals = np.broadcast_to(-np.asarray(I) - 3.0, (2, 2, 2))
    t = EffectiveOperatorTable(x, p, I, vals, np.zeros((2, 2, 2)), 1.0)
    u = solve_effective(t, build_kernel(1.0, 1 / 64, far_radius=1.0), exterior=3.0)
    assert np.allclose(u.values, 3.0, atol=1e-9)
