import numpy as np

from levyhomog.config import StudyConfig
from levyhomog.study import run_almost_periodic_study, run_homogenization_study, run_property_suite


def small(**kw):
    return StudyConfig(eps_schedule=[1 / 8, 1 / 16], cell_n=32, far_radius=1.0, **kw)


def test_homogenization_report_is_deterministic(tmp_path):
    cfg = small()
    a = run_homogenization_study(cfg, tmp_path / "a")
    b = run_homogenization_study(cfg, tmp_path / "b")
    ra = (tmp_path / "a" / "homogenization_report.csv").read_bytes()
    assert ra == (tmp_path / "b" / "homogenization_report.csv").read_bytes()
    assert (tmp_path / "a" / "homogenization_timings.csv").exists()
    assert a.passed and np.all(np.isfinite(a.interior_errors))
    assert b.table is not None and not b.table.partial


def test_almost_periodic_sandwich(tmp_path):
    cfg = small(forcing_kind="almost", series_terms=3, M_schedule=[1, 2, 3])
    rep = run_almost_periodic_study(cfg, tmp_path)
    assert rep.passed
    assert all(r.margin >= 0 for r in rep.rows)
    assert [r.c_M for r in rep.rows if r.eps == 0.125] == [0.375, 0.125, 0.0]


def test_property_suite_negative_orbit():
    rep = run_property_suite(small(orbit_gamma=2.0, trials=3))
    assert rep.failures == ["orbit_density"]
