import csv

import pytest

from levyhomog.cli import main
from levyhomog.config import DEFAULT_CONFIG, ConfigError, StudyConfig, parse_real


@pytest.mark.parametrize("text,want", [("1/8", 0.125), ("-2", -2.0), ("sqrt(4)", 2.0),
                                       ("1/golden", 0.6180339887498948)])
def test_parse_real(text, want):
    assert parse_real(text) == pytest.approx(want)


def test_parse_real_rejects_garbage():
    with pytest.raises(ConfigError):
        parse_real("two")


def test_default_config_roundtrip():
    cfg = StudyConfig.from_string(DEFAULT_CONFIG)
    assert cfg.eps_schedule == [0.125, 0.0625, 0.03125]
    assert cfg.case == "III" and cfg.grid_h == pytest.approx(1 / 512)


@pytest.mark.parametrize("text", ["[problem]\nalpha = 2\n", "[nope]\nx = 1\n",
                                  "[problem]\ncolour = red\n", "[schedule]\neps = 1/16, 1/8\n",
                                  "[grid]\nh = 0.1\n"])
def test_invalid_config(text):
    with pytest.raises(ConfigError):
        StudyConfig.from_string(text)


def write(tmp_path, text):
    p = tmp_path / "c.ini"
    p.write_text(text)
    return str(p)


def test_cli_invalid_config_exit_2(tmp_path, capsys):
    assert main(["solve-eps", "--config", write(tmp_path, "[problem]\nalpha = 3\n")]) == 2
    assert "alpha" in capsys.readouterr().err


def test_cli_resonant_exit_2(tmp_path):
    cfg = write(tmp_path, "[forcing]\ngammas = 1, 3/7\n")
    assert main(["solve-eps", "--config", cfg, "--out", str(tmp_path)]) == 2


def test_cli_properties_pass_and_negative_control(tmp_path):
    assert main(["properties", "--out", str(tmp_path / "a"), "--seed", "1"]) == 0
    rows = list(csv.DictReader(open(tmp_path / "a" / "properties.csv")))
    assert {r["check"] for r in rows} >= {"comparison", "subellipticity", "orbit_density"}
    cfg = write(tmp_path, "[properties]\ncorrupt_table = yes\ntrials = 5\n")
    assert main(["properties", "--config", cfg, "--out", str(tmp_path / "b")]) == 1


def test_cli_solve_cell(tmp_path, capsys):
    cfg = write(tmp_path, "[grid]\ncell_n = 32\n[cell]\nI = 0.5\n")
    assert main(["solve-cell", "--config", cfg, "--out", str(tmp_path)]) == 0
    assert "d = 0.5" in capsys.readouterr().out
    assert (tmp_path / "lambda_trace.csv").exists()
