import csv
import json
import math
import subprocess
import sys

import pytest

from becgrav.analysis import fit_fringes
from becgrav.cli import main
from becgrav.constants import RB87
from becgrav.io import read_scan_csv


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def fig1_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("fig1")
    assert main(["fringes", "--preset", "fig1", "--out-dir", str(out)]) == 0
    return out


def test_fringes_outputs(fig1_run):
    summary = json.loads((fig1_run / "summary.json").read_text())
    assert summary["n_eff"] == pytest.approx(1.0, abs=1e-12)
    assert {"visibility", "alpha0", "period"} <= set(summary["fit"])
    assert summary["units"]["alpha0"] == "Hz/s"
    assert summary["g"]["unit"] == "m/s^2"
    assert 0.77 <= summary["fit"]["visibility"] <= 0.89


def test_fringes_reproducible(fig1_run, tmp_path):
    assert run("fringes", "--preset", "fig1", "--out-dir", tmp_path, "--workers", 2) == 0
    assert (tmp_path / "fringes.csv").read_bytes() == (fig1_run / "fringes.csv").read_bytes()


def test_rerun_from_summary_config(fig1_run, tmp_path):
    cfg = tmp_path / "resolved.json"
    cfg.write_text(json.dumps(json.loads((fig1_run / "summary.json").read_text())["config"]))
    assert run("fringes", "--config", cfg, "--out-dir", tmp_path) == 0
    assert (tmp_path / "fringes.csv").read_bytes() == (fig1_run / "fringes.csv").read_bytes()


def test_seed_override_changes_data(fig1_run, tmp_path):
    assert run("fringes", "--preset", "fig1", "--seed", 99, "--out-dir", tmp_path) == 0
    assert (tmp_path / "fringes.csv").read_bytes() != (fig1_run / "fringes.csv").read_bytes()


def test_fit_matches_library(fig1_run, tmp_path, capsys):
    summary = json.loads((fig1_run / "summary.json").read_text())
    period = summary["period_model"]
    ref = summary["fit"]["alpha0"]
    assert run("fit", fig1_run / "fringes.csv", "--period-guess", period, "--alpha-ref", ref,
               "--out-dir", tmp_path) == 0
    doc = json.loads((tmp_path / "fit.json").read_text())
    lib = fit_fringes(read_scan_csv(fig1_run / "fringes.csv"), period, alpha_ref=ref)
    assert doc["fit"]["alpha0"] == lib.alpha0
    assert doc["fit"]["visibility"] == pytest.approx(summary["fit"]["visibility"], rel=1e-12)


def test_fit_empty_file(tmp_path, capsys):
    p = tmp_path / "empty.csv"
    p.write_text("")
    assert run("fit", p, "--period-guess", 1e5, "--out-dir", tmp_path) == 2
    assert "usage error" in capsys.readouterr().err


def test_fit_malformed(tmp_path, capsys):
    p = tmp_path / "bad.csv"
    p.write_text("alpha_hz_per_s,population\n1,0.5\n2,abc\n")
    assert run("fit", p, "--period-guess", 1e5, "--out-dir", tmp_path) == 1
    assert "line 3" in capsys.readouterr().err


def test_dephasing_default(tmp_path):
    assert run("dephasing", "--out-dir", tmp_path, "--T-grid", "0.01,0.1,1") == 0
    with (tmp_path / "sensitivity.csv").open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 6
    for r in rows:
        T = float(r["T_s"])
        shot = 1 / math.sqrt(1e6) / (2 * RB87.wavenumber * RB87.g_ref * T**2)
        assert float(r["shot_noise_dg_over_g"]) == pytest.approx(shot, rel=1e-12)
    by_T = {}
    for r in rows:
        by_T.setdefault(r["T_s"], []).append((float(r["t_exp_s"]), float(r["dephasing_dg_over_g"])))
    for vals in by_T.values():
        vals.sort()
        assert vals[1][1] < vals[0][1]


def test_dephasing_from_preset(tmp_path):
    assert run("dephasing", "--preset", "fig1", "--T-grid", "0.01", "--t-exp", "0.012", "--out-dir", tmp_path) == 0
    assert json.loads((tmp_path / "dephasing.json").read_text())["atom_number"] == 2e6


def test_dephasing_current_experiment_row(tmp_path):
    assert run("dephasing", "--preset", "fig1", "--order", 3, "--T-grid", "0.004", "--t-exp", "0.012",
               "--out-dir", tmp_path) == 0
    with (tmp_path / "sensitivity.csv").open(newline="") as fh:
        (row,) = list(csv.DictReader(fh))
    assert 1e-7 / 3 <= float(row["dephasing_dg_over_g"]) <= 3e-7


def test_fig4_fringes(tmp_path):
    assert run("fringes", "--preset", "fig4", "--out-dir", tmp_path) == 0
    fit = json.loads((tmp_path / "summary.json").read_text())["fit"]
    T = 2.5e-3
    assert 65e3 <= fit["period"] <= 75e3
    assert 65e3 <= 1 / (2.42 * T**2) <= 75e3


def test_dephasing_bad_grid(tmp_path, capsys):
    assert run("dephasing", "--T-grid", "a,b", "--out-dir", tmp_path) == 2


def test_schema_violation_exit(tmp_path, capsys):
    cfg = tmp_path / "bad.toml"
    cfg.write_text('[source]\nkind = "condensate"\natom_number = 1e5\n'
                   '[sequence]\ntype = "mach-zehnder"\norder = 1\nT = "3"\n')
    assert run("fringes", "--config", cfg, "--out-dir", tmp_path) == 1
    assert "sequence.T" in capsys.readouterr().err


def test_config_and_preset_exclusive(tmp_path, capsys):
    assert run("bloch-area", "--preset", "fig4", "--config", "x.toml", "--out-dir", tmp_path) == 2


def test_bloch_area(tmp_path, capsys):
    assert run("bloch-area", "--preset", "fig4", "--out-dir", tmp_path) == 0
    doc = json.loads((tmp_path / "bloch_area.json").read_text())
    assert doc["n_eff"] == pytest.approx(2.42, abs=0.05)
    assert 65e3 <= doc["period"] <= 75e3


def test_spectroscopy(tmp_path):
    assert run("spectroscopy", "--preset", "fig1", "--out-dir", tmp_path, "--points", 41) == 0
    doc = json.loads((tmp_path / "spectroscopy.json").read_text())
    assert doc["width"] == pytest.approx(0.14, rel=0.1)


def test_pulse_calibrate_window_error(tmp_path, capsys):
    assert run("pulse-calibrate", "--order", 1, "--dp", 0.8, "--out-dir", tmp_path) == 1
    assert "ω_r" in capsys.readouterr().err


@pytest.mark.slow
def test_pulse_calibrate(tmp_path):
    assert run("pulse-calibrate", "--order", 1, "--dp", 0.14, "--out-dir", tmp_path) == 0
    doc = json.loads((tmp_path / "pulse.json").read_text())
    assert doc["units"]["tau"] == "s" and 0 < doc["ensemble_transfer"] <= 1


def test_console_entry_point():
    out = subprocess.run([sys.executable, "-m", "becgrav.cli", "--version"], capture_output=True, text=True)
    assert out.returncode == 0 and out.stdout.strip() == "0.1.0"
