import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from becgrav.analysis import fit_fringes
from becgrav.config import ConfigError, load_config, parse_text, preset_names, resolve, validate
from becgrav.interferometer import FringeScan
from becgrav.io import EmptyScanError, ScanFormatError, fit_document, read_scan_csv, write_scan_csv
from becgrav.units import BASE_UNIT, UNITS, UnitError, format_quantity, parse_quantity

from conftest import preset_experiment


def _scan():
    rng = np.random.default_rng(0)
    alpha = 2.5e7 + rng.normal(size=12) * 1e5
    return FringeScan(alpha, rng.uniform(size=12), np.full(12, 1000), np.arange(12, dtype=np.uint64))


def test_csv_round_trip_bit_identical(tmp_path):
    scan = _scan()
    path = write_scan_csv(scan, tmp_path / "a.csv")
    back = read_scan_csv(path)
    np.testing.assert_array_equal(back.alpha, scan.alpha)
    np.testing.assert_array_equal(back.population, scan.population)
    np.testing.assert_array_equal(back.atoms, scan.atoms)
    assert path.read_bytes().count(b"\r\n") == 13
    write_scan_csv(back, tmp_path / "b.csv")
    assert (tmp_path / "b.csv").read_bytes() == path.read_bytes()


@pytest.mark.parametrize(
    "body, line",
    [
        ("alpha_hz_per_s,population\n1.0,0.5\n2.0,oops\n", 3),
        ("alpha_hz_per_s,population\n1.0,0.5\n2.0\n", 3),
        ("alpha_hz_per_s,population\n1.0,1.5\n", 2),
        ("alpha_hz_per_s,population\n1.0,nan\n", 2),
        ("alpha,population\n1.0,0.5\n", 1),
    ],
)
def test_malformed_rows_name_line(tmp_path, body, line):
    p = tmp_path / "bad.csv"
    p.write_text(body)
    with pytest.raises(ScanFormatError) as info:
        read_scan_csv(p)
    assert info.value.line == line
    assert f"line {line}" in str(info.value)


@pytest.mark.parametrize("body", ["", "\n\n", "alpha_hz_per_s,population\n"])
def test_empty_files(tmp_path, body):
    p = tmp_path / "empty.csv"
    p.write_text(body)
    with pytest.raises(EmptyScanError):
        read_scan_csv(p)


def test_hand_written_csv_fits(tmp_path):
    period = 1e5
    alpha = np.arange(8) * period / 4
    P = 0.5 * (1 + 0.8 * np.cos(2 * math.pi * alpha / period))
    p = tmp_path / "hand.csv"
    p.write_text("alpha_hz_per_s,population\n" + "".join(f"{a},{x:.6f}\n" for a, x in zip(alpha, P)))
    fit = fit_fringes(read_scan_csv(p), period, alpha_ref=0.0)
    assert fit.visibility == pytest.approx(0.8, abs=1e-5)
    assert fit.alpha0 == pytest.approx(0.0, abs=1.0)
    doc = fit_document(fit, (9.8, 1e-3))
    assert doc["units"]["alpha0"] == "Hz/s" and doc["g"]["unit"] == "m/s^2"


@given(st.sampled_from(sorted(UNITS)), st.floats(-1e6, 1e6).filter(lambda v: v == 0 or abs(v) > 1e-290))
def test_unit_round_trip(unit, value):
    dim = UNITS[unit][0]
    text = format_quantity(value, unit)
    assert parse_quantity(text, dim) == pytest.approx(value, rel=1e-15, abs=0)
    if unit == BASE_UNIT.get(dim):
        assert parse_quantity(text, dim) == value


def test_unit_errors():
    assert parse_quantity("3 ms", "time") == pytest.approx(3e-3)
    with pytest.raises(UnitError, match="dimension"):
        parse_quantity("3 ms", "length")
    with pytest.raises(UnitError, match="unknown unit"):
        parse_quantity("3 furlong", "length")
    with pytest.raises(UnitError):
        parse_quantity("3", "time")
    with pytest.raises(UnitError):
        parse_quantity(3.0, "time")


@pytest.mark.parametrize("name", preset_names())
def test_presets_load_and_round_trip(name):
    exp = preset_experiment(name)
    again = resolve(json.loads(json.dumps(exp.resolved)))
    assert again.cloud == exp.cloud
    assert again.sequence.pulses == exp.sequence.pulses
    assert again.resolved == exp.resolved
    np.testing.assert_array_equal(again.alpha_grid(), exp.alpha_grid())


def test_schema_violations_name_fields():
    raw = load_config(preset="fig1")
    raw["sequence"]["T"] = "3"
    raw["source"]["colour"] = "blue"
    with pytest.raises(ConfigError) as info:
        validate(raw)
    msg = str(info.value)
    assert "sequence.T" in msg and "colour" in msg


def test_unit_error_names_field():
    raw = load_config(preset="fig1")
    raw["sequence"]["T"] = "3 m"
    with pytest.raises(ConfigError) as info:
        resolve(raw)
    assert info.value.field == "sequence.T"


def test_load_errors(tmp_path):
    with pytest.raises(ConfigError, match="unknown preset"):
        load_config(preset="nope")
    with pytest.raises(ConfigError):
        load_config()
    bad = tmp_path / "x.toml"
    bad.write_text("[source\n")
    with pytest.raises(ConfigError, match="TOML"):
        load_config(bad)
    with pytest.raises(ConfigError, match="JSON"):
        parse_text("{", "json")


def test_seed_override():
    raw = load_config(preset="fig2a")
    assert resolve(raw, seed=42).scan["seed"] == 42
    assert resolve(raw).scan["seed"] == 1
