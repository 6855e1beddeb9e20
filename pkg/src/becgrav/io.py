"""CSV and JSON serialisation of scans, fits and derived tables.

CSV files follow RFC 4180 with a mandatory header row. Floats are written
with ``repr`` so they read back bit-identical.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .analysis import FringeFit
from .interferometer import FringeScan

SCAN_COLUMNS = ("alpha_hz_per_s", "population", "atoms", "seed")
SENSITIVITY_COLUMNS = ("T_s", "t_exp_s", "dephasing_dg_over_g", "shot_noise_dg_over_g")


class ScanFormatError(ValueError):
    """Malformed scan CSV. ``line`` is the 1-based line number, if known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class EmptyScanError(ScanFormatError):
    pass


def _f(x) -> str:
    return repr(float(x))


def write_scan_csv(scan: FringeScan, path: str | Path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(SCAN_COLUMNS)
        for a, p, n, s in zip(scan.alpha, scan.population, scan.atoms, scan.seeds):
            w.writerow((_f(a), _f(p), int(n), int(s)))
    return path


def read_scan_csv(path: str | Path) -> FringeScan:
    """Parse a scan CSV. ``atoms`` and ``seed`` columns are optional (default 0).

    Rows are never coerced: a non-numeric, non-finite or out-of-range field
    raises :class:`ScanFormatError` naming its line.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or all(not any(c.strip() for c in r) for r in rows):
        raise EmptyScanError(f"{path} is empty")
    header = [c.strip() for c in rows[0]]
    if header[:2] != list(SCAN_COLUMNS[:2]) or any(c not in SCAN_COLUMNS for c in header):
        raise ScanFormatError(f"header must start with {','.join(SCAN_COLUMNS[:2])} "
                              f"and use only {','.join(SCAN_COLUMNS)}; got {','.join(header)}", 1)
    alpha, pop, atoms, seeds = [], [], [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise ScanFormatError(f"expected {len(header)} fields, found {len(row)}", lineno)
        rec = dict(zip(header, (c.strip() for c in row)))
        try:
            a = float(rec["alpha_hz_per_s"])
            p = float(rec["population"])
            n = int(rec.get("atoms", "0"))
            s = int(rec.get("seed", "0"))
        except ValueError as exc:
            raise ScanFormatError(f"bad value ({exc})", lineno) from None
        if not (math.isfinite(a) and math.isfinite(p)):
            raise ScanFormatError("non-finite value", lineno)
        if not 0.0 <= p <= 1.0:
            raise ScanFormatError(f"population {p} outside [0, 1]", lineno)
        if n < 0 or s < 0:
            raise ScanFormatError("atoms and seed must be non-negative", lineno)
        alpha.append(a)
        pop.append(p)
        atoms.append(n)
        seeds.append(s)
    if not alpha:
        raise EmptyScanError(f"{path} has a header but no data rows")
    return FringeScan(
        np.array(alpha), np.array(pop), np.array(atoms, dtype=np.int64), np.array(seeds, dtype=np.uint64),
        {"source": str(path)},
    )


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(obj) -> str:
    """Stable JSON text: sorted keys, two-space indent, trailing newline."""
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default, allow_nan=True) + "\n"


def fit_document(fit: FringeFit, g: tuple[float, float] | None = None) -> dict:
    """FringeFit as ``{"fit": ..., "units": ...}`` plus g when given."""
    doc = {"fit": fit.to_dict(), "units": dict(FringeFit.UNITS)}
    if g is not None:
        doc["g"] = {"value": g[0], "sigma": g[1], "unit": "m/s^2"}
    return doc


def write_json(obj, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(dumps(obj))
    return path


def write_sensitivity_csv(table, path: str | Path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(SENSITIVITY_COLUMNS)
        for row in table.rows():
            w.writerow(tuple(_f(x) for x in row))
    return path


def write_spectroscopy_csv(result, path: str | Path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(("detuning_hz", "transferred_fraction"))
        for d, r in zip(result.detunings, result.response):
            w.writerow((_f(d / (2 * math.pi)), _f(r)))
    return path
