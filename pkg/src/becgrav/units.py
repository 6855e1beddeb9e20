"""Unit-suffixed quantities for config files, e.g. ``"3 ms"`` or ``"0.14 hbar_k"``.

Every physical field in a config carries its unit. :func:`parse_quantity`
converts to the internal unit of the expected dimension: SI for most,
ħk for momenta and E_r for lattice depths. Trap frequencies given in Hz are
cycles per second; the config layer converts them to rad/s.
"""

from __future__ import annotations

import math
import re

from scipy import constants as sc

# unit -> (dimension, factor to the internal unit)
UNITS: dict[str, tuple[str, float]] = {
    "s": ("time", 1.0),
    "ms": ("time", 1e-3),
    "us": ("time", 1e-6),
    "ns": ("time", 1e-9),
    "Hz": ("frequency", 1.0),
    "kHz": ("frequency", 1e3),
    "MHz": ("frequency", 1e6),
    "rad/s": ("angular_frequency", 1.0),
    "Hz/s": ("chirp", 1.0),
    "kHz/s": ("chirp", 1e3),
    "MHz/s": ("chirp", 1e6),
    "m": ("length", 1.0),
    "mm": ("length", 1e-3),
    "um": ("length", 1e-6),
    "nm": ("length", 1e-9),
    "a0": ("length", sc.physical_constants["Bohr radius"][0]),
    "K": ("temperature", 1.0),
    "uK": ("temperature", 1e-6),
    "nK": ("temperature", 1e-9),
    "hbar_k": ("momentum", 1.0),
    "E_r": ("lattice_depth", 1.0),
    "m/s^2": ("acceleration", 1.0),
    "rad": ("angle", 1.0),
    "mrad": ("angle", 1e-3),
    "deg": ("angle", math.pi / 180.0),
    "rad/m^2": ("curvature", 1.0),
    "rad/m^4": ("quartic", 1.0),
}

_QUANTITY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s+(\S+)\s*$")


class UnitError(ValueError):
    pass


def parse_quantity(text: str, dimension: str) -> float:
    """``"<number> <unit>"`` to a float in the internal unit of ``dimension``."""
    if not isinstance(text, str):
        raise UnitError(f"expected a quantity string with a unit, got {text!r}")
    m = _QUANTITY.match(text)
    if not m:
        raise UnitError(f"cannot parse quantity {text!r}; expected '<number> <unit>'")
    value, unit = float(m.group(1)), m.group(2)
    if unit not in UNITS:
        raise UnitError(f"unknown unit {unit!r} in {text!r}")
    dim, factor = UNITS[unit]
    if dim != dimension:
        raise UnitError(f"{text!r} has dimension {dim}, expected {dimension}")
    return value * factor


def format_quantity(value: float, unit: str) -> str:
    """Inverse of :func:`parse_quantity`; exact for base units (factor 1)."""
    _, factor = UNITS[unit]
    return f"{float(value) / factor!r} {unit}"


BASE_UNIT = {dim: u for u, (dim, f) in UNITS.items() if f == 1.0}
