"""Experiment configs: loading, schema validation and resolution to model objects.

Configs are TOML (or JSON) with unit-suffixed quantities. They are checked
against ``experiment.schema.json`` before anything is computed. Resolution
builds the cloud, pulse sequence, aberration map and scan grid, and records
every derived number (designed pulses, selected cloud widths, scan centre)
in :attr:`Experiment.resolved`, itself a valid config in base units.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .bragg import BraggPulse, velocity_select
from .constants import get_constants
from .interferometer import (
    AberrationMap,
    BlochPlacement,
    PulseSequence,
    build_bloch_sequence,
    build_mach_zehnder,
    effective_order,
)
from .meanfield import expand_cloud
from .source import SourceCloud, TrapConfig, doppler_chirp_rate, thermal_momentum_width
from .units import UnitError, format_quantity, parse_quantity

SCAN_DEFAULTS = {
    "points": 30,
    "periods": 3.0,
    "detected_atoms": 10000,
    "seed": 0,
    "ensemble_size": 20000,
}


class ConfigError(ValueError):
    """Invalid experiment config. ``field`` names the offending entry."""

    def __init__(self, message: str, field: str | None = None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


def _schema() -> dict:
    return json.loads(resources.files("becgrav").joinpath("experiment.schema.json").read_text())


def preset_names() -> list[str]:
    root = resources.files("becgrav").joinpath("presets")
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".toml"))


def preset_path(name: str):
    path = resources.files("becgrav").joinpath("presets", f"{name}.toml")
    if not path.is_file():
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(preset_names())}", "preset")
    return path


def parse_text(text: str, fmt: str) -> dict:
    try:
        return json.loads(text) if fmt == "json" else tomllib.loads(text)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot parse {fmt.upper()}: {exc}") from exc


def validate(raw: dict) -> None:
    """Raise :class:`ConfigError` listing every schema violation by field path."""
    validator = jsonschema.Draft202012Validator(_schema())
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        lines = [f"{'.'.join(map(str, e.absolute_path)) or '<root>'}: {e.message}" for e in errors]
        raise ConfigError("schema violations:\n  " + "\n  ".join(lines))


def load_config(path: str | Path | None = None, preset: str | None = None) -> dict:
    """Read and validate a config file or a shipped preset."""
    if (path is None) == (preset is None):
        raise ConfigError("give exactly one of a config path or a preset name")
    if preset is not None:
        raw = parse_text(preset_path(preset).read_text(), "toml")
    else:
        p = Path(path)
        try:
            text = p.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        raw = parse_text(text, "json" if p.suffix.lower() == ".json" else "toml")
    validate(raw)
    return raw


def _q(section: dict, key: str, dimension: str, where: str, default=None):
    if key not in section:
        if default is None:
            raise ConfigError("required field missing", f"{where}.{key}")
        return default
    try:
        return parse_quantity(section[key], dimension)
    except UnitError as exc:
        raise ConfigError(str(exc), f"{where}.{key}") from None


@dataclass
class Experiment:
    """A fully resolved experiment."""

    name: str
    constants: object
    cloud: SourceCloud
    sequence: PulseSequence
    aberration: AberrationMap
    scan: dict
    resolved: dict
    outputs: dict

    @property
    def n_eff(self) -> float:
        return effective_order(self.sequence, self.constants)

    @property
    def period(self) -> float:
        return 1.0 / (self.n_eff * self.sequence.T**2)

    def alpha_grid(self) -> np.ndarray:
        s = self.scan
        half = 0.5 * s["periods"] * self.period
        return s["alpha_center"] + np.linspace(-half, half, s["points"])


def resolve_constants(sec: dict):
    overrides = {}
    for key, dim in (("wavelength", "length"), ("scattering_length", "length"), ("g_ref", "acceleration")):
        if key in sec:
            overrides[key] = _q(sec, key, dim, "constants")
    try:
        return get_constants(sec.get("preset", "Rb87-780nm"), **overrides)
    except (KeyError, ValueError) as exc:
        raise ConfigError(str(exc), "constants") from None


def resolve_trap(sec: dict) -> TrapConfig | None:
    """Trap from ``source.trap`` (three frequencies in Hz), or None if absent."""
    if "trap" not in sec:
        return None
    try:
        fx, fy, fz = (parse_quantity(f, "frequency") for f in sec["trap"])
        return TrapConfig.from_hz(fx, fy, fz)
    except (UnitError, ValueError) as exc:
        raise ConfigError(str(exc), "source.trap") from None


def resolve_cloud(sec: dict, constants) -> SourceCloud:
    """Build the source cloud described by a ``[source]`` section."""
    where = "source"
    trap = resolve_trap(sec)
    N = float(sec["atom_number"])
    temperature = _q(sec, "temperature", "temperature", where) if "temperature" in sec else None
    try:
        if "expansion_time" in sec:
            if trap is None or sec["kind"] != "condensate":
                raise ConfigError("expansion needs a condensate source with a trap", f"{where}.expansion_time")
            cloud = expand_cloud(N, trap, _q(sec, "expansion_time", "time", where), constants)
        else:
            thermal = thermal_momentum_width(temperature, constants) if temperature is not None else None
            dp_long = _q(sec, "dp_long", "momentum", where, default=thermal)
            dp_perp = _q(sec, "dp_perp", "momentum", where, default=thermal)
            if dp_long is None or dp_perp is None:
                raise ConfigError("momentum widths need explicit values or a temperature", where)
            cloud = SourceCloud(sec["kind"], N, dp_long, dp_perp, _q(sec, "sigma_perp", "length", where), trap=trap)
        changes = {k: _q(sec, k, d, where) for k, d in
                   (("dp_long", "momentum"), ("dp_perp", "momentum"), ("sigma_perp", "length")) if k in sec}
        cloud = cloud.with_(kind=sec["kind"], temperature=temperature, **changes)
        if "velocity_selection" in sec:
            cloud = velocity_select(_q(sec, "velocity_selection", "time", where), cloud, constants)
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc), where) from None
    return cloud


def _pulse(sec: dict, key: str, order: int):
    if key not in sec:
        return None
    p = sec[key]
    where = f"sequence.{key}"
    return BraggPulse(order, _q(p, "tau", "time", where), _q(p, "omega_peak", "angular_frequency", where))


def resolve_sequence(sec: dict, cloud: SourceCloud, constants) -> PulseSequence:
    where = "sequence"
    n = int(sec["order"])
    T = _q(sec, "T", "time", where)
    half, full = _pulse(sec, "half_pulse", n), _pulse(sec, "full_pulse", n)
    if (half is None) != (full is None):
        raise ConfigError("give both half_pulse and full_pulse, or neither", where)
    pulses = None if half is None else (half, full)
    try:
        if sec["type"] == "mach-zehnder":
            return build_mach_zehnder(n, T, cloud, constants, pulses)
        from .bloch import BlochSegment

        seq = build_bloch_sequence(
            T, cloud,
            BlochPlacement(_q(sec, "delay", "time", where, 0.0), _q(sec, "hold", "time", where)),
            order=n,
            depth=_q(sec, "depth", "lattice_depth", where),
            load_time=_q(sec, "load_time", "time", where),
            sweep_time=_q(sec, "sweep_time", "time", where),
            zones=int(sec.get("zones", 1)),
            constants=constants,
            pulses=pulses,
        )
        phase = _q(sec, "light_shift_phase", "angle", where, 0.0)
        if phase:
            from dataclasses import replace

            segs = tuple(
                replace(s, segment=replace(s.segment, light_shift_phase=phase)) if hasattr(s, "segment") else s
                for s in seq.segments
            )
            seq = PulseSequence(segs, seq.T)
        return seq
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc), where) from None


def _fmt_pulse(p: BraggPulse) -> dict:
    return {"tau": format_quantity(p.tau, "s"), "omega_peak": format_quantity(p.omega_peak, "rad/s")}


def resolve(raw: dict, seed: int | None = None) -> Experiment:
    """Turn a validated config into model objects plus its resolved form."""
    raw = copy.deepcopy(raw)
    constants = resolve_constants(raw.get("constants", {}))
    cloud = resolve_cloud(raw["source"], constants)
    seq = resolve_sequence(raw["sequence"], cloud, constants)

    sc = raw.get("scan", {})
    scan = {**SCAN_DEFAULTS, **{k: sc[k] for k in ("points", "periods", "detected_atoms", "seed", "ensemble_size") if k in sc}}
    if seed is not None:
        scan["seed"] = int(seed)
    scan["g_true"] = _q(sc, "g_true", "acceleration", "scan", constants.g_ref)
    scan["tilt"] = _q(sc, "tilt", "angle", "scan", 0.0)
    if not abs(scan["tilt"]) < math.pi / 2:
        raise ConfigError("|tilt| must be below π/2", "scan.tilt")
    scan["alpha_center"] = _q(sc, "alpha_center", "chirp", "scan", doppler_chirp_rate(scan["g_true"], scan["tilt"], constants))
    scan["cycle_time"] = _q(sc, "cycle_time", "time", "scan", 3.0)
    scan["mirror_jitter"] = _q(sc, "mirror_jitter", "angle", "scan", 0.0)

    ab = raw.get("aberration", {})
    aberration = AberrationMap(
        _q(ab, "quadratic", "curvature", "aberration", 0.0), _q(ab, "quartic", "quartic", "aberration", 0.0)
    )

    out = {"csv": "fringes.csv", "summary": "summary.json", **raw.get("output", {})}

    src = {
        "kind": cloud.kind,
        "atom_number": float(cloud.atom_number),
        "dp_long": format_quantity(cloud.dp_long, "hbar_k"),
        "dp_perp": format_quantity(cloud.dp_perp, "hbar_k"),
        "sigma_perp": format_quantity(cloud.sigma_perp, "m"),
    }
    if cloud.temperature is not None:
        src["temperature"] = format_quantity(cloud.temperature, "K")
    if "trap" in raw["source"]:
        src["trap"] = raw["source"]["trap"]
    half, full, _ = seq.pulses
    seq_sec = {k: v for k, v in raw["sequence"].items()}
    seq_sec.update(half_pulse=_fmt_pulse(half), full_pulse=_fmt_pulse(full))
    resolved = {
        "name": raw.get("name", "experiment"),
        "constants": raw.get("constants", {"preset": "Rb87-780nm"}),
        "source": src,
        "sequence": seq_sec,
        "scan": {
            "points": int(scan["points"]),
            "periods": float(scan["periods"]),
            "detected_atoms": scan["detected_atoms"],
            "seed": int(scan["seed"]),
            "ensemble_size": int(scan["ensemble_size"]),
            "g_true": format_quantity(scan["g_true"], "m/s^2"),
            "tilt": format_quantity(scan["tilt"], "rad"),
            "alpha_center": format_quantity(scan["alpha_center"], "Hz/s"),
            "cycle_time": format_quantity(scan["cycle_time"], "s"),
            "mirror_jitter": format_quantity(scan["mirror_jitter"], "rad"),
        },
        "aberration": {
            "quadratic": format_quantity(aberration.quadratic, "rad/m^2"),
            "quartic": format_quantity(aberration.quartic, "rad/m^4"),
        },
        "output": out,
    }
    if "description" in raw:
        resolved["description"] = raw["description"]
    validate(resolved)
    return Experiment(resolved["name"], constants, cloud, seq, aberration, scan, resolved, out)
