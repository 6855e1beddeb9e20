"""Trap and cloud descriptions plus the kinematic resonance formulas.

Momenta are expressed in units of ħk throughout and all widths are 1-σ
standard deviations. For a thermal cloud the longitudinal width follows the
Maxwell-Boltzmann marginal, ``sqrt(m k_B T) / ħk``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .constants import RB87, PhysicalConstants

SourceKind = Literal["condensate", "thermal"]


@dataclass(frozen=True)
class TrapConfig:
    """Harmonic trap, angular frequencies (ω_x, ω_y, ω_z) in rad/s.

    The z axis is vertical, i.e. along the Bragg wavevector.
    """

    frequencies: tuple[float, float, float]

    def __post_init__(self):
        freqs = tuple(float(w) for w in self.frequencies)
        if len(freqs) != 3:
            raise ValueError("trap needs exactly three frequencies")
        if not all(w > 0 for w in freqs):
            raise ValueError(f"trap frequencies must be strictly positive, got {freqs}")
        object.__setattr__(self, "frequencies", freqs)

    @classmethod
    def from_hz(cls, fx: float, fy: float, fz: float) -> "TrapConfig":
        return cls((2 * math.pi * fx, 2 * math.pi * fy, 2 * math.pi * fz))

    @property
    def omega(self) -> np.ndarray:
        return np.asarray(self.frequencies)

    @property
    def mean_frequency(self) -> float:
        """Geometric mean ω̄ (rad/s)."""
        return float(np.prod(self.omega) ** (1.0 / 3.0))


# 2π × (50, 57, 28) Hz crossed dipole trap.
REFERENCE_TRAP = TrapConfig.from_hz(50.0, 57.0, 28.0)


@dataclass(frozen=True)
class SourceCloud:
    """An atomic ensemble released from the trap.

    Widths are 1-σ: ``dp_long`` and ``dp_perp`` in ħk, ``sigma_perp`` in m.
    A width of exactly zero is accepted as the degenerate (monochromatic)
    limit.
    """

    kind: SourceKind
    atom_number: float
    dp_long: float
    dp_perp: float
    sigma_perp: float
    temperature: float | None = None
    trap: TrapConfig | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in ("condensate", "thermal"):
            raise ValueError(f"unknown source kind {self.kind!r}")
        if not self.atom_number >= 1:
            raise ValueError(f"atom_number must be >= 1, got {self.atom_number}")
        for name in ("dp_long", "dp_perp", "sigma_perp"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.temperature is not None and self.temperature < 0:
            raise ValueError("temperature must be non-negative")

    def with_(self, **changes) -> "SourceCloud":
        from dataclasses import replace

        return replace(self, **changes)


def bragg_resonance(n: int, constants: PhysicalConstants = RB87) -> float:
    """Two-beam frequency difference δ_n = 4nω_r (rad/s) for order ``n``."""
    if int(n) != n or n < 0:
        raise ValueError(f"Bragg order must be a non-negative integer, got {n!r}")
    return 4.0 * n * constants.recoil_frequency


def doppler_chirp_rate(g: float, tilt: float = 0.0, constants: PhysicalConstants = RB87) -> float:
    """Resonant chirp α₀ = k·g/π in Hz/s, with k tilted by ``tilt`` rad from g."""
    if not abs(tilt) < math.pi / 2:
        raise ValueError(f"|tilt| must be below π/2, got {tilt}")
    return constants.wavenumber * g * math.cos(tilt) / math.pi


def thermal_momentum_width(temperature: float, constants: PhysicalConstants = RB87) -> float:
    """1-σ momentum width sqrt(m k_B T)/ħk of a thermal cloud (units of ħk)."""
    if temperature < 0:
        raise ValueError("temperature must be non-negative")
    return math.sqrt(constants.mass * constants.k_B * temperature) / constants.hbar_k


@dataclass(frozen=True)
class AtomSample:
    """Monte Carlo draw of atoms from a cloud.

    ``p_long`` has shape (count,), ``p_perp`` and ``r_perp`` shape (count, 2).
    Momenta in ħk, positions in m at the first interferometer pulse.
    """

    p_long: np.ndarray
    p_perp: np.ndarray
    r_perp: np.ndarray

    def __len__(self):
        return len(self.p_long)


def sample_atoms(cloud: SourceCloud, count: int, seed: int | np.random.SeedSequence | None) -> AtomSample:
    """Draw ``count`` atoms from independent Gaussian marginals of ``cloud``."""
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(seed)
    # draw order is part of the reproducibility contract
    z_long = rng.standard_normal(count)
    z_pperp = rng.standard_normal((count, 2))
    z_rperp = rng.standard_normal((count, 2))
    return AtomSample(
        p_long=cloud.dp_long * z_long,
        p_perp=cloud.dp_perp * z_pperp,
        r_perp=cloud.sigma_perp * z_rperp,
    )
