"""Physical constants for the atom/laser pair driving the interferometer.

Constants are bundled in an immutable :class:`PhysicalConstants` record so
that every routine takes the species explicitly. The shipped preset is
``"Rb87-780nm"``: ⁸⁷Rb in |F=1, m_F=-1> probed on the D2 line.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

from scipy import constants as sc

BOHR_RADIUS = sc.physical_constants["Bohr radius"][0]


@dataclass(frozen=True)
class PhysicalConstants:
    """Species and laser constants, all SI.

    Attributes
    ----------
    mass : float
        Atomic mass (kg).
    wavelength : float
        Bragg laser wavelength (m). The few-GHz detuning from resonance is
        ignored when forming the wavenumber.
    hbar, k_B : float
        Reduced Planck and Boltzmann constants.
    scattering_length : float
        s-wave scattering length (m).
    g_ref : float
        Local gravity prior (m/s²), used to pick the fringe branch.
    """

    mass: float
    wavelength: float
    scattering_length: float
    g_ref: float
    hbar: float = sc.hbar
    k_B: float = sc.k

    def __post_init__(self):
        for name in ("mass", "wavelength", "scattering_length", "hbar", "k_B"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)!r}")

    @property
    def wavenumber(self) -> float:
        """k = 2π/λ (rad/m)."""
        return 2.0 * math.pi / self.wavelength

    @property
    def hbar_k(self) -> float:
        """Single-photon momentum ħk (kg·m/s)."""
        return self.hbar * self.wavenumber

    @property
    def recoil_velocity(self) -> float:
        """ħk/m (m/s)."""
        return self.hbar_k / self.mass

    @property
    def recoil_frequency(self) -> float:
        """ω_r = ħk²/2m (rad/s)."""
        return self.hbar * self.wavenumber**2 / (2.0 * self.mass)

    @property
    def recoil_energy(self) -> float:
        """E_r = ħω_r (J)."""
        return self.hbar * self.recoil_frequency

    @property
    def interaction_strength(self) -> float:
        """U = 4πħ²a/m (J·m³)."""
        return 4.0 * math.pi * self.hbar**2 * self.scattering_length / self.mass

    def replace(self, **overrides) -> "PhysicalConstants":
        return dataclasses.replace(self, **overrides)


# Steck, "Rubidium 87 D Line Data": m = 86.909180527 u, λ_D2 = 780.241209686 nm.
# a(F=1, m_F=-1) ≈ 100.4 a0. g_ref is a local absolute-gravity prior.
RB87 = PhysicalConstants(
    mass=86.909180527 * sc.atomic_mass,
    wavelength=780.241209686e-9,
    scattering_length=100.4 * BOHR_RADIUS,
    g_ref=9.795499189,
)

PRESETS: dict[str, PhysicalConstants] = {"Rb87-780nm": RB87}


def get_constants(preset: str = "Rb87-780nm", **overrides) -> PhysicalConstants:
    """Look up a named preset, optionally overriding individual fields."""
    try:
        base = PRESETS[preset]
    except KeyError:
        raise KeyError(f"unknown constants preset {preset!r}; known: {sorted(PRESETS)}") from None
    return base.replace(**overrides) if overrides else base
