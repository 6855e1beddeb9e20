"""Bloch-oscillation beamsplitters: lattice loading, sweeps and band retention.

Design-scale estimates in the shallow-lattice picture: the lowest band gap
at the Brillouin-zone edge is V₀/2, and a sweep through one zone in
``sweep_time`` changes the bare-state energy difference at the crossing at
rate 16 E_r / sweep_time. The Landau-Zener probability of leaving the band
per zone is therefore

    P_LZ = exp(-π Δ² sweep_time / (16 ħ E_r)),   Δ = V₀/2.

Loading at q = 0 couples the ground band to the symmetric excited state
4E_r above it through the matrix element V₀/(2√2), which gives the
adiabaticity margin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid

from .constants import RB87, PhysicalConstants


@dataclass(frozen=True)
class BlochSegment:
    """One lattice acceleration block.

    ``depth`` in units of E_r; times in s. ``zones`` Brillouin zones are
    traversed in ``sweep_time`` each, giving the retained arm 2ħk per zone in
    ``direction``. The lattice is ramped up over ``load_time`` and down over
    ``unload_time`` (defaults to ``load_time``). ``light_shift_phase`` is a
    differential phase (rad) the lattice imprints on the retained arm; it is
    zero unless calibrated.
    """

    depth: float
    load_time: float
    sweep_time: float
    zones: int = 1
    direction: int = 1
    unload_time: float | None = None
    light_shift_phase: float = 0.0

    def __post_init__(self):
        if not self.depth > 0:
            raise ValueError("lattice depth must be positive")
        if not self.sweep_time > 0:
            raise ValueError("sweep time must be positive")
        if self.load_time < 0:
            raise ValueError("load time must be non-negative")
        if int(self.zones) != self.zones or self.zones < 0:
            raise ValueError("zones must be a non-negative integer")
        if self.direction not in (1, -1):
            raise ValueError("direction must be +1 or -1")
        if self.unload_time is None:
            object.__setattr__(self, "unload_time", self.load_time)
        elif self.unload_time < 0:
            raise ValueError("unload time must be non-negative")

    @property
    def momentum_transfer(self) -> int:
        """Signed momentum given to the retained arm, in ħk."""
        return 2 * self.zones * self.direction

    @property
    def duration(self) -> float:
        return self.load_time + self.zones * self.sweep_time + self.unload_time

    def retention(self, constants: PhysicalConstants = RB87) -> float:
        """Probability the retained arm stays in the lowest band for all zones."""
        return (1.0 - landau_zener_loss(self.depth, self.sweep_time, constants)) ** self.zones


def landau_zener_loss(depth: float, sweep_time: float, constants: PhysicalConstants = RB87) -> float:
    """Probability of tunnelling out of the lowest band in one zone sweep.

    ``depth`` in E_r, ``sweep_time`` in s. Infinite sweep time is allowed.
    """
    if depth < 0 or sweep_time < 0:
        raise ValueError("depth and sweep_time must be non-negative")
    if math.isinf(sweep_time):
        return 0.0 if depth > 0 else 1.0
    gap = 0.5 * depth  # E_r units
    exponent = math.pi * gap**2 * constants.recoil_frequency * sweep_time / 16.0
    return math.exp(-exponent)


def adiabaticity_margin(depth: float, load_time: float, constants: PhysicalConstants = RB87) -> float:
    """Gap² / (ħ |<e|dH/dt|g>|) for a linear ramp to ``depth`` (E_r) over ``load_time`` (s).

    Margins above 1 indicate adiabatic loading at q = 0.
    """
    if depth <= 0 or load_time < 0:
        raise ValueError("depth must be positive and load_time non-negative")
    gap = 4.0  # E_r
    coupling_rate = depth / (2.0 * math.sqrt(2.0) * load_time) if load_time > 0 else math.inf
    # in units where E_r = ħ ω_r
    return gap**2 * constants.recoil_frequency / coupling_rate


@dataclass(frozen=True)
class MomentumProfile:
    """Piecewise-linear momentum (ħk) vs time (s) for both arms of a segment."""

    times: np.ndarray
    retained: np.ndarray
    other: np.ndarray

    def displacement(self, which: str = "retained", constants: PhysicalConstants = RB87) -> float:
        """Net position change (m) over the profile."""
        p = self.retained if which == "retained" else self.other
        # trapezoid rule is exact for piecewise-linear momentum
        return float(trapezoid(p, self.times)) * constants.recoil_velocity


def arm_momentum_profile(segment: BlochSegment, initial_momentum: float, t_start: float = 0.0) -> MomentumProfile:
    """Momentum breakpoints of the lattice-held arm and the untouched arm.

    The retained arm is constant during loading, ramps linearly by 2ħk per
    zone during the sweep and is constant during unloading.
    """
    t0 = t_start
    t1 = t0 + segment.load_time
    t2 = t1 + segment.zones * segment.sweep_time
    t3 = t2 + segment.unload_time
    p0 = float(initial_momentum)
    p1 = p0 + segment.momentum_transfer
    times = np.array([t0, t1, t2, t3])
    retained = np.array([p0, p0, p1, p1])
    other = np.full(4, p0)
    return MomentumProfile(times, retained, other)
