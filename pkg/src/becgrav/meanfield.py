"""Condensate expansion and the interaction-induced dephasing budget.

After release, a Thomas-Fermi condensate expands self-similarly with
radii R_i(t) = λ_i(t) R_i(0), where

    λ̈_i = ω_i² / (λ_i λ_x λ_y λ_z),   λ_i(0) = 1, λ̇_i(0) = 0.

The volume is V(t) = V(0) λ_x λ_y λ_z. Number fluctuations of √N after a
50/50 split give the relative-phase rate

    ω_mf(t) = μ V(0) / (ħ √N V(t)),

which is integrated over the interferometer to give ΔΦ_mf. The initial
density is taken uniform at its peak value, so this overestimates the
effect; the bias is kept on purpose.

Units of returned quantities are listed in :data:`UNITS`.
"""

from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .constants import RB87, PhysicalConstants
from .source import SourceCloud, TrapConfig

UNITS = {
    "chemical_potential": "J",
    "evolve_scaling": "1",
    "momentum_width": "hbar_k",
    "dephasing_rate": "rad/s",
    "integrated_dephasing": "rad",
}

SCALING_RTOL = 1e-11
SCALING_ATOL = 1e-13
# ω_min·t at which the expansion counts as ballistic
ASYMPTOTIC_PHASE = 2.0e4


def chemical_potential(N: float, trap: TrapConfig, constants: PhysicalConstants = RB87) -> float:
    """Thomas-Fermi μ = (ħω̄/2)(15 N a / ā)^{2/5}, in J."""
    if N < 1e3:
        warnings.warn(f"N = {N:g} is too small for the Thomas-Fermi approximation", stacklevel=2)
    hbar, wbar = constants.hbar, trap.mean_frequency
    abar = math.sqrt(hbar / (constants.mass * wbar))
    return 0.5 * hbar * wbar * (15.0 * N * constants.scattering_length / abar) ** 0.4


@dataclass(frozen=True)
class MeanFieldModel:
    """Trapped condensate in the Thomas-Fermi limit.

    ``mu`` in J, ``U`` in J·m³, ``n0`` in m⁻³, ``volume0`` in m³ and
    ``radii`` in m. ``n0`` is defined as μ/U, and ``volume0`` = N/n0 is
    the uniform-density volume holding N atoms.
    """

    N: float
    trap: TrapConfig
    mu: float
    U: float
    n0: float
    volume0: float
    radii: tuple[float, float, float]
    constants: PhysicalConstants = RB87

    @classmethod
    def from_trap(cls, N: float, trap: TrapConfig, constants: PhysicalConstants = RB87) -> "MeanFieldModel":
        mu = chemical_potential(N, trap, constants)
        U = constants.interaction_strength
        n0 = mu / U
        radii = tuple(math.sqrt(2.0 * mu / (constants.mass * w**2)) for w in trap.frequencies)
        return cls(N=N, trap=trap, mu=mu, U=U, n0=n0, volume0=N / n0, radii=radii, constants=constants)


@dataclass(frozen=True)
class ScalingState:
    """Scale factors, their rates (s⁻¹) and the time since release (s)."""

    scales: np.ndarray
    rates: np.ndarray
    t: float

    @property
    def volume_factor(self) -> float:
        return float(np.prod(self.scales))


@functools.lru_cache(maxsize=32)
def _scaling_solution(omegas: tuple[float, float, float], t_end: float, rtol: float):
    w2 = np.asarray(omegas) ** 2

    def rhs(t, y):
        lam, rate = y[:3], y[3:6]
        prod = lam[0] * lam[1] * lam[2]
        return np.concatenate((rate, w2 / (lam * prod), [1.0 / prod]))

    # last component accumulates ∫ dt / (λ_x λ_y λ_z)
    y0 = np.array([1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0])
    sol = solve_ivp(rhs, (0.0, t_end), y0, method="DOP853", rtol=rtol, atol=SCALING_ATOL, dense_output=True)
    if not sol.success:
        raise RuntimeError(f"scaling integration failed: {sol.message}")
    return sol


def _solution(trap: TrapConfig, t_max: float, rtol: float = SCALING_RTOL):
    horizon = ASYMPTOTIC_PHASE / min(trap.frequencies)
    t_end = max(horizon, float(t_max))
    return _scaling_solution(trap.frequencies, t_end, rtol)


def evolve_scaling(trap: TrapConfig, t: float, rtol: float = SCALING_RTOL) -> ScalingState:
    """Scale factors λ_i(t) for free expansion from ``trap``."""
    if t < 0:
        raise ValueError("t must be non-negative")
    y = _solution(trap, t, rtol).sol(t)
    return ScalingState(scales=y[:3].copy(), rates=y[3:6].copy(), t=float(t))


def _volume_integral(trap: TrapConfig, t):
    t = np.asarray(t, dtype=float)
    return _solution(trap, float(np.max(t))).sol(t)[6]


def momentum_width(model: MeanFieldModel, t: float, axis: int = 2, rtol: float = SCALING_RTOL) -> float:
    """1-σ momentum width m λ̇_i R_i / √7 along ``axis`` (default vertical), in ħk."""
    state = evolve_scaling(model.trap, t, rtol)
    c = model.constants
    return float(c.mass * state.rates[axis] * model.radii[axis] / math.sqrt(7.0) / c.hbar_k)


def asymptotic_momentum_width(model: MeanFieldModel, axis: int = 2, rtol: float = SCALING_RTOL) -> float:
    """Ballistic limit of :func:`momentum_width`."""
    horizon = ASYMPTOTIC_PHASE / min(model.trap.frequencies)
    return momentum_width(model, horizon, axis, rtol)


def dephasing_rate(model: MeanFieldModel, t):
    """ω_mf(t) = μ V(0) / (ħ √N V(t)) in rad/s; vectorised over ``t``."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise ValueError("t must be non-negative")
    y = _solution(model.trap, float(np.max(t_arr))).sol(t_arr)
    prod = y[0] * y[1] * y[2]
    rate = model.mu / (model.constants.hbar * math.sqrt(model.N) * prod)
    return float(rate) if np.ndim(t) == 0 else rate


def integrated_dephasing(model: MeanFieldModel, t_exp: float, T: float) -> float:
    """ΔΦ_mf = ∫ ω_mf dt over [t_exp, t_exp + 2T], in rad."""
    if t_exp < 0 or T < 0:
        raise ValueError("t_exp and T must be non-negative")
    if T == 0:
        return 0.0
    a, b = _volume_integral(model.trap, [t_exp, t_exp + 2.0 * T])
    return model.mu / (model.constants.hbar * math.sqrt(model.N)) * float(b - a)


def phase_sensitivity(n: float, T: float, g: float, constants: PhysicalConstants = RB87) -> float:
    """Total interferometer phase 2nkgT² (rad)."""
    return 2.0 * n * constants.wavenumber * g * T**2


@dataclass(frozen=True)
class SensitivityTable:
    """Per-shot Δg/g on a (T, t_exp) grid. Arrays have shape (len(T), len(t_exp))."""

    T: np.ndarray
    t_exp: np.ndarray
    dephasing: np.ndarray
    shot_noise: np.ndarray
    n: float

    def rows(self):
        for i, T in enumerate(self.T):
            for j, te in enumerate(self.t_exp):
                yield float(T), float(te), float(self.dephasing[i, j]), float(self.shot_noise[i, j])


def sensitivity_curves(model: MeanFieldModel, T_grid, t_exp_grid, n: float = 1, g: float | None = None) -> SensitivityTable:
    """Dephasing-limited and shot-noise-limited Δg/g per shot.

    Δg/g = ΔΦ / (2nkgT²), with ΔΦ = ΔΦ_mf for the dephasing limit and
    1/√N for the shot-noise limit.
    """
    T = np.atleast_1d(np.asarray(T_grid, dtype=float))
    te = np.atleast_1d(np.asarray(t_exp_grid, dtype=float))
    if T.size == 0 or te.size == 0:
        raise ValueError("grids must be non-empty")
    g = model.constants.g_ref if g is None else g
    scale = np.array([phase_sensitivity(n, Ti, g, model.constants) for Ti in T])
    deph = np.array([[integrated_dephasing(model, tj, Ti) for tj in te] for Ti in T]) / scale[:, None]
    shot = np.broadcast_to((1.0 / math.sqrt(model.N) / scale)[:, None], deph.shape).copy()
    return SensitivityTable(T=T, t_exp=te, dephasing=deph, shot_noise=shot, n=n)


def crossing_time(model: MeanFieldModel, t_exp: float, level: float, n: float = 1, T_max: float = 10.0) -> float:
    """Smallest T at which the dephasing-limited Δg/g drops below ``level``."""
    from scipy.optimize import brentq

    def excess(logT):
        T = math.exp(logT)
        return integrated_dephasing(model, t_exp, T) / phase_sensitivity(n, T, model.constants.g_ref, model.constants) - level

    lo, hi = math.log(1e-5), math.log(T_max)
    if excess(hi) > 0:
        raise ValueError(f"dephasing limit stays above {level:g} up to T = {T_max} s")
    if excess(lo) < 0:
        return math.exp(lo)
    return math.exp(brentq(excess, lo, hi, xtol=1e-10))


def expand_cloud(
    N: float,
    trap: TrapConfig,
    t_exp: float,
    constants: PhysicalConstants = RB87,
) -> SourceCloud:
    """Condensate source after ``t_exp`` of free expansion.

    Vertical width from the z axis; transverse widths averaged over x, y.
    The transverse size is the 1-σ of the expanded Thomas-Fermi profile,
    R_i λ_i / √7.
    """
    model = MeanFieldModel.from_trap(N, trap, constants)
    state = evolve_scaling(trap, t_exp)
    dp = [momentum_width(model, t_exp, axis) for axis in range(3)]
    sizes = [model.radii[i] * state.scales[i] / math.sqrt(7.0) for i in range(2)]
    return SourceCloud(
        kind="condensate",
        atom_number=N,
        dp_long=float(dp[2]),
        dp_perp=float(0.5 * (dp[0] + dp[1])),
        sigma_perp=float(0.5 * (sizes[0] + sizes[1])),
        trap=trap,
    )
