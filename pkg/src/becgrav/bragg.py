"""Bragg diffraction on the 2ħk momentum ladder.

An atom with momentum ``p0`` (units of ħk) in the freely falling frame is
expanded over ladder states |p0 + 2j ħk>. With the two-beam frequency
difference tracking the order-n resonance, amplitudes obey

    i dc_j/dt = [ω_r (p0 + 2j)² - j δ(t)] c_j
                + Ω(t)/2 (e^{iφ} c_{j-1} + e^{-iφ} c_{j+1}),

with δ(t) = 4nω_r + (detuning offset) + chirp·(t - t_c). The system is
integrated with an adaptive explicit Runge-Kutta method (DOP853).

Two facts are used throughout:

* shifting p0 by s is equivalent to offsetting δ by -4ω_r s (the
  diagonal changes by a j-linear term plus a global constant), so a
  two-photon Doppler shift and a laser detuning are interchangeable;
* in the deep Bragg regime the order-n transition reduces to a two-level
  system with the 2n-photon coupling

      Ω_eff = Ω^n / (2^{n-1} Π_{j=1}^{n-1} 4ω_r j (n - j)),

  obtained by adiabatically eliminating the intermediate states.

Ensemble quantities are incoherent averages of single-atom transfer over
the longitudinal momentum distribution, evaluated by Gauss-Hermite
quadrature.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, replace
from typing import Literal

import numpy as np
from scipy.integrate import solve_ivp, trapezoid
from scipy.optimize import brentq, least_squares, minimize_scalar
from scipy.special import erf

from .constants import RB87, PhysicalConstants
from .source import SourceCloud, bragg_resonance

NORM_TOL = 1e-6
EDGE_TOL = 1e-4
RTOL = 1e-8
ATOL = 1e-11
DEFAULT_MARGIN = 3
MAX_SPAN_GROWTH = 4


class LadderTruncationError(RuntimeError):
    """Probability reached the edge of the truncated momentum ladder."""


class DesignWindowError(ValueError):
    """No pulse duration satisfies the Bragg design window for this cloud."""


class FitError(RuntimeError):
    """A least-squares fit did not converge."""


@dataclass(frozen=True)
class BraggPulse:
    """A two-frequency Bragg pulse driving order ``order``.

    For ``envelope="gaussian"``, ``tau`` is the 1-σ width of Ω(t) and the
    envelope is clamped to zero outside ±``half_window`` (default 4τ), with
    the constant pedestal subtracted so the pulse starts and ends at exactly
    zero. For ``envelope="square"``, ``tau`` is the full pulse length.
    """

    order: int
    tau: float
    omega_peak: float
    envelope: Literal["gaussian", "square"] = "gaussian"
    half_window: float | None = None
    detuning: float = 0.0
    chirp: float = 0.0
    phase: float = 0.0

    def __post_init__(self):
        if int(self.order) != self.order or self.order < 1:
            raise ValueError(f"order must be a positive integer, got {self.order!r}")
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if self.omega_peak < 0:
            raise ValueError("omega_peak must be non-negative")
        if self.envelope == "gaussian":
            hw = 4.0 * self.tau if self.half_window is None else float(self.half_window)
            if hw < 4.0 * self.tau * (1 - 1e-12):
                raise ValueError("truncation half-window must be at least 4 tau")
        elif self.envelope == "square":
            hw = 0.5 * self.tau
        else:
            raise ValueError(f"unknown envelope {self.envelope!r}")
        object.__setattr__(self, "half_window", hw)

    @property
    def duration(self) -> float:
        return 2.0 * self.half_window

    def rabi(self, t):
        """Two-photon Rabi frequency Ω(t) for t measured from pulse start."""
        t = np.asarray(t, dtype=float)
        inside = (t >= 0) & (t <= self.duration)
        if self.envelope == "square":
            return np.where(inside, self.omega_peak, 0.0)
        x = (t - self.half_window) / self.tau
        pedestal = math.exp(-0.5 * (self.half_window / self.tau) ** 2)
        shape = (np.exp(-0.5 * x**2) - pedestal) / (1.0 - pedestal)
        return np.where(inside, self.omega_peak * shape, 0.0)

    def detuning_at(self, t):
        """Offset (rad/s) of δ(t) from the order-n resonance."""
        return self.detuning + self.chirp * (np.asarray(t, dtype=float) - self.half_window)

    @property
    def area(self) -> float:
        """Pulse area ∫Ω dt."""
        if self.envelope == "square":
            return self.omega_peak * self.tau
        w, tau = self.half_window, self.tau
        pedestal = math.exp(-0.5 * (w / tau) ** 2)
        gauss = tau * math.sqrt(2 * math.pi) * erf(w / (math.sqrt(2) * tau))
        return self.omega_peak * (gauss - 2 * w * pedestal) / (1.0 - pedestal)

    def effective_area(self, constants: PhysicalConstants = RB87, samples: int = 4001) -> float:
        """∫Ω_eff dt for the two-level reduction of order ``order``."""
        if self.order == 1:
            return self.area
        t = np.linspace(0.0, self.duration, samples)
        om = effective_rabi(self.rabi(t), self.order, constants)
        return float(trapezoid(om, t))

    def time_reversed(self) -> "BraggPulse":
        """Pulse with conjugated couplings and the detuning law run backwards."""
        return replace(self, chirp=-self.chirp, phase=-self.phase)

    def with_omega(self, omega_peak: float) -> "BraggPulse":
        return replace(self, omega_peak=float(omega_peak))


def effective_rabi(omega, n: int, constants: PhysicalConstants = RB87):
    """2n-photon coupling Ω_eff for order ``n`` given two-photon Rabi ``omega``."""
    wr = constants.recoil_frequency
    denom = 2.0 ** (n - 1) * math.prod(4.0 * wr * j * (n - j) for j in range(1, n))
    return np.asarray(omega, dtype=float) ** n / denom


def rabi_transfer(theta):
    """Resonant two-level transfer sin²(θ/2)."""
    return np.sin(np.asarray(theta) / 2.0) ** 2


@dataclass(frozen=True)
class LadderState:
    """Amplitudes over |p0 + 2j ħk>, j = ``js``, at time ``t``."""

    p0: float
    js: np.ndarray
    amplitudes: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        js = np.asarray(self.js, dtype=int)
        amps = np.asarray(self.amplitudes, dtype=complex)
        if js.ndim != 1 or amps.shape != js.shape:
            raise ValueError("js and amplitudes must be 1-D arrays of equal length")
        if np.any(np.diff(js) != 1):
            raise ValueError("js must be consecutive integers")
        object.__setattr__(self, "js", js)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def at_rest(cls, p0: float, order: int, start: int = 0, margin: int = DEFAULT_MARGIN) -> "LadderState":
        """All population in ``start`` on the default span [-(n+m), n+m]."""
        lo = min(-(order + margin), start - margin)
        hi = max(order + margin, start + margin)
        js = np.arange(lo, hi + 1)
        amps = np.zeros(len(js), complex)
        amps[start - lo] = 1.0
        return cls(p0, js, amps)

    @property
    def populations(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    @property
    def norm(self) -> float:
        return float(self.populations.sum())

    def population(self, j: int) -> float:
        idx = j - self.js[0]
        if not 0 <= idx < len(self.js):
            return 0.0
        return float(self.populations[idx])

    @property
    def edge_occupation(self) -> float:
        pops = self.populations
        return float(max(pops[0], pops[-1]))


def _propagate(pulse: BraggPulse, p0, js, c0, constants: PhysicalConstants, rtol: float = RTOL):
    """Batch propagation. ``p0`` (B,), ``js`` (J,), ``c0`` (B, J) -> (B, J)."""
    p0 = np.asarray(p0, dtype=float)
    js = np.asarray(js)
    c0 = np.asarray(c0, dtype=complex)
    B, J = c0.shape
    wr = constants.recoil_frequency
    delta0 = bragg_resonance(pulse.order, constants) + pulse.detuning
    static = wr * (p0[:, None] + 2.0 * js[None, :]) ** 2 - js[None, :] * delta0
    up = np.exp(1j * pulse.phase)
    down = np.conj(up)
    chirped = pulse.chirp != 0.0

    def rhs(t, y):
        c = y.reshape(B, J)
        diag = static - js[None, :] * (pulse.chirp * (t - pulse.half_window)) if chirped else static
        out = diag * c
        half = 0.5 * float(pulse.rabi(t))
        if half:
            out[:, 1:] += half * up * c[:, :-1]
            out[:, :-1] += half * down * c[:, 1:]
        return (-1j * out).ravel()

    sol = solve_ivp(rhs, (0.0, pulse.duration), c0.ravel(), method="DOP853", rtol=rtol, atol=ATOL)
    if not sol.success:
        raise RuntimeError(f"ladder integration failed: {sol.message}")
    return sol.y[:, -1].reshape(B, J)


def evolve_ladder(
    pulse: BraggPulse,
    initial: LadderState,
    constants: PhysicalConstants = RB87,
    rtol: float = RTOL,
) -> LadderState:
    """Evolve ``initial`` through the full truncated pulse envelope.

    Raises ``ValueError`` for an unnormalised input and
    :class:`LadderTruncationError` if more than 1e-4 of the probability ends
    on the outermost ladder states.
    """
    if abs(initial.norm - 1.0) > NORM_TOL:
        raise ValueError(f"initial state not normalised (norm = {initial.norm:.8f})")
    c = _propagate(pulse, [initial.p0], initial.js, initial.amplitudes[None, :], constants, rtol)[0]
    final = LadderState(initial.p0, initial.js, c, initial.t + pulse.duration)
    if final.edge_occupation > EDGE_TOL:
        raise LadderTruncationError(
            f"edge occupation {final.edge_occupation:.2e} exceeds {EDGE_TOL:g} on span "
            f"[{initial.js[0]}, {initial.js[-1]}]; widen the ladder"
        )
    return final


def ladder_columns(pulse: BraggPulse, p, starts=None, constants: PhysicalConstants = RB87, rtol: float = RTOL):
    """Final amplitudes for atoms at momenta ``p`` starting in each of ``starts``.

    Returns ``(js, amps)`` with ``amps`` of shape (len(p), len(starts), J).
    The span starts at the default width and grows until the edge
    occupation bound holds for every atom.
    """
    n = pulse.order
    starts = (0, n) if starts is None else tuple(starts)
    p = np.atleast_1d(np.asarray(p, dtype=float))
    margin = DEFAULT_MARGIN
    for _ in range(MAX_SPAN_GROWTH + 1):
        lo = min(-(n + margin), min(starts) - margin)
        hi = max(n + margin, max(starts) + margin)
        js = np.arange(lo, hi + 1)
        c0 = np.zeros((len(p), len(starts), len(js)), complex)
        for k, s in enumerate(starts):
            c0[:, k, s - lo] = 1.0
        pp = np.repeat(p, len(starts))
        c = _propagate(pulse, pp, js, c0.reshape(-1, len(js)), constants, rtol).reshape(c0.shape)
        pops = np.abs(c) ** 2
        if max(pops[..., 0].max(), pops[..., -1].max()) <= EDGE_TOL:
            return js, c
        margin += 2
    raise LadderTruncationError("ladder edge occupation stayed above bound after widening")


def transfer_probability(
    pulse: BraggPulse, p, constants: PhysicalConstants = RB87, start: int = 0, target=None, rtol: float = RTOL
):
    """|<p0+2·target ħk| U |p0+2·start ħk>|² for each momentum in ``p``."""
    target = start + pulse.order if target is None else target
    js, c = ladder_columns(pulse, p, (start,), constants, rtol)
    return np.abs(c[:, 0, target - js[0]]) ** 2


def _gauss_nodes(width: float, nodes: int):
    if width == 0:
        return np.zeros(1), np.ones(1)
    x, w = np.polynomial.hermite_e.hermegauss(nodes)
    return width * x, w / w.sum()


def ensemble_transfer(
    pulse: BraggPulse, dp_long: float, constants: PhysicalConstants = RB87, nodes: int = 24, rtol: float = RTOL
) -> float:
    """Mean 0 -> n transfer over a Gaussian p∥ distribution of 1-σ ``dp_long``."""
    p, w = _gauss_nodes(dp_long, nodes)
    return float(np.dot(w, transfer_probability(pulse, p, constants, rtol=rtol)))


SEARCH_RTOL = 1e-6


def design_window(dp_long: float, constants: PhysicalConstants = RB87) -> tuple[float, float]:
    """Bounds (Δp·k/m, ω_r) on 1/τ in rad/s; Δp in ħk."""
    lower = dp_long * constants.hbar_k * constants.wavenumber / constants.mass
    return lower, constants.recoil_frequency


def _pi_rabi_estimate(n: int, tau: float, constants: PhysicalConstants) -> float:
    """Ω_peak giving an effective π pulse in the two-level reduction."""
    unit = BraggPulse(n, tau, 1.0)
    return (math.pi / unit.effective_area(constants)) ** (1.0 / n)


def _best_full(n: int, tau: float, dp: float, constants: PhysicalConstants, nodes: int):
    om_pi = _pi_rabi_estimate(n, tau, constants)

    def eff(scale):
        return ensemble_transfer(BraggPulse(n, tau, scale * om_pi), dp, constants, nodes, SEARCH_RTOL)

    # π-pulse branch only; higher-area maxima are not mirrors
    grid = np.linspace(0.6, 1.6, 6)
    vals = [eff(s) for s in grid]
    i = int(np.argmax(vals))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    res = minimize_scalar(lambda s: -eff(s), bounds=(lo, hi), method="bounded", options={"xatol": 2e-3})
    scale, best = (res.x, -res.fun) if -res.fun >= vals[i] else (grid[i], vals[i])
    return scale * om_pi, best


@functools.lru_cache(maxsize=64)
def _design_cached(n, target, dp, constants, duration_rule, nodes):
    if target == "half":
        full = _design_cached(n, "full", dp, constants, duration_rule, nodes)
        return _half_from_full(full, dp, constants, nodes)
    lower, upper = design_window(dp, constants)
    if not lower < upper:
        raise DesignWindowError(
            f"design window empty: Δp·k/m = {lower:.4g} rad/s is not below ω_r = {upper:.4g} rad/s "
            f"(Δp = {dp:.3g} ħk); the cloud is too hot for order {n}"
        )
    if duration_rule == "geometric":
        inv_tau = math.sqrt(max(lower, 1e-3 * upper) * upper)
        om_full, _ = _best_full(n, 1.0 / inv_tau, dp, constants, nodes)
    elif duration_rule == "optimize":
        lo = math.log(max(lower, 1e-2 * upper) * (1 + 1e-3))
        hi = math.log(upper * (1 - 1e-3))
        cache = {}

        def neg_eff(x):
            cache[x] = _best_full(n, math.exp(-x), dp, constants, nodes)
            return -cache[x][1]

        res = minimize_scalar(neg_eff, bounds=(lo, hi), method="bounded", options={"xatol": 0.02})
        # the bounded search never samples the bounds themselves
        edge = hi - 1e-6
        neg_eff(edge)
        x = min(cache, key=lambda k: -cache[k][1])
        inv_tau = math.exp(x)
        om_full = cache[x][0]
    else:
        raise ValueError(f"unknown duration rule {duration_rule!r}")

    return BraggPulse(n, 1.0 / inv_tau, float(om_full))


def _half_from_full(full: BraggPulse, dp: float, constants: PhysicalConstants, nodes: int) -> BraggPulse:
    def excess(om):
        return ensemble_transfer(full.with_omega(om), dp, constants, nodes, SEARCH_RTOL) - 0.5

    om_half = brentq(excess, 0.05 * full.omega_peak, full.omega_peak, xtol=1e-6 * full.omega_peak)
    return full.with_omega(float(om_half))


def design_pulse(
    n: int,
    target: Literal["half", "full"],
    cloud: SourceCloud | float,
    constants: PhysicalConstants = RB87,
    duration_rule: Literal["optimize", "geometric"] = "optimize",
    nodes: int = 20,
) -> BraggPulse:
    """Gaussian Bragg pulse for order ``n`` tuned on the cloud's p∥ spread.

    τ is chosen inside the window Δp·k/m < 1/τ < ω_r. With
    ``duration_rule="optimize"`` (default) τ maximises the ensemble mirror
    efficiency; ``"geometric"`` pins 1/τ to the geometric mean of the window
    bounds. Ω_peak then maximises the mean transfer (``"full"``) or sets it
    to 0.5 (``"half"``, lower Ω branch).
    """
    dp = cloud.dp_long if isinstance(cloud, SourceCloud) else float(cloud)
    if target not in ("half", "full"):
        raise ValueError(f"target must be 'half' or 'full', got {target!r}")
    return _design_cached(int(n), target, float(dp), constants, duration_rule, nodes)


def two_level_transfer(pulse: BraggPulse, detuning, constants: PhysicalConstants = RB87):
    """Transfer of a two-level atom with static detuning(s) ``detuning`` (rad/s)."""
    det = np.atleast_1d(np.asarray(detuning, dtype=float))
    B = len(det)

    def rhs(t, y):
        a, b = y[:B], y[B:]
        half = 0.5 * float(pulse.rabi(t))
        return np.concatenate((-1j * half * b, -1j * (half * a + det * b)))

    y0 = np.concatenate((np.ones(B, complex), np.zeros(B, complex)))
    sol = solve_ivp(rhs, (0.0, pulse.duration), y0, method="DOP853", rtol=RTOL, atol=ATOL)
    return np.abs(sol.y[B:, -1]) ** 2


def velocity_select(pulse_duration: float, cloud: SourceCloud, constants: PhysicalConstants = RB87) -> SourceCloud:
    """Keep the sub-ensemble transferred by a first-order Gaussian π pulse.

    ``pulse_duration`` is the 1-σ envelope width. The transfer-vs-momentum
    profile uses the two-level reduction with Doppler detuning 4ω_r·p, so
    the broadband limit transfers every atom. The kept ensemble is
    re-described by its 1-σ width and atom number.
    """
    if not pulse_duration > 0:
        raise ValueError("pulse_duration must be positive")
    sigma = cloud.dp_long
    if sigma == 0:
        return cloud
    probe = BraggPulse(1, pulse_duration, 1.0)
    probe = probe.with_omega(math.pi / probe.area)
    p = np.linspace(-8 * sigma, 8 * sigma, 1601)
    profile = two_level_transfer(probe, 4.0 * constants.recoil_frequency * p, constants)
    weight = np.exp(-0.5 * (p / sigma) ** 2) * profile
    total = trapezoid(weight, p) / (sigma * math.sqrt(2 * math.pi))
    mean = trapezoid(weight * p, p) / trapezoid(weight, p)
    var = trapezoid(weight * (p - mean) ** 2, p) / trapezoid(weight, p)
    return cloud.with_(dp_long=float(math.sqrt(var)), atom_number=max(1.0, cloud.atom_number * float(total)))


@dataclass(frozen=True)
class SpectroscopyResult:
    """Bragg spectrum and its Gaussian fit.

    ``detunings`` in rad/s, ``response`` is the transferred fraction,
    ``width`` and ``width_err`` are the fitted 1-σ momentum width in ħk.
    """

    detunings: np.ndarray
    response: np.ndarray
    width: float
    width_err: float
    center: float
    amplitude: float


def _gaussian(x, a, c, s):
    return a * np.exp(-0.5 * ((x - c) / s) ** 2)


def bragg_spectroscopy(
    cloud: SourceCloud,
    probe: BraggPulse,
    detuning_grid,
    constants: PhysicalConstants = RB87,
) -> SpectroscopyResult:
    """Transfer fraction vs probe detuning, and the momentum width it implies.

    Uses the exact equivalence between probe detuning Δ and a momentum shift
    Δ/(4ω_r): the single-atom profile is computed once and convolved with
    the cloud's Gaussian p∥ distribution. The fitted detuning width is
    converted with the two-photon Doppler relation Δ = 2k·p/m.
    """
    wr = constants.recoil_frequency
    sigma = cloud.dp_long
    if sigma > 0:
        lower, _ = design_window(sigma, constants)
        if not 1.0 / probe.tau < 10.0 * lower:
            raise ValueError(
                f"probe too short to resolve the cloud: 1/τ = {1 / probe.tau:.4g} rad/s "
                f"must be below 10·Δp·k/m = {10 * lower:.4g} rad/s"
            )
    det = np.asarray(detuning_grid, dtype=float)
    resolution = 1.0 / (4.0 * wr * probe.tau)
    narrow = sigma < resolution / 20
    du = resolution / 8 if narrow else min(resolution, sigma) / 8
    half = 6 * resolution
    u = np.arange(-half, half + du / 2, du)
    profile = transfer_probability(replace(probe, detuning=0.0, chirp=0.0), u, constants)
    shifts = det / (4.0 * wr)
    if narrow:
        response = np.interp(-shifts, u, profile, left=0.0, right=0.0)
    else:
        arg = (u[None, :] + shifts[:, None]) / sigma
        dens = np.exp(-0.5 * arg**2) / (sigma * math.sqrt(2 * math.pi))
        response = trapezoid(profile[None, :] * dens, u, axis=1)

    i = int(np.argmax(response))
    if response[i] <= 0:
        raise FitError("spectroscopy response is identically zero; nothing to fit")
    above = det[response > response[i] / 2]
    s0 = max((above.max() - above.min()) / 2.355, abs(det[1] - det[0]) if len(det) > 1 else 1.0)
    # fit in units of the initial width and peak so the Jacobian is well scaled
    ymax = response[i]
    x, y = det / s0, response / ymax
    fit = least_squares(lambda q: _gaussian(x, *q) - y, (1.0, det[i] / s0, 1.0), method="lm", max_nfev=20000)
    if not fit.success:
        raise FitError(f"Gaussian fit to Bragg spectrum failed: {fit.message}")
    jtj = fit.jac.T @ fit.jac
    if np.linalg.cond(jtj) > 1e12:
        raise FitError("Gaussian fit to Bragg spectrum is degenerate")
    dof = max(len(x) - 3, 1)
    pcov = np.linalg.inv(jtj) * float(np.sum(fit.fun**2)) / dof * s0**2
    a, c, s = fit.x[0] * ymax, fit.x[1] * s0, fit.x[2] * s0
    return SpectroscopyResult(
        detunings=det,
        response=response,
        width=abs(s) / (4.0 * wr),
        width_err=float(math.sqrt(pcov[2, 2])) / (4.0 * wr),
        center=c,
        amplitude=a,
    )
