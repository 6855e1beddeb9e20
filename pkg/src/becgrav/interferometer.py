"""Pulse sequences, arm trajectories, interferometer phase and Monte Carlo fringes.

Trajectories are computed in the freely falling frame with Bragg pulses as
instantaneous kicks at their centres; Bloch segments ramp the momentum of one
arm linearly during the sweep. Amplitudes use the full ladder dynamics of
:mod:`becgrav.bragg` evaluated at each atom's longitudinal momentum.

Readout convention
------------------
Arm ``a`` is the one kicked by the first beamsplitter. At the last pulse it
arrives in ladder state 0 with amplitude α, arm ``b`` in state n with
amplitude β. The reported population is the ensemble-mean occupation of the
output port n divided by the mean number of atoms reaching the final pulse
on the two interfering paths,

    P = <|U₃[n,0] α + U₃[n,n] β|²> / <|α|² + |β|²>,

with the relative phase of the two paths set to Φ + δφ. Atoms scattered to
other ladder states, or left behind on non-interfering paths, are spatially
separated at detection and are not counted. The output port is bright at
Φ = 0, so P = ½(A + V cos(Φ + ψ)) with A, V, ψ fixed by the ensemble.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Callable, Literal, Sequence, Union

import numpy as np
from scipy.optimize import brentq

from .bloch import BlochSegment, landau_zener_loss
from .bragg import BraggPulse, design_pulse, ladder_columns
from .constants import RB87, PhysicalConstants
from .source import SourceCloud, sample_atoms

CLOSURE_TOL = 1e-6  # m
TIMING_RTOL = 1e-9
GRID_POINTS = 161


class ClosureError(ValueError):
    """The two arms do not overlap at the final pulse."""


# -- sequence description -------------------------------------------------


@dataclass(frozen=True)
class BraggSplit:
    """Beamsplitter (first or last pulse)."""

    order: int
    pulse: BraggPulse


@dataclass(frozen=True)
class Mirror:
    order: int
    pulse: BraggPulse


@dataclass(frozen=True)
class BlochAccel:
    """Lattice acceleration of one arm. ``arm`` is "a" (kicked by the splitter) or "b"."""

    segment: BlochSegment
    arm: Literal["a", "b"]

    def __post_init__(self):
        if self.arm not in ("a", "b"):
            raise ValueError(f"arm must be 'a' or 'b', got {self.arm!r}")

    @property
    def duration(self) -> float:
        return self.segment.duration


@dataclass(frozen=True)
class FreeEvolution:
    duration: float

    def __post_init__(self):
        if self.duration < 0:
            raise ValueError("free evolution duration must be non-negative")


Segment = Union[BraggSplit, Mirror, BlochAccel, FreeEvolution]


def _duration(seg: Segment) -> float:
    return getattr(seg, "duration", 0.0)


@dataclass(frozen=True)
class PulseSequence:
    """Ordered segments of a three-pulse Mach-Zehnder.

    Timing is implicit: Bragg pulses take zero time for kinematic purposes
    and the other segments follow each other back to back. The splitter,
    mirror and recombiner must sit at 0, T and 2T. ``chirp`` is the
    frequency sweep rate in Hz/s, left unset until a scan fixes it.
    """

    segments: tuple
    T: float
    chirp: float | None = None

    def __post_init__(self):
        segs = tuple(self.segments)
        object.__setattr__(self, "segments", segs)
        if not self.T > 0:
            raise ValueError("interrogation time T must be positive")
        kinds = [type(s) for s in segs if isinstance(s, (BraggSplit, Mirror))]
        if kinds != [BraggSplit, Mirror, BraggSplit]:
            raise ValueError("sequence must contain splitter, mirror, splitter in that order")
        if not isinstance(segs[0], BraggSplit) or not isinstance(segs[-1], BraggSplit):
            raise ValueError("sequence must start and end with a Bragg beamsplitter")
        orders = {s.order for s in segs if isinstance(s, (BraggSplit, Mirror))}
        if len(orders) != 1:
            raise ValueError(f"all Bragg pulses must share one order, got {sorted(orders)}")
        times = self.pulse_times
        for expected, got in zip((self.T, 2 * self.T), times[1:]):
            if abs(got - expected) > TIMING_RTOL * self.T:
                raise ValueError(f"Bragg pulse at t = {got:.9g} s, expected {expected:.9g} s")

    @property
    def order(self) -> int:
        return self.segments[0].order

    @property
    def pulses(self) -> tuple[BraggPulse, BraggPulse, BraggPulse]:
        return tuple(s.pulse for s in self.segments if isinstance(s, (BraggSplit, Mirror)))

    @property
    def pulse_times(self) -> tuple[float, float, float]:
        t, out = 0.0, []
        for s in self.segments:
            if isinstance(s, (BraggSplit, Mirror)):
                out.append(t)
            t += _duration(s)
        return tuple(out)

    @property
    def bloch_segments(self) -> list[BlochAccel]:
        return [s for s in self.segments if isinstance(s, BlochAccel)]

    def with_chirp(self, chirp: float) -> "PulseSequence":
        return PulseSequence(self.segments, self.T, chirp)


def build_mach_zehnder(
    n: int,
    T: float,
    cloud: SourceCloud | float,
    constants: PhysicalConstants = RB87,
    pulses: tuple[BraggPulse, BraggPulse] | None = None,
) -> PulseSequence:
    """π/2 − π − π/2 Bragg sequence with pulses from :func:`design_pulse`.

    ``pulses`` = (half, full) skips the design step.
    """
    if not T > 0:
        raise ValueError("T must be positive; T = 0 is a degenerate geometry")
    half, full = pulses if pulses is not None else (
        design_pulse(n, "half", cloud, constants),
        design_pulse(n, "full", cloud, constants),
    )
    segs = (BraggSplit(n, half), FreeEvolution(T), Mirror(n, full), FreeEvolution(T), BraggSplit(n, half))
    return PulseSequence(segs, T)


@dataclass(frozen=True)
class BlochPlacement:
    """Where the lattice blocks sit inside each half of a Bloch sequence.

    ``delay``: from the splitter to the start of the first lattice load (s).
    ``hold``: from the end of the acceleration block to the start of the
    deceleration block (s). The second half is the time mirror image of the
    first, applied to the other arm.
    """

    delay: float
    hold: float


def build_bloch_sequence(
    T: float,
    cloud: SourceCloud | float,
    placement: BlochPlacement,
    order: int = 2,
    depth: float = 10.0,
    load_time: float = 100e-6,
    sweep_time: float = 200e-6,
    zones: int = 1,
    constants: PhysicalConstants = RB87,
    pulses: tuple[BraggPulse, BraggPulse] | None = None,
) -> PulseSequence:
    """Bragg MZ with a lattice accelerate/decelerate pair on each arm in turn."""
    if not T > 0:
        raise ValueError("T must be positive")
    half, full = pulses if pulses is not None else (
        design_pulse(order, "half", cloud, constants),
        design_pulse(order, "full", cloud, constants),
    )
    up = BlochSegment(depth, load_time, sweep_time, zones, +1)
    down = BlochSegment(depth, load_time, sweep_time, zones, -1)
    rest = T - placement.delay - placement.hold - up.duration - down.duration
    if placement.delay < 0 or placement.hold < 0 or rest < -TIMING_RTOL * T:
        raise ValueError("Bloch blocks do not fit inside the interrogation time")
    rest = max(rest, 0.0)
    first = (
        FreeEvolution(placement.delay), BlochAccel(up, "a"), FreeEvolution(placement.hold),
        BlochAccel(down, "a"), FreeEvolution(rest),
    )
    second = (
        FreeEvolution(rest), BlochAccel(up, "b"), FreeEvolution(placement.hold),
        BlochAccel(down, "b"), FreeEvolution(placement.delay),
    )
    segs = (BraggSplit(order, half),) + first + (Mirror(order, full),) + second + (BraggSplit(order, half),)
    return PulseSequence(segs, T)


# -- trajectories ---------------------------------------------------------


@dataclass(frozen=True)
class ArmTrajectory:
    """Piecewise record of one arm in the falling frame.

    Piece i spans ``[t[i], t[i+1]]`` with momentum (ħk) linear from
    ``p_start[i]`` to ``p_end[i]`` and position ``z[i]`` (m) at its start.
    Kicks appear as a jump between ``p_end[i-1]`` and ``p_start[i]``.
    """

    t: np.ndarray
    p_start: np.ndarray
    p_end: np.ndarray
    z: np.ndarray
    recoil_velocity: float

    def _coeffs(self):
        """z(t) = z_i + c1 (t - t_i) + c2 (t - t_i)² on each piece."""
        dt = np.diff(self.t)
        with np.errstate(divide="ignore", invalid="ignore"):
            slope = np.where(dt > 0, (self.p_end - self.p_start) / np.where(dt > 0, dt, 1.0), 0.0)
        return self.z, self.recoil_velocity * self.p_start, 0.5 * self.recoil_velocity * slope

    def position(self, t):
        t = np.asarray(t, dtype=float)
        i = np.clip(np.searchsorted(self.t, t, side="right") - 1, 0, len(self.t) - 2)
        c0, c1, c2 = self._coeffs()
        s = t - self.t[i]
        return c0[i] + c1[i] * s + c2[i] * s * s

    def momentum(self, t):
        t = np.asarray(t, dtype=float)
        i = np.clip(np.searchsorted(self.t, t, side="right") - 1, 0, len(self.t) - 2)
        dt = self.t[i + 1] - self.t[i]
        frac = np.where(dt > 0, (t - self.t[i]) / np.where(dt > 0, dt, 1.0), 0.0)
        return self.p_start[i] + frac * (self.p_end[i] - self.p_start[i])

    @property
    def final_position(self) -> float:
        c0, c1, c2 = self._coeffs()
        s = self.t[-1] - self.t[-2]
        return float(c0[-1] + c1[-1] * s + c2[-1] * s * s)


def arm_trajectories(seq: PulseSequence, constants: PhysicalConstants = RB87) -> dict[str, ArmTrajectory]:
    """Exact piecewise-ballistic trajectories of arms ``a`` and ``b``.

    Both arms share piece boundaries. The first splitter kicks arm a by
    2nħk; the mirror swaps the momenta. The recombiner is not applied.
    """
    n = seq.order
    vr = constants.recoil_velocity
    mom = {"a": 0.0, "b": 0.0}
    pieces = {"a": [], "b": []}  # (t0, t1, p0, p1)
    t = 0.0
    bragg_seen = 0

    def add(t0, t1, ramps):
        for arm in ("a", "b"):
            p0 = mom[arm]
            p1 = p0 + ramps.get(arm, 0.0)
            pieces[arm].append((t0, t1, p0, p1))
            mom[arm] = p1

    for seg in seq.segments:
        if isinstance(seg, (BraggSplit, Mirror)):
            bragg_seen += 1
            if bragg_seen == 1:
                mom["a"] += 2 * n
            elif bragg_seen == 2:
                mom["a"] -= 2 * n
                mom["b"] += 2 * n
        elif isinstance(seg, FreeEvolution):
            if seg.duration > 0:
                add(t, t + seg.duration, {})
            t += seg.duration
        elif isinstance(seg, BlochAccel):
            b = seg.segment
            bounds = [t, t + b.load_time, t + b.load_time + b.zones * b.sweep_time, t + b.duration]
            for k, (t0, t1) in enumerate(zip(bounds[:-1], bounds[1:])):
                if t1 > t0:
                    add(t0, t1, {seg.arm: float(b.momentum_transfer)} if k == 1 else {})
                elif k == 1:
                    mom[seg.arm] += b.momentum_transfer
            t += b.duration
        else:
            raise TypeError(f"unknown segment {seg!r}")

    out = {}
    for arm, pcs in pieces.items():
        ts = np.array([p[0] for p in pcs] + [pcs[-1][1]])
        p0 = np.array([p[2] for p in pcs])
        p1 = np.array([p[3] for p in pcs])
        z = np.zeros(len(pcs))
        for i in range(1, len(pcs)):
            dt = ts[i] - ts[i - 1]
            z[i] = z[i - 1] + vr * 0.5 * (p0[i - 1] + p1[i - 1]) * dt
        out[arm] = ArmTrajectory(ts, p0, p1, z, vr)
    return out


def _abs_quadratic_integral(c0: float, c1: float, c2: float, L: float) -> float:
    """∫₀ᴸ |c0 + c1 s + c2 s²| ds, splitting at sign changes."""
    roots = np.roots([c2, c1, c0]) if (c2 or c1) else np.array([])
    cuts = sorted(float(r.real) for r in np.atleast_1d(roots) if r.imag == 0 and 0 < r.real < L)
    edges = [0.0] + cuts + [L]

    def prim(s):
        return c0 * s + c1 * s * s / 2 + c2 * s**3 / 3

    return sum(abs(prim(b) - prim(a)) for a, b in zip(edges[:-1], edges[1:]))


def separation_integral(seq: PulseSequence, constants: PhysicalConstants = RB87) -> tuple[float, float]:
    """(∫|z_a − z_b| dt in m·s, final separation in m)."""
    arms = arm_trajectories(seq, constants)
    a, b = arms["a"], arms["b"]
    ca, cb = a._coeffs(), b._coeffs()
    d0, d1, d2 = (x - y for x, y in zip(ca, cb))
    total = sum(_abs_quadratic_integral(d0[i], d1[i], d2[i], a.t[i + 1] - a.t[i]) for i in range(len(d0)))
    return total, a.final_position - b.final_position


def check_closure(seq: PulseSequence, constants: PhysicalConstants = RB87) -> float:
    """Raise :class:`ClosureError` unless the arms overlap at the last pulse; returns |Δz|."""
    arms = arm_trajectories(seq, constants)
    n = seq.order
    dp = arms["a"].p_end[-1] - arms["b"].p_end[-1]
    if abs(dp + 2 * n) > 1e-9:
        raise ClosureError(f"arm momenta differ by {dp:+g} ħk at the recombiner, expected {-2 * n:+d}")
    dz = abs(arms["a"].final_position - arms["b"].final_position)
    if dz >= CLOSURE_TOL:
        raise ClosureError(f"arms separated by {dz * 1e6:.3g} μm at the recombiner")
    return dz


def effective_order(seq: PulseSequence, constants: PhysicalConstants = RB87) -> float:
    """n_eff = (m / (2ħk T²)) ∫|z_a − z_b| dt over the sequence."""
    check_closure(seq, constants)
    area, _ = separation_integral(seq, constants)
    return float(area / (2.0 * constants.recoil_velocity * seq.T**2))


def tune_bloch_placement(
    target: float,
    T: float,
    delay: float = 0.0,
    order: int = 2,
    depth: float = 10.0,
    load_time: float = 100e-6,
    sweep_time: float = 200e-6,
    constants: PhysicalConstants = RB87,
) -> BlochPlacement:
    """Hold time that gives effective order ``target`` for a given ``delay``."""
    dummy = BraggPulse(order, 1e-6, 1.0)
    block = BlochSegment(depth, load_time, sweep_time).duration

    def excess(hold):
        seq = build_bloch_sequence(
            T, 0.0, BlochPlacement(delay, hold), order, depth, load_time, sweep_time,
            constants=constants, pulses=(dummy, dummy),
        )
        return effective_order(seq, constants) - target

    hmax = T - delay - 2 * block
    if hmax < 0:
        raise ValueError("lattice blocks do not fit")
    lo, hi = excess(0.0), excess(hmax)
    if lo * hi > 0:
        raise ValueError(f"n_eff = {target} unreachable; range is [{lo + target:.4g}, {hi + target:.4g}]")
    return BlochPlacement(delay, brentq(excess, 0.0, hmax, xtol=1e-12))


# -- phase ---------------------------------------------------------------


def interferometer_phase(
    seq: PulseSequence,
    g: float,
    alpha,
    constants: PhysicalConstants = RB87,
    tilt: float = 0.0,
    k_direction: int = 1,
    n_eff: float | None = None,
):
    """Φ = (2 k·g − 2πα) n_eff T² in rad; ``alpha`` in Hz/s, may be an array."""
    if n_eff is None:
        n_eff = effective_order(seq, constants)
    kg = k_direction * constants.wavenumber * g * math.cos(tilt)
    return (2.0 * kg - 2.0 * math.pi * np.asarray(alpha, dtype=float)) * n_eff * seq.T**2


def fringe_period(seq: PulseSequence, constants: PhysicalConstants = RB87) -> float:
    """Chirp period 1/(n_eff T²) in Hz/s."""
    return 1.0 / (effective_order(seq, constants) * seq.T**2)


def mid_fringe_response(visibility: float, dphi):
    """ΔP = (V/2) ΔΦ for small phase offsets from mid-fringe."""
    return 0.5 * visibility * np.asarray(dphi, dtype=float) if np.ndim(dphi) else 0.5 * visibility * float(dphi)


# -- aberrations and ensemble readout --------------------------------------


@dataclass(frozen=True)
class AberrationMap:
    """φ(x, y) = a r² + b r⁴, with ``quadratic`` a in rad/m² and ``quartic`` b in rad/m⁴."""

    quadratic: float = 0.0
    quartic: float = 0.0

    def __call__(self, x, y):
        r2 = np.asarray(x) ** 2 + np.asarray(y) ** 2
        return self.quadratic * r2 + self.quartic * r2 * r2


@dataclass(frozen=True)
class FringeModel:
    """Noise-free ensemble readout P(Φ) = ½(offset + visibility·cos(Φ + phase))."""

    offset: float
    visibility: float
    phase: float
    n_eff: float
    mean_retention: float

    def population(self, Phi):
        return 0.5 * (self.offset + self.visibility * np.cos(np.asarray(Phi) + self.phase))


def _magnitude_table(pulse: BraggPulse, grid: np.ndarray, constants: PhysicalConstants):
    n = pulse.order
    js, amps = ladder_columns(pulse, grid, (0, n), constants)
    i0, i_n = -js[0], n - js[0]
    a = np.abs(amps)
    # keys: (to, from)
    return {(0, 0): a[:, 0, i0], (n, 0): a[:, 0, i_n], (0, n): a[:, 1, i0], (n, n): a[:, 1, i_n]}


@functools.lru_cache(maxsize=32)
def _cached_tables(pulse: BraggPulse, lo: float, hi: float, points: int, constants: PhysicalConstants):
    grid = np.linspace(lo, hi, points) if hi > lo else np.array([lo])
    return grid, _magnitude_table(pulse, grid, constants)


def _lookup(pulse, p, constants):
    lo, hi = float(p.min()), float(p.max())
    if hi - lo < 1e-12:
        grid, tab = _cached_tables(pulse, lo, lo, 1, constants)
        return {k: np.full(p.shape, v[0]) for k, v in tab.items()}
    # snap the grid to a symmetric span so repeated calls share the cache
    span = float(np.ceil(max(abs(lo), abs(hi)) * 1e3) / 1e3)
    grid, tab = _cached_tables(pulse, -span, span, GRID_POINTS, constants)
    return {k: np.interp(p, grid, v) for k, v in tab.items()}


def _bloch_amplitude(seq: PulseSequence, arm: str, constants: PhysicalConstants) -> float:
    amp = 1.0
    for s in seq.bloch_segments:
        if s.arm == arm:
            amp *= math.sqrt(s.segment.retention(constants))
    return amp


def _light_shift(seq: PulseSequence) -> float:
    # phase on arm a minus arm b
    return sum((1 if s.arm == "a" else -1) * s.segment.light_shift_phase for s in seq.bloch_segments)


def ensemble_readout(
    seq: PulseSequence,
    cloud: SourceCloud,
    aberration: Callable | None = None,
    seed: int = 0,
    ensemble_size: int = 20000,
    constants: PhysicalConstants = RB87,
) -> FringeModel:
    """Average the per-atom two-path readout over a fixed sample of the cloud."""
    n = seq.order
    atoms = sample_atoms(cloud, ensemble_size, np.random.SeedSequence([seed, 0]))
    p = atoms.p_long
    u1, u2, u3 = (_lookup(pulse, p, constants) for pulse in seq.pulses)
    ra, rb = _bloch_amplitude(seq, "a", constants), _bloch_amplitude(seq, "b", constants)
    alpha = u1[(n, 0)] * u2[(0, n)] * ra
    beta = u1[(0, 0)] * u2[(n, 0)] * rb
    x = u3[(n, 0)] * alpha
    y = u3[(n, n)] * beta

    if aberration is not None:
        v = atoms.p_perp * constants.recoil_velocity
        phis = []
        for ti in seq.pulse_times:
            r = atoms.r_perp + v * ti
            phis.append(np.asarray(aberration(r[:, 0], r[:, 1]), dtype=float))
        dphi = n * (phis[0] - 2.0 * phis[1] + phis[2])
    else:
        dphi = np.zeros_like(p)
    dphi = dphi + _light_shift(seq)

    norm = float(np.mean(alpha**2 + beta**2))
    if norm <= 0:
        raise RuntimeError("no atoms reach the recombiner on the interfering paths")
    M = float(np.mean(x**2 + y**2))
    C = complex(np.mean(x * y * np.exp(1j * dphi)))
    return FringeModel(
        offset=2.0 * M / norm,
        visibility=4.0 * abs(C) / norm,
        phase=float(np.angle(C)) if abs(C) > 0 else 0.0,
        n_eff=effective_order(seq, constants),
        mean_retention=norm,
    )


def calibrate_aberration(
    seq: PulseSequence,
    cloud: SourceCloud,
    target_visibility: float,
    quartic: float = 0.0,
    seed: int = 0,
    ensemble_size: int = 20000,
    constants: PhysicalConstants = RB87,
) -> AberrationMap:
    """Quadratic coefficient at which the ensemble visibility equals the target."""
    v0 = ensemble_readout(seq, cloud, AberrationMap(0.0, quartic), seed, ensemble_size, constants).visibility
    if target_visibility > v0:
        raise ValueError(f"target visibility {target_visibility} exceeds the aberration-free value {v0:.4f}")

    def excess(a):
        return ensemble_readout(seq, cloud, AberrationMap(a, quartic), seed, ensemble_size, constants).visibility - target_visibility

    hi = 1.0
    while excess(hi) > 0:
        hi *= 2.0
        if hi > 1e12:
            raise RuntimeError("visibility target not reached by any quadratic aberration")
    lo = hi / 2.0 if hi > 1.0 else 0.0
    return AberrationMap(brentq(excess, lo, hi, xtol=1e-9 * hi), quartic)


# -- fringe scans ---------------------------------------------------------


@dataclass(frozen=True)
class FringeScan:
    """Chirp scan samples. ``atoms`` = 0 marks a noise-free expectation value."""

    alpha: np.ndarray
    population: np.ndarray
    atoms: np.ndarray
    seeds: np.ndarray
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        n = len(self.alpha)
        if not (len(self.population) == len(self.atoms) == len(self.seeds) == n):
            raise ValueError("scan columns must have equal length")
        pop = np.asarray(self.population)
        if np.any((pop < 0) | (pop > 1)):
            raise ValueError("populations must lie in [0, 1]")

    def __len__(self):
        return len(self.alpha)


def point_seed(seed: int, index: int) -> int:
    """Seed for scan point ``index``, independent of evaluation order."""
    return int(np.random.SeedSequence([seed, 1, index]).generate_state(1, np.uint64)[0])


def _scan_point(args, model: FringeModel, base_phase: float, slope: float, detected, jitter: float, order: int):
    index, alpha, seed = args
    rng = np.random.default_rng(seed)
    phi = base_phase + slope * alpha
    if jitter > 0:
        phi -= 2.0 * order * jitter * rng.standard_normal()
    mean = float(np.clip(model.population(phi), 0.0, 1.0))
    if detected is None:
        return mean
    return rng.binomial(detected, mean) / detected


def simulate_fringe_scan(
    seq: PulseSequence,
    cloud: SourceCloud,
    alpha_grid: Sequence[float],
    aberration: Callable | None = None,
    detected_atoms: int | None = None,
    seed: int = 0,
    g: float | None = None,
    constants: PhysicalConstants = RB87,
    ensemble_size: int = 20000,
    mirror_jitter: float = 0.0,
    tilt: float = 0.0,
    k_direction: int = 1,
    cycle_time: float = 3.0,
    map_fn: Callable = map,
) -> FringeScan:
    """Chirp-scanned fringes with binomial detection noise.

    The atom sample and its readout statistics are drawn once from ``seed``;
    each point then uses its own seed from :func:`point_seed`. ``map_fn``
    may be a parallel map; output does not depend on evaluation order.
    """
    alpha = np.asarray(alpha_grid, dtype=float)
    if alpha.size == 0:
        raise ValueError("alpha grid is empty")
    if detected_atoms is not None and detected_atoms < 1:
        raise ValueError("detected_atoms must be >= 1")
    g = constants.g_ref if g is None else g
    model = ensemble_readout(seq, cloud, aberration, seed, ensemble_size, constants)
    base = float(interferometer_phase(seq, g, 0.0, constants, tilt, k_direction, model.n_eff))
    slope = -2.0 * math.pi * model.n_eff * seq.T**2
    seeds = np.array([point_seed(seed, i) for i in range(alpha.size)], dtype=np.uint64)
    worker = functools.partial(
        _scan_point, model=model, base_phase=base, slope=slope, detected=detected_atoms,
        jitter=mirror_jitter, order=seq.order,
    )
    pops = np.fromiter(map_fn(worker, zip(range(alpha.size), alpha, seeds)), float, count=alpha.size)
    atoms = np.full(alpha.size, 0 if detected_atoms is None else int(detected_atoms), dtype=np.int64)
    metadata = {
        "order": seq.order,
        "T": seq.T,
        "n_eff": model.n_eff,
        "seed": seed,
        "ensemble_size": ensemble_size,
        "cycle_time": cycle_time,
        "g": g,
        "tilt": tilt,
        "model_offset": model.offset,
        "model_visibility": model.visibility,
        "model_phase": model.phase,
        "cloud_kind": cloud.kind,
    }
    return FringeScan(alpha, pops, atoms, seeds, metadata)


def bloch_retention(seq: PulseSequence, constants: PhysicalConstants = RB87) -> float:
    """Product of Landau-Zener retention over every lattice segment."""
    out = 1.0
    for s in seq.bloch_segments:
        out *= (1.0 - landau_zener_loss(s.segment.depth, s.segment.sweep_time, constants)) ** s.segment.zones
    return out
