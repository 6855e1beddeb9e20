import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from becgrav.bragg import (
    BraggPulse,
    DesignWindowError,
    FitError,
    LadderState,
    LadderTruncationError,
    bragg_spectroscopy,
    design_pulse,
    design_window,
    ensemble_transfer,
    evolve_ladder,
    rabi_transfer,
    transfer_probability,
    velocity_select,
)
from becgrav.constants import RB87
from becgrav.source import SourceCloud

from conftest import preset_experiment, two_level_pulses

WR = RB87.recoil_frequency


@settings(max_examples=12, deadline=None)
@given(
    n=st.integers(1, 3),
    tau_wr=st.floats(0.5, 3.0),
    omega_wr=st.floats(0.0, 6.0),
    p0=st.floats(-0.3, 0.3),
    chirp=st.floats(-0.2, 0.2),
)
def test_ladder_unitarity(n, tau_wr, omega_wr, p0, chirp):
    pulse = BraggPulse(n, tau_wr / WR, omega_wr * WR, chirp=chirp * WR**2, phase=0.3)
    out = evolve_ladder(pulse, LadderState.at_rest(p0, n, margin=5))
    assert abs(out.norm - 1.0) < 1e-6


def test_square_pulse_deep_bragg_pi():
    tau = 50 / WR
    pulse = BraggPulse(1, tau, math.pi / tau, envelope="square")
    assert transfer_probability(pulse, [0.0])[0] == pytest.approx(1.0, abs=1e-3)


def test_far_detuned_pulse_transfers_nothing():
    _, pi = two_level_pulses(1, 10.0)
    detuned = BraggPulse(1, pi.tau, pi.omega_peak, detuning=100 / pi.tau)
    assert transfer_probability(detuned, [0.0])[0] < 1e-3


@pytest.mark.parametrize("frac", [0.5, 1.0])
def test_two_level_equivalence_first_order(frac):
    half, full = two_level_pulses(1, 10.0)
    pulse = half if frac == 0.5 else full
    P = transfer_probability(pulse, [0.0])[0]
    assert abs(P - rabi_transfer(pulse.effective_area())) < 1e-3


@pytest.mark.slow
def test_two_level_equivalence_second_order():
    # corrections to the adiabatic elimination fall off as 1/τ
    half, _ = two_level_pulses(2, 160.0)
    P = transfer_probability(half, [0.0])[0]
    assert abs(P - rabi_transfer(half.effective_area())) < 1e-3


def test_time_reversal():
    q = BraggPulse(2, 3 / WR, 8 * WR, chirp=0.3 * WR**2, phase=0.7, detuning=0.1 * WR)
    s0 = LadderState.at_rest(0.05, 2)
    s1 = evolve_ladder(q, s0)
    back = evolve_ladder(q.time_reversed(), LadderState(s1.p0, s1.js, np.conj(s1.amplitudes)))
    assert np.abs(np.conj(back.amplitudes) - s0.amplitudes).max() < 1e-5


@given(st.floats(-0.4, 0.4))
@settings(max_examples=8, deadline=None)
def test_momentum_shift_equals_detuning(s):
    pulse = BraggPulse(1, 2 / WR, 1.2 * WR)
    shifted = BraggPulse(1, 2 / WR, 1.2 * WR, detuning=-4 * WR * s)
    a = transfer_probability(pulse, [s])[0]
    b = transfer_probability(shifted, [0.0])[0]
    assert a == pytest.approx(b, abs=1e-7)


def test_unnormalised_state_rejected():
    s = LadderState.at_rest(0.0, 1)
    bad = LadderState(s.p0, s.js, 2 * s.amplitudes)
    with pytest.raises(ValueError, match="normalised"):
        evolve_ladder(BraggPulse(1, 1 / WR, WR), bad)


def test_truncation_detected():
    strong = BraggPulse(1, 1 / WR, 10 * WR)
    with pytest.raises(LadderTruncationError):
        evolve_ladder(strong, LadderState.at_rest(0.0, 1, margin=0))


def test_pulse_validation():
    with pytest.raises(ValueError):
        BraggPulse(0, 1e-5, 1.0)
    with pytest.raises(ValueError):
        BraggPulse(1, -1e-5, 1.0)
    with pytest.raises(ValueError):
        BraggPulse(1, 1e-5, 1.0, half_window=1e-5)


def test_design_window_bounds():
    lo, hi = design_window(0.14)
    assert hi == WR and lo == pytest.approx(0.28 * WR, rel=1e-12)
    with pytest.raises(DesignWindowError, match="ω_r"):
        design_pulse(1, "full", 0.6)
    with pytest.raises(ValueError):
        design_pulse(1, "quarter", 0.1)


@pytest.mark.slow
def test_designed_pulses_first_order():
    full = design_pulse(1, "full", 0.14)
    half = design_pulse(1, "half", 0.14)
    lo, hi = design_window(0.14)
    assert lo < 1 / full.tau <= hi * (1 + 1e-9)
    assert ensemble_transfer(half, 0.14) == pytest.approx(0.5, abs=5e-3)
    assert half.omega_peak < full.omega_peak


def test_mirror_efficiency_falls_with_width():
    full = preset_experiment("fig1").sequence.pulses[1]
    effs = [ensemble_transfer(full, dp) for dp in (0.0, 0.05, 0.1, 0.14, 0.2)]
    assert all(b <= a + 1e-9 for a, b in zip(effs, effs[1:]))


def test_velocity_selection():
    cloud = SourceCloud("condensate", 2e6, 0.14, 0.1, 2e-5)
    same = velocity_select(1e-9, cloud)
    assert same.dp_long == pytest.approx(0.14, rel=1e-6)
    assert same.atom_number == pytest.approx(2e6, rel=1e-6)
    once = velocity_select(300e-6, cloud)
    assert once.dp_long < cloud.dp_long and once.atom_number < cloud.atom_number
    twice = velocity_select(300e-6, once)
    lost_first = 1 - once.atom_number / cloud.atom_number
    lost_second = 1 - twice.atom_number / once.atom_number
    assert lost_second < lost_first


def _probe(tau):
    p = BraggPulse(1, tau, 1.0)
    return p.with_omega(math.pi / p.area)


def _spectrum(dp, tau=1e-3, points=61):
    cloud = SourceCloud("condensate", 1e5, dp, 0.0, 0.0)
    span = 5 * max(dp, 1 / (4 * WR * tau)) * 4 * WR
    return bragg_spectroscopy(cloud, _probe(tau), np.linspace(-span, span, points))


def test_spectroscopy_recovers_width():
    assert _spectrum(0.14).width == pytest.approx(0.14, rel=0.1)


def test_spectroscopy_width_doubles():
    a, b = _spectrum(0.1), _spectrum(0.2)
    assert b.width / a.width == pytest.approx(2.0, rel=0.05)


def test_spectroscopy_zero_width_limited_by_probe():
    tau = 1e-3
    res = _spectrum(0.0, tau)
    assert 0 < res.width <= 1 / (4 * WR * tau)


def test_spectroscopy_preconditions():
    cloud = SourceCloud("condensate", 1e5, 0.14, 0.0, 0.0)
    with pytest.raises(ValueError, match="too short"):
        bragg_spectroscopy(cloud, _probe(1e-6), np.linspace(-1e4, 1e4, 11))
    far = np.linspace(1e7, 1.1e7, 11)
    with pytest.raises(FitError):
        bragg_spectroscopy(cloud, _probe(1e-3), far)


@pytest.mark.slow
def test_efficiency_non_increasing_in_order():
    effs = [ensemble_transfer(design_pulse(n, "full", 0.14), 0.14) for n in (1, 2, 3)]
    assert effs[0] >= effs[1] >= effs[2]
    assert effs[2] < effs[0]


def test_geometric_duration_rule():
    lo, hi = design_window(0.14)
    pulse = design_pulse(1, "full", 0.14, duration_rule="geometric")
    assert 1 / pulse.tau == pytest.approx(math.sqrt(lo * hi), rel=1e-12)
