"""Simulation and analysis toolkit for a condensate-based Mach-Zehnder gravimeter."""

from .analysis import FringeFit, extract_g, fit_fringes, mid_fringe_precision
from .bloch import BlochSegment, adiabaticity_margin, arm_momentum_profile, landau_zener_loss
from .bragg import (
    BraggPulse,
    LadderState,
    bragg_spectroscopy,
    design_pulse,
    ensemble_transfer,
    evolve_ladder,
    transfer_probability,
    velocity_select,
)
from .constants import RB87, PhysicalConstants, get_constants
from .interferometer import (
    AberrationMap,
    FringeScan,
    PulseSequence,
    build_bloch_sequence,
    build_mach_zehnder,
    effective_order,
    interferometer_phase,
    mid_fringe_response,
    simulate_fringe_scan,
)
from .meanfield import (
    MeanFieldModel,
    chemical_potential,
    dephasing_rate,
    evolve_scaling,
    expand_cloud,
    integrated_dephasing,
    momentum_width,
    sensitivity_curves,
)
from .source import (
    REFERENCE_TRAP,
    SourceCloud,
    TrapConfig,
    bragg_resonance,
    doppler_chirp_rate,
    sample_atoms,
    thermal_momentum_width,
)

__version__ = "0.1.0"
