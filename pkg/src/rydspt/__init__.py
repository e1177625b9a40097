"""Continuous-wave Rydberg single-photon transistor simulator.

A stored control photon blockades a continuously probed Rydberg ensemble;
the probe back-action appears as jump channels on the stored excitation.
The package builds those channels for a cavity or a free-space (cascaded
1D) device, propagates the single-excitation control state, and estimates
impedance-matching and transistor-efficiency figures with wavefunction
Monte-Carlo trajectories.
"""

__version__ = "0.1.0"

from .ensemble import (
    AtomEnsemble,
    EnsembleGeometry,
    ProbeParams,
    blockaded_cooperativity,
    blockaded_optical_depth,
    build_ensemble,
    cooperativity_matrix,
    optical_depth_matrix,
    pairwise_vdw,
    sample_positions,
)
from .channels import (
    JumpChannelSet,
    cavity_channels,
    dephasing_rates,
    freespace_channels,
)
from .dynamics import (
    ControlParams,
    DeterministicRun,
    Generator,
    PulseShape,
    build_generator_cavity,
    build_generator_fs,
    output_field,
    propagate_nojump,
    run_deterministic,
    storage_probability,
)
from .trajectories import (
    RunStats,
    TrajectoryRecord,
    apply_jump,
    batch_run,
    classify_outcome,
    master_equation_oracle,
    run_trajectory,
    splitmix64,
)
from .analytics import (
    gamma_out,
    matched_probe_intensity,
    storage_prob_cavity,
    storage_prob_fs,
    two_photon_detuning,
    weighted_mean_dephasing,
)
from .config import RunConfig, SweepSpec, load_config, preset
from .sweeps import SweepResult, emit_results, run_efficiency_sweep, run_im_sweep
from .errors import ConfigError, DegenerateGeometryError, NumericalError, SingularChannelError

__all__ = [name for name in dir() if not name.startswith("_")]
