"""Quantum-jump trajectories of a driven qubit read out by a calorimeter.

The package splits into a trajectory lane (floquet, jumps, thermo,
simulate) and an averaged lane (effective), with stats/config/cli as the
analysis and reproducibility shell. See README.md for the physics scope
and the CLI walkthrough.
"""

__version__ = "0.1.0"

from .constants import HBAR, HBAR_OVER_KB, K_B, KB_OVER_HBAR
from .errors import (
    CalorijumpError,
    ConfigError,
    DegenerateSpectrumError,
    FitError,
    FrequencyCollisionError,
    GridAlignmentError,
    ImpossibleJumpError,
    InstabilityError,
    NoSteadyStateError,
    NumericalError,
    SchemeFailureError,
    TimeStepError,
)
from .floquet import (
    FloquetSpectrum,
    JumpChannel,
    PeriodicHamiltonian,
    analytic_gap,
    build_monochromatic,
    diagonalize_monodromy,
    integrate_monodromy,
    jump_channels,
    matrix_elements,
)
from .jumps import QubitState, RateParams, gamma_rate
from .params import ModelParams, SimConfig, sim_config_for
from .thermo import (
    ThermoParams,
    phonon_noise_amplitude,
    relaxation_time_phonon,
    sigma_from_material,
)
from .simulate import Engine, EnsembleResult, SystemState, run_ensemble, run_trajectory
from .effective import (
    EffectiveCoeffs,
    closed_form_TS,
    drift_and_diffusion,
    integrate_fp,
    integrate_master,
    kick_aligned_grid,
    ou_linearization,
    rate_matrices,
    spectral_projection,
    stationary_density,
    steady_state,
)
from .stats import fit_relaxation, histogram, moments, periodogram
from .config import RunManifest, dump_config, load_config
