"""Probe-based tomography of oscillator states.

Forward signal models for a two-level probe coupled linearly to position and
momentum, a finite-shot measurement simulator, and two reconstruction
pipelines: complex-wavefunction recovery for pure states and direct
density-matrix estimation for mixed states.
"""

__version__ = "0.1.0"

from .errors import ManifestError, NumericsError
from .states import (
    DEFAULT_CUTOFF,
    DensityMatrix,
    FockState,
    PositionGrid,
    TruncationWarning,
    coherent_state,
    depolarize,
    hermite_wavefunction,
    load_state,
    make_standard_state,
    position_amplitude,
    position_density,
    save_state,
    state_from_dict,
    state_to_dict,
    superposition_state,
)
from .response import (
    EXACT,
    MOMENTUM,
    PLAIN,
    POSITION,
    TILDE,
    ExperimentSetting,
    SignalSeries,
    displacement_element,
    displacement_matrix,
    expectation,
    plain_settings,
    pz_even,
    pz_even_rotated,
    pz_odd,
    pz_odd_rotated,
    pz_tilde,
    read_series,
    rotated_settings,
    simulate_exact,
    tilde_settings,
    write_series,
)
from .experiment import ShotConfig, debias, sample_signal
from .pure import (
    ComplexProfile,
    CoverageWarning,
    DensityProfile,
    compute_g,
    integrate_phase,
    read_profile,
    reconstruct_pure,
    recover_density_profile,
    write_profile,
)
from .mixed import (
    DesignMatrix,
    SolveReport,
    build_design_matrix,
    default_k_list,
    default_t0_list,
    fidelity,
    measurement_vector,
    solve_density_matrix,
)
