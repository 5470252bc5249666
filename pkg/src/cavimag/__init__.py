"""Frequency-domain simulator and analysis toolkit for cavity-magnon networks."""

from .model import (
    ConfigError,
    Diagnostic,
    FrequencyGrid,
    MagnonMode,
    PhotonMode,
    PortCoupling,
    SystemSpec,
    dump_config,
    dumps_config,
    load_config,
    loads_config,
    table3_cavity,
    validate_system,
)
from .engine import (
    OmegaMatrix,
    SingularFrequencyError,
    Spectrum,
    SweepMap,
    build_omega,
    magnon_map,
    s_matrix,
    sweep,
)
from .closedform import (
    AntiresRegime,
    CouplingBehavior,
    DegenerateModesError,
    EffectiveAntiresonance,
    LorentzianTerm,
    NoFiniteAntiresonanceError,
    TwoModeParams,
    antires_branches,
    antires_freq_two_photons,
    antires_phase_factor_photon_magnon,
    antires_phase_factor_two_photons,
    classify_antires_regime,
    effective_coupling,
    effective_hamiltonian_eigenvalues,
    lorentzian_decomposition_photon_magnon,
    lorentzian_decomposition_two_photons,
    polariton_frequencies,
    s21_photon_magnon,
    s21_two_photons,
    s21_two_photons_magnon,
    three_resonances,
    two_photon_resonances,
)

from .analysis import (
    AntiresonanceBranch,
    ConvergenceReport,
    FeatureKind,
    PhaseJump,
    SpectralFeature,
    convergence_study,
    extract_branches,
    find_extrema,
    find_features,
    phase_factor_to_jump,
    phase_jump,
    predict_coupling_behavior,
)
from .fitting import (
    EffectiveCouplingFit,
    FitConvergenceError,
    FitResult,
    FitSelection,
    IdentifiabilityError,
    SpectrumFitReport,
    damped_gauss_newton,
    fit_effective_model,
    fit_spectrum,
)

__version__ = "0.1.0"
