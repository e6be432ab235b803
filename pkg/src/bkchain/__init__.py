"""bkchain: simulation and analysis toolkit for bosonic Kitaev chains.

Builds quadrature-space generators for chains of parametrically coupled
bosonic modes (beamsplitter + two-mode squeezing at arbitrary common phase
and boundary conditions) and analyzes their transport, non-Hermitian
topology, stability, thermal steady states, edge-detuning sensing
response, and nonlinear gain saturation.
"""

__version__ = "0.1.0"

from . import errors
from .chain import (
    ChainSpec,
    DynamicalMatrix,
    LocalQuadratureTransform,
    bloch_matrix,
    build_dynamical_matrix,
    eigenvalue_from_frequency,
    frequency_from_eigenvalue,
    local_quadrature_transform,
)
from .numerics import (
    EigenResult,
    SvdResult,
    Trajectory,
    eigendecompose,
    integrate_ivp,
    solve_linear,
    solve_lyapunov,
    svd,
    winding_from_samples,
)
from .spectra import (
    ComplexSpectrum,
    PhaseClassification,
    StabilityReport,
    bloch_bands,
    classify_phase,
    obc_instability_threshold,
    obc_stability_report,
    parity_symmetry_residual,
    winding_numbers,
)
from .response import (
    ChannelGains,
    SusceptibilityMatrix,
    channel_gains,
    end_to_end_gain_map,
    nonreciprocity_report,
    resonant_susceptibility_oracle,
    susceptibility,
)
from .thermal import (
    CovarianceMatrix,
    closed_form_population,
    population_amplification,
    steady_covariance,
    thermal_spectrum,
)
from .sensing import (
    SensingReport,
    responsivity,
    scaling_sweep,
    sensing_report,
    sensing_susceptibility,
)
from .nonlinear import (
    OptomechanicalParams,
    RwaTerm,
    RwaTermCatalog,
    build_rwa_catalog,
    duffing_coefficient,
    nl_frequency_shift,
    saturation_metrics,
    simulate,
)
from .tones import (
    OscillatorPlan,
    Tone,
    ToneSchedule,
    compile_tones,
    coupling_from_modulation,
    plan_oscillators,
    rotating_frame_phase,
)
