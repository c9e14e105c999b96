"""Quantum-limited force sensing with electrical readout.

Linear-response models of voice-coil (magnetomechanical) and parallel-plate
(electromechanical) detectors read out by a parametric cavity through a
voltage- or current-sensitive element: drift matrices, force-noise spectra
with backaction/shot decomposition, SQL-optimised couplings, matched-filter
SNR for an impulsive gravitational signal, and sensor-size scaling.
"""

from .constants import EPS0, G_NEWTON, HBAR, MU0, PLANCK_MASS, V_DM
from .errors import (
    ConfigError,
    ConvergenceError,
    DegenerateOptimumError,
    ForceNoiseError,
    ParameterError,
    PlateContactError,
    PoleSingularityError,
    QuadratureError,
    SingularMatrixError,
    UnstableBiasError,
    ZeroSignalError,
)
from .params import (
    ALL_CASES,
    EM_CURRENT,
    EM_VOLTAGE,
    MM_CURRENT,
    MM_VOLTAGE,
    CavityParams,
    DerivedFrequencies,
    DetectorCase,
    ElectroMechParams,
    EquilibriumPoint,
    MagnetoMechParams,
    ReducedElectroMechParams,
    capacitance_at,
    derived_frequencies,
    reference_params,
    find_equilibrium,
    reduce_electromech,
    susceptibilities,
    transducer_constant_v,
    transducer_constant_x,
)
from .dynamics import (
    SystemMatrix,
    TransferSolution,
    build_system_matrix,
    estimator_coefficients,
    real_poles,
    y_out_closed_form,
)
from .noise import (
    NoiseSpectrum,
    OptomechRefParams,
    ThermalModel,
    noise_breakdown,
    optimized_coupling,
    optomech_optimized_coupling,
    optomech_reference_psd,
    psd_closed_form,
    psd_numeric,
    psd_susceptibility_form,
    sql_cavity,
)
from .bessel import bessel_k0, bessel_k1
from .signal import (
    CaseSnr,
    DmEncounter,
    SnrResult,
    case_snr,
    dm_force_freq,
    dm_force_time,
    snr_opt,
    sql_benchmark,
)
from .scaling import ScalingConfig, radius_sweep, scale_parameters

__version__ = "0.1.0"

__all__ = [
    "EPS0",
    "G_NEWTON",
    "HBAR",
    "MU0",
    "PLANCK_MASS",
    "V_DM",
    "ConfigError",
    "ConvergenceError",
    "DegenerateOptimumError",
    "ForceNoiseError",
    "ParameterError",
    "PlateContactError",
    "PoleSingularityError",
    "QuadratureError",
    "SingularMatrixError",
    "UnstableBiasError",
    "ZeroSignalError",
    "ALL_CASES",
    "EM_CURRENT",
    "EM_VOLTAGE",
    "MM_CURRENT",
    "MM_VOLTAGE",
    "CavityParams",
    "DerivedFrequencies",
    "DetectorCase",
    "ElectroMechParams",
    "EquilibriumPoint",
    "MagnetoMechParams",
    "ReducedElectroMechParams",
    "capacitance_at",
    "derived_frequencies",
    "reference_params",
    "find_equilibrium",
    "reduce_electromech",
    "susceptibilities",
    "transducer_constant_v",
    "transducer_constant_x",
    "SystemMatrix",
    "TransferSolution",
    "build_system_matrix",
    "estimator_coefficients",
    "real_poles",
    "y_out_closed_form",
    "NoiseSpectrum",
    "OptomechRefParams",
    "ThermalModel",
    "noise_breakdown",
    "optimized_coupling",
    "optomech_optimized_coupling",
    "optomech_reference_psd",
    "psd_closed_form",
    "psd_numeric",
    "psd_susceptibility_form",
    "sql_cavity",
    "bessel_k0",
    "bessel_k1",
    "DmEncounter",
    "SnrResult",
    "dm_force_freq",
    "dm_force_time",
    "snr_opt",
    "CaseSnr",
    "case_snr",
    "sql_benchmark",
    "ScalingConfig",
    "radius_sweep",
    "scale_parameters",
]
