"""Resonant continuous-time quantum search as an open system.

Simulates the two-level resonance between an initial state and a searched
state of a rotor spectrum, its response to a monochromatic field (Floquet
analysis) and to repeated projective measurements (Quantum Zeno effect).
"""

__version__ = "0.1.0"

from .model import (
    AccuracyError,
    FieldParams,
    IntegrityError,
    InvalidArgumentError,
    InvalidModelError,
    ProbabilityRecord,
    RegimeWarning,
    SearchError,
    SearchProblem,
    Spectrum,
    WaveState,
    bohr_gap_ratio,
    build_rotor_spectrum,
    build_search_problem,
    default_problem,
    probabilities,
)
from .dynamics import (
    ReducedState,
    StepConfig,
    full_rhs,
    integrate_full,
    integrate_reduced,
    optimal_time,
    unperturbed_probabilities,
)
from .floquet import (
    Monodromy,
    StabilityMap,
    floquet_exponent,
    monodromy,
    searched_probability_at_tau,
    stability_map,
)
from .measurement import (
    EnsembleResult,
    MarkovCoefficients,
    MeasurementSchedule,
    collapse,
    markov_coefficients,
    regular_coefficients,
    run_ensemble,
    single_measurement,
    transition_matrix,
    zeno_coefficients,
)
