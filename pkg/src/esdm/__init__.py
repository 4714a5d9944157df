"""Stochastic energy supply-demand model toolkit.

A four-component Ito system coupling regional demand, external supply,
imports and renewables with diagonal multiplicative noise, together
with the analysis machinery around it: deterministic equilibria and
spectral classification, a matrix-inequality stochastic stability test,
persistence bounds, Euler-Maruyama and Milstein integration with
positivity policies, convergence/moment/sensitivity experiments, and a
CSV-emitting command-line interface.
"""

__version__ = "0.1.0"

from ._kernels import backend_name
from .brownian import BrownianGrid, aggregate_increments, generate_brownian
from .engine import (
    EnsembleSummary,
    POSITIVITY_LOG,
    POSITIVITY_NONE,
    POSITIVITY_PROJECTION,
    SCHEME_EM,
    SCHEME_MILSTEIN,
    SimConfig,
    Trajectory,
    apply_positivity,
    em_step,
    milstein_step,
    simulate,
    simulate_ensemble,
)
from .errors import (
    BlowUpError,
    ConfigError,
    EsdmError,
    InvalidInputError,
    NumericFailureError,
)
from .experiments import (
    ErrorEstimate,
    ErrorTable,
    MomentEstimate,
    PersistenceEstimate,
    QoIRecord,
    SensitivityCell,
    SensitivityResult,
    SensitivitySweep,
    compute_qoi,
    convergence_study,
    ensemble_qoi,
    import_band_width,
    moment_estimate,
    persistence_estimate,
    sensitivity_index,
    sensitivity_sweep,
    strong_error,
    weak_error,
)
from .model import (
    DEFAULT_NOISE,
    DEFAULT_PARAMS,
    ModelParams,
    NoiseIntensities,
    PARAM_NAMES,
    ValidationReport,
    diffusion,
    drift,
    jacobian,
    validate_params,
)
from .stability import (
    BRANCH_IMPORT_THRESHOLD,
    BRANCH_NO_IMPORT,
    BRANCH_TRIVIAL,
    DriftConditionReport,
    Equilibrium,
    PersistenceBound,
    PersistenceSpec,
    StabilityReport,
    check_persistence_drift_condition,
    classify_equilibrium,
    eigenvalues_4x4,
    equilibrium_residual,
    find_equilibria,
    persistence_bound,
)
