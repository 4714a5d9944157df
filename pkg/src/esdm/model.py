"""Core four-component energy supply-demand model.

The state is a plain length-4 float vector ``x = (X1, X2, X3, X4)``:
regional energy demand, external supply, imports, and renewable
resources, all in GW-index units with time in years.  Nonnegativity is
a property of the dynamics plus the integrator's positivity policy, not
of the representation, because raw explicit steps may transiently
propose negative components.

The drift is quadratic in the state:

    f1 = a1*X1*(1 - X1/W) - a2*X2*(X2 + X3) - d3*X4
    f2 = -z1*X2 - z2*X3 + z3*X1*(N - (X1 - X3))
    f3 = s1*X3*(s2*X1 - s3)
    f4 = d1*X1 - d2*X4

and the noise is diagonal multiplicative: component i carries the
coefficient ``sigma_i * X_i``.

The compiled and numpy integrator kernels replicate the drift
expressions verbatim; any change here must be mirrored there to keep
the backends bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .errors import InvalidInputError

N_STATE = 4

#: Canonical parameter ordering used for vectorization and sweeps.
PARAM_NAMES = ("a1", "W", "a2", "d3", "z1", "z2", "z3", "N",
               "s1", "s2", "s3", "d1", "d2")


@dataclass(frozen=True)
class ModelParams:
    """The thirteen deterministic model constants.

    Defaults are the baseline calibration used throughout the package.

    Attributes
    ----------
    a1 : demand growth rate (1/year)
    W : demand carrying capacity (GW-index)
    a2 : supply competition coefficient (1/(GW*year))
    d3 : renewable demand offset (1/year)
    z1 : supply adjustment rate (1/year)
    z2 : import competition coefficient (1/year)
    z3 : demand-supply responsiveness (1/(GW*year))
    N : market capacity parameter (GW-index); must satisfy N < W
    s1 : import adjustment rate (1/year)
    s2 : import demand sensitivity (1/GW)
    s3 : import activation threshold (dimensionless)
    d1 : renewable build-up rate (1/year)
    d2 : renewable depreciation rate (1/year)
    """

    a1: float = 0.8
    W: float = 10.0
    a2: float = 0.05
    d3: float = 0.1
    z1: float = 0.6
    z2: float = 0.25
    z3: float = 0.08
    N: float = 6.0
    s1: float = 0.35
    s2: float = 0.9
    s3: float = 1.2
    d1: float = 0.25
    d2: float = 0.5

    def as_array(self) -> np.ndarray:
        """Parameters as a float vector in ``PARAM_NAMES`` order."""
        return np.array([getattr(self, name) for name in PARAM_NAMES],
                        dtype=np.float64)


@dataclass(frozen=True)
class NoiseIntensities:
    """Multiplicative noise strengths (1/sqrt(year)), one per component.

    All components must be >= 0.  Setting every component to zero
    recovers the deterministic model exactly.
    """

    sigma1: float = 0.10
    sigma2: float = 0.10
    sigma3: float = 0.08
    sigma4: float = 0.12

    def __post_init__(self):
        for name in ("sigma1", "sigma2", "sigma3", "sigma4"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise InvalidInputError(f"{name} must be finite and >= 0, got {v}")

    @classmethod
    def zero(cls) -> "NoiseIntensities":
        return cls(0.0, 0.0, 0.0, 0.0)

    @classmethod
    def from_sequence(cls, values) -> "NoiseIntensities":
        values = tuple(float(v) for v in values)
        if len(values) != N_STATE:
            raise InvalidInputError(
                f"noise intensities need {N_STATE} components, got {len(values)}")
        return cls(*values)

    def as_array(self) -> np.ndarray:
        return np.array([self.sigma1, self.sigma2, self.sigma3, self.sigma4],
                        dtype=np.float64)


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of parameter validation: hard violations plus warnings."""

    violations: tuple[str, ...]
    warnings: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return not self.violations


def as_state(x) -> np.ndarray:
    """Coerce ``x`` to a finite float vector of length 4."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.shape != (N_STATE,):
        raise InvalidInputError(f"state must have shape ({N_STATE},), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"state has non-finite components: {arr}")
    return arr


def drift(state, params: ModelParams) -> np.ndarray:
    """Deterministic vector field f(X) at ``state``.

    Raises
    ------
    InvalidInputError
        If the state is non-finite or the parameters are invalid.
    """
    x = as_state(state)
    report = validate_params(params)
    if not report.ok:
        raise InvalidInputError("; ".join(report.violations))
    return _drift_raw(x, params)


def _drift_raw(x: np.ndarray, p: ModelParams) -> np.ndarray:
    # Mirrored in the integrator kernels; keep expression shapes identical.
    x1, x2, x3, x4 = x
    f1 = p.a1 * x1 * (1.0 - x1 / p.W) - p.a2 * x2 * (x2 + x3) - p.d3 * x4
    f2 = -p.z1 * x2 - p.z2 * x3 + p.z3 * x1 * (p.N - (x1 - x3))
    f3 = p.s1 * x3 * (p.s2 * x1 - p.s3)
    f4 = p.d1 * x1 - p.d2 * x4
    return np.array([f1, f2, f3, f4], dtype=np.float64)


def diffusion(state, noise: NoiseIntensities) -> np.ndarray:
    """Diagonal diffusion coefficients ``sigma_i * X_i`` at ``state``."""
    x = as_state(state)
    return noise.as_array() * x


def jacobian(state, params: ModelParams) -> np.ndarray:
    """Analytic Jacobian of the drift, a 4x4 matrix.

    The closed form is exact; finite differences are used only as a
    test oracle.  Entries (2,4), (3,2), (3,4), (4,2) and (4,3) are
    structurally zero.
    """
    x = as_state(state)
    report = validate_params(params)
    if not report.ok:
        raise InvalidInputError("; ".join(report.violations))
    p = params
    x1, x2, x3, _ = x
    return np.array([
        [p.a1 * (1.0 - 2.0 * x1 / p.W), -p.a2 * (2.0 * x2 + x3), -p.a2 * x2, -p.d3],
        [p.z3 * (p.N - 2.0 * x1 + x3), -p.z1, -p.z2 + p.z3 * x1, 0.0],
        [p.s1 * p.s2 * x3, 0.0, p.s1 * (p.s2 * x1 - p.s3), 0.0],
        [p.d1, 0.0, 0.0, -p.d2],
    ], dtype=np.float64)


def validate_params(params: ModelParams) -> ValidationReport:
    """Check parameter constraints, reporting violations and warnings.

    Hard constraints: every constant strictly positive and finite, and
    N < W.  The condition N > s3/s2 is only advisory: when it fails the
    import-threshold equilibrium branch is infeasible, which is a model
    regime rather than an input error.
    """
    violations = []
    for f in fields(params):
        v = getattr(params, f.name)
        if not np.isfinite(v):
            violations.append(f"{f.name} must be finite, got {v}")
        elif v <= 0:
            violations.append(f"{f.name} must be strictly positive, got {v}")
    warnings = []
    if np.isfinite(params.N) and np.isfinite(params.W) and params.N >= params.W:
        violations.append(f"N < W required (N={params.N}, W={params.W})")
    if not violations:
        threshold_demand = params.s3 / params.s2
        if params.N <= threshold_demand:
            warnings.append(
                f"N > s3/s2 violated (N={params.N}, s3/s2={threshold_demand:.6g}); "
                "import-threshold branch infeasible")
    return ValidationReport(tuple(violations), tuple(warnings))


#: Baseline parameter set (the shipped default configuration).
DEFAULT_PARAMS = ModelParams()

#: Baseline noise intensities.
DEFAULT_NOISE = NoiseIntensities()
