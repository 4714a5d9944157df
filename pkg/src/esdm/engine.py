"""SDE integration driver: single trajectories and ensembles.

Two explicit schemes are provided.  The Euler-Maruyama update is

    X_i(n+1) = X_i(n) + f_i(X(n))*dt + sigma_i*X_i(n)*dB_i(n)

and the Milstein update adds the diagonal correction
``0.5*sigma_i^2*X_i(n)*(dB_i(n)^2 - dt)``, raising the strong order
from 1/2 to 1 for this diagonal multiplicative noise.

State components are physical quantities, so two positivity policies
are offered: projection (clamp each component at a small floor after
every step, counting interventions) and log-domain integration (step
Y_i = ln X_i, whose diffusion is constant, so positivity holds by
construction; the drift ratio f_i/X_i is magnitude-clamped to avoid
overflow near zero).  The ``none`` policy leaves raw steps untouched.

Everything is deterministic given (config, params, noise): per-path
Brownian streams are keyed by (seed, path index) and ensemble summaries
are reduced in fixed path order with a fixed chunk size, so results do
not depend on scheduling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .brownian import generate_brownian
from .errors import InvalidInputError
from .model import (
    ModelParams,
    NoiseIntensities,
    N_STATE,
    _drift_raw,
    as_state,
    validate_params,
)

SCHEME_EM = "euler-maruyama"
SCHEME_MILSTEIN = "milstein"
SCHEMES = (SCHEME_EM, SCHEME_MILSTEIN)

POSITIVITY_PROJECTION = "projection"
POSITIVITY_LOG = "log"
POSITIVITY_NONE = "none"
POSITIVITY_POLICIES = (POSITIVITY_PROJECTION, POSITIVITY_LOG, POSITIVITY_NONE)

#: Ensemble summaries accumulate over fixed-size path chunks so the
#: reduction tree (and hence the bit pattern of the result) is a pure
#: function of n_paths, never of memory pressure or scheduling.
ENSEMBLE_CHUNK = 256

_SCHEME_CODE = {SCHEME_EM: _kernels.SCHEME_EM,
                SCHEME_MILSTEIN: _kernels.SCHEME_MILSTEIN}
_POLICY_CODE = {POSITIVITY_NONE: _kernels.POLICY_NONE,
                POSITIVITY_PROJECTION: _kernels.POLICY_PROJECTION,
                POSITIVITY_LOG: _kernels.POLICY_LOG}


def step_count(t_end: float, dt: float) -> int:
    """Number of steps covering [0, t_end]; t_end/dt must be an integer.

    The quotient is accepted when it sits within one ulp of an integer,
    so step grids are exact and error tables align without partial steps.
    """
    if not np.isfinite(t_end) or t_end <= 0:
        raise InvalidInputError(f"t_end must be positive, got {t_end}")
    if not np.isfinite(dt) or not (0 < dt <= t_end):
        raise InvalidInputError(
            f"dt must satisfy 0 < dt <= t_end, got dt={dt}, t_end={t_end}")
    ratio = t_end / dt
    n = round(ratio)
    if n < 1 or abs(ratio - n) > np.spacing(max(ratio, 1.0)):
        raise InvalidInputError(f"t_end/dt = {ratio!r} is not an integer step count")
    return n


@dataclass(frozen=True)
class SimConfig:
    """Integration setup: horizon, step, seed, scheme and positivity policy.

    ``t_end / dt`` must be an integer to within one ulp; the step count
    is ``round(t_end / dt)`` with no partial final step.
    """

    t_end: float
    dt: float
    seed: int = 0
    scheme: str = SCHEME_EM
    positivity: str = POSITIVITY_PROJECTION
    eps: float = 1e-8
    x0: tuple[float, float, float, float] = (0.3, 0.2, 0.1, 0.15)

    def __post_init__(self):
        step_count(self.t_end, self.dt)
        if self.scheme not in SCHEMES:
            raise InvalidInputError(f"unknown scheme {self.scheme!r}; pick from {SCHEMES}")
        if self.positivity not in POSITIVITY_POLICIES:
            raise InvalidInputError(
                f"unknown positivity policy {self.positivity!r}; pick from {POSITIVITY_POLICIES}")
        if self.positivity == POSITIVITY_PROJECTION and not (
                np.isfinite(self.eps) and self.eps > 0):
            raise InvalidInputError(f"projection floor eps must be > 0, got {self.eps}")
        if not (0 <= self.seed < 2 ** 64):
            raise InvalidInputError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        object.__setattr__(self, "x0", tuple(float(v) for v in self.x0))
        as_state(self.x0)

    @property
    def n_steps(self) -> int:
        return step_count(self.t_end, self.dt)

    def times(self) -> np.ndarray:
        """Grid times 0..t_end; the endpoint is exact by construction."""
        return np.linspace(0.0, self.t_end, self.n_steps + 1)


@dataclass
class Trajectory:
    """One integrated path.

    ``applied_clamps`` counts positivity interventions over the whole
    run; ``clamps_per_step`` (projection policy only) resolves them by
    step, with entry n covering the step from times[n] to times[n+1].
    """

    times: np.ndarray
    states: np.ndarray
    applied_clamps: int
    clamps_per_step: np.ndarray | None = None


@dataclass
class EnsembleSummary:
    """Per-time cross-path statistics of an ensemble.

    Variance is the population variance across paths; it is exactly
    zero wherever min == max (all paths agree bitwise).
    """

    times: np.ndarray
    mean: np.ndarray
    variance: np.ndarray
    min: np.ndarray
    max: np.ndarray
    n_paths: int
    total_clamps: int


def em_step(state, params: ModelParams, noise: NoiseIntensities,
            dt: float, dB) -> np.ndarray:
    """One raw Euler-Maruyama step (no positivity policy applied)."""
    x = as_state(state)
    dB = np.asarray(dB, dtype=np.float64)
    if dt < 0 or not np.isfinite(dt):
        raise InvalidInputError(f"dt must be nonnegative, got {dt}")
    f = _drift_raw(x, params)
    sig = noise.as_array()
    return x + f * dt + sig * x * dB


def milstein_step(state, params: ModelParams, noise: NoiseIntensities,
                  dt: float, dB) -> np.ndarray:
    """One raw Milstein step: the EM step plus the diagonal correction."""
    x = as_state(state)
    dB = np.asarray(dB, dtype=np.float64)
    base = em_step(x, params, noise, dt, dB)
    sig = noise.as_array()
    return base + 0.5 * sig * sig * x * (dB * dB - dt)


def apply_positivity(state, policy: str, eps: float = 1e-8):
    """Apply a post-step positivity policy.

    Returns ``(new_state, clamp_count)``.  Projection replaces each
    component below ``eps`` by ``eps``; the log-domain policy never acts
    post hoc (positivity is built into its stepping) and ``none`` passes
    the state through even when negative.
    """
    if policy not in POSITIVITY_POLICIES:
        raise InvalidInputError(
            f"unknown positivity policy {policy!r}; pick from {POSITIVITY_POLICIES}")
    x = np.asarray(state, dtype=np.float64)
    if policy != POSITIVITY_PROJECTION:
        return x.copy(), 0
    mask = x < eps
    return np.where(mask, eps, x), int(mask.sum())


def _kernel_args(config: SimConfig, params: ModelParams, noise: NoiseIntensities):
    report = validate_params(params)
    if not report.ok:
        raise InvalidInputError("; ".join(report.violations))
    if config.positivity == POSITIVITY_LOG and any(v <= 0 for v in config.x0):
        raise InvalidInputError(
            f"log-domain policy needs a strictly positive x0, got {config.x0}")
    return (np.array(config.x0), params.as_array(), noise.as_array(),
            config.dt, _SCHEME_CODE[config.scheme],
            _POLICY_CODE[config.positivity], config.eps)


def simulate(config: SimConfig, params: ModelParams,
             noise: NoiseIntensities, stream: int = 0) -> Trajectory:
    """Integrate a single path.

    ``stream`` selects the Brownian stream under the config seed; the
    default 0 matches path 0 of :func:`simulate_ensemble` with the same
    config.
    """
    x0, pvec, sig, dt, scheme, policy, eps = _kernel_args(config, params, noise)
    n = config.n_steps
    grid = generate_brownian(config.seed, n, 1, config.dt, stream=stream)
    states, clamps, clamp_steps = _kernels.integrate_paths(
        x0, pvec, sig, dt, grid.fine_increments[None, :, :],
        scheme, policy, eps, record=True)
    per_step = None
    if config.positivity == POSITIVITY_PROJECTION:
        per_step = clamp_steps[0].astype(np.int64)
    return Trajectory(times=config.times(),
                      states=states[0],
                      applied_clamps=int(clamps[0]),
                      clamps_per_step=per_step)


def simulate_ensemble(config: SimConfig, params: ModelParams,
                      noise: NoiseIntensities, n_paths: int) -> EnsembleSummary:
    """Integrate ``n_paths`` independent paths and summarize per time point.

    Path k draws its increments from the stream keyed (seed, k), so the
    set of paths is independent of evaluation order and chunking.
    """
    if n_paths < 1:
        raise InvalidInputError(f"n_paths must be >= 1, got {n_paths}")
    x0, pvec, sig, dt, scheme, policy, eps = _kernel_args(config, params, noise)
    n = config.n_steps

    shape = (n + 1, N_STATE)
    acc_sum = np.zeros(shape)
    acc_sumsq = np.zeros(shape)
    acc_min = np.full(shape, np.inf)
    acc_max = np.full(shape, -np.inf)
    total_clamps = 0

    for start in range(0, n_paths, ENSEMBLE_CHUNK):
        stop = min(start + ENSEMBLE_CHUNK, n_paths)
        inc = np.empty((stop - start, n, N_STATE))
        for k in range(start, stop):
            inc[k - start] = generate_brownian(
                config.seed, n, 1, config.dt, stream=k).fine_increments
        states, clamps, _ = _kernels.integrate_paths(
            x0, pvec, sig, dt, inc, scheme, policy, eps,
            record=True, path_offset=start)
        acc_sum += states.sum(axis=0)
        acc_sumsq += (states * states).sum(axis=0)
        np.minimum(acc_min, states.min(axis=0), out=acc_min)
        np.maximum(acc_max, states.max(axis=0), out=acc_max)
        total_clamps += int(clamps.sum())

    mean = acc_sum / n_paths
    variance = acc_sumsq / n_paths - mean * mean
    np.maximum(variance, 0.0, out=variance)
    # All paths bitwise equal => variance is exactly zero by definition.
    variance[acc_min == acc_max] = 0.0
    return EnsembleSummary(times=config.times(), mean=mean, variance=variance,
                           min=acc_min, max=acc_max, n_paths=n_paths,
                           total_clamps=total_clamps)


def integrate_paths_raw(config: SimConfig, params: ModelParams,
                        noise: NoiseIntensities, n_paths: int,
                        record: bool = True, stream_offset: int = 0):
    """Low-level ensemble integration yielding chunked raw results.

    Yields ``(start, states, clamp_totals)`` per fixed-size chunk, with
    paths k in [start, stop) drawn from streams (seed, stream_offset+k).
    Used by experiment drivers that need per-path quantities without
    materializing the whole ensemble.
    """
    if n_paths < 1:
        raise InvalidInputError(f"n_paths must be >= 1, got {n_paths}")
    x0, pvec, sig, dt, scheme, policy, eps = _kernel_args(config, params, noise)
    n = config.n_steps
    for start in range(0, n_paths, ENSEMBLE_CHUNK):
        stop = min(start + ENSEMBLE_CHUNK, n_paths)
        inc = np.empty((stop - start, n, N_STATE))
        for k in range(start, stop):
            inc[k - start] = generate_brownian(
                config.seed, n, 1, config.dt, stream=stream_offset + k).fine_increments
        states, clamps, _ = _kernels.integrate_paths(
            x0, pvec, sig, dt, inc, scheme, policy, eps,
            record=record, path_offset=start)
        yield start, states, clamps
