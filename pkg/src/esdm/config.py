"""Run configuration: JSON loading with strict validation.

The configuration file has four optional blocks -- ``model``, ``noise``,
``sim`` and ``experiments`` -- and every omitted field falls back to the
shipped baseline calibration, so ``{}`` is a complete, valid config.
Unknown keys are rejected (typos should fail loudly, not silently run
the default).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .engine import (
    POSITIVITY_POLICIES,
    SCHEME_EM,
    SCHEME_MILSTEIN,
    SimConfig,
)
from .errors import ConfigError, InvalidInputError
from .experiments import PHI_COMPONENTS
from .model import ModelParams, NoiseIntensities, PARAM_NAMES, validate_params

#: Accepted spellings for the scheme field and flags.
SCHEME_ALIASES = {
    "em": SCHEME_EM,
    "euler-maruyama": SCHEME_EM,
    "milstein": SCHEME_MILSTEIN,
}

_SIM_KEYS = {"t_end", "dt", "seed", "scheme", "positivity", "eps", "x0"}
_EXPERIMENT_KEYS = {"dt_list", "n_paths", "refinement", "c", "eta", "kappa",
                    "delta_fraction", "sensitivity_paths", "moment_order", "phi"}
_TOP_KEYS = {"model", "noise", "sim", "experiments"}


@dataclass(frozen=True)
class ExperimentsConfig:
    """Defaults for the experiment drivers, overridable from the config file."""

    dt_list: tuple[float, ...] = (0.02, 0.01, 0.005)
    n_paths: int = 500
    refinement: int = 8
    c: tuple[float, float, float, float] = (1.0, 1.0, 1.0, 1.0)
    eta: float = 1.0
    kappa: float = 0.5
    delta_fraction: float = 0.10
    sensitivity_paths: int = 200
    moment_order: float = 2.0
    phi: str = "X1"

    def __post_init__(self):
        if self.n_paths < 1 or self.sensitivity_paths < 1:
            raise InvalidInputError("path counts must be >= 1")
        if self.refinement < 1:
            raise InvalidInputError(f"refinement must be >= 1, got {self.refinement}")
        if self.moment_order < 2:
            raise InvalidInputError(f"moment_order must be >= 2, got {self.moment_order}")
        if self.phi not in PHI_COMPONENTS:
            raise InvalidInputError(
                f"phi must be one of {tuple(PHI_COMPONENTS)}, got {self.phi!r}")


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved configuration for one CLI invocation."""

    model: ModelParams = field(default_factory=ModelParams)
    noise: NoiseIntensities = field(default_factory=NoiseIntensities)
    sim: SimConfig = field(default_factory=lambda: SimConfig(t_end=50.0, dt=0.01))
    experiments: ExperimentsConfig = field(default_factory=ExperimentsConfig)

    def canonical(self) -> dict:
        """Plain nested dict capturing every resolved value."""
        return {
            "model": {name: getattr(self.model, name) for name in PARAM_NAMES},
            "noise": {"sigma": list(self.noise.as_array())},
            "sim": {
                "t_end": self.sim.t_end,
                "dt": self.sim.dt,
                "seed": self.sim.seed,
                "scheme": self.sim.scheme,
                "positivity": self.sim.positivity,
                "eps": self.sim.eps,
                "x0": list(self.sim.x0),
            },
            "experiments": {
                "dt_list": list(self.experiments.dt_list),
                "n_paths": self.experiments.n_paths,
                "refinement": self.experiments.refinement,
                "c": list(self.experiments.c),
                "eta": self.experiments.eta,
                "kappa": self.experiments.kappa,
                "delta_fraction": self.experiments.delta_fraction,
                "sensitivity_paths": self.experiments.sensitivity_paths,
                "moment_order": self.experiments.moment_order,
                "phi": self.experiments.phi,
            },
        }

    def hash(self) -> str:
        """Stable digest of the resolved configuration."""
        payload = json.dumps(self.canonical(), sort_keys=True,
                             separators=(",", ":"))
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


def normalize_scheme(value: str) -> str:
    key = str(value).lower()
    if key not in SCHEME_ALIASES:
        raise ConfigError(
            f"scheme must be one of {sorted(SCHEME_ALIASES)}, got {value!r}")
    return SCHEME_ALIASES[key]


def _reject_unknown(block: dict, allowed, where: str) -> None:
    unknown = sorted(set(block) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key {unknown[0]!r} in {where} block")


def _number(block, key, where):
    v = block[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where}.{key} must be a number, got {v!r}")
    return v


def config_from_dict(raw: dict) -> RunConfig:
    """Build a validated RunConfig from parsed JSON."""
    if not isinstance(raw, dict):
        raise ConfigError("top-level configuration must be a JSON object")
    _reject_unknown(raw, _TOP_KEYS, "top-level")

    model_block = raw.get("model", {})
    if not isinstance(model_block, dict):
        raise ConfigError("model block must be an object")
    _reject_unknown(model_block, PARAM_NAMES, "model")
    kwargs = {k: _number(model_block, k, "model") for k in model_block}
    model = ModelParams(**kwargs)
    report = validate_params(model)
    if not report.ok:
        raise ConfigError("; ".join(report.violations))

    noise_block = raw.get("noise", {})
    if not isinstance(noise_block, dict):
        raise ConfigError("noise block must be an object")
    _reject_unknown(noise_block, {"sigma"}, "noise")
    try:
        if "sigma" in noise_block:
            noise = NoiseIntensities.from_sequence(noise_block["sigma"])
        else:
            noise = NoiseIntensities()
    except (InvalidInputError, TypeError, ValueError) as exc:
        raise ConfigError(f"noise.sigma invalid: {exc}") from exc

    sim_block = dict(raw.get("sim", {}))
    if not isinstance(sim_block, dict):
        raise ConfigError("sim block must be an object")
    _reject_unknown(sim_block, _SIM_KEYS, "sim")
    if "scheme" in sim_block:
        sim_block["scheme"] = normalize_scheme(sim_block["scheme"])
    if "x0" in sim_block:
        try:
            sim_block["x0"] = tuple(float(v) for v in sim_block["x0"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"sim.x0 invalid: {exc}") from exc
    sim_defaults = {"t_end": 50.0, "dt": 0.01}
    try:
        sim = SimConfig(**{**sim_defaults, **sim_block})
    except InvalidInputError as exc:
        raise ConfigError(f"sim block invalid: {exc}") from exc

    exp_block = dict(raw.get("experiments", {}))
    if not isinstance(exp_block, dict):
        raise ConfigError("experiments block must be an object")
    _reject_unknown(exp_block, _EXPERIMENT_KEYS, "experiments")
    for seq_key in ("dt_list", "c"):
        if seq_key in exp_block:
            try:
                exp_block[seq_key] = tuple(float(v) for v in exp_block[seq_key])
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"experiments.{seq_key} invalid: {exc}") from exc
    try:
        experiments = ExperimentsConfig(**exp_block)
    except (InvalidInputError, TypeError) as exc:
        raise ConfigError(f"experiments block invalid: {exc}") from exc

    return RunConfig(model=model, noise=noise, sim=sim, experiments=experiments)


def load_config(path) -> RunConfig:
    """Load and validate a JSON configuration file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return config_from_dict(raw)
