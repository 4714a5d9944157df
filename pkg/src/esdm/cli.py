"""Command-line interface.

Subcommands cover the full analysis surface: ``simulate`` (one
trajectory), ``ensemble`` (per-time statistics), ``equilibria``,
``stability``, ``converge`` (strong-error table for both schemes),
``weak-error``, ``moments``, ``persistence`` and ``sensitivity``.  Each
writes a single CSV artifact into --out and prints its path.

Seed precedence: the ``--seed`` flag wins, then the ``ESDM_SEED``
environment variable, then the config file, then the built-in default.

Exit status: 0 on success, 1 for usage or configuration errors, 2 for
numeric failures (blow-up or non-converging linear algebra).
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, _kernels
from .config import RunConfig, load_config, normalize_scheme
from .csvio import CsvArtifact, write_csv
from .engine import (
    POSITIVITY_POLICIES,
    SCHEME_EM,
    SCHEME_MILSTEIN,
    SimConfig,
    simulate,
    simulate_ensemble,
)
from .errors import ConfigError, EsdmError, InvalidInputError, NumericFailureError
from .experiments import (
    DEFAULT_T_END,
    PHI_COMPONENTS,
    QOI_NAMES,
    convergence_study,
    moment_estimate,
    persistence_estimate,
    sensitivity_sweep,
    weak_error,
)
from .stability import (
    BRANCH_IMPORT_THRESHOLD,
    BRANCH_NO_IMPORT,
    BRANCH_TRIVIAL,
    Equilibrium,
    PersistenceSpec,
    classify_equilibrium,
    equilibrium_residual,
    find_equilibria,
    persistence_bound,
)

_COMPONENT_LABELS = ("X1", "X2", "X3", "X4")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON configuration file")
    common.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    common.add_argument("--out", type=Path, default=Path("."),
                        help="output directory (default: current directory)")
    common.add_argument("--scheme", choices=["em", "euler-maruyama", "milstein"],
                        help="integration scheme")
    common.add_argument("--dt", type=float, help="time step in years")
    common.add_argument("--t-end", dest="t_end", type=float,
                        help="horizon in years")
    common.add_argument("--paths", type=int, help="ensemble size")
    common.add_argument("--positivity", choices=list(POSITIVITY_POLICIES),
                        help="positivity policy")
    common.add_argument("--eps", type=float, help="projection floor")

    parser = argparse.ArgumentParser(
        prog="esdm",
        description="Stochastic energy supply-demand model toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("simulate", parents=[common],
                   help="integrate one trajectory and write it as CSV")
    sub.add_parser("ensemble", parents=[common],
                   help="per-time mean/variance/min/max over an ensemble")
    sub.add_parser("equilibria", parents=[common],
                   help="equilibrium branches with feasibility and residuals")
    p_stab = sub.add_parser("stability", parents=[common],
                            help="spectral and matrix-inequality verdicts")
    p_stab.add_argument("--at", default="origin",
                        help="origin, no-import, import-threshold, or x1,x2,x3,x4")
    sub.add_parser("converge", parents=[common],
                   help="strong-error table over the dt grid, both schemes")
    p_weak = sub.add_parser("weak-error", parents=[common],
                            help="weak-error table for one test function")
    p_weak.add_argument("--phi", choices=sorted(PHI_COMPONENTS),
                        help="terminal-state coordinate for the weak error")
    p_mom = sub.add_parser("moments", parents=[common],
                           help="ensemble p-th moment of the state norm over time")
    p_mom.add_argument("--p", type=float, help="moment order (>= 2)")
    sub.add_parser("persistence", parents=[common],
                   help="persistence bound plus empirical time averages")
    sub.add_parser("sensitivity", parents=[common],
                   help="normalized sensitivity indices, all parameters x QoIs")
    return parser


def _resolve(args) -> RunConfig:
    rc = load_config(args.config) if args.config is not None else RunConfig()
    seed = rc.sim.seed
    env_seed = os.environ.get("ESDM_SEED")
    if env_seed is not None:
        try:
            seed = int(env_seed)
        except ValueError:
            raise ConfigError(f"ESDM_SEED must be an integer, got {env_seed!r}")
    if args.seed is not None:
        seed = args.seed
    updates = {"seed": seed}
    if args.dt is not None:
        updates["dt"] = args.dt
    if args.t_end is not None:
        updates["t_end"] = args.t_end
    if args.scheme is not None:
        updates["scheme"] = normalize_scheme(args.scheme)
    if args.positivity is not None:
        updates["positivity"] = args.positivity
    if args.eps is not None:
        updates["eps"] = args.eps
    try:
        sim = replace(rc.sim, **updates)
    except InvalidInputError as exc:
        raise ConfigError(str(exc)) from exc
    return replace(rc, sim=sim)


def _metadata(rc: RunConfig, **extra) -> dict:
    meta = {
        "artifact_version": __version__,
        "config_hash": rc.hash(),
        "seed": str(rc.sim.seed),
        "backend": _kernels.backend_name,
    }
    meta.update({k: str(v) for k, v in extra.items()})
    return meta


def _emit(args, rc: RunConfig, filename: str, header, rows, **extra) -> int:
    artifact = CsvArtifact(path=Path(args.out) / filename, header=tuple(header),
                           rows=rows, metadata=_metadata(rc, **extra))
    dest = write_csv(artifact)
    print(dest)
    return 0


def _cmd_simulate(args, rc: RunConfig) -> int:
    traj = simulate(rc.sim, rc.model, rc.noise)
    clamps = traj.clamps_per_step
    rows = []
    for i, t in enumerate(traj.times):
        step_clamps = 0 if (i == 0 or clamps is None) else int(clamps[i - 1])
        rows.append((float(t), *map(float, traj.states[i]), step_clamps))
    return _emit(args, rc, "trajectory.csv",
                 ("t", *_COMPONENT_LABELS, "clamps"), rows,
                 scheme=rc.sim.scheme, positivity=rc.sim.positivity,
                 total_clamps=traj.applied_clamps)


def _cmd_ensemble(args, rc: RunConfig) -> int:
    n_paths = args.paths if args.paths is not None else rc.experiments.n_paths
    summary = simulate_ensemble(rc.sim, rc.model, rc.noise, n_paths)
    header = ["t"]
    for stat in ("mean", "var", "min", "max"):
        header.extend(f"{stat}_{c}" for c in _COMPONENT_LABELS)
    rows = []
    for i, t in enumerate(summary.times):
        rows.append((float(t),
                     *map(float, summary.mean[i]), *map(float, summary.variance[i]),
                     *map(float, summary.min[i]), *map(float, summary.max[i])))
    return _emit(args, rc, "ensemble.csv", header, rows,
                 n_paths=n_paths, total_clamps=summary.total_clamps,
                 scheme=rc.sim.scheme, positivity=rc.sim.positivity)


def _cmd_equilibria(args, rc: RunConfig) -> int:
    rows = []
    for eq in find_equilibria(rc.model):
        residual = equilibrium_residual(eq, rc.model) if eq.feasible else float("nan")
        rows.append((eq.branch, *map(float, eq.point), eq.feasible, residual,
                     eq.infeasibility_reason or ""))
    return _emit(args, rc, "equilibria.csv",
                 ("branch", *_COMPONENT_LABELS, "feasible", "residual", "reason"),
                 rows)


def _point_from_at(at: str, rc: RunConfig) -> Equilibrium:
    label = at.strip().lower()
    if label == "origin":
        return Equilibrium(np.zeros(4), BRANCH_TRIVIAL, True)
    if label in (BRANCH_NO_IMPORT, BRANCH_IMPORT_THRESHOLD):
        for eq in find_equilibria(rc.model):
            if eq.branch == label:
                if not eq.feasible:
                    raise ConfigError(
                        f"{label} branch is infeasible: {eq.infeasibility_reason}")
                return eq
        raise ConfigError(f"no equilibrium found on branch {label!r}")
    try:
        values = tuple(float(v) for v in at.split(","))
    except ValueError:
        raise ConfigError(
            f"--at must be origin, no-import, import-threshold or x1,x2,x3,x4; got {at!r}")
    if len(values) != 4:
        raise ConfigError(f"--at point needs 4 components, got {len(values)}")
    return Equilibrium(np.array(values), "custom", True)


def _cmd_stability(args, rc: RunConfig) -> int:
    eq = _point_from_at(args.at, rc)
    report = classify_equilibrium(rc.model, eq, rc.noise)
    eigs = sorted(report.eigenvalues, key=lambda z: (-z.real, -z.imag))
    header = ["branch", *_COMPONENT_LABELS]
    row = [eq.branch, *map(float, eq.point)]
    for i, lam in enumerate(eigs, start=1):
        header.extend((f"eig{i}_re", f"eig{i}_im"))
        row.extend((float(lam.real), float(lam.imag)))
    header.extend(("spectrally_stable", "marginal", "lmi_feasible",
                   "alpha", "decay_rate_bound"))
    row.extend((report.spectrally_stable, report.marginal, report.lmi_feasible,
                report.alpha if report.alpha is not None else float("nan"),
                report.decay_rate_bound if report.decay_rate_bound is not None
                else float("nan")))
    return _emit(args, rc, "stability.csv", header, [tuple(row)])


def _cmd_converge(args, rc: RunConfig) -> int:
    t_end = args.t_end if args.t_end is not None else DEFAULT_T_END
    n_paths = args.paths if args.paths is not None else rc.experiments.n_paths
    schemes = [normalize_scheme(args.scheme)] if args.scheme is not None \
        else [SCHEME_EM, SCHEME_MILSTEIN]
    rows = []
    for scheme in schemes:
        table = convergence_study(
            scheme, dt_values=rc.experiments.dt_list, params=rc.model,
            noise=rc.noise, x0=rc.sim.x0, t_end=t_end,
            refinement=rc.experiments.refinement, n_paths=n_paths,
            seed=rc.sim.seed, positivity=rc.sim.positivity, eps=rc.sim.eps)
        rate = table.fitted_rate if table.fitted_rate is not None else float("nan")
        for dt, err, se in zip(table.dt_values, table.strong_errors,
                               table.strong_std_errors):
            rows.append((scheme, dt, err, se, rate))
    return _emit(args, rc, "convergence.csv",
                 ("scheme", "dt", "strong_error", "strong_std_error", "fitted_rate"),
                 rows, n_paths=n_paths, t_end=t_end,
                 refinement=rc.experiments.refinement)


def _cmd_weak_error(args, rc: RunConfig) -> int:
    t_end = args.t_end if args.t_end is not None else DEFAULT_T_END
    n_paths = args.paths if args.paths is not None else rc.experiments.n_paths
    scheme = normalize_scheme(args.scheme) if args.scheme is not None else SCHEME_EM
    phi = args.phi if args.phi is not None else rc.experiments.phi
    rows = []
    for dt in rc.experiments.dt_list:
        est = weak_error(scheme, phi, rc.model, rc.noise, x0=rc.sim.x0,
                         t_end=t_end, dt=dt,
                         refinement=rc.experiments.refinement, n_paths=n_paths,
                         seed=rc.sim.seed, positivity=rc.sim.positivity,
                         eps=rc.sim.eps)
        rows.append((scheme, phi, dt, est.value, est.std_error))
    return _emit(args, rc, "weak_error.csv",
                 ("scheme", "phi", "dt", "weak_error", "weak_std_error"),
                 rows, n_paths=n_paths, t_end=t_end,
                 refinement=rc.experiments.refinement)


def _cmd_moments(args, rc: RunConfig) -> int:
    n_paths = args.paths if args.paths is not None else rc.experiments.n_paths
    p = args.p if args.p is not None else rc.experiments.moment_order
    est = moment_estimate(p, rc.model, rc.noise, x0=rc.sim.x0,
                          t_end=rc.sim.t_end, dt=rc.sim.dt, n_paths=n_paths,
                          seed=rc.sim.seed, positivity=rc.sim.positivity,
                          eps=rc.sim.eps)
    rows = [(float(t), float(v), float(m))
            for t, v, m in zip(est.times, est.values, est.running_max)]
    return _emit(args, rc, "moments.csv", ("t", "moment", "running_max"), rows,
                 p=p, n_paths=n_paths, sup=format(est.sup, ".17g"),
                 plateau=str(est.plateau).lower())


def _cmd_persistence(args, rc: RunConfig) -> int:
    n_paths = args.paths if args.paths is not None else rc.experiments.n_paths
    exp = rc.experiments
    spec = PersistenceSpec(c=exp.c, eta=exp.eta, kappa=exp.kappa)
    bound = persistence_bound(spec, rc.noise)
    est = persistence_estimate(rc.model, rc.noise, c=exp.c, x0=rc.sim.x0,
                               t_end=rc.sim.t_end, dt=rc.sim.dt,
                               n_paths=n_paths, seed=rc.sim.seed,
                               positivity=rc.sim.positivity, eps=rc.sim.eps)
    row = (exp.eta, exp.kappa, bound.noise_load, bound.status,
           bound.bound if bound.bound is not None else float("nan"),
           est.weighted_average, *map(float, est.component_averages))
    header = ("eta", "kappa", "noise_load", "bound_status", "bound",
              "weighted_average",
              *(f"avg_{c}" for c in _COMPONENT_LABELS))
    return _emit(args, rc, "persistence.csv", header, [row],
                 n_paths=n_paths, c=",".join(format(v, ".17g") for v in exp.c))


def _cmd_sensitivity(args, rc: RunConfig) -> int:
    n_paths = args.paths if args.paths is not None else rc.experiments.sensitivity_paths
    sim = rc.sim if args.t_end is not None else replace(rc.sim, t_end=DEFAULT_T_END)
    sweep = sensitivity_sweep(rc.model, rc.noise, sim, n_paths=n_paths,
                              delta_fraction=rc.experiments.delta_fraction)
    ranks = {}
    for qoi in QOI_NAMES:
        for position, cell in enumerate(sweep.ranking(qoi), start=1):
            ranks[(cell.parameter, qoi)] = position
    rows = []
    for cell in sweep.cells:
        rows.append((cell.parameter, cell.qoi, cell.baseline_q, cell.s_index,
                     ranks[(cell.parameter, cell.qoi)], cell.error or ""))
    return _emit(args, rc, "sensitivity.csv",
                 ("parameter", "qoi", "baseline_q", "s_index", "rank", "error"),
                 rows, n_paths=n_paths, t_end=sim.t_end,
                 delta_fraction=rc.experiments.delta_fraction)


_COMMANDS = {
    "simulate": _cmd_simulate,
    "ensemble": _cmd_ensemble,
    "equilibria": _cmd_equilibria,
    "stability": _cmd_stability,
    "converge": _cmd_converge,
    "weak-error": _cmd_weak_error,
    "moments": _cmd_moments,
    "persistence": _cmd_persistence,
    "sensitivity": _cmd_sensitivity,
}


def run_cli(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        rc = _resolve(args)
        return _COMMANDS[args.command](args, rc)
    except NumericFailureError as exc:
        print(f"esdm: numeric failure: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, InvalidInputError) as exc:
        print(f"esdm: {exc}", file=sys.stderr)
        return 1
    except EsdmError as exc:
        print(f"esdm: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"esdm: i/o error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_cli(sys.argv[1:]))


if __name__ == "__main__":
    main()
