"""
Command-line interface.

Subcommands:
    qsv plan        plan a measurement sequence for a target
    qsv verify      run off-line verification of a state against a plan
    qsv adapt       run adaptive verification of a state
    qsv bound       print the analytic bounds along a plan
    qsv experiment  run the seeded verification study

Exit codes: 0 success, 2 configuration or input error, 3 solver or measurement
failure (for `experiment`: excluded trials beyond the budget).
"""

import argparse
import logging
import sys
from pathlib import Path

from .__version__ import __version__
from .adaptive import run_av
from .constants import (
    DEFAULT_EPSILON_FIDELITY,
    DEFAULT_LOG_LEVEL,
    DEFAULT_OBSERVABLES,
    DEFAULT_OS_CAP,
    DEFAULT_SEED,
)
from .exceptions import ConfigError, EstimateInconsistencyError, QsvError, StepError
from .experiment import ExperimentConfig, run_experiment
from .hermitian import (
    DensityMatrix,
    ObservableSet,
    epsilon_from_fidelity,
    load_observable_set,
    load_state,
)
from .planner import (
    ProjectionState,
    SequencePlan,
    bures_bound_pure,
    complete_sequence,
    hs_bound,
    plan_ias,
    plan_ios,
    plan_os,
    plan_random,
    project_update,
    target_digest,
)
from .utils import get_logger, read_json, write_json
from .verifier import MeasurementOracle, run_vm

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_FAILURE = 3

logger = logging.getLogger(__name__)


def _emit(text: str) -> None:
    sys.stdout.write(text + "\n")


def _load_inputs(target: str, observables: str) -> tuple[DensityMatrix, ObservableSet]:
    try:
        return load_state(target), load_observable_set(observables)
    except (OSError, ValueError) as e:
        raise ConfigError(f"Cannot load inputs: {e}") from e


def _load_plan_file(path: str) -> tuple[SequencePlan, dict]:
    try:
        data = read_json(path)
        return SequencePlan.from_dict(data), data
    except (OSError, ValueError) as e:
        raise ConfigError(f"Cannot read plan {path}: {e}") from e


def _plan_context(
    args: argparse.Namespace, data: dict
) -> tuple[DensityMatrix, ObservableSet]:
    """Target and observable set of a plan file, optionally overridden by flags."""
    observables_source = args.observables or data.get("observables", DEFAULT_OBSERVABLES)
    try:
        observables = load_observable_set(observables_source)
        if args.target:
            rho0 = load_state(args.target)
        elif "target" in data:
            rho0 = DensityMatrix.from_dict(data["target"])
        else:
            raise ConfigError("Plan file has no target; pass --target")
    except (OSError, ValueError) as e:
        raise ConfigError(f"Cannot load plan context: {e}") from e
    return rho0, observables


# ==============================================================================
# SUBCOMMANDS
# ==============================================================================


def cmd_plan(args: argparse.Namespace) -> int:
    rho0, observables = _load_inputs(args.target, args.observables)
    epsilon = epsilon_from_fidelity(args.epsilon_fidelity)

    if args.algo == "os":
        plan = plan_os(rho0, observables, epsilon, args.os_cap)
    elif args.algo == "ios":
        plan = plan_ios(rho0, observables, seed=args.seed)
    elif args.algo == "ias":
        plan = plan_ias(rho0, observables, seed=args.seed)
    else:
        plan = plan_random(observables, args.seed)
    if not args.no_complete:
        plan = complete_sequence(plan, observables, args.seed)

    record = plan.to_dict()
    record["target_digest"] = target_digest(rho0, observables)
    record["target"] = rho0.to_dict()
    record["observables"] = args.observables
    record["epsilon_fidelity"] = args.epsilon_fidelity
    write_json(args.out, record)

    labels = [observables.labels[i] for i in plan.indices]
    _emit(f"{plan.method.value} plan ({len(plan)} observables, stop: {plan.stop_reason})")
    _emit("  " + ", ".join(labels))
    logger.info(f"Wrote plan to {args.out}")
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    plan, data = _load_plan_file(args.plan)
    rho0, observables = _plan_context(args, data)
    if data.get("target_digest") and data["target_digest"] != target_digest(rho0, observables):
        raise ConfigError("Plan was made for another target or observable set")

    try:
        rho_exp = load_state(args.state)
    except (OSError, ValueError) as e:
        raise ConfigError(f"Cannot load state: {e}") from e

    fidelity = args.epsilon_fidelity or data.get("epsilon_fidelity", DEFAULT_EPSILON_FIDELITY)
    epsilon = epsilon_from_fidelity(fidelity)
    oracle = MeasurementOracle(rho_exp, args.shots, args.seed)
    outcome = run_vm(plan, oracle, rho0, epsilon, observables)

    if args.out:
        write_json(args.out, outcome.to_dict())
    if args.csv:
        outcome.to_frame().to_csv(args.csv, index=False)
    _emit(f"{outcome.verdict.value} after {outcome.steps_used} measurements (epsilon={epsilon:.4f})")
    return EXIT_OK


def cmd_adapt(args: argparse.Namespace) -> int:
    rho0, observables = _load_inputs(args.target, args.observables)
    try:
        rho_exp = load_state(args.state)
    except (OSError, ValueError) as e:
        raise ConfigError(f"Cannot load state: {e}") from e

    epsilon = epsilon_from_fidelity(args.epsilon_fidelity)
    oracle = MeasurementOracle(rho_exp, args.shots, args.seed)
    trace = run_av(observables, oracle, rho0, epsilon, seed=args.seed)

    if args.out:
        write_json(args.out, trace.to_dict())
    if args.csv:
        trace.to_frame().to_csv(args.csv, index=False)
    labels = [observables.labels[i] for i in trace.indices]
    _emit(f"{trace.verdict.value} after {trace.steps_used} measurements (epsilon={epsilon:.4f})")
    _emit("  " + ", ".join(labels))
    return EXIT_OK


def cmd_bound(args: argparse.Namespace) -> int:
    plan, data = _load_plan_file(args.plan)
    rho0, observables = _plan_context(args, data)
    plan.check_against(observables)

    prefix = len(plan) if args.prefix is None else min(args.prefix, len(plan))
    state = ProjectionState.empty(rho0.dim)
    _emit(f"{'k':>3}  {'label':<12} {'norm_sq':>12} {'hs_bound':>12} {'bures_bound':>12}")
    for k, index in enumerate(plan.indices[:prefix], start=1):
        state = project_update(state, rho0, observables[index])
        norm_sq = state.projected_norm_sq
        bures = f"{bures_bound_pure(norm_sq):12.6f}" if norm_sq >= 0.5 else f"{'-':>12}"
        _emit(
            f"{k:>3}  {observables.labels[index]:<12} {norm_sq:12.9f} "
            f"{hs_bound(rho0, state):12.6f} {bures}"
        )
    return EXIT_OK


def cmd_experiment(args: argparse.Namespace) -> int:
    config = ExperimentConfig.from_toml(args.config) if args.config else ExperimentConfig()
    algorithms = tuple(a.strip() for a in args.algorithms.split(",")) if args.algorithms else None
    config = config.with_overrides(
        seed=args.seed,
        n_targets=args.n_targets,
        n_workers=args.n_workers,
        shots=args.shots,
        algorithms=algorithms,
    )

    report = run_experiment(config)
    paths = report.write(args.out_dir)

    summary = report.summary()
    for row in summary.itertuples(index=False):
        _emit(f"{row[0]:<12} {row[1]:<10} mean {row[2]:6.2f}  std {row[3]:6.2f}  n {row[4]}")
    _emit(f"Outputs: {', '.join(str(p) for p in paths.values())}")

    if report.exceeds_exclusion_budget:
        return EXIT_FAILURE
    return EXIT_OK


# ==============================================================================
# PARSER
# ==============================================================================


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qsv", description="Measurement planning and verification of quantum states"
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument(
        "--log-level",
        default=DEFAULT_LOG_LEVEL,
        choices=["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"],
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="plan a measurement sequence")
    p.add_argument("--algo", choices=["os", "ios", "ias", "random"], required=True)
    p.add_argument("--target", required=True, help="target state JSON {dim, re, im}")
    p.add_argument("--observables", default=DEFAULT_OBSERVABLES, help="pauli1q, pauli2q or JSON")
    p.add_argument("--epsilon-fidelity", type=float, default=DEFAULT_EPSILON_FIDELITY)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--os-cap", type=int, default=DEFAULT_OS_CAP)
    p.add_argument("--no-complete", action="store_true", help="do not fill the plan up to d²")
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("verify", help="verify a state against a plan")
    p.add_argument("--plan", required=True)
    p.add_argument("--state", required=True, help="prepared state JSON")
    p.add_argument("--target", help="override the target stored in the plan")
    p.add_argument("--observables", help="override the observable set stored in the plan")
    p.add_argument("--epsilon-fidelity", type=float)
    p.add_argument("--shots", type=int)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out", type=Path)
    p.add_argument("--csv", type=Path)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("adapt", help="adaptive verification")
    p.add_argument("--target", required=True)
    p.add_argument("--state", required=True)
    p.add_argument("--observables", default=DEFAULT_OBSERVABLES)
    p.add_argument("--epsilon-fidelity", type=float, default=DEFAULT_EPSILON_FIDELITY)
    p.add_argument("--shots", type=int)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out", type=Path)
    p.add_argument("--csv", type=Path)
    p.set_defaults(func=cmd_adapt)

    p = sub.add_parser("bound", help="analytic bounds along a plan")
    p.add_argument("--plan", required=True)
    p.add_argument("--target")
    p.add_argument("--observables")
    p.add_argument("--prefix", type=int, help="number of plan steps to show")
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("experiment", help="run the seeded verification study")
    p.add_argument("--config", type=Path, help="flat TOML configuration")
    p.add_argument("--out-dir", type=Path, required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--n-targets", type=int)
    p.add_argument("--n-workers", type=int)
    p.add_argument("--shots", type=int)
    p.add_argument("--algorithms", help="comma-separated subset of OS,IOS,IAS,AV,Random")
    p.set_defaults(func=cmd_experiment)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    get_logger("qsv", args.log_level)

    try:
        return args.func(args)
    except ConfigError as e:
        logger.error(str(e))
        return EXIT_CONFIG
    except (StepError, EstimateInconsistencyError) as e:
        logger.error(str(e))
        return EXIT_FAILURE
    except (QsvError, ValueError, IndexError) as e:
        logger.error(str(e))
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
