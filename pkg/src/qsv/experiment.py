"""
Seeded verification study over random two-qubit targets.

For every target the harness:
- draws a random pure ρ0 and one preparation per class (accurate / non-accurate)
- plans IOS, IAS (and optionally OS) sequences; control groups share a fixed
  set of random tomographically complete orders
- runs VM on every plan and AV adaptively, recording step counts and traces
- optionally runs the reconstruction study: α (IOS) and β (IAS cross-evaluated
  with the IOS objective) per prefix length

Targets are independent jobs. Every random draw comes from a substream keyed by
(target, purpose), so results do not depend on execution order or worker count.
"""

import logging
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from functools import partial
from multiprocessing import Pool
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

import numpy as np
import pandas as pd

from .__version__ import __version__
from .adaptive import run_av
from .constants import (
    CLASSES,
    CSV_FLOAT_FORMAT,
    DEFAULT_ALGORITHMS,
    DEFAULT_EPSILON_FIDELITY,
    DEFAULT_ETA,
    DEFAULT_LAMBDA_ACCURATE,
    DEFAULT_LAMBDA_NONACCURATE,
    DEFAULT_MAX_EXCLUSION_FRACTION,
    DEFAULT_N_CONTROL_SEQUENCES,
    DEFAULT_N_TARGETS,
    DEFAULT_OBSERVABLES,
    DEFAULT_OS_CAP,
    DEFAULT_SEED,
    DIFFERENCE_PAIRS,
    HISTOGRAMS_CSV,
    RAW_CSV,
    RECONSTRUCTION_CSV,
    RECONSTRUCTION_TOL,
    SUMMARY_JSON,
    TRIALS_CSV,
)
from .exceptions import ConfigError, InfeasibleConstraintsError, QsvError, SolverFailureError
from .hermitian import (
    DensityMatrix,
    ObservableSet,
    epsilon_from_fidelity,
    hs_inner,
    load_observable_set,
    random_pure_target,
    sample_preparation,
)
from .planner import (
    SequencePlan,
    complete_sequence,
    plan_ias,
    plan_ios,
    plan_os,
    plan_random,
)
from .sdp import CompatibleSetSpec, max_distance
from .utils import write_json
from .validation import ValidationResult, validate_experiment_config
from .verifier import MeasurementOracle, Verdict, run_vm

logger = logging.getLogger(__name__)

# Substream purposes (second element of the seed key)
STREAM_TARGET = 0
STREAM_PREPARATION = 1
STREAM_PLAN = 2
STREAM_ORACLE = 3
STREAM_ADAPTIVE = 4
STREAM_CONTROL = 5

TRIAL_COLUMNS = [
    "target", "class", "algorithm", "verdict", "steps", "correct",
    "true_distance", "lambda", "attempts",
]
STEP_COLUMNS = ["target", "class", "algorithm", "k", "index", "label", "y", "lower", "upper"]
RECONSTRUCTION_COLUMNS = ["target", "l", "alpha", "beta"]
EXCLUSION_COLUMNS = ["target", "class", "algorithm", "reason"]


def substream_seed(seed: int, *key: int) -> int:
    """Child seed for a (target, purpose, ...) key, independent of execution order."""
    state = np.random.SeedSequence(seed, spawn_key=tuple(key)).generate_state(1)
    return int(state[0])


# ==============================================================================
# CONFIGURATION
# ==============================================================================


@dataclass(frozen=True)
class ExperimentConfig:
    """
    Settings of one study; defaults reproduce the two-qubit study.

    Attributes:
        seed: Master seed
        n_targets: Number of random pure targets
        epsilon_fidelity: Fidelity threshold ε̃; the Bures radius is derived from it
        lambda_accurate: Depolarizing weight for the accurate class
        lambda_nonaccurate: Depolarizing weight for the non-accurate class
        eta: Rotation strength of the perturbation
        n_control_sequences: Number of random control orders
        shots: Shots per observable; None for perfect measurements
        algorithms: Subset of OS, IOS, IAS, AV, Random
        os_cap: Largest subset size enumerated by OS
        classes: Preparation classes to run
        observables: 'pauli2q' or a path to an observable-set JSON file
        n_workers: Worker processes; None uses every CPU, 1 runs in-process
        reconstruction_study: Record α/β traces per target
        reconstruction_tol: Max distance that counts as reconstructed
        max_exclusion_fraction: Excluded-trial budget before the run is a failure
    """

    seed: int = DEFAULT_SEED
    n_targets: int = DEFAULT_N_TARGETS
    epsilon_fidelity: float = DEFAULT_EPSILON_FIDELITY
    lambda_accurate: float = DEFAULT_LAMBDA_ACCURATE
    lambda_nonaccurate: float = DEFAULT_LAMBDA_NONACCURATE
    eta: float = DEFAULT_ETA
    n_control_sequences: int = DEFAULT_N_CONTROL_SEQUENCES
    shots: int | None = None
    algorithms: tuple[str, ...] = DEFAULT_ALGORITHMS
    os_cap: int = DEFAULT_OS_CAP
    classes: tuple[str, ...] = CLASSES
    observables: str = DEFAULT_OBSERVABLES
    n_workers: int | None = None
    reconstruction_study: bool = True
    reconstruction_tol: float = RECONSTRUCTION_TOL
    max_exclusion_fraction: float = DEFAULT_MAX_EXCLUSION_FRACTION

    def __post_init__(self) -> None:
        if isinstance(self.algorithms, str):
            object.__setattr__(self, "algorithms", (self.algorithms,))
        object.__setattr__(self, "algorithms", tuple(self.algorithms))
        if isinstance(self.classes, str):
            object.__setattr__(self, "classes", (self.classes,))
        object.__setattr__(self, "classes", tuple(self.classes))

    @property
    def epsilon(self) -> float:
        """Bures radius sqrt(2(1 − sqrt(ε̃)))."""
        return epsilon_from_fidelity(self.epsilon_fidelity)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"Unknown configuration keys: {', '.join(unknown)}")
        try:
            return cls(**data)
        except TypeError as e:
            raise ConfigError(f"Invalid configuration: {e}") from e

    @classmethod
    def from_toml(cls, path: str | Path) -> "ExperimentConfig":
        """
        Read a flat TOML file of configuration keys.

        Raises:
            ConfigError: unreadable file, syntax error or unknown key
        """
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except OSError as e:
            raise ConfigError(f"Cannot read configuration {path}: {e}") from e
        except tomllib.TOMLDecodeError as e:
            raise ConfigError(f"Malformed configuration {path}: {e}") from e
        return cls.from_dict(data)

    def with_overrides(self, **overrides: Any) -> "ExperimentConfig":
        """Copy with the non-None overrides applied (CLI flags)."""
        changes = {k: v for k, v in overrides.items() if v is not None}
        known = {f.name for f in fields(self)}
        unknown = sorted(set(changes) - known)
        if unknown:
            raise ConfigError(f"Unknown configuration keys: {', '.join(unknown)}")
        return replace(self, **changes)

    def validate(self) -> ValidationResult:
        """
        Check ranges and log warnings.

        Raises:
            ConfigError: listing every violated range
        """
        result = validate_experiment_config(self)
        for warning in result.warnings:
            logger.warning(warning)
        if not result.is_valid:
            raise ConfigError(f"Invalid configuration: {'; '.join(result.errors)}")
        return result

    def to_dict(self) -> dict:
        data = asdict(self)
        data["algorithms"] = list(self.algorithms)
        data["classes"] = list(self.classes)
        return data

    def series_labels(self) -> list[str]:
        """Algorithm labels in run order, 'Random' expanded to Random1..RandomN."""
        labels = []
        for name in self.algorithms:
            if name == "Random":
                labels.extend(f"Random{i}" for i in range(1, self.n_control_sequences + 1))
            else:
                labels.append(name)
        return labels


# ==============================================================================
# CROSS-EVALUATION
# ==============================================================================


def cross_evaluate_beta(
    rho0: DensityMatrix, ias_plan: SequencePlan, observables: ObservableSet
) -> list[float]:
    """
    β_l: max Bures distance to ρ0 over the states matching ρ0 on the first l
    observables of an IAS plan (the IOS objective evaluated along IAS).

    Once β reaches exactly 0 the state is pinned and later prefixes are 0.

    Raises:
        InfeasibleConstraintsError, SolverFailureError: with the prefix length as step
    """
    ias_plan.check_against(observables)
    spec = CompatibleSetSpec.empty(rho0.dim)
    betas: list[float] = []
    for length, index in enumerate(ias_plan.indices, start=1):
        if betas and betas[-1] == 0.0:
            betas.append(0.0)
            continue
        op = observables[index]
        spec = spec.with_constraint(op, hs_inner(rho0, op))
        try:
            betas.append(max_distance(rho0, spec))
        except (InfeasibleConstraintsError, SolverFailureError) as e:
            raise e.at_step(length) from e
    return betas


def reconstruction_steps(
    scores: list[float] | np.ndarray, tol: float = RECONSTRUCTION_TOL
) -> int | None:
    """First 1-based prefix length whose max distance is <= tol, or None."""
    for length, score in enumerate(scores, start=1):
        if score <= tol:
            return length
    return None


# ==============================================================================
# PER-TARGET WORKER
# ==============================================================================


@dataclass
class TargetResult:
    """Rows produced for one target."""

    target: int
    trials: list[dict] = field(default_factory=list)
    steps: list[dict] = field(default_factory=list)
    reconstruction: list[dict] = field(default_factory=list)
    exclusions: list[dict] = field(default_factory=list)

    def exclude(self, cls: str | None, algorithm: str, error: Exception) -> None:
        reason = f"{type(error).__name__}: {error}"
        logger.warning(f"Target {self.target} {cls or '-'} {algorithm} excluded: {reason}")
        self.exclusions.append(
            {"target": self.target, "class": cls, "algorithm": algorithm, "reason": reason}
        )


def _plan_for(
    name: str,
    rho0: DensityMatrix,
    observables: ObservableSet,
    config: ExperimentConfig,
    seed: int,
) -> SequencePlan:
    if name == "OS":
        plan = plan_os(rho0, observables, config.epsilon, config.os_cap)
    elif name == "IOS":
        plan = plan_ios(rho0, observables, seed=seed, zero_tol=config.reconstruction_tol)
    elif name == "IAS":
        plan = plan_ias(rho0, observables, seed=seed)
    else:
        raise ValueError(f"No off-line planner for {name}")
    return complete_sequence(plan, observables, seed)


def _is_correct(verdict: Verdict, accurate: bool) -> bool:
    if verdict is Verdict.ACCURATE:
        return accurate
    if verdict is Verdict.NOT_ACCURATE:
        return not accurate
    return False


def run_target(
    target: int,
    config: ExperimentConfig,
    observables: ObservableSet,
    control_plans: list[SequencePlan],
) -> TargetResult:
    """
    Every protocol on one target, both preparation classes.

    Must be at module level to be picklable. QsvError and ValueError raised by
    any protocol exclude the affected trial; other exceptions propagate.
    """
    result = TargetResult(target)
    epsilon = config.epsilon
    rho0 = random_pure_target(
        substream_seed(config.seed, target, STREAM_TARGET), observables.dim
    )
    plan_seed = substream_seed(config.seed, target, STREAM_PLAN)

    plans: dict[str, SequencePlan] = {}
    plan_errors: dict[str, Exception] = {}
    for name in config.algorithms:
        if name in ("AV", "Random"):
            continue
        try:
            plans[name] = _plan_for(name, rho0, observables, config, plan_seed)
        except (QsvError, ValueError) as e:
            plan_errors[name] = e
    for i, plan in enumerate(control_plans, start=1):
        plans[f"Random{i}"] = plan

    if config.reconstruction_study and "IOS" in plans and "IAS" in plans:
        try:
            betas = cross_evaluate_beta(rho0, plans["IAS"], observables)
            alphas = list(plans["IOS"].scores) + [0.0] * (len(betas) - len(plans["IOS"].scores))
            result.reconstruction = [
                {"target": target, "l": length, "alpha": a, "beta": b}
                for length, (a, b) in enumerate(zip(alphas, betas), start=1)
            ]
        except (QsvError, ValueError) as e:
            result.exclude(None, "reconstruction", e)

    labels = config.series_labels()
    for class_index, cls in enumerate(config.classes):
        accurate = cls == "accurate"
        lam = config.lambda_accurate if accurate else config.lambda_nonaccurate
        try:
            prep = sample_preparation(
                rho0,
                epsilon,
                lam,
                config.eta,
                accurate,
                substream_seed(config.seed, target, STREAM_PREPARATION, class_index),
            )
        except (QsvError, ValueError) as e:
            for label in labels:
                result.exclude(cls, label, e)
            continue

        for alg_index, label in enumerate(labels):
            if label in plan_errors:
                result.exclude(cls, label, plan_errors[label])
                continue
            oracle = MeasurementOracle(
                prep.state,
                config.shots,
                substream_seed(config.seed, target, STREAM_ORACLE, class_index, alg_index),
            )
            try:
                if label == "AV":
                    trace = run_av(
                        observables,
                        oracle,
                        rho0,
                        epsilon,
                        seed=substream_seed(config.seed, target, STREAM_ADAPTIVE, class_index),
                    )
                    verdict, steps_used, records = trace.verdict, trace.steps_used, trace.steps
                else:
                    outcome = run_vm(plans[label], oracle, rho0, epsilon, observables)
                    verdict, steps_used, records = outcome.verdict, outcome.steps_used, outcome.trace
            except (QsvError, ValueError) as e:
                result.exclude(cls, label, e)
                continue

            result.trials.append(
                {
                    "target": target,
                    "class": cls,
                    "algorithm": label,
                    "verdict": verdict.value,
                    "steps": steps_used,
                    "correct": _is_correct(verdict, accurate),
                    "true_distance": prep.distance,
                    "lambda": lam,
                    "attempts": prep.attempts,
                }
            )
            result.steps.extend(
                {
                    "target": target,
                    "class": cls,
                    "algorithm": label,
                    "k": r.k,
                    "index": r.index,
                    "label": r.label,
                    "y": r.y,
                    "lower": r.min_dist,
                    "upper": r.max_dist,
                }
                for r in records
            )

    logger.debug(f"Target {target}: {len(result.trials)} trials, {len(result.exclusions)} exclusions")
    return result


# ==============================================================================
# REPORT
# ==============================================================================


def _clean(value: Any) -> Any:
    """JSON-safe scalar: NaN becomes None, numpy scalars become Python numbers."""
    if isinstance(value, (np.floating, float)):
        return None if np.isnan(value) else float(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def _records(frame: pd.DataFrame) -> list[dict]:
    return [{k: _clean(v) for k, v in row.items()} for row in frame.to_dict(orient="records")]


@dataclass
class ExperimentReport:
    """
    Tables produced by run_experiment.

    Attributes:
        config: Settings of the run
        trials: One row per (target, class, algorithm) with the step count
        steps: One row per (trial, step) with the distance bracket
        reconstruction: α_l and β_l per (target, prefix length)
        exclusions: Excluded trials with their reason
        max_steps: d², the largest possible step count
    """

    config: ExperimentConfig
    trials: pd.DataFrame
    steps: pd.DataFrame
    reconstruction: pd.DataFrame
    exclusions: pd.DataFrame
    max_steps: int = 16

    @property
    def n_excluded(self) -> int:
        return int((self.exclusions["algorithm"] != "reconstruction").sum())

    @property
    def n_attempted(self) -> int:
        return len(self.trials) + self.n_excluded

    @property
    def exclusion_fraction(self) -> float:
        return self.n_excluded / self.n_attempted if self.n_attempted else 0.0

    @property
    def exceeds_exclusion_budget(self) -> bool:
        return self.exclusion_fraction > self.config.max_exclusion_fraction

    def summary(self) -> pd.DataFrame:
        """Mean, sample std and count of step counts per class and algorithm."""
        if self.trials.empty:
            return pd.DataFrame(columns=["class", "algorithm", "mean", "std", "n", "correct"])
        grouped = self.trials.groupby(["class", "algorithm"], sort=True)
        stats = grouped["steps"].agg(["mean", "std", "count"]).rename(columns={"count": "n"})
        stats["correct"] = grouped["correct"].mean()
        return stats.reset_index()

    def histograms(self) -> pd.DataFrame:
        """
        Step-count frequencies (bins 1..d²) and paired differences
        (bins −(d²−1)..d²−1) for the configured algorithm pairs.
        """
        rows = []
        if self.trials.empty:
            return pd.DataFrame(columns=["kind", "class", "series", "bin", "count"])

        for (cls, alg), group in self.trials.groupby(["class", "algorithm"], sort=True):
            counts = group["steps"].value_counts()
            for b in range(1, self.max_steps + 1):
                rows.append(
                    {"kind": "steps", "class": cls, "series": alg, "bin": b,
                     "count": int(counts.get(b, 0))}
                )

        for cls, group in self.trials.groupby("class", sort=True):
            wide = group.pivot(index="target", columns="algorithm", values="steps")
            for a, b in DIFFERENCE_PAIRS:
                if a not in wide.columns or b not in wide.columns:
                    continue
                diff = (wide[a] - wide[b]).dropna().astype(int).value_counts()
                for v in range(1 - self.max_steps, self.max_steps):
                    rows.append(
                        {"kind": "difference", "class": cls, "series": f"{a}-{b}", "bin": v,
                         "count": int(diff.get(v, 0))}
                    )

        return pd.DataFrame(rows, columns=["kind", "class", "series", "bin", "count"])

    def reconstruction_summary(self) -> dict:
        """Steps to reconstruction for IOS (α) and IAS (β), and β_l − α_l per l."""
        if self.reconstruction.empty:
            return {}
        tol = self.config.reconstruction_tol
        per_target = pd.DataFrame(
            [
                {
                    "IOS": reconstruction_steps(group["alpha"].to_numpy(), tol),
                    "IAS": reconstruction_steps(group["beta"].to_numpy(), tol),
                }
                for _, group in self.reconstruction.groupby("target", sort=True)
            ],
            columns=["IOS", "IAS"],
            dtype=float,
        )
        gap = (
            self.reconstruction.assign(diff=self.reconstruction["beta"] - self.reconstruction["alpha"])
            .groupby("l", sort=True)["diff"]
            .agg(["mean", "std"])
            .reset_index()
        )
        return {
            "steps": {
                name: {"mean": _clean(per_target[name].mean()), "std": _clean(per_target[name].std())}
                for name in ("IOS", "IAS")
            },
            "beta_minus_alpha": _records(gap),
        }

    def to_summary_dict(self) -> dict:
        return {
            "version": __version__,
            "config": self.config.to_dict(),
            "epsilon": self.config.epsilon,
            "n_trials": self.n_attempted,
            "n_excluded": self.n_excluded,
            "exclusion_fraction": self.exclusion_fraction,
            "exceeds_exclusion_budget": self.exceeds_exclusion_budget,
            "aggregates": _records(self.summary()),
            "reconstruction": self.reconstruction_summary(),
            "exclusions": _records(self.exclusions),
        }

    def write(self, out_dir: str | Path) -> dict[str, Path]:
        """Write raw.csv, trials.csv, histograms.csv, reconstruction.csv and summary.json."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {
            "raw": out / RAW_CSV,
            "trials": out / TRIALS_CSV,
            "histograms": out / HISTOGRAMS_CSV,
            "reconstruction": out / RECONSTRUCTION_CSV,
            "summary": out / SUMMARY_JSON,
        }
        csv_options = {"index": False, "float_format": CSV_FLOAT_FORMAT, "lineterminator": "\n"}
        self.steps.to_csv(paths["raw"], **csv_options)
        self.trials.to_csv(paths["trials"], **csv_options)
        self.histograms().to_csv(paths["histograms"], **csv_options)
        self.reconstruction.to_csv(paths["reconstruction"], **csv_options)
        write_json(paths["summary"], self.to_summary_dict())
        logger.info(f"Wrote report to {out}")
        return paths


# ==============================================================================
# DRIVER
# ==============================================================================


def run_experiment(
    config: ExperimentConfig, observables: ObservableSet | None = None
) -> ExperimentReport:
    """
    Run the study described by config.

    Args:
        config: Validated settings (validated again here)
        observables: Observable set; default loads config.observables

    Returns:
        ExperimentReport with rows sorted by target

    Raises:
        ConfigError: invalid settings or a non-two-qubit observable set
    """
    config.validate()
    if observables is None:
        try:
            observables = load_observable_set(config.observables)
        except (OSError, ValueError) as e:
            raise ConfigError(f"Cannot load observables '{config.observables}': {e}") from e
    if observables.dim != 4:
        raise ConfigError(f"The preparation ensemble needs two qubits, got dim {observables.dim}")

    control_plans = []
    if "Random" in config.algorithms:
        control_plans = [
            plan_random(observables, substream_seed(config.seed, i, STREAM_CONTROL))
            for i in range(config.n_control_sequences)
        ]

    logger.info(
        f"Starting study: {config.n_targets} targets, algorithms {list(config.algorithms)}, "
        f"epsilon={config.epsilon:.4f}, shots={config.shots or 'perfect'}"
    )

    targets = list(range(config.n_targets))
    if config.n_workers == 1:
        results = _process_sequential(targets, config, observables, control_plans)
    else:
        results = _process_parallel(targets, config, observables, control_plans)
    results.sort(key=lambda r: r.target)

    report = ExperimentReport(
        config=config,
        trials=pd.DataFrame([row for r in results for row in r.trials], columns=TRIAL_COLUMNS),
        steps=pd.DataFrame([row for r in results for row in r.steps], columns=STEP_COLUMNS),
        reconstruction=pd.DataFrame(
            [row for r in results for row in r.reconstruction], columns=RECONSTRUCTION_COLUMNS
        ),
        exclusions=pd.DataFrame(
            [row for r in results for row in r.exclusions], columns=EXCLUSION_COLUMNS
        ),
        max_steps=observables.dim**2,
    )

    logger.info(
        f"Finished study: {len(report.trials)} trials, {report.n_excluded} excluded "
        f"({report.exclusion_fraction:.2%})"
    )
    if report.exceeds_exclusion_budget:
        logger.error(
            f"Excluded fraction {report.exclusion_fraction:.2%} exceeds the budget "
            f"{config.max_exclusion_fraction:.2%}"
        )
    return report


def _process_sequential(
    targets: list[int],
    config: ExperimentConfig,
    observables: ObservableSet,
    control_plans: list[SequencePlan],
) -> list[TargetResult]:
    """Process targets in this process."""
    results = []
    for i, target in enumerate(targets):
        results.append(run_target(target, config, observables, control_plans))
        if (i + 1) % 10 == 0:
            logger.info(f"Processed {i + 1}/{len(targets)} targets")
    return results


def _process_parallel(
    targets: list[int],
    config: ExperimentConfig,
    observables: ObservableSet,
    control_plans: list[SequencePlan],
) -> list[TargetResult]:
    """Process targets using multiprocessing."""
    worker = partial(
        run_target,
        config=config,
        observables=observables,
        control_plans=control_plans,
    )

    results = []
    with Pool(processes=config.n_workers) as pool:
        for i, result in enumerate(pool.imap_unordered(worker, targets)):
            results.append(result)
            if (i + 1) % 10 == 0:
                logger.info(f"Processed {i + 1}/{len(targets)} targets")

    return results
