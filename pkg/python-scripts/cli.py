"""Command-line entry points: simulate, decompose, experiment.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical failure.
"""

import argparse
import logging
import sys
from pathlib import Path

import numpy as np
import pandas as pd
from pydantic import BaseModel, ValidationError

from errors import ConfigError, DataError, NumericalError
from evaluation import component_tables, run_experiment, run_overlays
from matrix_io import (
    load_run_config,
    read_matrix,
    write_events,
    write_frame,
    write_matrix,
    write_model,
)
from operators import numerical_rank
from simulator import generate, preset_scenario
from solver import decompose, default_lambda, spcp_final_mu
from traffic_models import (
    MethodName,
    PcaConfig,
    RunConfig,
    Scenario,
    ScenarioPreset,
    SolverConfig,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4


class DecomposeSummary(BaseModel):
    method: MethodName
    params: SolverConfig | PcaConfig
    T: int
    P: int
    iterations: int
    converged: bool
    final_residual: float
    rank_A: int
    nnz_E: int | None

    model_config = {"frozen": True}


def _out_dir(args: argparse.Namespace, config: RunConfig) -> Path:
    return Path(args.out) if args.out else config.io.out_dir


def _scenario(args: argparse.Namespace, config: RunConfig) -> Scenario:
    scenario = config.scenario
    if args.preset:
        alpha = args.alpha if args.alpha is not None else scenario.noise_alpha
        return preset_scenario(ScenarioPreset(args.preset), alpha, scenario, seed=args.seed)
    updates = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.alpha is not None:
        updates["noise_alpha"] = args.alpha
    return Scenario.model_validate({**scenario.model_dump(), **updates}) if updates else scenario


def cmd_simulate(args: argparse.Namespace, config: RunConfig) -> None:
    scenario = _scenario(args, config)
    out = _out_dir(args, config)
    truth = generate(scenario)
    fmt = config.io.float_format
    for name in ("X", "A", "E", "N"):
        write_matrix(out / f"{name}.csv", getattr(truth, name), fmt)
    write_events(out / "events.csv", truth.events)
    write_model(out / "scenario.json", scenario)
    print(f"✅ Wrote {scenario.label} (T={scenario.T}, P={scenario.P}) to {out}")
    print(f"   Anomaly events: {len(truth.events)}")


def resolved_params(
    X: np.ndarray, method: MethodName, config: RunConfig
) -> SolverConfig | PcaConfig:
    """The solver section of ``method`` with data-dependent defaults filled in."""
    match method:
        case MethodName.PCA:
            return config.solver.pca
        case MethodName.PCP:
            section = config.solver.pcp
        case MethodName.SPCP:
            section = config.solver.spcp
            section = section.model_copy(update={"mu_final": spcp_final_mu(X, section)})
        case MethodName.SPCP_MRC:
            section = config.solver.spcp_mrc
            section = section.model_copy(update={"box_depth": section.resolved_box_depth})
    if section.lambda_ is None:
        section = section.model_copy(update={"lambda_": default_lambda(*X.shape)})
    return section


def cmd_decompose(args: argparse.Namespace, config: RunConfig) -> None:
    X = read_matrix(Path(args.input))
    method = MethodName(args.method)
    out = _out_dir(args, config)
    estimate, trace = decompose(X, method, config.solver)
    fmt = config.io.float_format
    for name, matrix in estimate.components().items():
        write_matrix(out / f"{name}_hat.csv", matrix, fmt)
    write_frame(
        out / "trace.csv",
        pd.DataFrame([record.model_dump() for record in trace.records]),
        fmt,
    )
    summary = DecomposeSummary(
        method=method,
        params=resolved_params(X, method, config),
        T=X.shape[0],
        P=X.shape[1],
        iterations=trace.iterations,
        converged=trace.converged,
        final_residual=trace.final_residual,
        rank_A=numerical_rank(estimate.A),
        nnz_E=int((estimate.E != 0).sum()) if estimate.E is not None else None,
    )
    write_model(out / "summary.json", summary)
    write_model(out / "config.json", config)
    print(f"✅ Wrote {method.label} decomposition of {args.input} to {out}")
    print(f"   Iterations: {summary.iterations}, converged: {summary.converged}, rank(A): {summary.rank_A}")


def _positive_flag(value: int | None, flag: str, default: int) -> int:
    if value is None:
        return default
    if value < 1:
        raise ConfigError(f"must be a positive integer, got {value}", key_path=flag)
    return value


def cmd_experiment(args: argparse.Namespace, config: RunConfig) -> None:
    experiment = config.experiment
    n_samples = _positive_flag(args.samples, "--samples", experiment.n_samples)
    jobs = _positive_flag(args.jobs, "--jobs", experiment.jobs)
    base_seed = args.seed if args.seed is not None else experiment.base_seed
    out = _out_dir(args, config)
    scenarios = [
        preset_scenario(preset, alpha, config.scenario)
        for alpha in experiment.alphas
        for preset in experiment.scenarios
    ]
    report = run_experiment(
        scenarios, experiment.methods, n_samples, config.solver, base_seed, jobs
    )
    fmt = config.io.float_format
    write_frame(out / "report.csv", report.to_frame(), fmt)
    write_frame(out / "samples.csv", report.samples_frame(), fmt)
    for component, table in component_tables(report).items():
        table.to_csv(out / f"table_{component}.csv", float_format=fmt, na_rep="N/A")
    if experiment.overlays:
        overlays = run_overlays(
            experiment.overlays, experiment.methods, config.scenario, config.solver, base_seed
        )
        write_frame(out / "overlays.csv", overlays, fmt)
    write_model(out / "config.json", config)
    failed = sum(row.n_failed for row in report.rows)
    print(f"✅ Wrote report for {len(report.rows)} cells to {out}")
    if failed:
        print(f"   ⚠️ {failed} method runs failed; see samples.csv")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="traffic-mrc",
        description="Traffic-matrix decomposition with multiresolution constraints.",
    )
    parser.add_argument("--config", type=Path, help="JSON run configuration")
    parser.add_argument("--quiet", action="store_true", help="only log warnings")
    parser.add_argument("--verbose", action="store_true", help="log every iteration")
    sub = parser.add_subparsers(dest="command", required=True)

    simulate = sub.add_parser("simulate", help="generate a ground-truth traffic matrix")
    simulate.add_argument("--preset", choices=[p.value for p in ScenarioPreset])
    simulate.add_argument("--alpha", type=float, help="noise level override")
    simulate.add_argument("--seed", type=int)
    simulate.add_argument("--out")
    simulate.set_defaults(handler=cmd_simulate)

    run = sub.add_parser("decompose", help="decompose a traffic matrix CSV")
    run.add_argument("input", help="headerless T x P CSV")
    run.add_argument(
        "--method", choices=[m.value for m in MethodName], default=MethodName.SPCP_MRC.value
    )
    run.add_argument("--out")
    run.set_defaults(handler=cmd_decompose)

    experiment = sub.add_parser("experiment", help="run the accuracy battery")
    experiment.add_argument("--samples", type=int)
    experiment.add_argument("--jobs", type=int)
    experiment.add_argument("--seed", type=int, help="base seed override")
    experiment.add_argument("--out")
    experiment.set_defaults(handler=cmd_experiment)
    return parser


def _configure_logging(args: argparse.Namespace) -> None:
    level = logging.INFO
    if args.quiet:
        level = logging.WARNING
    elif args.verbose:
        level = logging.DEBUG
    logging.basicConfig(
        level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s", force=True
    )


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    _configure_logging(args)
    try:
        config = load_run_config(args.config)
        args.handler(args, config)
    except ConfigError as exc:
        logger.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except ValidationError as exc:
        logger.error("configuration error: %s", exc.errors()[0]["msg"])
        return EXIT_CONFIG
    except DataError as exc:
        logger.error("data error: %s", exc)
        return EXIT_DATA
    except NumericalError as exc:
        logger.error("numerical failure: %s", exc)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
