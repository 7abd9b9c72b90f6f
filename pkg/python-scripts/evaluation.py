"""Accuracy of decompositions against simulated ground truth, and experiment batteries."""

import logging
import statistics

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from pydantic import BaseModel, Field

from errors import DimensionError, TrafficDecompositionError, ZeroDenominatorError
from simulator import generate, preset_scenario
from solver import decompose
from traffic_models import (
    Decomposition,
    GroundTruth,
    MethodName,
    OverlaySelection,
    Scenario,
    SolverSection,
)

logger = logging.getLogger(__name__)

class ComponentAccuracy(BaseModel):
    """Relative Frobenius errors; None where the method has no such component."""

    A: float
    E: float | None
    N: float | None

    model_config = {"frozen": True}


def _relative_error(truth: np.ndarray, estimate: np.ndarray, component: str) -> float:
    if truth.shape != estimate.shape:
        raise DimensionError(
            f"{component}: estimate shape {estimate.shape} != truth shape {truth.shape}"
        )
    denominator = float(np.linalg.norm(truth))
    if denominator == 0.0:
        raise ZeroDenominatorError(component)
    return float(np.linalg.norm(truth - estimate)) / denominator


def accuracy(
    truth: GroundTruth, estimate: Decomposition, method: MethodName | None = None
) -> ComponentAccuracy:
    """accuracy(C) = ||C - C_hat||_F / ||C||_F per component.

    PCA scores its residual R against both E and N; PCP has no noise
    estimate, so its N accuracy is not applicable.
    """
    method = method or estimate.method
    accuracy_A = _relative_error(truth.A, estimate.A, "A")
    if method == MethodName.PCA:
        if estimate.R is None:
            raise DimensionError("PCA estimate carries no residual R")
        return ComponentAccuracy(
            A=accuracy_A,
            E=_relative_error(truth.E, estimate.R, "E"),
            N=_relative_error(truth.N, estimate.R, "N"),
        )
    if estimate.E is None:
        raise DimensionError(f"{method.label} estimate carries no anomaly component")
    accuracy_E = _relative_error(truth.E, estimate.E, "E")
    if method == MethodName.PCP or estimate.N is None:
        return ComponentAccuracy(A=accuracy_A, E=accuracy_E, N=None)
    return ComponentAccuracy(
        A=accuracy_A, E=accuracy_E, N=_relative_error(truth.N, estimate.N, "N")
    )


class SampleRecord(BaseModel):
    """One method run on one simulated sample."""

    scenario: str
    alpha: float
    method: MethodName
    sample: int
    seed: int
    accuracy_A: float | None = None
    accuracy_E: float | None = None
    accuracy_N: float | None = None
    iterations: int = 0
    converged: bool = False
    error: str | None = None

    model_config = {"frozen": True}

    @property
    def ok(self) -> bool:
        return self.error is None


class ReportRow(BaseModel):
    """Mean and sample standard deviation over completed samples of one cell."""

    scenario: str
    alpha: float
    method: MethodName
    n_samples: int
    n_failed: int = 0
    accuracy_A: float | None = None
    accuracy_E: float | None = None
    accuracy_N: float | None = None
    std_A: float | None = None
    std_E: float | None = None
    std_N: float | None = None

    model_config = {"frozen": True}


class AccuracyReport(BaseModel):
    rows: list[ReportRow] = Field(default_factory=list)
    samples: list[SampleRecord] = Field(default_factory=list)

    model_config = {"frozen": True}

    def row(self, scenario: str, alpha: float, method: MethodName) -> ReportRow:
        for row in self.rows:
            if row.scenario == scenario and row.alpha == alpha and row.method == method:
                return row
        raise KeyError((scenario, alpha, method))

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame([row.model_dump() for row in self.rows])
        if not frame.empty:
            frame["method"] = [MethodName(m).label for m in frame["method"]]
        return frame

    def samples_frame(self) -> pd.DataFrame:
        """Long format: one row per (scenario, alpha, method, sample, component)."""
        records = []
        for sample in self.samples:
            for component in ("A", "E", "N"):
                records.append(
                    {
                        "scenario": sample.scenario,
                        "alpha": sample.alpha,
                        "method": sample.method.label,
                        "sample": sample.sample,
                        "seed": sample.seed,
                        "component": component,
                        "accuracy": getattr(sample, f"accuracy_{component}"),
                        "iterations": sample.iterations,
                        "converged": sample.converged,
                        "error": sample.error or "",
                    }
                )
        return pd.DataFrame(records)


def _aggregate(values: list[float | None]) -> tuple[float | None, float | None]:
    present = [v for v in values if v is not None]
    if not present:
        return None, None
    mean = statistics.fmean(present)
    std = statistics.stdev(present) if len(present) > 1 else 0.0
    return mean, std


def aggregate(samples: list[SampleRecord]) -> list[ReportRow]:
    """Reduce per-sample records into report rows, in first-seen cell order."""
    cells: dict[tuple[str, float, MethodName], list[SampleRecord]] = {}
    for sample in samples:
        cells.setdefault((sample.scenario, sample.alpha, sample.method), []).append(sample)
    rows = []
    for (scenario, alpha, method), records in cells.items():
        records = sorted(records, key=lambda r: r.sample)
        completed = [r for r in records if r.ok]
        mean_A, std_A = _aggregate([r.accuracy_A for r in completed])
        mean_E, std_E = _aggregate([r.accuracy_E for r in completed])
        mean_N, std_N = _aggregate([r.accuracy_N for r in completed])
        rows.append(
            ReportRow(
                scenario=scenario,
                alpha=alpha,
                method=method,
                n_samples=len(completed),
                n_failed=len(records) - len(completed),
                accuracy_A=mean_A,
                accuracy_E=mean_E,
                accuracy_N=mean_N,
                std_A=std_A,
                std_E=std_E,
                std_N=std_N,
            )
        )
    return rows


def run_sample(
    scenario: Scenario,
    sample: int,
    methods: list[MethodName],
    solvers: SolverSection,
    base_seed: int = 0,
) -> list[SampleRecord]:
    """Simulate sample ``sample`` of ``scenario`` and score every method on it."""
    seed = base_seed + sample
    cell = {"scenario": scenario.label, "alpha": scenario.noise_alpha, "sample": sample, "seed": seed}
    try:
        truth = generate(scenario.model_copy(update={"seed": seed}))
    except TrafficDecompositionError as exc:
        logger.warning("simulation failed for %s sample %d: %s", scenario.label, sample, exc)
        return [SampleRecord(**cell, method=method, error=str(exc)) for method in methods]

    records = []
    for method in methods:
        try:
            estimate, trace = decompose(truth.X, method, solvers)
            scores = accuracy(truth, estimate)
        except TrafficDecompositionError as exc:
            logger.warning(
                "%s failed on %s sample %d: %s", method.label, scenario.label, sample, exc
            )
            records.append(SampleRecord(**cell, method=method, error=str(exc)))
            continue
        records.append(
            SampleRecord(
                **cell,
                method=method,
                accuracy_A=scores.A,
                accuracy_E=scores.E,
                accuracy_N=scores.N,
                iterations=trace.iterations,
                converged=trace.converged,
            )
        )
    return records


def run_experiment(
    scenarios: list[Scenario],
    methods: list[MethodName],
    n_samples: int,
    solvers: SolverSection | None = None,
    base_seed: int = 0,
    jobs: int = 1,
) -> AccuracyReport:
    """Score ``methods`` on ``n_samples`` seeded samples of each scenario.

    Sample i of every scenario uses seed base_seed + i. Samples run in
    parallel across ``jobs`` workers; results are reduced in scenario, then
    sample order, so the report does not depend on ``jobs``.
    """
    if n_samples < 1:
        raise ValueError(f"n_samples must be >= 1, got {n_samples}")
    solvers = solvers or SolverSection()
    logger.info(
        "running %d scenarios x %d samples x %d methods on %d worker(s)",
        len(scenarios), n_samples, len(methods), jobs,
    )
    batches = Parallel(n_jobs=jobs)(
        delayed(run_sample)(scenario, sample, methods, solvers, base_seed)
        for scenario in scenarios
        for sample in range(n_samples)
    )
    samples = [record for batch in batches for record in batch]
    return AccuracyReport(rows=aggregate(samples), samples=samples)


def component_tables(report: AccuracyReport) -> dict[str, pd.DataFrame]:
    """One table per component, scenario rows, (alpha, method) columns."""
    frame = report.to_frame()
    tables = {}
    if frame.empty:
        return tables
    for component in ("A", "E", "N"):
        column = f"accuracy_{component}"
        frame[column] = pd.to_numeric(frame[column])
        table = frame.pivot_table(
            index="scenario",
            columns=["alpha", "method"],
            values=column,
            sort=False,
            dropna=False,
        )
        tables[component] = table
    return tables


def default_overlay_flows(truth: GroundTruth) -> list[int]:
    """Flows worth plotting: a shift's donor and recipient, else the first anomalous flow."""
    if truth.events:
        first = truth.events[0]
        return list(first.flows) if first.donor_flow is not None else [first.flows[0]]
    return [int(np.argmax(truth.means))]


def overlay_series(
    truth: GroundTruth,
    estimates: dict[MethodName, Decomposition],
    flows: list[int],
) -> pd.DataFrame:
    """Truth vs estimate time series per flow and component, long format."""
    scenario = truth.scenario
    frames = []
    for flow in flows:
        truth_parts = {"A": truth.A, "E": truth.E, "N": truth.N}
        sources: list[tuple[str, str, np.ndarray]] = [
            ("truth", name, matrix) for name, matrix in truth_parts.items()
        ]
        for method, estimate in estimates.items():
            for name, matrix in estimate.components().items():
                sources.append((method.label, name, matrix))
        for source, component, matrix in sources:
            frames.append(
                pd.DataFrame(
                    {
                        "scenario": scenario.label,
                        "alpha": scenario.noise_alpha,
                        "flow": flow,
                        "component": component,
                        "source": source,
                        "t": np.arange(matrix.shape[0]),
                        "value": matrix[:, flow],
                    }
                )
            )
    return pd.concat(frames, ignore_index=True)


def run_overlays(
    selections: list[OverlaySelection],
    methods: list[MethodName],
    base: Scenario | None = None,
    solvers: SolverSection | None = None,
    base_seed: int = 0,
) -> pd.DataFrame:
    """Overlay series for each configured (scenario, flow) pair."""
    solvers = solvers or SolverSection()
    frames = []
    for selection in selections:
        scenario = preset_scenario(
            selection.scenario, selection.alpha, base, seed=base_seed + selection.sample
        )
        truth = generate(scenario)
        estimates = {}
        for method in methods:
            try:
                estimates[method], _ = decompose(truth.X, method, solvers)
            except TrafficDecompositionError as exc:
                logger.warning("overlay %s skipped %s: %s", scenario.label, method.label, exc)
        flows = [selection.flow] if selection.flow is not None else default_overlay_flows(truth)
        frames.append(overlay_series(truth, estimates, flows))
    if not frames:
        return pd.DataFrame(
            columns=["scenario", "alpha", "flow", "component", "source", "t", "value"]
        )
    return pd.concat(frames, ignore_index=True)
