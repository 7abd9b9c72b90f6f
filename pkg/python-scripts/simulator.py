"""Ground-truth traffic-matrix simulator.

Builds X = A + E + N from gravity-model flow means, a five-sinusoid
deterministic trend, one anomaly type and Gaussian noise.
Flow p = i * n_nodes + j carries traffic from node i to node j.
"""

import logging
import math

import numpy as np

from errors import DataError, DimensionError, InfeasibleTopologyError
from traffic_models import (
    ANOMALY_SHAPES,
    DEFAULT_FREQUENCIES,
    AnomalyEvent,
    AnomalyShape,
    AnomalyType,
    GroundTruth,
    Scenario,
    ScenarioPreset,
)

logger = logging.getLogger(__name__)


def gravity_means(
    n_nodes: int,
    total: float,
    rng: np.random.Generator,
    weights: np.ndarray | None = None,
) -> np.ndarray:
    """Per-flow means proportional to w_i * w_j, summing to ``total``.

    Node weights are drawn i.i.d. exponential(1) unless given.
    """
    if n_nodes < 2:
        raise DataError(f"gravity model needs at least 2 nodes, got {n_nodes}")
    if weights is None:
        weights = rng.exponential(1.0, size=n_nodes)
    raw = np.outer(weights, weights).ravel()
    return raw * (total / raw.sum())


def deterministic_matrix(
    means: np.ndarray,
    T: int,
    rng: np.random.Generator,
    scale: float = 0.5,
    frequencies: tuple[int, ...] = DEFAULT_FREQUENCIES,
    phase_bound: float = math.pi / 5,
) -> np.ndarray:
    """Mean plus sinusoids at ``frequencies`` cycles per T, amplitudes halving.

    The first amplitude is ``scale`` times the flow mean; phases are uniform
    on [-phase_bound, phase_bound]. Negative entries are clamped to zero.
    """
    if T % 2:
        raise DataError(f"T={T} must be even")
    means = np.asarray(means, dtype=float)
    if np.any(means <= 0):
        raise DataError("flow means must be positive")
    t = np.arange(1, T + 1)[:, None]
    A = np.tile(means, (T, 1))
    amplitude = scale * means
    for cycles in frequencies:
        phases = rng.uniform(-phase_bound, phase_bound, size=means.size)
        A += amplitude * np.sin(2 * math.pi * cycles * t / T + phases)
        amplitude = amplitude / 2
    negative = int(np.count_nonzero(A < 0))
    if negative:
        logger.warning(
            "clamped %d negative deterministic entries to 0; rank may exceed %d",
            negative, 1 + 2 * len(frequencies),
        )
        A = np.maximum(A, 0.0)
    return A


def anomaly_shape(shape: AnomalyShape, duration: int) -> np.ndarray:
    """Shape function over ``duration`` periods, peaking at exactly 1."""
    if duration < 1:
        raise DataError(f"anomaly duration must be >= 1, got {duration}")
    index = np.arange(duration)
    match shape:
        case AnomalyShape.IMPULSE:
            profile = np.zeros(duration)
            profile[0] = 1.0
            return profile
        case AnomalyShape.STEP:
            return np.ones(duration)
        case AnomalyShape.SYMMETRIC_TRIANGLE:
            ramp = np.minimum(index + 1, duration - index).astype(float)
            return ramp / ramp.max()
        case AnomalyShape.ASYMMETRIC_TRIANGLE:
            # rise over the first third, decay over the remaining two thirds
            rise = max(1, math.ceil(duration / 3))
            up = (index[:rise] + 1) / rise
            down = (duration - index[rise:]) / (duration - rise + 1)
            return np.concatenate([up, down])
    raise DataError(f"unknown anomaly shape {shape!r}")


def _event_count(scenario: Scenario, T: int, P: int) -> int:
    if scenario.anomaly_type == AnomalyType.RANDOM_POINT:
        return math.floor((scenario.anomaly_ratio or 0.0) * T * P)
    return scenario.anomaly_count or 0


def inject_anomalies(
    scenario: Scenario,
    A: np.ndarray,
    means: np.ndarray,
    rng: np.random.Generator,
) -> tuple[np.ndarray, list[AnomalyEvent]]:
    """Anomaly matrix E and the events composing it."""
    T, P = A.shape
    n_nodes = math.isqrt(P)
    if n_nodes * n_nodes != P:
        raise DimensionError(f"P={P} flows is not a square node count")
    E = np.zeros_like(A)
    kind = scenario.anomaly_type
    if kind == AnomalyType.NONE:
        return E, []

    duration = scenario.duration_periods
    shape = ANOMALY_SHAPES[kind]
    profile = anomaly_shape(shape, duration)
    delta = scenario.anomaly_delta
    if kind in (AnomalyType.DDOS, AnomalyType.FLASH_CROWD) and scenario.fan_in > n_nodes - 1:
        raise InfeasibleTopologyError(
            f"{kind} needs {scenario.fan_in} sources but only {n_nodes - 1} "
            f"nodes differ from the destination"
        )
    if kind == AnomalyType.INGRESS_EGRESS_SHIFT and n_nodes < 2:
        raise InfeasibleTopologyError("shift needs two distinct sources and destinations")

    events: list[AnomalyEvent] = []
    for event_id in range(_event_count(scenario, T, P)):
        start = int(rng.integers(0, T - duration + 1))
        window = slice(start, start + duration)

        if kind == AnomalyType.INGRESS_EGRESS_SHIFT:
            sources = rng.choice(n_nodes, size=2, replace=False)
            destinations = rng.choice(n_nodes, size=2, replace=False)
            donor = int(sources[0] * n_nodes + destinations[0])
            recipient = int(sources[1] * n_nodes + destinations[1])
            moved = delta * A[window, donor]
            E[window, recipient] += moved
            E[window, donor] -= moved
            peak = float(np.max(moved))
            events.append(
                AnomalyEvent(
                    event_id=event_id,
                    anomaly_type=kind,
                    flows=[donor, recipient],
                    start=start,
                    duration=duration,
                    shape=shape,
                    peaks=[peak, peak],
                    delta=delta,
                    donor_flow=donor,
                )
            )
            continue

        if kind in (AnomalyType.DDOS, AnomalyType.FLASH_CROWD):
            destination = int(rng.integers(n_nodes))
            candidates = np.array([i for i in range(n_nodes) if i != destination])
            sources = rng.choice(candidates, size=scenario.fan_in, replace=False)
            flows = [int(source * n_nodes + destination) for source in sources]
        else:
            flows = [int(rng.integers(P))]

        peaks = [delta * float(means[flow]) for flow in flows]
        for flow, peak in zip(flows, peaks):
            E[window, flow] += peak * profile
        events.append(
            AnomalyEvent(
                event_id=event_id,
                anomaly_type=kind,
                flows=flows,
                start=start,
                duration=duration,
                shape=shape,
                peaks=peaks,
                delta=delta,
            )
        )
    return E, events


def noise_matrix(
    means: np.ndarray, alpha: float, T: int, rng: np.random.Generator
) -> np.ndarray:
    """White Gaussian noise with per-flow sigma_p = alpha * mean_p."""
    if alpha < 0:
        raise DataError(f"noise alpha must be >= 0, got {alpha}")
    sigmas = alpha * np.asarray(means, dtype=float)
    return rng.standard_normal((T, sigmas.size)) * sigmas


def generate(scenario: Scenario) -> GroundTruth:
    """Seeded ground truth; the same scenario always yields the same matrices.

    Each component draws from its own child stream of the scenario seed, so
    scenarios sharing a seed share flow means, trend and noise.
    """
    mean_rng, trend_rng, anomaly_rng, noise_rng = np.random.default_rng(
        scenario.seed
    ).spawn(4)
    means = gravity_means(scenario.n_nodes, scenario.total_traffic, mean_rng)
    A = deterministic_matrix(
        means,
        scenario.T,
        trend_rng,
        scale=scenario.sinusoid_scale,
        frequencies=scenario.frequencies,
        phase_bound=scenario.phase_bound,
    )
    E, events = inject_anomalies(scenario, A, means, anomaly_rng)
    N = noise_matrix(means, scenario.noise_alpha, scenario.T, noise_rng)
    X = A + E + N
    logger.info(
        "simulated %s: T=%d P=%d events=%d alpha=%g seed=%d",
        scenario.label, scenario.T, scenario.P, len(events), scenario.noise_alpha, scenario.seed,
    )
    return GroundTruth(
        scenario=scenario,
        A=A,
        E=E,
        N=N,
        X=X,
        events=events,
        means=means,
        sigmas=scenario.noise_alpha * means,
    )


# preset scenarios: anomaly type, count or ratio, fan-in
PRESET_SCENARIOS: dict[ScenarioPreset, dict] = {
    ScenarioPreset.RANDOM: {
        "name": "X_random",
        "anomaly_type": AnomalyType.RANDOM_POINT,
        "anomaly_ratio": 0.01,
    },
    ScenarioPreset.ALPHA: {
        "name": "X_alpha",
        "anomaly_type": AnomalyType.ALPHA,
        "anomaly_count": 500,
    },
    ScenarioPreset.DOS: {
        "name": "X_DoS",
        "anomaly_type": AnomalyType.DOS,
        "anomaly_count": 500,
    },
    ScenarioPreset.DDOS: {
        "name": "X_DDoS",
        "anomaly_type": AnomalyType.DDOS,
        "anomaly_count": 100,
        "fan_in": 5,
    },
    ScenarioPreset.FLASH: {
        "name": "X_flash",
        "anomaly_type": AnomalyType.FLASH_CROWD,
        "anomaly_count": 50,
        "fan_in": 3,
    },
    ScenarioPreset.SHIFT: {
        "name": "X_shift",
        "anomaly_type": AnomalyType.INGRESS_EGRESS_SHIFT,
        "anomaly_count": 10,
    },
}


def preset_scenario(
    preset: ScenarioPreset,
    alpha: float,
    base: Scenario | None = None,
    seed: int | None = None,
) -> Scenario:
    """One preset scenario (delta = 0.5) on top of ``base``'s network parameters."""
    base = base or Scenario()
    fields = base.model_dump(
        exclude={"name", "anomaly_type", "anomaly_count", "anomaly_ratio", "fan_in"}
    )
    fields.update(PRESET_SCENARIOS[preset])
    fields["anomaly_delta"] = 0.5
    fields["noise_alpha"] = alpha
    if seed is not None:
        fields["seed"] = seed
    return Scenario.model_validate(fields)


def preset_scenarios(alpha: float, base: Scenario | None = None) -> list[Scenario]:
    """All six preset scenarios at noise level ``alpha``."""
    return [preset_scenario(preset, alpha, base) for preset in ScenarioPreset]
