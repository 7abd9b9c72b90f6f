"""Pydantic models for traffic-matrix decomposition."""

import math
from enum import StrEnum
from pathlib import Path
from typing import Any, Self

import numpy as np
import pywt
from pydantic import BaseModel, ConfigDict, Field, model_validator

# Row = time period, column = OD flow.
TrafficMatrix = np.ndarray


class WaveletFamily(StrEnum):
    """Orthogonal wavelet families offered by the transform layer."""

    HAAR = "haar"
    DB2 = "db2"
    DB3 = "db3"
    DB4 = "db4"
    DB6 = "db6"
    DB8 = "db8"
    SYM4 = "sym4"
    SYM8 = "sym8"
    COIF2 = "coif2"


class BoundaryRule(StrEnum):
    PERIODIC = "periodic"


class WaveletSpec(BaseModel):
    """Orthogonal filter pair plus the boundary rule and depth limit.

    Filters default to pywt's analysis bank for ``family``. Explicit filters
    are accepted but must form an orthonormal quadrature-mirror pair.
    """

    family: WaveletFamily = WaveletFamily.DB4
    dec_lo: tuple[float, ...] = ()
    dec_hi: tuple[float, ...] = ()
    boundary: BoundaryRule = BoundaryRule.PERIODIC
    max_levels: int = Field(default=5, ge=1)

    model_config = ConfigDict(frozen=True, extra="forbid")

    @model_validator(mode="before")
    @classmethod
    def _fill_filters(cls, data: Any) -> Any:
        if isinstance(data, dict) and not data.get("dec_lo"):
            family = WaveletFamily(data.get("family", WaveletFamily.DB4))
            wavelet = pywt.Wavelet(family.value)
            data = {
                **data,
                "dec_lo": tuple(wavelet.dec_lo),
                "dec_hi": tuple(wavelet.dec_hi),
            }
        return data

    @model_validator(mode="after")
    def _check_orthonormal(self) -> Self:
        lo = np.asarray(self.dec_lo)
        hi = np.asarray(self.dec_hi)
        if lo.size < 2 or lo.size % 2 or lo.size != hi.size:
            raise ValueError("filters must be of equal, even length")
        # quadrature mirror: hi[k] = (-1)^(k+1) lo[L-1-k]
        signs = np.where(np.arange(lo.size) % 2 == 0, -1.0, 1.0)
        if not np.allclose(hi, signs * lo[::-1], atol=1e-10):
            raise ValueError("high-pass filter is not the quadrature mirror of low-pass")
        # orthonormality: lo is orthogonal to its even shifts
        for shift in range(0, lo.size, 2):
            inner = float(np.dot(lo[shift:], lo[: lo.size - shift]))
            expected = 1.0 if shift == 0 else 0.0
            if abs(inner - expected) > 1e-10:
                raise ValueError(
                    f"low-pass filter is not orthonormal at shift {shift}: {inner:.3e}"
                )
        return self

    @property
    def filter_length(self) -> int:
        return len(self.dec_lo)

    @property
    def vanishing_moments(self) -> int:
        return int(pywt.Wavelet(self.family.value).vanishing_moments_psi or 1)

    def pywt_wavelet(self) -> pywt.Wavelet:
        """Filter bank object for pywt, synthesis filters as time reversals."""
        dec_lo = list(self.dec_lo)
        dec_hi = list(self.dec_hi)
        return pywt.Wavelet(
            self.family.value,
            filter_bank=(dec_lo, dec_hi, dec_lo[::-1], dec_hi[::-1]),
        )


class MultiResolutionCoefficients(BaseModel):
    """Level-J pyramid: approximation at J, details from level J down to 1.

    Arrays are indexed by time along axis 0; a trailing axis holds flows
    when a whole matrix was analysed at once.
    """

    approx: np.ndarray
    details: list[np.ndarray]
    original_length: int = Field(ge=1)

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    @model_validator(mode="after")
    def _check_lengths(self) -> Self:
        levels = len(self.details)
        if levels < 1:
            raise ValueError("at least one detail level is required")
        total = self.original_length
        if total % 2**levels:
            raise ValueError(
                f"original_length {total} not divisible by 2^{levels}"
            )
        if self.approx.shape[0] != total // 2**levels:
            raise ValueError(
                f"approx length {self.approx.shape[0]} != {total // 2**levels}"
            )
        for position, detail in enumerate(self.details):
            level = levels - position
            if detail.shape[0] != total // 2**level:
                raise ValueError(
                    f"detail level {level} length {detail.shape[0]} != {total // 2**level}"
                )
        return self

    @property
    def levels(self) -> int:
        return len(self.details)

    def detail(self, level: int) -> np.ndarray:
        """Detail coefficients at ``level`` (1 = finest)."""
        return self.details[self.levels - level]

    def as_list(self) -> list[np.ndarray]:
        """pywt ordering: [cA_J, cD_J, ..., cD_1]."""
        return [self.approx, *self.details]

    def flat(self) -> np.ndarray:
        return np.concatenate(self.as_list(), axis=0)


class NoiseScale(BaseModel):
    """Per-flow noise scale σ_p and the box half-width multiplier δ.

    Box(δ) clamps every wavelet coefficient of flow p to [-δσ_p, δσ_p].
    """

    sigma: np.ndarray
    delta: float = Field(default=1.96, gt=0)

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    @model_validator(mode="after")
    def _check_sigma(self) -> Self:
        if self.sigma.ndim != 1:
            raise ValueError("sigma must be a vector with one entry per flow")
        if not np.all(np.isfinite(self.sigma)) or np.any(self.sigma < 0):
            raise ValueError("sigma entries must be finite and nonnegative")
        return self

    @property
    def half_widths(self) -> np.ndarray:
        return self.delta * self.sigma


class SvdFactors(BaseModel):
    """Thin SVD M = U diag(S) V^T with S nonincreasing."""

    U: np.ndarray
    S: np.ndarray
    V: np.ndarray

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    @property
    def rank(self) -> int:
        if self.S.size == 0 or self.S[0] == 0:
            return 0
        return int(np.count_nonzero(self.S > 1e-8 * self.S[0]))

    def reconstruct(self) -> np.ndarray:
        return (self.U * self.S) @ self.V.T


class MethodName(StrEnum):
    """Decomposition methods compared in the experiments."""

    PCA = "pca"
    PCP = "pcp"
    SPCP = "spcp"
    SPCP_MRC = "spcp_mrc"

    @property
    def label(self) -> str:
        return {
            MethodName.PCA: "PCA",
            MethodName.PCP: "PCP",
            MethodName.SPCP: "SPCP",
            MethodName.SPCP_MRC: "SPCP-MRC",
        }[self]


class SolverConfig(BaseModel):
    """Parameters of the APG decomposition with continuation.

    ``lambda`` left unset resolves to 1/sqrt(max(T, P)); ``box_depth`` left
    unset resolves to ``q``; ``mu_final`` is only read by SPCP.
    """

    lambda_: float | None = Field(default=None, alias="lambda", gt=0)
    delta: float = Field(default=1.96, gt=0)
    q: int = Field(default=3, ge=1)
    box_depth: int | None = Field(default=None, ge=1)
    wavelet: WaveletSpec = Field(default_factory=WaveletSpec)
    eta: float = Field(default=0.9, gt=0, lt=1)
    mu0_factor: float = Field(default=0.99, gt=0)
    mu_floor_factor: float = Field(default=1e-5, gt=0, le=1)
    mu_final: float | None = Field(default=None, gt=0)
    max_iters: int = Field(default=1000, ge=1)
    tol: float = Field(default=1e-6, gt=0)
    check_invariants: bool = False

    model_config = ConfigDict(frozen=True, extra="forbid", populate_by_name=True)

    @model_validator(mode="after")
    def _check_depths(self) -> Self:
        if self.q > self.wavelet.max_levels:
            raise ValueError(
                f"q={self.q} exceeds wavelet.max_levels={self.wavelet.max_levels}"
            )
        if self.resolved_box_depth > self.wavelet.max_levels:
            raise ValueError(
                f"box_depth={self.resolved_box_depth} exceeds "
                f"wavelet.max_levels={self.wavelet.max_levels}"
            )
        return self

    @property
    def resolved_box_depth(self) -> int:
        return self.box_depth if self.box_depth is not None else self.q

    @property
    def required_divisor(self) -> int:
        return 2 ** max(self.q, self.resolved_box_depth)


class PcaConfig(BaseModel):
    rank: int = Field(default=11, ge=1)

    model_config = ConfigDict(frozen=True, extra="forbid")


class Decomposition(BaseModel):
    """Estimated components of X = A + E + N.

    PCA fills ``A`` and the residual ``R``; PCP fills ``A`` and ``E``;
    SPCP and SPCP-MRC fill ``A``, ``E`` and ``N``.
    """

    method: MethodName
    A: np.ndarray
    E: np.ndarray | None = None
    N: np.ndarray | None = None
    R: np.ndarray | None = None

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    def components(self) -> dict[str, np.ndarray]:
        named = {"A": self.A, "E": self.E, "N": self.N, "R": self.R}
        return {name: value for name, value in named.items() if value is not None}

    def reconstruction(self) -> np.ndarray:
        if self.R is not None:
            return self.A + self.R
        total = self.A.copy()
        for part in (self.E, self.N):
            if part is not None:
                total = total + part
        return total


class IterationRecord(BaseModel):
    """One completed APG iteration."""

    iteration: int
    objective: float
    residual: float
    mu: float
    rank: int
    nnz: int

    model_config = {"frozen": True}


class SolverTrace(BaseModel):
    method: MethodName
    records: list[IterationRecord] = Field(default_factory=list)
    converged: bool = False
    mu_floor: float = 0.0

    model_config = {"frozen": True}

    @property
    def iterations(self) -> int:
        return len(self.records)

    @property
    def final_residual(self) -> float:
        return self.records[-1].residual if self.records else 0.0


class AnomalyType(StrEnum):
    """Injected anomaly types (NONE for anomaly-free traffic)."""

    RANDOM_POINT = "random_point"
    ALPHA = "alpha"
    DOS = "dos"
    DDOS = "ddos"
    FLASH_CROWD = "flash_crowd"
    INGRESS_EGRESS_SHIFT = "ingress_egress_shift"
    NONE = "none"


class AnomalyShape(StrEnum):
    IMPULSE = "impulse"
    STEP = "step"
    SYMMETRIC_TRIANGLE = "symmetric_triangle"
    ASYMMETRIC_TRIANGLE = "asymmetric_triangle"


# duration (minutes) and shape per anomaly type
ANOMALY_DURATION_MINUTES: dict[AnomalyType, int] = {
    AnomalyType.RANDOM_POINT: 5,
    AnomalyType.ALPHA: 30,
    AnomalyType.DOS: 30,
    AnomalyType.DDOS: 30,
    AnomalyType.FLASH_CROWD: 150,
    AnomalyType.INGRESS_EGRESS_SHIFT: 600,
}

ANOMALY_SHAPES: dict[AnomalyType, AnomalyShape] = {
    AnomalyType.RANDOM_POINT: AnomalyShape.IMPULSE,
    AnomalyType.ALPHA: AnomalyShape.STEP,
    AnomalyType.DOS: AnomalyShape.SYMMETRIC_TRIANGLE,
    AnomalyType.DDOS: AnomalyShape.SYMMETRIC_TRIANGLE,
    AnomalyType.FLASH_CROWD: AnomalyShape.ASYMMETRIC_TRIANGLE,
    AnomalyType.INGRESS_EGRESS_SHIFT: AnomalyShape.STEP,
}

DEFAULT_FREQUENCIES: tuple[int, ...] = (7, 14, 28, 56, 112)


class Scenario(BaseModel):
    """Simulation parameters for one synthetic traffic matrix."""

    name: str | None = None
    n_nodes: int = Field(default=12, ge=2)
    T: int = Field(default=2016, ge=2)
    dt_minutes: float = Field(default=5.0, gt=0)
    total_traffic: float = Field(default=1e6, gt=0)
    anomaly_type: AnomalyType = AnomalyType.NONE
    anomaly_delta: float = Field(default=0.5, gt=0)
    anomaly_count: int | None = Field(default=None, ge=0)
    anomaly_ratio: float | None = Field(default=None, ge=0, le=1)
    fan_in: int = Field(default=1, ge=1)
    noise_alpha: float = Field(default=0.05, ge=0)
    sinusoid_scale: float = Field(default=0.5, ge=0)
    frequencies: tuple[int, ...] = DEFAULT_FREQUENCIES
    phase_bound: float = Field(default=math.pi / 5, ge=0)
    seed: int = 0

    model_config = ConfigDict(frozen=True, extra="forbid")

    @model_validator(mode="after")
    def _check_consistency(self) -> Self:
        if self.T % 2:
            raise ValueError(f"T={self.T} must be even")
        kind = self.anomaly_type
        if kind == AnomalyType.RANDOM_POINT and self.anomaly_ratio is None:
            raise ValueError("random_point scenarios need anomaly_ratio")
        if kind not in (AnomalyType.NONE, AnomalyType.RANDOM_POINT):
            if self.anomaly_count is None:
                raise ValueError(f"{kind} scenarios need anomaly_count")
            if self.duration_periods > self.T:
                raise ValueError(
                    f"{kind} duration {self.duration_periods} exceeds T={self.T}"
                )
        if kind in (AnomalyType.DDOS, AnomalyType.FLASH_CROWD):
            if self.fan_in > self.n_nodes - 1:
                raise ValueError(
                    f"fan_in={self.fan_in} exceeds n_nodes - 1 = {self.n_nodes - 1}"
                )
        return self

    @property
    def P(self) -> int:
        return self.n_nodes**2

    @property
    def duration_periods(self) -> int:
        if self.anomaly_type == AnomalyType.NONE:
            return 0
        minutes = ANOMALY_DURATION_MINUTES[self.anomaly_type]
        return max(1, round(minutes / self.dt_minutes))

    @property
    def label(self) -> str:
        if self.name:
            return self.name
        return f"X_{self.anomaly_type}"


class AnomalyEvent(BaseModel):
    """One injected anomaly.

    Shift events list the donor flow first and the recipient second; ``peaks``
    holds the positive magnitude moved per flow (the donor loses it).
    """

    event_id: int
    anomaly_type: AnomalyType
    flows: list[int]
    start: int = Field(ge=0)
    duration: int = Field(ge=1)
    shape: AnomalyShape
    peaks: list[float]
    delta: float
    donor_flow: int | None = None

    model_config = {"frozen": True}

    @model_validator(mode="after")
    def _check_event(self) -> Self:
        if not self.flows or len(self.peaks) != len(self.flows):
            raise ValueError("one peak per affected flow is required")
        if any(peak <= 0 for peak in self.peaks):
            raise ValueError("peaks must be positive")
        if self.donor_flow is not None and self.donor_flow not in self.flows:
            raise ValueError("donor_flow must be one of flows")
        return self

    @property
    def end(self) -> int:
        return self.start + self.duration


class GroundTruth(BaseModel):
    """Labeled simulated traffic matrix; X = A + E + N."""

    scenario: Scenario
    A: np.ndarray
    E: np.ndarray
    N: np.ndarray
    X: np.ndarray
    events: list[AnomalyEvent]
    means: np.ndarray
    sigmas: np.ndarray

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)


class ScenarioPreset(StrEnum):
    """Standard anomaly scenarios, one per anomaly type."""

    RANDOM = "random"
    ALPHA = "alpha"
    DOS = "dos"
    DDOS = "ddos"
    FLASH = "flash"
    SHIFT = "shift"


class OverlaySelection(BaseModel):
    """A (scenario, flow) pair to export as truth-vs-estimate time series.

    ``flow`` left unset picks the first flow touched by an anomaly, or the
    heaviest flow when the scenario has none.
    """

    scenario: ScenarioPreset
    alpha: float = 0.05
    flow: int | None = Field(default=None, ge=0)
    sample: int = Field(default=0, ge=0)

    model_config = ConfigDict(frozen=True, extra="forbid")


class SolverSection(BaseModel):
    spcp_mrc: SolverConfig = Field(default_factory=SolverConfig)
    pcp: SolverConfig = Field(default_factory=SolverConfig)
    spcp: SolverConfig = Field(default_factory=SolverConfig)
    pca: PcaConfig = Field(default_factory=PcaConfig)

    model_config = ConfigDict(frozen=True, extra="forbid")


class ExperimentSection(BaseModel):
    methods: list[MethodName] = Field(default_factory=lambda: list(MethodName))
    scenarios: list[ScenarioPreset] = Field(default_factory=lambda: list(ScenarioPreset))
    alphas: list[float] = Field(default_factory=lambda: [0.05, 0.1])
    n_samples: int = Field(default=50, ge=1)
    base_seed: int = 0
    jobs: int = Field(default=1, ge=1)
    overlays: list[OverlaySelection] = Field(default_factory=list)

    model_config = ConfigDict(frozen=True, extra="forbid")


class IoSection(BaseModel):
    out_dir: Path = Path("out")
    float_format: str = "%.17g"

    model_config = ConfigDict(frozen=True, extra="forbid")


class RunConfig(BaseModel):
    """Complete configuration document for the command-line tools."""

    scenario: Scenario = Field(default_factory=Scenario)
    solver: SolverSection = Field(default_factory=SolverSection)
    experiment: ExperimentSection = Field(default_factory=ExperimentSection)
    io: IoSection = Field(default_factory=IoSection)

    model_config = ConfigDict(frozen=True, extra="forbid")

    @model_validator(mode="after")
    def _check_period_count(self) -> Self:
        divisor = self.solver.spcp_mrc.required_divisor
        if self.scenario.T % divisor:
            raise ValueError(
                f"scenario.T={self.scenario.T} must be divisible by {divisor} "
                f"(2^max(q, box_depth) of solver.spcp_mrc)"
            )
        return self


DEFAULT_RUN_CONFIG = RunConfig()
