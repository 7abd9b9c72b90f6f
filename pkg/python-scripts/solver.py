"""SPCP-MRC decomposition by accelerated proximal gradient, plus baselines.

All three convex methods share one APG skeleton with continuation: blocks
are updated by their proximal maps from a common gradient point, the step is
1/L with L the number of blocks, and the relaxation parameter decays
geometrically from mu_0 = 0.99 ||X||_2 to its floor.
"""

import logging
import math
from collections.abc import Callable
from typing import NamedTuple

import numpy as np
from pydantic import BaseModel

from errors import (
    ConfigError,
    DimensionError,
    InvariantViolationError,
    LengthNotDivisibleError,
    NonFiniteInputError,
)
from operators import (
    constrained_svt_factors,
    in_box,
    project_box,
    shrink_singular_values,
    soft_threshold,
    thin_svd,
)
from traffic_models import (
    Decomposition,
    IterationRecord,
    MethodName,
    NoiseScale,
    SolverConfig,
    SolverSection,
    SolverTrace,
)
from wavelet import detail_energy, dwt_forward, estimate_noise_scale

logger = logging.getLogger(__name__)


def default_lambda(T: int, P: int) -> float:
    """Sparsity weight 1/sqrt(max(T, P))."""
    return 1.0 / math.sqrt(max(T, P))


def spectral_norm(
    X: np.ndarray, tol: float = 1e-6, max_iters: int = 1000
) -> float:
    """Largest singular value by power iteration on X^T X from the all-ones vector."""
    X = np.asarray(X, dtype=float)
    if not np.any(X):
        return 0.0
    v = np.ones(X.shape[1]) / math.sqrt(X.shape[1])
    sigma = 0.0
    for _ in range(max_iters):
        w = X.T @ (X @ v)
        norm_w = float(np.linalg.norm(w))
        if norm_w == 0.0:
            # start vector orthogonal to the row space
            return float(thin_svd(X).S[0])
        v = w / norm_w
        estimate = math.sqrt(norm_w)
        if abs(estimate - sigma) <= tol * estimate:
            return estimate
        sigma = estimate
    logger.warning("power iteration stopped at %d iterations without reaching %g", max_iters, tol)
    return sigma


class _BlockUpdate(NamedTuple):
    value: np.ndarray
    penalty: float  # this block's share of g at the new value
    rank: int = 0
    nnz: int = 0


ProxStep = Callable[[np.ndarray, float], _BlockUpdate]


def _check_input(X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise DimensionError(f"traffic matrix must be 2-D, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        bad = np.argwhere(~np.isfinite(X))[0]
        raise NonFiniteInputError(
            f"traffic matrix has a non-finite value at row {bad[0]}, column {bad[1]}"
        )
    return X


def _run_apg(
    X: np.ndarray,
    steps: list[ProxStep],
    mu0: float,
    mu_floor: float,
    config: SolverConfig,
    method: MethodName,
    check: Callable[[list[np.ndarray]], None] | None = None,
) -> tuple[list[np.ndarray], SolverTrace]:
    lipschitz = float(len(steps))
    current = [np.zeros_like(X) for _ in steps]
    previous = [np.zeros_like(X) for _ in steps]
    t_prev = t = 1.0
    records: list[IterationRecord] = []
    converged = False
    x_norm = float(np.linalg.norm(X)) or 1.0

    for k in range(config.max_iters):
        mu = max(mu0 * config.eta**k, mu_floor)
        momentum = (t_prev - 1.0) / t
        points = [c + momentum * (c - p) for c, p in zip(current, previous)]
        gradient = sum(points) - X
        updates = [
            step(point - gradient / lipschitz, mu / lipschitz)
            for step, point in zip(steps, points)
        ]
        updated = [u.value for u in updates]

        change = math.sqrt(sum(float(np.sum((n - c) ** 2)) for n, c in zip(updated, current)))
        scale = math.sqrt(sum(float(np.sum(c**2)) for c in current))
        relative_change = change / max(1.0, scale)

        residual_matrix = sum(updated) - X
        objective = mu * sum(u.penalty for u in updates) + 0.5 * float(
            np.sum(residual_matrix**2)
        )
        record = IterationRecord(
            iteration=k,
            objective=objective,
            residual=float(np.linalg.norm(residual_matrix)) / x_norm,
            mu=mu,
            rank=updates[0].rank,
            nnz=sum(u.nnz for u in updates[1:]),
        )
        records.append(record)
        logger.debug(
            "%s iter %d: F=%.6e residual=%.3e mu=%.3e rank=%d nnz=%d",
            method, k, record.objective, record.residual, mu, record.rank, record.nnz,
        )

        previous, current = current, updated
        t_prev, t = t, (1.0 + math.sqrt(4.0 * t * t + 1.0)) / 2.0
        if check is not None:
            if t < (k + 3) / 2.0:
                raise InvariantViolationError(f"momentum t_{k + 1}={t} below (k+3)/2")
            check(current)

        if relative_change < config.tol and mu <= mu_floor:
            converged = True
            break

    if converged:
        logger.info(
            "%s converged after %d iterations (residual %.3e)",
            method.label, len(records), records[-1].residual,
        )
    else:
        logger.warning(
            "%s reached max_iters=%d without converging (residual %.3e)",
            method.label, config.max_iters, records[-1].residual,
        )
    trace = SolverTrace(
        method=method, records=records, converged=converged, mu_floor=mu_floor
    )
    return current, trace


def _sparse_step(weight: float) -> ProxStep:
    def step(point: np.ndarray, threshold: float) -> _BlockUpdate:
        value = soft_threshold(point, weight * threshold)
        return _BlockUpdate(
            value=value,
            penalty=weight * float(np.sum(np.abs(value))),
            nnz=int(np.count_nonzero(value)),
        )

    return step


def _low_rank_step(point: np.ndarray, threshold: float) -> _BlockUpdate:
    factors = shrink_singular_values(point, threshold)
    return _BlockUpdate(
        value=factors.reconstruct(), penalty=float(np.sum(factors.S)), rank=factors.rank
    )


def _smooth_low_rank_step(config: SolverConfig) -> ProxStep:
    def step(point: np.ndarray, threshold: float) -> _BlockUpdate:
        factors = constrained_svt_factors(point, threshold, config.wavelet, config.q)
        return _BlockUpdate(
            value=factors.reconstruct(),
            penalty=float(np.sum(factors.S)),
            rank=factors.rank,
        )

    return step


def _box_step(scale: NoiseScale, config: SolverConfig) -> ProxStep:
    def step(point: np.ndarray, threshold: float) -> _BlockUpdate:
        value = project_box(point, scale, config.wavelet, config.resolved_box_depth)
        return _BlockUpdate(value=value, penalty=0.0)

    return step


def _continuation_start(X: np.ndarray, config: SolverConfig) -> tuple[float, float]:
    mu0 = config.mu0_factor * spectral_norm(X)
    return mu0, config.mu_floor_factor * mu0


def _smooth_invariant(A: np.ndarray, config: SolverConfig, rtol: float) -> None:
    energy = detail_energy(A, config.wavelet, config.q)
    bound = rtol * max(float(np.linalg.norm(A)), np.finfo(float).tiny)
    if math.sqrt(energy) > bound:
        raise InvariantViolationError(
            f"A has detail energy {math.sqrt(energy):.3e} outside V_q (bound {bound:.3e})"
        )


def decompose_spcp_mrc(
    X: np.ndarray, config: SolverConfig | None = None
) -> tuple[Decomposition, SolverTrace]:
    """SPCP with multiresolution constraints: A in V_q, N in Box(delta)."""
    config = config or SolverConfig()
    X = _check_input(X)
    T, P = X.shape
    depth = max(config.q, config.resolved_box_depth)
    if T % 2**depth:
        raise LengthNotDivisibleError(T, depth)
    if P < 2:
        raise DimensionError(f"SPCP-MRC needs at least 2 flows, got P={P}")

    lam = config.lambda_ if config.lambda_ is not None else default_lambda(T, P)
    scale = estimate_noise_scale(X, config.wavelet, config.delta)
    mu0, mu_floor = _continuation_start(X, config)
    logger.info(
        "SPCP-MRC on %dx%d: lambda=%.4g q=%d box_depth=%d mu0=%.4g",
        T, P, lam, config.q, config.resolved_box_depth, mu0,
    )

    def check(blocks: list[np.ndarray]) -> None:
        _smooth_invariant(blocks[0], config, rtol=1e-8)
        if not in_box(blocks[2], scale, config.wavelet, config.resolved_box_depth):
            raise InvariantViolationError("N left Box(delta)")

    (A, E, N), trace = _run_apg(
        X,
        [_smooth_low_rank_step(config), _sparse_step(lam), _box_step(scale, config)],
        mu0,
        mu_floor,
        config,
        MethodName.SPCP_MRC,
        check=check if config.check_invariants else None,
    )
    # release-mode check at exit, per-entry scale tolerance
    coeffs = dwt_forward(A, config.wavelet, config.q)
    worst = max((float(np.max(np.abs(d), initial=0.0)) for d in coeffs.details), default=0.0)
    if worst > 1e-6 * float(np.linalg.norm(A)) / math.sqrt(T * P):
        raise InvariantViolationError(
            f"A has detail coefficient {worst:.3e} outside V_q at exit"
        )
    return Decomposition(method=MethodName.SPCP_MRC, A=A, E=E, N=N), trace


def decompose_pca(X: np.ndarray, k: int = 11) -> Decomposition:
    """Rank-k truncated SVD of X (uncentered); the residual R holds E + N."""
    X = _check_input(X)
    if not 1 <= k <= min(X.shape):
        raise ConfigError(f"rank k={k} outside [1, {min(X.shape)}]", key_path="solver.pca.rank")
    factors = thin_svd(X)
    A = (factors.U[:, :k] * factors.S[:k]) @ factors.V[:, :k].T
    return Decomposition(method=MethodName.PCA, A=A, R=X - A)


def decompose_pcp(
    X: np.ndarray, lam: float | None = None, config: SolverConfig | None = None
) -> tuple[Decomposition, SolverTrace]:
    """Principal component pursuit, X = A + E, by the same APG skeleton."""
    config = config or SolverConfig()
    X = _check_input(X)
    lam = lam if lam is not None else default_lambda(*X.shape)
    mu0, mu_floor = _continuation_start(X, config)
    (A, E), trace = _run_apg(
        X, [_low_rank_step, _sparse_step(lam)], mu0, mu_floor, config, MethodName.PCP
    )
    return Decomposition(method=MethodName.PCP, A=A, E=E), trace


def spcp_final_mu(X: np.ndarray, config: SolverConfig) -> float:
    """Final penalty sqrt(2 max(T, P)) * median(sigma_p) matching the noise energy."""
    if config.mu_final is not None:
        return config.mu_final
    scale = estimate_noise_scale(X, config.wavelet, config.delta)
    return math.sqrt(2.0 * max(X.shape)) * float(np.median(scale.sigma))


def decompose_spcp(
    X: np.ndarray, lam: float | None = None, config: SolverConfig | None = None
) -> tuple[Decomposition, SolverTrace]:
    """Stable PCP in penalized form; N = X - A - E."""
    config = config or SolverConfig()
    X = _check_input(X)
    lam = lam if lam is not None else default_lambda(*X.shape)
    mu0, _ = _continuation_start(X, config)
    mu_floor = min(spcp_final_mu(X, config), mu0)
    (A, E), trace = _run_apg(
        X, [_low_rank_step, _sparse_step(lam)], mu0, mu_floor, config, MethodName.SPCP
    )
    return Decomposition(method=MethodName.SPCP, A=A, E=E, N=X - A - E), trace


def decompose(
    X: np.ndarray, method: MethodName, solvers: SolverSection | None = None
) -> tuple[Decomposition, SolverTrace]:
    """Run ``method`` with its section of the solver configuration."""
    solvers = solvers or SolverSection()
    match method:
        case MethodName.PCA:
            result = decompose_pca(X, solvers.pca.rank)
            return result, SolverTrace(method=method, converged=True)
        case MethodName.PCP:
            return decompose_pcp(X, solvers.pcp.lambda_, solvers.pcp)
        case MethodName.SPCP:
            return decompose_spcp(X, solvers.spcp.lambda_, solvers.spcp)
        case MethodName.SPCP_MRC:
            return decompose_spcp_mrc(X, solvers.spcp_mrc)
    raise ConfigError(f"unknown method {method!r}", key_path="method")


class EnvelopeFit(BaseModel):
    """Post-continuation objective gap F_k - F* against C / (k - k0 + 1)^2.

    ``constant`` is the smallest C covering every iteration at the mu floor;
    ``bound`` is 2 L ||X_k0 - X*||_F^2 when the distance to the optimum is known.
    """

    k0: int
    constant: float
    bound: float | None
    f_star: float
    violations: list[int]

    model_config = {"frozen": True}

    @property
    def within_bound(self) -> bool:
        return self.bound is not None and not self.violations


_BLOCKS = {MethodName.PCP: 2, MethodName.SPCP: 2, MethodName.SPCP_MRC: 3}


def rate_envelope(
    trace: SolverTrace, f_star: float | None = None, distance_sq: float | None = None
) -> EnvelopeFit:
    """Check the O(1/k^2) objective envelope once mu has reached its floor.

    ``distance_sq`` is ||X_k0 - X*||_F^2 summed over blocks, with X_k0 the
    iterate entering the first floor iteration. Iterations whose gap exceeds
    2 L distance_sq / (k - k0 + 1)^2 are listed as violations.
    """
    if trace.method not in _BLOCKS:
        raise ConfigError(f"{trace.method.label} has no APG trace", key_path="method")
    floor_iters = [r for r in trace.records if r.mu <= trace.mu_floor]
    if not floor_iters:
        raise ConfigError("no iterations reached the mu floor; raise max_iters")
    k0 = floor_iters[0].iteration
    if f_star is None:
        f_star = min(r.objective for r in floor_iters)
    slack = 1e-12 * max(1.0, abs(f_star))

    def gap(record: IterationRecord) -> float:
        return max(record.objective - f_star, 0.0)

    constant = max(gap(r) * (r.iteration - k0 + 1) ** 2 for r in floor_iters)
    bound = None if distance_sq is None else 2.0 * _BLOCKS[trace.method] * distance_sq
    violations = (
        []
        if bound is None
        else [
            r.iteration
            for r in floor_iters
            if gap(r) > bound / (r.iteration - k0 + 1) ** 2 + slack
        ]
    )
    return EnvelopeFit(
        k0=k0, constant=constant, bound=bound, f_star=f_star, violations=violations
    )
