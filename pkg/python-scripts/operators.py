"""Proximal operators used by the APG iterations."""

import numpy as np
import scipy.linalg

from errors import DataError, DimensionError, SvdFailureError
from traffic_models import MultiResolutionCoefficients, NoiseScale, SvdFactors, WaveletSpec
from wavelet import dwt_forward, dwt_inverse, project_smooth

# singular values at or below this fraction of the largest do not count toward rank
RANK_TOLERANCE = 1e-8


def _check_threshold(value: float, name: str) -> None:
    if value < 0 or not np.isfinite(value):
        raise DataError(f"{name} must be a finite nonnegative number, got {value}")


def soft_threshold(M: np.ndarray, eps: float) -> np.ndarray:
    """Entrywise shrinkage sign(m) * max(|m| - eps, 0); prox of eps * ||.||_1."""
    _check_threshold(eps, "eps")
    M = np.asarray(M, dtype=float)
    if eps == 0:
        return M.copy()
    return np.sign(M) * np.maximum(np.abs(M) - eps, 0.0)


def thin_svd(M: np.ndarray) -> SvdFactors:
    """Thin SVD, r = min(T, P), singular values nonincreasing.

    Falls back from LAPACK gesdd to the slower but more robust gesvd.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise DimensionError(f"expected a matrix, got shape {M.shape}")
    reason = ""
    for driver in ("gesdd", "gesvd"):
        try:
            U, S, Vt = scipy.linalg.svd(M, full_matrices=False, lapack_driver=driver)
        except (np.linalg.LinAlgError, ValueError) as exc:
            reason = f"{driver}: {exc}"
            continue
        return SvdFactors(U=U, S=S, V=Vt.T)
    raise SvdFailureError(M.shape, reason)


def shrink_singular_values(M: np.ndarray, tau: float) -> SvdFactors:
    """Factors of svt(M, tau), keeping only the nonzero thresholded values."""
    _check_threshold(tau, "tau")
    factors = thin_svd(M)
    shrunk = np.maximum(factors.S - tau, 0.0)
    keep = shrunk > 0
    return SvdFactors(U=factors.U[:, keep], S=shrunk[keep], V=factors.V[:, keep])


def svt(M: np.ndarray, tau: float) -> np.ndarray:
    """Singular value thresholding; prox of tau * nuclear norm."""
    return shrink_singular_values(M, tau).reconstruct()


def constrained_svt_factors(
    G: np.ndarray, tau: float, spec: WaveletSpec, q: int
) -> SvdFactors:
    # Thresholding the SVD of the projection solves the subspace-constrained problem.
    return shrink_singular_values(project_smooth(G, spec, q), tau)


def constrained_svt(G: np.ndarray, tau: float, spec: WaveletSpec, q: int) -> np.ndarray:
    """Minimizer of I_{V_q}(A) + tau * ||A||_* + 0.5 * ||A - G||_F^2."""
    return constrained_svt_factors(G, tau, spec, q).reconstruct()


def project_box(
    M: np.ndarray, scale: NoiseScale, spec: WaveletSpec, levels: int
) -> np.ndarray:
    """Euclidean projection onto Box(delta).

    The transform is orthogonal, so clamping coefficients of column p to
    [-delta * sigma_p, delta * sigma_p] and synthesizing is the exact projection.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise DimensionError(f"expected a T x P matrix, got shape {M.shape}")
    if scale.sigma.shape[0] != M.shape[1]:
        raise DimensionError(
            f"noise scale has {scale.sigma.shape[0]} flows, matrix has {M.shape[1]}"
        )
    coeffs = dwt_forward(M, spec, levels)
    width = scale.half_widths
    clamped = MultiResolutionCoefficients(
        approx=np.clip(coeffs.approx, -width, width),
        details=[np.clip(detail, -width, width) for detail in coeffs.details],
        original_length=coeffs.original_length,
    )
    return dwt_inverse(clamped, spec)


def in_box(
    M: np.ndarray, scale: NoiseScale, spec: WaveletSpec, levels: int, atol: float = 1e-10
) -> bool:
    coeffs = dwt_forward(M, spec, levels)
    width = scale.half_widths
    slack = atol * max(1.0, float(np.max(width, initial=0.0)))
    return all(np.all(np.abs(part) <= width + slack) for part in coeffs.as_list())


def numerical_rank(M: np.ndarray) -> int:
    return thin_svd(M).rank


def nuclear_norm(M: np.ndarray) -> float:
    return float(np.sum(thin_svd(M).S))
