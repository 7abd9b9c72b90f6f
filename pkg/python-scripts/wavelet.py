"""Orthogonal discrete wavelet transform on periodically extended signals.

Matrices are transformed column by column (axis 0 is time), so one call
analyses every OD flow of a traffic matrix at once.
"""

import logging
import warnings
from functools import lru_cache

import numpy as np
import pywt

from errors import (
    ConfigError,
    InvalidLevelError,
    LengthNotDivisibleError,
    LevelMismatchError,
    SignalTooShortError,
)
from traffic_models import (
    MultiResolutionCoefficients,
    NoiseScale,
    WaveletFamily,
    WaveletSpec,
)

logger = logging.getLogger(__name__)

# pywt's name for the periodic boundary rule; keeps every level at exactly half length
PYWT_MODE = "periodization"

# MAD of a standard Gaussian
MAD_CONSISTENCY = 0.6745


def wavelet_spec(family: str = "db4", max_levels: int = 5) -> WaveletSpec:
    """Build a ``WaveletSpec`` for an orthogonal pywt family."""
    try:
        resolved = WaveletFamily(family)
    except ValueError:
        raise ConfigError(
            f"unknown wavelet family {family!r}; choose one of "
            f"{', '.join(f.value for f in WaveletFamily)}",
            key_path="wavelet.family",
        ) from None
    if not pywt.Wavelet(resolved.value).orthogonal:
        raise ConfigError(f"{family} is not orthogonal", key_path="wavelet.family")
    return WaveletSpec(family=resolved, max_levels=max_levels)


@lru_cache(maxsize=32)
def _filter_bank(spec: WaveletSpec) -> pywt.Wavelet:
    return spec.pywt_wavelet()


def _check_levels(length: int, levels: int, spec: WaveletSpec) -> None:
    if levels < 1:
        raise InvalidLevelError(f"decomposition depth must be >= 1, got J={levels}")
    if levels > spec.max_levels:
        raise InvalidLevelError(
            f"J={levels} exceeds the wavelet's max_levels={spec.max_levels}"
        )
    if length % 2**levels:
        raise LengthNotDivisibleError(length, levels)


def _wavedec(x: np.ndarray, spec: WaveletSpec, levels: int) -> list[np.ndarray]:
    with warnings.catch_warnings():
        # pywt warns once the coarsest level is shorter than the filter;
        # periodization stays exact there.
        warnings.simplefilter("ignore", UserWarning)
        return pywt.wavedec(x, _filter_bank(spec), mode=PYWT_MODE, level=levels, axis=0)


def _waverec(coeffs: list[np.ndarray], spec: WaveletSpec) -> np.ndarray:
    return pywt.waverec(coeffs, _filter_bank(spec), mode=PYWT_MODE, axis=0)


def dwt_forward(x: np.ndarray, spec: WaveletSpec, levels: int) -> MultiResolutionCoefficients:
    """Level-``levels`` analysis of a signal (or of every column of a matrix)."""
    x = np.asarray(x, dtype=float)
    _check_levels(x.shape[0], levels, spec)
    coeffs = _wavedec(x, spec, levels)
    return MultiResolutionCoefficients(
        approx=coeffs[0], details=list(coeffs[1:]), original_length=x.shape[0]
    )


def dwt_inverse(coeffs: MultiResolutionCoefficients, spec: WaveletSpec) -> np.ndarray:
    """Synthesis; exact inverse of ``dwt_forward`` for the same spec."""
    total = coeffs.original_length
    levels = coeffs.levels
    if coeffs.approx.shape[0] != total // 2**levels:
        raise LevelMismatchError(
            f"approximation has {coeffs.approx.shape[0]} coefficients, "
            f"expected {total // 2**levels} for T={total}, J={levels}"
        )
    for level in range(1, levels + 1):
        found = coeffs.detail(level).shape[0]
        if found != total // 2**level:
            raise LevelMismatchError(
                f"detail level {level} has {found} coefficients, "
                f"expected {total // 2**level}"
            )
    return _waverec(coeffs.as_list(), spec)


def project_smooth(X: np.ndarray, spec: WaveletSpec, q: int) -> np.ndarray:
    """Orthogonal projection of each column onto the approximation space V_q."""
    X = np.asarray(X, dtype=float)
    _check_levels(X.shape[0], q, spec)
    coeffs = _wavedec(X, spec, q)
    kept = [coeffs[0], *(np.zeros_like(detail) for detail in coeffs[1:])]
    return _waverec(kept, spec)


def detail_energy(X: np.ndarray, spec: WaveletSpec, levels: int) -> float:
    """Squared norm held by detail levels 1..levels; zero exactly on V_levels."""
    X = np.asarray(X, dtype=float)
    _check_levels(X.shape[0], levels, spec)
    coeffs = _wavedec(X, spec, levels)
    return float(sum(np.sum(detail**2) for detail in coeffs[1:]))


def _level_one_details(x: np.ndarray, spec: WaveletSpec) -> np.ndarray:
    length = x.shape[0]
    if length < 4:
        raise SignalTooShortError(
            f"noise estimation needs at least 4 periods, got {length}"
        )
    if length % 2:
        raise LengthNotDivisibleError(length, 1)
    _, detail = pywt.dwt(x, _filter_bank(spec), mode=PYWT_MODE, axis=0)
    return detail


def estimate_noise_sigma(x: np.ndarray, spec: WaveletSpec) -> float:
    """Robust noise scale: MAD of level-1 details divided by 0.6745."""
    detail = _level_one_details(np.asarray(x, dtype=float), spec)
    mad = np.median(np.abs(detail - np.median(detail)))
    return float(mad / MAD_CONSISTENCY)


def estimate_noise_scale(X: np.ndarray, spec: WaveletSpec, delta: float) -> NoiseScale:
    """Per-flow ``estimate_noise_sigma`` for every column of ``X``."""
    detail = _level_one_details(np.asarray(X, dtype=float), spec)
    mad = np.median(np.abs(detail - np.median(detail, axis=0)), axis=0)
    return NoiseScale(sigma=np.atleast_1d(mad / MAD_CONSISTENCY), delta=delta)
