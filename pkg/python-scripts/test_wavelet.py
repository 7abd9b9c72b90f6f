"""Tests for the periodic orthogonal wavelet transform and noise estimation."""

import math

import numpy as np
import pytest
from pydantic import ValidationError

from errors import (
    ConfigError,
    InvalidLevelError,
    LengthNotDivisibleError,
    LevelMismatchError,
    SignalTooShortError,
)
from traffic_models import MultiResolutionCoefficients, WaveletSpec
from wavelet import (
    detail_energy,
    dwt_forward,
    dwt_inverse,
    estimate_noise_scale,
    estimate_noise_sigma,
    project_smooth,
    wavelet_spec,
)

DB4 = wavelet_spec("db4")
HAAR = wavelet_spec("haar")


@pytest.mark.parametrize("family", ["haar", "db2", "db4", "sym8"])
def test_perfect_reconstruction_and_energy(family: str):
    spec = wavelet_spec(family)
    x = np.random.default_rng(1).normal(size=64)
    coeffs = dwt_forward(x, spec, 3)
    restored = dwt_inverse(coeffs, spec)
    assert np.max(np.abs(restored - x)) < 1e-10, f"{family} synthesis does not invert analysis"
    assert math.isclose(
        float(np.sum(coeffs.flat() ** 2)), float(np.sum(x**2)), rel_tol=1e-10
    ), f"{family} transform is not energy preserving"


def test_coefficient_lengths_halve_per_level():
    coeffs = dwt_forward(np.zeros(128), DB4, 4)
    assert coeffs.levels == 4
    assert coeffs.approx.shape == (8,)
    assert [coeffs.detail(level).shape[0] for level in (1, 2, 3, 4)] == [64, 32, 16, 8]


def test_haar_details_of_alternating_signal():
    coeffs = dwt_forward(np.array([1.0, -1.0, 1.0, -1.0]), HAAR, 1)
    assert np.allclose(np.abs(coeffs.detail(1)), math.sqrt(2.0))
    assert np.allclose(coeffs.approx, 0.0)


def test_matrix_transform_is_columnwise():
    X = np.random.default_rng(2).normal(size=(32, 3))
    whole = dwt_forward(X, DB4, 2)
    for column in range(3):
        single = dwt_forward(X[:, column], DB4, 2)
        assert np.allclose(whole.flat()[:, column], single.flat())


def test_rejects_bad_depths_and_lengths():
    with pytest.raises(LengthNotDivisibleError):
        dwt_forward(np.zeros(100), DB4, 3)
    with pytest.raises(InvalidLevelError):
        dwt_forward(np.zeros(64), DB4, 0)
    with pytest.raises(InvalidLevelError):
        dwt_forward(np.zeros(256), DB4, 6)


def test_inverse_rejects_inconsistent_pyramid():
    broken = MultiResolutionCoefficients.model_construct(
        approx=np.zeros(4), details=[np.zeros(8), np.zeros(15)], original_length=32
    )
    with pytest.raises(LevelMismatchError):
        dwt_inverse(broken, DB4)


def test_coefficient_model_validates_lengths():
    with pytest.raises(ValidationError):
        MultiResolutionCoefficients(
            approx=np.zeros(3), details=[np.zeros(8)], original_length=16
        )


def test_project_smooth_is_an_orthogonal_projection():
    x = np.random.default_rng(3).normal(size=(128, 2))
    smooth = project_smooth(x, DB4, 3)
    assert np.allclose(project_smooth(smooth, DB4, 3), smooth, atol=1e-10)
    inner = float(np.sum((x - smooth) * smooth))
    assert abs(inner) < 1e-9, f"residual not orthogonal to V_q: {inner}"
    assert detail_energy(smooth, DB4, 3) < 1e-20 * max(1.0, float(np.sum(x**2)))


def test_slow_sinusoid_lies_in_coarse_space():
    t = np.arange(1, 2017)
    x = 10.0 + 3.0 * np.sin(2 * math.pi * 7 * t / 2016 + 0.3)
    ratio = detail_energy(x, DB4, 3) / float(np.sum(x**2))
    assert ratio < 1e-8, f"7-cycle sinusoid leaked {ratio:.2e} of its energy into details"


def test_noise_sigma_of_gaussian_signal():
    x = np.random.default_rng(4).normal(scale=2.0, size=4096)
    sigma = estimate_noise_sigma(x, DB4)
    assert abs(sigma - 2.0) < 0.3, f"MAD estimate {sigma} far from 2.0"


def test_noise_sigma_of_constant_signal_is_zero():
    assert estimate_noise_sigma(np.full(64, 5.0), DB4) < 1e-12


def test_noise_scale_matches_per_flow_sigma():
    X = np.random.default_rng(5).normal(size=(256, 4)) * np.array([1.0, 2.0, 0.5, 3.0])
    scale = estimate_noise_scale(X, DB4, delta=1.96)
    expected = [estimate_noise_sigma(X[:, p], DB4) for p in range(4)]
    assert np.allclose(scale.sigma, expected)
    assert np.allclose(scale.half_widths, 1.96 * np.asarray(expected))


def test_noise_estimation_needs_four_periods():
    with pytest.raises(SignalTooShortError):
        estimate_noise_sigma(np.zeros(2), DB4)


def test_wavelet_spec_rejects_unknown_family():
    with pytest.raises(ConfigError) as info:
        wavelet_spec("morlet")
    assert info.value.key_path == "wavelet.family"


def test_wavelet_spec_checks_orthonormal_filters():
    s = 1 / math.sqrt(2)
    haar = WaveletSpec(family="haar", dec_lo=(s, s), dec_hi=(-s, s))
    assert haar.filter_length == 2
    with pytest.raises(ValidationError):
        WaveletSpec(family="haar", dec_lo=(1.0, 1.0), dec_hi=(-1.0, 1.0))
    with pytest.raises(ValidationError):
        WaveletSpec(family="haar", dec_lo=(s, s), dec_hi=(s, s))


def test_default_filters_come_from_family():
    spec = WaveletSpec(family="db4")
    assert spec.filter_length == 8
    assert spec.vanishing_moments == 4

def test_parseval_and_reconstruction_on_random_lengths():
    rng = np.random.default_rng(20)
    for _ in range(100):
        length = 32 * int(rng.integers(2, 64))
        x = rng.normal(size=length)
        coeffs = dwt_forward(x, DB4, 5)
        energy = float(np.sum(coeffs.flat() ** 2))
        assert math.isclose(energy, float(np.sum(x**2)), rel_tol=1e-10), f"T={length}"
        restored = dwt_inverse(coeffs, DB4)
        assert np.max(np.abs(restored - x)) <= 1e-10 * np.max(np.abs(x)), f"T={length}"


def test_haar_constant_signal_has_no_detail():
    coeffs = dwt_forward(np.ones(4), HAAR, 1)
    assert np.allclose(coeffs.approx, math.sqrt(2.0))
    assert np.allclose(coeffs.detail(1), 0.0)
    restored = dwt_inverse(
        MultiResolutionCoefficients(
            approx=np.full(2, math.sqrt(2.0)), details=[np.zeros(2)], original_length=4
        ),
        HAAR,
    )
    assert np.allclose(restored, 1.0)


def test_transform_is_linear():
    rng = np.random.default_rng(21)
    x, y = rng.normal(size=(2, 256))
    combined = dwt_forward(2.5 * x - 0.7 * y, DB4, 4).flat()
    separate = 2.5 * dwt_forward(x, DB4, 4).flat() - 0.7 * dwt_forward(y, DB4, 4).flat()
    assert np.max(np.abs(combined - separate)) < 1e-10


def test_project_smooth_is_self_adjoint_and_nonexpansive():
    rng = np.random.default_rng(22)
    X, Y = rng.normal(size=(2, 128, 3))
    left = float(np.sum(project_smooth(X, DB4, 3) * Y))
    right = float(np.sum(X * project_smooth(Y, DB4, 3)))
    assert abs(left - right) < 1e-8, f"<P(X), Y>={left} but <X, P(Y)>={right}"
    assert np.linalg.norm(project_smooth(X, DB4, 3)) <= np.linalg.norm(X)


def test_white_noise_spreads_evenly_over_levels():
    noise = np.random.default_rng(23).normal(size=(2016, 50))
    coeffs = dwt_forward(noise, DB4, 5)
    variances = [float(np.mean(np.var(part, axis=0))) for part in coeffs.as_list()]
    assert len(variances) == 6
    for level, variance in enumerate(variances):
        assert 0.8 <= variance <= 1.2, f"level {level} variance {variance:.3f}"


def test_noise_sigma_ignores_smooth_trend():
    rng = np.random.default_rng(24)
    t = np.arange(1, 2017)[:, None]
    trend = 10.0 + 3.0 * np.sin(2 * math.pi * 7 * t / 2016 + rng.uniform(0, 1, size=50))
    sigma = 0.1
    X = trend + rng.normal(scale=sigma, size=(2016, 50))
    ratios = estimate_noise_scale(X, DB4, delta=1.96).sigma / sigma
    assert 0.9 <= float(np.mean(ratios)) <= 1.1, f"mean sigma ratio {np.mean(ratios):.3f}"
    assert np.all((ratios >= 0.8) & (ratios <= 1.2))


def test_noise_sigma_of_unit_white_noise():
    noise = np.random.default_rng(25).normal(size=(2016, 50))
    mean = float(np.mean(estimate_noise_scale(noise, DB4, delta=1.96).sigma))
    assert 0.9 <= mean <= 1.1, f"mean sigma {mean:.3f}"


if __name__ == "__main__":
    test_haar_details_of_alternating_signal()
    test_project_smooth_is_an_orthogonal_projection()
    test_noise_sigma_of_gaussian_signal()
    print("✅ Wavelet tests passed!")
