import math

import numpy as np
import pytest

from seabedmatch.core import DomainSpec, ExperimentParams
from seabedmatch.microlocal import (DEFAULT_R0, BackscatterSignal, aligned_offset,
                                    backscatter_at, backscatter_direction, circle_angles,
                                    decompose, directional_profile, receiver_positions,
                                    sample_circle, truncation_order)
from seabedmatch.solver import ComplexField


def plane_wave_samples(beta, amp=1.0, r0=DEFAULT_R0, offset=0.0, phase=0.0):
    """Analytic values of ``amp * exp(i k (cos b, sin b) . x)`` on the r0 circle."""
    theta = circle_angles(truncation_order(r0), offset)
    return amp * np.exp(1j * (r0 * np.cos(theta - beta) + phase))


@pytest.mark.parametrize("r0, expected", [(3 * math.pi, 41), (1.0, 13), (8.0, 37)])
def test_truncation_order(r0, expected):
    assert truncation_order(r0) == expected


def test_truncation_order_rejects_nonpositive():
    with pytest.raises(ValueError):
        truncation_order(0.0)


@pytest.mark.parametrize("index", [0, 5, 17, 40])
def test_single_plane_wave_on_grid_angle(index):
    n = truncation_order(DEFAULT_R0)
    beta = 2 * math.pi * index / n
    dec = decompose(plane_wave_samples(beta, phase=0.3))
    peak = int(np.argmax(dec.amplitudes))
    assert peak == index
    assert dec.amplitudes[peak] == pytest.approx(1.0, rel=0.05)
    # the coefficient carries the wave's phase at the centre
    assert np.angle(dec.coefficients[peak]) == pytest.approx(0.3, abs=0.05)


def test_two_wave_superposition_ratio():
    n = truncation_order(DEFAULT_R0)
    b1, b2 = 2 * math.pi * 3 / n, 2 * math.pi * 20 / n
    dec = decompose(plane_wave_samples(b1, 1.0) + plane_wave_samples(b2, 0.5))
    ratio = dec.amplitudes[3] / dec.amplitudes[20]
    assert ratio == pytest.approx(2.0, rel=0.10)


def test_aligned_offset_puts_beta_on_grid():
    n = truncation_order(DEFAULT_R0)
    beta = 2.0
    off = aligned_offset(beta, n)
    angles = circle_angles(n, off)
    assert np.min(np.abs(angles - beta)) < 1e-12
    dec = decompose(plane_wave_samples(beta, 1.3, offset=off), offset=off)
    assert backscatter_at(dec, beta) == pytest.approx(1.3, rel=0.02)


def test_backscatter_at_interpolates_linearly_and_wraps():
    n = 41
    coeffs = np.zeros(n, complex)
    coeffs[0], coeffs[-1] = 1.0, 3.0
    from seabedmatch.microlocal import RayDecomposition
    dec = RayDecomposition(circle_angles(n), coeffs)
    step = 2 * math.pi / n
    assert backscatter_at(dec, 0.0) == pytest.approx(1.0)
    assert backscatter_at(dec, -0.5 * step) == pytest.approx(2.0)


def test_decompose_is_batched():
    s = np.stack([plane_wave_samples(0.0), 2 * plane_wave_samples(0.0)])
    dec = decompose(s)
    assert dec.coefficients.shape == (2, 41)
    assert np.allclose(dec.coefficients[1], 2 * dec.coefficients[0])


def test_decompose_validation():
    with pytest.raises(ValueError, match="expected 41"):
        decompose(np.ones(40))
    with pytest.raises(ValueError):
        decompose(np.ones(41), epsilon_reg=-1.0)


def test_large_regularization_shrinks_amplitude():
    a_small = decompose(plane_wave_samples(0.0), epsilon_reg=1e-10).amplitudes[0]
    a_large = decompose(plane_wave_samples(0.0), epsilon_reg=1e-2).amplitudes[0]
    assert a_large < a_small


def _plane_wave_field(beta, amp, k, width=0.5, height=0.6, ppw=15):
    h = 2 * math.pi / k / ppw
    nx = int(round(width / h))
    dx = width / nx
    ny = int(round(height / h))
    dy = height / ny
    x = dx * np.arange(nx)
    y = -0.1 + dy * np.arange(ny + 1)
    X, Y = np.meshgrid(x, y)
    kx = k * math.cos(beta)
    vals = amp * np.exp(1j * (kx * X + k * math.sin(beta) * Y))
    return ComplexField(vals, dx, dy, (0.0, -0.1), kx)


def test_spline_interpolation_of_plane_wave():
    k = ExperimentParams().wavenumber
    f = _plane_wave_field(2.3, 1.0, k)
    rng = np.random.default_rng(0)
    x = rng.uniform(-0.2, 0.7, 200)
    y = rng.uniform(0.0, 0.4, 200)
    exact = np.exp(1j * k * (math.cos(2.3) * x + math.sin(2.3) * y))
    err1 = np.abs(f.interpolate(x, y, order=1) - exact).max()
    err5 = np.abs(f.interpolate(x, y, order=5) - exact).max()
    # bilinear error is second order: (k h)^2 / 8 per direction
    kh = 2 * math.pi / 15
    assert err1 < 2 * kh ** 2 / 8
    assert err5 < 1e-3


def test_profile_of_single_upgoing_wave():
    exp = ExperimentParams(incident_angle=math.pi / 6)
    d = DomainSpec(segment_width=0.5, sediment_depth=0.1, water_height=0.5,
                   samples_per_segment=16, receiver_line_height=0.2)
    beta = backscatter_direction(exp.incident_angle)
    f = _plane_wave_field(beta, 0.7, exp.wavenumber)
    prof = directional_profile(f, exp, d, beta)
    assert isinstance(prof, BackscatterSignal)
    assert np.allclose(prof.values, 0.7, rtol=0.05)


def test_sample_circle_rejects_points_outside():
    k = ExperimentParams().wavenumber
    f = _plane_wave_field(1.0, 1.0, k)
    with pytest.raises(ValueError, match="in y"):
        sample_circle(f, (0.1, -0.09), k)


def test_receiver_positions_shift():
    exp = ExperimentParams(incident_angle=math.pi / 4)
    d = DomainSpec(receiver_line_height=0.5)
    assert receiver_positions(1.0, exp, d) == pytest.approx(0.5)
    d2 = DomainSpec(receiver_line_height=0.5, footprint_shift=False)
    assert receiver_positions(1.0, exp, d2) == pytest.approx(1.0)


def test_backscatter_signal_validation():
    with pytest.raises(ValueError):
        BackscatterSignal(np.ones(3), np.ones(4), 0.5, 1.0)
    s = BackscatterSignal(np.arange(8.0), np.arange(8.0), 0.5, 1.0)
    assert s.segment(1, 4).tolist() == [4, 5, 6, 7]
