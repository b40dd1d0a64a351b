"""Channel synthesis checks against direct formula evaluation."""

import cmath
import math

import numpy as np
import pytest

from trisopt.channel import GeometryParams, ChannelVector, effective_gain, rician_vector, steering_vector

C = 299_792_458.0


def direct_steering(f_c, d0, theta, phi_angle, psi, path_gain, m_elements):
    """Independent evaluation of the steering formula, one entry at a time."""
    rho = 2.0 * math.pi * f_c * d0 / C
    return [
        path_gain * cmath.exp(1j * math.pi * psi) * cmath.exp(-1j * rho * math.sin(theta) * math.cos(phi_angle) * m)
        for m in range(m_elements)
    ]


def brute_force_gain(g, phi):
    """Explicit-loop Hermitian dot product then squared magnitude."""
    acc = 0.0 + 0.0j
    for a, b in zip(g, phi):
        acc += complex(a).conjugate() * complex(b)
    return abs(acc) ** 2


def geom(theta=0.3, phi_angle=0.7, psi=0.0, path_gain=1.0, f_c=2e9, d0=None):
    return GeometryParams(
        carrier_frequency_hz=f_c,
        element_spacing_m=d0 if d0 is not None else C / (2 * f_c),
        vertical_aod_rad=theta,
        horizontal_aod_rad=phi_angle,
        doppler_shift=psi,
        path_gain=path_gain,
    )


class TestSteeringVector:
    def test_zero_vertical_angle_gives_all_ones(self):
        vec = steering_vector(geom(theta=0.0, phi_angle=1.234), 4)
        assert np.allclose(vec.gains, np.ones(4), atol=1e-15)

    def test_single_element_is_one(self):
        vec = steering_vector(geom(theta=1.1, phi_angle=0.2), 1)
        assert vec.gains.shape == (1,)
        assert vec.gains[0] == pytest.approx(1.0, abs=1e-15)

    def test_half_wavelength_broadside_alternates(self):
        # rho = pi at half-wavelength spacing; theta=pi/2, phi=0 gives exp(-i*pi*m)
        vec = steering_vector(geom(theta=math.pi / 2, phi_angle=0.0), 3)
        expected = direct_steering(2e9, C / (2 * 2e9), math.pi / 2, 0.0, 0.0, 1.0, 3)
        assert np.allclose(vec.gains, expected, atol=1e-12)
        assert np.allclose(vec.gains, [1.0, -1.0, 1.0], atol=1e-9)

    @pytest.mark.parametrize("seed", range(6))
    def test_matches_direct_formula(self, seed):
        rng = np.random.default_rng(seed)
        theta, phi_angle = rng.uniform(0, math.pi / 2), rng.uniform(0, 2 * math.pi)
        psi, pg = rng.uniform(-1, 1), rng.uniform(0.1, 3.0)
        vec = steering_vector(geom(theta=theta, phi_angle=phi_angle, psi=psi, path_gain=pg), 7)
        expected = direct_steering(2e9, C / (4e9), theta, phi_angle, psi, pg, 7)
        assert np.allclose(vec.gains, expected, atol=1e-12)

    @pytest.mark.parametrize("seed", range(4))
    def test_unit_magnitude_before_gain_scaling(self, seed):
        rng = np.random.default_rng(100 + seed)
        pg = rng.uniform(0.01, 5.0)
        vec = steering_vector(geom(theta=rng.uniform(0, 1.5), phi_angle=rng.uniform(0, 6), path_gain=pg), 9)
        assert np.max(np.abs(np.abs(vec.gains) - pg)) < 1e-12

    def test_invalid_inputs_rejected(self):
        with pytest.raises(ValueError):
            GeometryParams(carrier_frequency_hz=2e9, element_spacing_m=0.07, vertical_aod_rad=math.nan, horizontal_aod_rad=0.0)
        with pytest.raises(ValueError):
            GeometryParams(carrier_frequency_hz=-1.0, element_spacing_m=0.07, vertical_aod_rad=0.0, horizontal_aod_rad=0.0)
        with pytest.raises(ValueError):
            steering_vector(geom(), 0)


class TestEffectiveGain:
    def test_coherent_all_ones(self):
        g = ChannelVector(gains=np.ones(4))
        assert effective_gain(g, np.ones(4)) == pytest.approx(16.0, abs=1e-12)

    def test_zero_beam(self):
        rng = np.random.default_rng(0)
        g = rng.standard_normal(5) + 1j * rng.standard_normal(5)
        assert effective_gain(g, np.zeros(5)) == 0.0

    @pytest.mark.parametrize("seed", range(8))
    def test_matches_brute_force(self, seed):
        rng = np.random.default_rng(seed)
        g = rng.standard_normal(5) + 1j * rng.standard_normal(5)
        phi = rng.standard_normal(5) + 1j * rng.standard_normal(5)
        want = brute_force_gain(g, phi)
        assert effective_gain(g, phi) == pytest.approx(want, rel=1e-12)

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            effective_gain(np.ones(3), np.ones(4))


class TestModelProperties:
    @pytest.mark.parametrize("seed", range(10))
    def test_global_phase_invariance(self, seed):
        # the Doppler factor is a global phase, so it cannot move any gain
        rng = np.random.default_rng(seed)
        g = rng.standard_normal(6) + 1j * rng.standard_normal(6)
        phi = rng.standard_normal(6) + 1j * rng.standard_normal(6)
        alpha = rng.uniform(0, 2 * math.pi)
        base = effective_gain(g, phi)
        rotated = effective_gain(g * np.exp(1j * alpha), phi)
        assert rotated == pytest.approx(base, rel=1e-12)

    def test_doppler_never_changes_gain(self):
        phi = np.exp(1j * np.linspace(0, 3, 8))
        base = steering_vector(geom(psi=0.0), 8)
        for psi in (0.25, 0.5, 1.0, 1.7):
            shifted = steering_vector(geom(psi=psi), 8)
            assert effective_gain(shifted, phi) == pytest.approx(effective_gain(base, phi), rel=1e-12)

    @pytest.mark.parametrize("seed", range(10))
    def test_triangle_inequality_bound(self, seed):
        rng = np.random.default_rng(200 + seed)
        g = rng.standard_normal(6) + 1j * rng.standard_normal(6)
        phi = rng.standard_normal(6) + 1j * rng.standard_normal(6)
        bound = float(np.sum(np.abs(g) * np.abs(phi))) ** 2
        assert effective_gain(g, phi) <= bound + 1e-9


class TestRicianMode:
    def test_infinite_k_limit_approaches_los(self):
        rng = np.random.default_rng(1)
        los = steering_vector(geom(path_gain=0.5), 6).gains
        fading = rician_vector(geom(path_gain=0.5), 6, k_factor=1e12, rng=rng).gains
        assert np.allclose(fading, los, atol=1e-5)

    def test_seeded_and_power_scaled(self):
        g1 = rician_vector(geom(), 64, k_factor=3.0, rng=np.random.default_rng(7)).gains
        g2 = rician_vector(geom(), 64, k_factor=3.0, rng=np.random.default_rng(7)).gains
        assert np.array_equal(g1, g2)
        # mean per-element power stays near path_gain^2 = 1
        assert float(np.mean(np.abs(g1) ** 2)) == pytest.approx(1.0, rel=0.5)

    def test_negative_k_rejected(self):
        with pytest.raises(ValueError):
            rician_vector(geom(), 4, k_factor=-1.0, rng=np.random.default_rng(0))
