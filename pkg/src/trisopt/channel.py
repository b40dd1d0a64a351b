"""Deterministic steering-vector channels for the transmissive-RIS downlink.

Each receiver (the two NOMA users and the primary victim) sees a length-M
line-of-sight channel built from its departure angles, scaled by a linear
path gain and rotated by a global Doppler phase. An optional Rician mode
adds a seeded scatter component on top of the LoS steering vector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

SPEED_OF_LIGHT_M_S = 299_792_458.0


@dataclass(frozen=True)
class GeometryParams:
    """Geometry and scaling of one transmitter-to-receiver link."""

    carrier_frequency_hz: float
    element_spacing_m: float
    vertical_aod_rad: float
    horizontal_aod_rad: float
    doppler_shift: float = 0.0
    path_gain: float = 1.0
    speed_of_light_m_s: float = SPEED_OF_LIGHT_M_S

    def __post_init__(self):
        values = (
            self.carrier_frequency_hz,
            self.element_spacing_m,
            self.vertical_aod_rad,
            self.horizontal_aod_rad,
            self.doppler_shift,
            self.path_gain,
        )
        if not all(math.isfinite(v) for v in values):
            raise ValueError("geometry parameters must be finite")
        if self.carrier_frequency_hz <= 0:
            raise ValueError("carrier_frequency_hz must be > 0")
        if self.element_spacing_m <= 0:
            raise ValueError("element_spacing_m must be > 0")
        if self.path_gain < 0:
            raise ValueError("path_gain must be >= 0")

    @property
    def rho(self) -> float:
        """Phase progression constant 2*pi*f_c*d0/c per element index."""
        return 2.0 * math.pi * self.carrier_frequency_hz * self.element_spacing_m / self.speed_of_light_m_s


@dataclass(frozen=True)
class ChannelVector:
    """Length-M complex channel between the surface and one receiver."""

    gains: np.ndarray
    receiver_id: str = "user_k"  # one of user_k, user_j, primary_l

    def __post_init__(self):
        g = np.asarray(self.gains, dtype=complex)
        if g.ndim != 1 or g.size < 1:
            raise ValueError("gains must be a nonempty 1-D vector")
        if not np.all(np.isfinite(g.view(float))):
            raise ValueError("channel entries must be finite")
        object.__setattr__(self, "gains", g)

    def __len__(self) -> int:
        return self.gains.size


def steering_vector(geom: GeometryParams, m_elements: int) -> ChannelVector:
    """LoS channel: entry m is path_gain * e^{i*pi*psi} * exp(-i*rho*sin(theta)*cos(phi)*m).

    All entries have magnitude exactly equal to path_gain.
    """
    if m_elements < 1:
        raise ValueError("m_elements must be >= 1")
    step = geom.rho * math.sin(geom.vertical_aod_rad) * math.cos(geom.horizontal_aod_rad)
    m = np.arange(m_elements)
    doppler = np.exp(1j * math.pi * geom.doppler_shift)
    gains = geom.path_gain * doppler * np.exp(-1j * step * m)
    return ChannelVector(gains=gains)


def rician_vector(
    geom: GeometryParams,
    m_elements: int,
    k_factor: float,
    rng: np.random.Generator,
) -> ChannelVector:
    """Rician channel: LoS steering plus a scaled complex-Gaussian scatter term.

    Total mean power per element stays path_gain^2; k_factor is the LoS/scatter
    power ratio. Disabled by default in the harness (pure LoS is the baseline).
    """
    if not (math.isfinite(k_factor) and k_factor >= 0):
        raise ValueError("k_factor must be finite and >= 0")
    los = steering_vector(geom, m_elements).gains
    scatter = (rng.standard_normal(m_elements) + 1j * rng.standard_normal(m_elements)) / math.sqrt(2.0)
    gains = math.sqrt(k_factor / (1.0 + k_factor)) * los + math.sqrt(1.0 / (1.0 + k_factor)) * geom.path_gain * scatter
    return ChannelVector(gains=gains)


def effective_gain(g: ChannelVector | np.ndarray, phi: np.ndarray) -> float:
    """Squared magnitude of the inner product of a channel with the beam, |g^H phi|^2.

    This is the vector form of the lifted trace expression tr(g g^H phi phi^H),
    so the vector and matrix SINR paths agree exactly.
    """
    gv = g.gains if isinstance(g, ChannelVector) else np.asarray(g, dtype=complex)
    pv = np.asarray(phi, dtype=complex)
    if gv.shape != pv.shape:
        raise ValueError(f"length mismatch: channel {gv.shape} vs beam {pv.shape}")
    return float(abs(np.vdot(gv, pv)) ** 2)
