"""SINRs, Shannon rates, and the concave log-domain surrogate used by the outer loop.

The surrogate replaces log2(1+gamma) with alpha*log2(gamma) + beta, expanded at
the previous iterate's SINR; it is tight at the expansion point and a global
lower bound elsewhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .channel import ChannelVector, effective_gain

import numpy as np


@dataclass(frozen=True)
class NoisePower:
    """AWGN variance at the receivers, in watts."""

    sigma_sq: float

    def __post_init__(self):
        if not (math.isfinite(self.sigma_sq) and self.sigma_sq > 0):
            raise ValueError("sigma_sq must be finite and > 0")


@dataclass(frozen=True)
class PowerSplit:
    """NOMA power coefficients (summing to one) and the total transmit power."""

    p_k: float
    p_j: float
    p_total: float

    def __post_init__(self):
        if not (0.0 <= self.p_k <= 1.0 and 0.0 <= self.p_j <= 1.0):
            raise ValueError("power coefficients must lie in [0, 1]")
        if abs(self.p_k + self.p_j - 1.0) > 1e-9:
            raise ValueError("p_k + p_j must equal 1")
        if not (math.isfinite(self.p_total) and self.p_total > 0):
            raise ValueError("p_total must be finite and > 0")


@dataclass(frozen=True)
class ScaCoefficients:
    """Expansion coefficients of the surrogate at expansion_point = previous SINR."""

    alpha: float
    beta: float
    expansion_point: float


def sinr_strong(g_k: ChannelVector, phi: np.ndarray, split: PowerSplit, noise: NoisePower) -> float:
    """SIC removes the weak user's signal, so only noise remains in the denominator."""
    return effective_gain(g_k, phi) * split.p_k * split.p_total / noise.sigma_sq


def sinr_weak(g_j: ChannelVector, phi: np.ndarray, split: PowerSplit, noise: NoisePower) -> float:
    """The weak user decodes against the strong user's superimposed signal."""
    gain = effective_gain(g_j, phi)
    return gain * split.p_j * split.p_total / (noise.sigma_sq + gain * split.p_k * split.p_total)


def exact_rate(gamma: float) -> float:
    """Shannon rate log2(1+gamma) in b/s/Hz."""
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    return math.log2(1.0 + gamma)


def sca_coefficients(gamma_hat: float) -> ScaCoefficients:
    """Coefficients of the lower bound expanded at gamma_hat (the previous SINR)."""
    if not (math.isfinite(gamma_hat) and gamma_hat > 0):
        raise ValueError("gamma_hat must be finite and > 0")
    alpha = gamma_hat / (1.0 + gamma_hat)
    beta = math.log2(1.0 + gamma_hat) - alpha * math.log2(gamma_hat)
    return ScaCoefficients(alpha=alpha, beta=beta, expansion_point=gamma_hat)


def surrogate_rate(coeffs: ScaCoefficients, gamma: float) -> float:
    """alpha*log2(gamma) + beta; equals exact_rate(gamma) at the expansion point."""
    if gamma <= 0:
        raise ValueError("gamma must be > 0")
    return coeffs.alpha * math.log2(gamma) + coeffs.beta
