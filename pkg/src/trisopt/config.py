"""Flat key-value configuration: one `key = value` per line, `#` comments.

Every key has a default, so a config file only needs the keys it overrides.
Unknown keys and unparseable or out-of-domain values are reported by name.
"""

from __future__ import annotations

import math
from pathlib import Path

from .channel import SPEED_OF_LIGHT_M_S, GeometryParams
from .harness import Scenario
from .power import PowerConstraints
from .rate import NoisePower


class ConfigError(ValueError):
    def __init__(self, key: str, reason: str):
        super().__init__(f"config key '{key}': {reason}")
        self.key = key
        self.reason = reason


_INT_KEYS = {"m_elements", "rand_trials", "seed"}

DEFAULTS: dict[str, float | int | None] = {
    "m_elements": 10,
    "sigma_sq": 1e-7,
    "p_max": 10.0,
    "i_th": 2.0,
    "r_min": 0.1,
    "f_c_hz": 2e9,
    "d0_m": SPEED_OF_LIGHT_M_S / (2.0 * 2e9),  # half wavelength at the default carrier
    "path_gain_k": 2e-4,
    "path_gain_j": 1e-4,
    "path_gain_l": 0.3,
    "aod_theta_k": 0.6,
    "aod_theta_j": 1.0,
    "aod_theta_l": 0.6,
    "aod_phi_k": 0.4,
    "aod_phi_j": 2.0,
    "aod_phi_l": 0.4,
    "doppler_psi": 0.5,
    "delta_step": 0.05,
    "rand_trials": 200,
    "seed": 1,
    "rician_k_factor": None,  # optional; unset means pure line-of-sight
}


def parse_config_text(text: str) -> dict:
    values = dict(DEFAULTS)
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(line.split()[0], f"line {lineno} is not 'key = value'")
        key, _, value = (part.strip() for part in line.partition("="))
        if key not in DEFAULTS:
            raise ConfigError(key, "unknown key")
        try:
            values[key] = int(value) if key in _INT_KEYS else float(value)
        except ValueError:
            raise ConfigError(key, f"cannot parse value {value!r}") from None
    _validate(values)
    return values


def load_config(path: str | Path | None) -> dict:
    """Read a config file; None or the literal name 'defaults' yields the defaults."""
    if path is None or str(path) == "defaults":
        values = dict(DEFAULTS)
        _validate(values)
        return values
    p = Path(path)
    if not p.is_file():
        raise ConfigError("config", f"file not found: {p}")
    return parse_config_text(p.read_text())


def _require(values: dict, key: str, predicate, reason: str) -> None:
    if not predicate(values[key]):
        raise ConfigError(key, f"{reason} (got {values[key]})")


def _validate(values: dict) -> None:
    _require(values, "m_elements", lambda v: v >= 1, "must be >= 1")
    _require(values, "sigma_sq", lambda v: v > 0, "must be > 0")
    _require(values, "p_max", lambda v: v > 0, "must be > 0")
    _require(values, "i_th", lambda v: v > 0, "must be > 0")
    _require(values, "r_min", lambda v: v >= 0, "must be >= 0")
    _require(values, "f_c_hz", lambda v: v > 0, "must be > 0")
    _require(values, "d0_m", lambda v: v > 0, "must be > 0")
    for key in ("path_gain_k", "path_gain_j", "path_gain_l"):
        _require(values, key, lambda v: v >= 0, "must be >= 0")
    for key in ("aod_theta_k", "aod_theta_j", "aod_theta_l", "aod_phi_k", "aod_phi_j", "aod_phi_l", "doppler_psi"):
        _require(values, key, lambda v: math.isfinite(v), "must be finite")
    _require(values, "delta_step", lambda v: v > 0, "must be > 0")
    _require(values, "rand_trials", lambda v: v >= 1, "must be >= 1")
    if values["rician_k_factor"] is not None:
        _require(values, "rician_k_factor", lambda v: v >= 0, "must be >= 0")


def build_scenario(values: dict, seed_override: int | None = None) -> Scenario:
    geometry = {}
    for rid, suffix in (("user_k", "k"), ("user_j", "j"), ("primary_l", "l")):
        geometry[rid] = GeometryParams(
            carrier_frequency_hz=values["f_c_hz"],
            element_spacing_m=values["d0_m"],
            vertical_aod_rad=values[f"aod_theta_{suffix}"],
            horizontal_aod_rad=values[f"aod_phi_{suffix}"],
            doppler_shift=values["doppler_psi"],
            path_gain=values[f"path_gain_{suffix}"],
        )
    return Scenario(
        m_elements=int(values["m_elements"]),
        noise=NoisePower(sigma_sq=values["sigma_sq"]),
        cons=PowerConstraints(p_max=values["p_max"], i_th=values["i_th"], r_min=values["r_min"]),
        geometry=geometry,
        rng_seed=int(seed_override if seed_override is not None else values["seed"]),
        rand_trials=int(values["rand_trials"]),
        delta_step=values["delta_step"],
        rician_k_factor=values["rician_k_factor"],
    )
