"""TOML run configuration with units spelled out in the key names.

Recognised sections (all optional unless a subcommand needs them)::

    [sphere]       radius_um, density_kg_per_m3
    [trap]         frequency_Hz                   (w0 = 2 pi f)
    [inflator]     frequency_Hz, time_s
    [slit]         separation_nm, width_nm
    [environment]  temperature_K, pressure_mbar, gas_mass_amu,
                   chi_real, chi_imag, vibration_psd_m2_per_Hz
    [protocol]     free_time_s, drift_time_s, mapping_duration_s,
                   rotation_duration_s, detectable_fringe_nm,
                   traverse_speed_m_per_s, include_gravity, margin,
                   cap_omega_t, grid_points
"""

from __future__ import annotations

import copy
import math
import sys

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .decoherence import Environment, Sphere
from .errors import SimulationError
from .interferometry import GridSpec
from .protocol import DEFAULT_MARGIN, ProtocolPlan
from .dynamics import DEFAULT_OMEGA_T_CAP


class ConfigError(SimulationError, ValueError):
    """Malformed or incomplete configuration."""


def load(path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file {path} not found") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None


def section(cfg: dict, name: str, required: bool = True) -> dict:
    sec = cfg.get(name)
    if sec is None:
        if required:
            raise ConfigError(f"missing section [{name}]")
        return {}
    if not isinstance(sec, dict):
        raise ConfigError(f"[{name}] must be a table")
    return sec


def number(sec: dict, key: str, default=None, where: str = "") -> float:
    if key not in sec:
        if default is None:
            raise ConfigError(f"missing key {where + '.' if where else ''}{key}")
        return default
    val = sec[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"{where}.{key} must be a number")
    return float(val)


def angular(sec: dict, key: str = "frequency_Hz", where: str = "") -> float:
    return 2.0 * math.pi * number(sec, key, where=where)


def sphere_from(cfg: dict) -> Sphere:
    sec = section(cfg, "sphere")
    return Sphere(
        radius=number(sec, "radius_um", where="sphere") * 1e-6,
        density=number(sec, "density_kg_per_m3", where="sphere"),
    )


def environment_from(cfg: dict) -> Environment:
    sec = section(cfg, "environment")
    return Environment.from_units(
        temperature_K=number(sec, "temperature_K", where="environment"),
        pressure_mbar=number(sec, "pressure_mbar", 0.0),
        gas_mass_amu=number(sec, "gas_mass_amu", 28.97),
        chi_real=number(sec, "chi_real", 1.0),
        chi_imag=number(sec, "chi_imag", 1.0),
        vibration_psd_m2_per_Hz=number(sec, "vibration_psd_m2_per_Hz", 0.0),
    )


def _optional(sec: dict, key: str, scale: float = 1.0):
    return None if key not in sec else number(sec, key) * scale


def plan_from(cfg: dict, margin: float | None = None, cap_omega_t: float | None = None) -> ProtocolPlan:
    proto = section(cfg, "protocol")
    inflator = section(cfg, "inflator")
    slit = section(cfg, "slit", required=False)
    include_gravity = proto.get("include_gravity", False)
    if not isinstance(include_gravity, bool):
        raise ConfigError("protocol.include_gravity must be true or false")
    grid = GridSpec(int(number(proto, "grid_points", 4096)))
    return ProtocolPlan(
        sphere=sphere_from(cfg),
        trap_frequency=angular(section(cfg, "trap"), where="trap"),
        inflator_frequency=angular(inflator, where="inflator"),
        inflation_time=number(inflator, "time_s", 0.0),
        free_time=number(proto, "free_time_s", where="protocol"),
        slit_separation=_optional(slit, "separation_nm", 1e-9),
        slit_width=_optional(slit, "width_nm", 1e-9),
        environment=environment_from(cfg) if "environment" in cfg else None,
        rotation_duration=_optional(proto, "rotation_duration_s"),
        mapping_duration=_optional(proto, "mapping_duration_s"),
        drift_time=number(proto, "drift_time_s", 0.0),
        detectable_fringe=number(proto, "detectable_fringe_nm", 100.0) * 1e-9,
        include_gravity=include_gravity,
        traverse_speed=_optional(proto, "traverse_speed_m_per_s"),
        margin=margin if margin is not None else number(proto, "margin", DEFAULT_MARGIN),
        cap_omega_t=cap_omega_t if cap_omega_t is not None else number(proto, "cap_omega_t", DEFAULT_OMEGA_T_CAP),
        grid=grid,
    )


def get_key(cfg: dict, dotted: str):
    node = cfg
    for part in dotted.split("."):
        if not isinstance(node, dict) or part not in node:
            raise ConfigError(f"sweep axis {dotted!r} does not name an existing config key")
        node = node[part]
    return node


def with_key(cfg: dict, dotted: str, value) -> dict:
    """Copy of ``cfg`` with the existing key ``dotted`` set to ``value``."""
    get_key(cfg, dotted)
    out = copy.deepcopy(cfg)
    node = out
    parts = dotted.split(".")
    for part in parts[:-1]:
        node = node[part]
    node[parts[-1]] = value
    return out
