"""Experiment configuration: strict schema over a TOML file.

Every physical quantity carries its unit in the key name.  Unknown keys
are rejected with the full dotted path so typos cannot silently fall
back to defaults.  The defaults reproduce the published operating
points: the lifetime block uses the squeezing-lifetime noise budget
(white detuning 1.3 Hz rms, 11 ms coherence time) while the clock block
uses the clock budget (projection noise plus a slow 0.7 Hz drift).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import tomli

from .sequences import PRESET_KINDS
from .states import DriftProcess, NoiseModel

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "LifetimeSection",
    "ClockSection",
    "OracleSection",
    "SelftestSection",
    "load_config",
    "default_config",
]

_INPUT_STATES = ("css", "squeezed")


class ConfigError(Exception):
    """Invalid configuration; message carries the dotted field path."""


class _Key:
    """One leaf entry of the schema: default, expected kind, validator."""

    __slots__ = ("default", "kind", "check", "msg")

    def __init__(self, default, kind, check=None, msg=""):
        self.default = default
        self.kind = kind  # float | int | bool | str | float_list | int_list | str_list
        self.check = check
        self.msg = msg


def _positive(x):
    return x > 0


def _nonneg(x):
    return x >= 0


def _unit_interval(x):
    return 0 < x <= 1


def _grid_ok(xs):
    return len(xs) >= 2 and all(b > a for a, b in zip(xs, xs[1:])) and xs[0] >= 0


def _cycles_ok(xs):
    return len(xs) >= 1 and xs[0] >= 1 and all(b > a for a, b in zip(xs, xs[1:]))


_DRIFT_LIFETIME = {
    "enabled": _Key(False, "bool"),
    "amplitude": _Key(0.7, "float", _nonneg, "must be >= 0"),
    "units": _Key("hz", "str", lambda s: s in ("hz", "gauss"), "must be 'hz' or 'gauss'"),
    "correlation_time_s": _Key(200.0, "float", _positive, "must be > 0"),
}

_DRIFT_CLOCK = dict(_DRIFT_LIFETIME)
_DRIFT_CLOCK["enabled"] = _Key(True, "bool")

_NOISE_LIFETIME = {
    "var_omega_rad2_per_s2": _Key((2 * math.pi * 1.3) ** 2, "float", _nonneg, "must be >= 0"),
    "t_coh_s": _Key(0.011, "float", _positive, "must be > 0"),
    "contrast_decay_shape": _Key(
        "exponential", "str",
        lambda s: s in ("exponential", "gaussian"), "must be 'exponential' or 'gaussian'",
    ),
    "readout_var_spin2": _Key(0.0, "float", _nonneg, "must be >= 0"),
    "field_coeff_hz_per_gauss": _Key(3.7e3, "float", _positive, "must be > 0"),
    "drift": _DRIFT_LIFETIME,
}

# clock budget: quantum projection noise + slow drift; no white detuning
# or decoherence by default (contrast enters as a static input parameter)
_NOISE_CLOCK = dict(_NOISE_LIFETIME)
_NOISE_CLOCK["var_omega_rad2_per_s2"] = _Key(0.0, "float", _nonneg, "must be >= 0")
_NOISE_CLOCK["t_coh_s"] = _Key(math.inf, "float", _positive, "must be > 0")
_NOISE_CLOCK["drift"] = _DRIFT_CLOCK

_SCHEMA = {
    "master_seed": _Key(20260814, "int", _nonneg, "must be >= 0"),
    "out_dir": _Key("out", "str"),
    "ensemble": {
        "s0": _Key(1.5e4, "float", _positive, "must be > 0"),
        "c_in": _Key(0.9, "float", _unit_interval, "must be in (0, 1]"),
    },
    "squeezing": {
        "zeta0_target": _Key(0.4, "float", lambda x: 0 < x < 1, "must be in (0, 1)"),
        "excess_area": _Key(2.0, "float", _nonneg, "must be >= 0"),
        "contrast_factor": _Key(0.9, "float", _unit_interval, "must be in (0, 1]"),
    },
    "noise": _NOISE_LIFETIME,
    "lifetime": {
        "n_shots": _Key(4000, "int", lambda n: n >= 2, "must be >= 2"),
        "t_r_grid_s": _Key(
            [0.0, 1e-4, 2e-4, 3e-4, 4e-4, 5e-4, 6e-4, 7e-4, 8e-4,
             1e-3, 1.5e-3, 2e-3, 3e-3, 4e-3, 5e-3, 6e-3],
            "float_list", _grid_ok, "must be >= 2 non-negative strictly increasing values",
        ),
        "presets": _Key(
            list(PRESET_KINDS), "str_list",
            lambda xs: len(xs) >= 1 and all(x in PRESET_KINDS for x in xs)
            and len(set(xs)) == len(xs),
            f"must be distinct values from {PRESET_KINDS}",
        ),
        "subtract_readout_variance": _Key(True, "bool"),
        # quadratic-law window: the fit summary only uses grid points with
        # t_r <= this bound, where contrast decay is still a small correction
        "fit_t_max_s": _Key(2e-3, "float", _positive, "must be > 0"),
    },
    "clock": {
        "transition_frequency_hz": _Key(6.834682611e9, "float", _positive, "must be > 0"),
        "t_r_s": _Key(200e-6, "float", _positive, "must be > 0"),
        "t_cycle_s": _Key(9.0, "float", _positive, "must be > 0"),
        "n_cycles": _Key(20000, "int", lambda n: n >= 2, "must be >= 2"),
        "s0": _Key(1.75e4, "float", _positive, "must be > 0"),
        "contrast": _Key(1.0, "float", _unit_interval, "must be in (0, 1]"),
        "c_in": _Key(0.9, "float", _unit_interval, "must be in (0, 1]"),
        "contrast_factor": _Key(0.9, "float", _unit_interval, "must be in (0, 1]"),
        "excess_area": _Key(2.0, "float", _nonneg, "must be >= 0"),
        "zeta_net": _Key(1.0 / 2.8, "float", _positive, "must be > 0"),
        "input_states": _Key(
            list(_INPUT_STATES), "str_list",
            lambda xs: len(xs) >= 1 and all(x in _INPUT_STATES for x in xs)
            and len(set(xs)) == len(xs),
            f"must be distinct values from {_INPUT_STATES}",
        ),
        "tau_grid_cycles": _Key(
            [1, 2, 4, 8, 16, 32, 64, 100], "int_list",
            _cycles_ok, "must be strictly increasing integers >= 1",
        ),
        "noise": _NOISE_CLOCK,
    },
    "oracle": {
        "spins": _Key([25.0, 50.0, 100.0], "float_list",
                      lambda xs: all(x > 0 for x in xs), "spins must be positive"),
        "q_values": _Key([0.25, 0.5, 1.0], "float_list",
                         lambda xs: all(x > 0 for x in xs), "q values must be positive"),
        "warn_q": _Key(1.0, "float", _positive, "must be > 0"),
        "tolerance": _Key(0.05, "float", _positive, "must be > 0"),
    },
    "selftest": {
        "n_samples": _Key(200000, "int", lambda n: n >= 1000, "must be >= 1000"),
        "white_sigma": _Key(1e-9, "float", _positive, "must be > 0"),
        "rw_step_sigma": _Key(1e-12, "float", _positive, "must be > 0"),
        "white_tau_cycles": _Key([1, 2, 4, 8, 16, 32, 64], "int_list",
                                 _cycles_ok, "must be strictly increasing integers >= 1"),
        "rw_tau_cycles": _Key([8, 16, 32, 64, 128, 256, 512], "int_list",
                              _cycles_ok, "must be strictly increasing integers >= 1"),
        "white_slope_tolerance": _Key(0.02, "float", _positive, "must be > 0"),
        "rw_slope_tolerance": _Key(0.05, "float", _positive, "must be > 0"),
    },
}


def _coerce(value, key: _Key, path: str):
    kind = key.kind
    if kind == "bool":
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected a boolean, got {value!r}")
        return value
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
        return value
    if kind == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number, got {value!r}")
        return float(value)
    if kind == "str":
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string, got {value!r}")
        return value
    if kind.endswith("_list"):
        if not isinstance(value, list):
            raise ConfigError(f"{path}: expected an array, got {value!r}")
        elem = {"float_list": "float", "int_list": "int", "str_list": "str"}[kind]
        return [_coerce(v, _Key(None, elem), f"{path}[{i}]") for i, v in enumerate(value)]
    raise AssertionError(kind)


def _resolve_table(data: dict, schema: dict, path: str, out: dict) -> dict:
    for name in data:
        if name not in schema:
            where = f"{path}.{name}" if path else name
            raise ConfigError(f"{where}: unknown key")
    resolved = {}
    for name, entry in schema.items():
        where = f"{path}.{name}" if path else name
        if isinstance(entry, dict):
            sub = data.get(name, {})
            if not isinstance(sub, dict):
                raise ConfigError(f"{where}: expected a table")
            resolved[name] = _resolve_table(sub, entry, where, out)
            continue
        if name in data:
            value = _coerce(data[name], entry, where)
        else:
            value = entry.default
        if entry.check is not None and not entry.check(value):
            raise ConfigError(f"{where}: {entry.msg}, got {value!r}")
        resolved[name] = value
        out[where] = value
    return resolved


@dataclass(frozen=True)
class LifetimeSection:
    n_shots: int
    t_r_grid_s: tuple
    presets: tuple
    subtract_readout_variance: bool
    fit_t_max_s: float


@dataclass(frozen=True)
class ClockSection:
    transition_frequency_hz: float
    t_r_s: float
    t_cycle_s: float
    n_cycles: int
    s0: float
    contrast: float
    c_in: float
    contrast_factor: float
    excess_area: float
    zeta_net: float
    input_states: tuple
    tau_grid_cycles: tuple
    noise: NoiseModel

    @property
    def omega0(self) -> float:
        return 2.0 * math.pi * self.transition_frequency_hz


@dataclass(frozen=True)
class OracleSection:
    spins: tuple
    q_values: tuple
    warn_q: float
    tolerance: float


@dataclass(frozen=True)
class SelftestSection:
    n_samples: int
    white_sigma: float
    rw_step_sigma: float
    white_tau_cycles: tuple
    rw_tau_cycles: tuple
    white_slope_tolerance: float
    rw_slope_tolerance: float


@dataclass(frozen=True)
class ExperimentConfig:
    master_seed: int
    out_dir: str
    s0: float
    c_in: float
    zeta0_target: float
    excess_area: float
    contrast_factor: float
    noise: NoiseModel
    lifetime: LifetimeSection
    clock: ClockSection
    oracle: OracleSection
    selftest: SelftestSection
    resolved: tuple  # ordered (dotted_key, value) pairs, post-override


def _noise_model(tbl: dict) -> NoiseModel:
    d = tbl["drift"]
    return NoiseModel(
        var_omega=tbl["var_omega_rad2_per_s2"],
        t_coh=tbl["t_coh_s"],
        readout_var=tbl["readout_var_spin2"],
        field_coeff=tbl["field_coeff_hz_per_gauss"],
        drift=DriftProcess(
            enabled=d["enabled"],
            amplitude=d["amplitude"],
            units=d["units"],
            correlation_time_s=d["correlation_time_s"],
        ),
        contrast_decay_shape=tbl["contrast_decay_shape"],
    )


def load_config(path=None, *, seed_override=None, out_override=None) -> ExperimentConfig:
    """Parse and validate ``path`` (or use pure defaults when None)."""
    data = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                data = tomli.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        except tomli.TOMLDecodeError as exc:
            raise ConfigError(f"invalid TOML in {path}: {exc}") from exc

    flat: dict = {}
    tbl = _resolve_table(data, _SCHEMA, "", flat)
    if seed_override is not None:
        if seed_override < 0:
            raise ConfigError(f"master_seed: must be >= 0, got {seed_override}")
        tbl["master_seed"] = flat["master_seed"] = int(seed_override)
    if out_override is not None:
        tbl["out_dir"] = flat["out_dir"] = out_override

    life = tbl["lifetime"]
    clk = tbl["clock"]
    return ExperimentConfig(
        master_seed=tbl["master_seed"],
        out_dir=tbl["out_dir"],
        s0=tbl["ensemble"]["s0"],
        c_in=tbl["ensemble"]["c_in"],
        zeta0_target=tbl["squeezing"]["zeta0_target"],
        excess_area=tbl["squeezing"]["excess_area"],
        contrast_factor=tbl["squeezing"]["contrast_factor"],
        noise=_noise_model(tbl["noise"]),
        lifetime=LifetimeSection(
            n_shots=life["n_shots"],
            t_r_grid_s=tuple(life["t_r_grid_s"]),
            presets=tuple(life["presets"]),
            subtract_readout_variance=life["subtract_readout_variance"],
            fit_t_max_s=life["fit_t_max_s"],
        ),
        clock=ClockSection(
            transition_frequency_hz=clk["transition_frequency_hz"],
            t_r_s=clk["t_r_s"],
            t_cycle_s=clk["t_cycle_s"],
            n_cycles=clk["n_cycles"],
            s0=clk["s0"],
            contrast=clk["contrast"],
            c_in=clk["c_in"],
            contrast_factor=clk["contrast_factor"],
            excess_area=clk["excess_area"],
            zeta_net=clk["zeta_net"],
            input_states=tuple(clk["input_states"]),
            tau_grid_cycles=tuple(clk["tau_grid_cycles"]),
            noise=_noise_model(clk["noise"]),
        ),
        oracle=OracleSection(
            spins=tuple(tbl["oracle"]["spins"]),
            q_values=tuple(tbl["oracle"]["q_values"]),
            warn_q=tbl["oracle"]["warn_q"],
            tolerance=tbl["oracle"]["tolerance"],
        ),
        selftest=SelftestSection(
            n_samples=tbl["selftest"]["n_samples"],
            white_sigma=tbl["selftest"]["white_sigma"],
            rw_step_sigma=tbl["selftest"]["rw_step_sigma"],
            white_tau_cycles=tuple(tbl["selftest"]["white_tau_cycles"]),
            rw_tau_cycles=tuple(tbl["selftest"]["rw_tau_cycles"]),
            white_slope_tolerance=tbl["selftest"]["white_slope_tolerance"],
            rw_slope_tolerance=tbl["selftest"]["rw_slope_tolerance"],
        ),
        resolved=tuple(flat.items()),
    )


def default_config(**overrides) -> ExperimentConfig:
    return load_config(None, **overrides)
