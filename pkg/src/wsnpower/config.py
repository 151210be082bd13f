"""Experiment configuration: TOML ingestion, defaults, and model assembly.

Configs are nested key-value tables with explicit units in key names
(`_mw`, `_J`, `_db`). Every key has a default; any key may be overridden.
Keys that describe one sensor accept either a shared scalar or a list with
one entry per sensor (quantizer boundaries: one list, or a list of lists).
Parsing normalizes a user table against the defaults, so serialize/parse
round-trips are exact identities on the normalized form.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .divergence_reward import RewardOptions
from .energy_model import BatterySpec, build_harvest_chain
from .errors import ConfigError
from .fading_channel import (
    ChannelParams,
    QuantizerMethod,
    QuantizerSpec,
    build_channel_fsmc,
    design_mmae_thresholds,
    design_moe_thresholds,
)
from .network import NetworkModel, SensorModel
from .sensing import (
    DeploymentModel,
    SensingParams,
    censor_stats_fixed,
    censor_stats_random_disk,
)

DEFAULTS: dict = {
    "network": {"n": 3, "p_tot_mw": 5.0, "eta": 0.9, "noise_var_mw": 1.0},
    "energy": {
        "rho": 0.5,
        "levels_cells": [0, 2, 4, 6],
        "capacity_K": 6,
        "cell_energy_J": 5e-4,
        "slot_s": 1.0,
    },
    "sensing": {
        "snr_s_db": 3.0,
        "obs_noise_var": 1.0,
        "pd_bar": 0.9,
        "priors": [0.5, 0.5],
    },
    "deployment": {"kind": "fixed"},
    "channel": {
        "mean_square_gain": 1.0,
        "doppler_product": 0.05,
        "quantizer": {"method": "moe", "levels": 4},
    },
    "solver": {
        "eps1": 1e-4,
        "eps2": 1e-2,
        "beta0": 0.5,
        "max_sweeps": 100_000,
        "max_dual_iters": 500,
    },
    "mc": {"runs": 10_000, "seed": 1234, "warmup": 100, "fusion": "genie"},
    "reward": {
        "normalization": "slice",
        "conditioning": "state",
        "omega_form": "derived",
    },
}

_SCHEMA: dict[str, set[str]] = {
    "network": {"n", "p_tot_mw", "eta", "noise_var_mw"},
    "energy": {"rho", "levels_cells", "capacity_K", "cell_energy_J", "slot_s"},
    "sensing": {"snr_s_db", "amplitude", "obs_noise_var", "pd_bar", "theta", "priors"},
    "deployment": {"kind", "p0_dbw", "r0_m", "r1_m"},
    "channel": {"mean_square_gain", "doppler_product", "quantizer"},
    "channel.quantizer": {"method", "levels", "boundaries"},
    "solver": {"eps1", "eps2", "beta0", "max_sweeps", "max_dual_iters"},
    "mc": {"runs", "seed", "warmup", "fusion"},
    "reward": {"normalization", "conditioning", "omega_form"},
    "sweep": {"axis", "values"},
}

# Keys where a user-supplied alternative displaces the defaulted one.
_EXCLUSIVE = {
    "sensing": [("snr_s_db", "amplitude"), ("pd_bar", "theta")],
}

# Sweep axis -> the config key it overrides. Integer axes are coerced.
SWEEP_AXES: dict[str, str] = {
    "p_tot_mw": "network.p_tot_mw",
    "capacity_k": "energy.capacity_K",
    "n": "network.n",
    "snr_s_db": "sensing.snr_s_db",
    "levels": "channel.quantizer.levels",
    "eta": "network.eta",
    "rho": "energy.rho",
    "cell_energy_j": "energy.cell_energy_J",
    "p0_dbw": "deployment.p0_dbw",
}
_INT_AXES = {"capacity_k", "n", "levels"}


def _check_keys(table: dict, path: str) -> None:
    allowed = _SCHEMA.get(path)
    if allowed is None:
        raise ConfigError(f"unknown config section [{path}]")
    for key, value in table.items():
        if key not in allowed:
            raise ConfigError(f"unknown config key {path}.{key}")
        if isinstance(value, dict):
            _check_keys(value, f"{path}.{key}")


def _merge(defaults: dict, user: dict, section: str) -> dict:
    merged: dict = {}
    skip = set()
    for default_key, alt_key in _EXCLUSIVE.get(section, []):
        if default_key in user and alt_key in user:
            raise ConfigError(
                f"config keys {section}.{default_key} and {section}.{alt_key} "
                "are mutually exclusive"
            )
        if alt_key in user:
            skip.add(default_key)
    for key, value in defaults.items():
        if key in skip:
            continue
        if isinstance(value, dict):
            merged[key] = _merge(value, user.get(key, {}), f"{section}.{key}" if section else key)
        else:
            merged[key] = user.get(key, value)
    for key, value in user.items():
        if key not in merged and key not in skip:
            merged[key] = value
    return merged


def normalize(user: dict) -> dict:
    """Validates key names and fills defaults; returns the canonical tree."""
    if not isinstance(user, dict):
        raise ConfigError("config root must be a table")
    for section, table in user.items():
        if not isinstance(table, dict):
            raise ConfigError(f"config section [{section}] must be a table")
        _check_keys(table, section)
    merged = {}
    for section, defaults in DEFAULTS.items():
        merged[section] = _merge(defaults, user.get(section, {}), section)
    if "sweep" in user:
        merged["sweep"] = dict(user["sweep"])
    return merged


def _toml_scalar(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, list):
        return "[" + ", ".join(_toml_scalar(v) for v in value) + "]"
    raise ConfigError(f"cannot serialize config value {value!r}")


def _dump_table(data: dict, path: str, lines: list[str]) -> None:
    scalars = {k: v for k, v in data.items() if not isinstance(v, dict)}
    tables = {k: v for k, v in data.items() if isinstance(v, dict)}
    if scalars or not tables:
        if path:
            lines.append(f"[{path}]")
        for key in sorted(scalars):
            lines.append(f"{key} = {_toml_scalar(scalars[key])}")
        lines.append("")
    for key in sorted(tables):
        _dump_table(tables[key], f"{path}.{key}" if path else key, lines)


@dataclass(frozen=True)
class ExperimentConfig:
    """A normalized configuration tree (defaults already applied)."""

    data: dict

    @classmethod
    def from_dict(cls, user: dict) -> "ExperimentConfig":
        return cls(data=normalize(user))

    @classmethod
    def from_toml(cls, path) -> "ExperimentConfig":
        try:
            with open(path, "rb") as fh:
                user = tomllib.load(fh)
        except tomllib.TOMLDecodeError as e:
            raise ConfigError(f"cannot parse {path}: {e}") from e
        return cls.from_dict(user)

    def to_toml(self) -> str:
        lines: list[str] = []
        for section in sorted(self.data):
            _dump_table(self.data[section], section, lines)
        while lines and lines[-1] == "":
            lines.pop()
        return "\n".join(lines) + "\n"

    def write(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_toml())

    def override(self, dotted_key: str, value) -> "ExperimentConfig":
        """Returns a copy with one (existing or schema-valid) key replaced."""
        parts = dotted_key.split(".")
        section_path = ".".join(parts[:-1])
        if parts[-1] not in _SCHEMA.get(section_path, set()):
            raise ConfigError(f"unknown config key {dotted_key}")
        data = json.loads(json.dumps(self.data))
        node = data
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = value
        return ExperimentConfig(data=normalize(data))

    # -- typed accessors -------------------------------------------------

    @property
    def n_sensors(self) -> int:
        return int(self.data["network"]["n"])

    def solver_kwargs(self) -> dict:
        s = self.data["solver"]
        return {
            "eps1": float(s["eps1"]),
            "eps2": float(s["eps2"]),
            "beta0": float(s["beta0"]),
            "max_sweeps": int(s["max_sweeps"]),
            "max_dual_iters": int(s["max_dual_iters"]),
        }

    def mc_params(self) -> dict:
        m = self.data["mc"]
        return {
            "runs": int(m["runs"]),
            "seed": int(m["seed"]),
            "warmup": int(m["warmup"]),
            "fusion": str(m["fusion"]),
        }

    def sweep_spec(self) -> tuple[str, list]:
        if "sweep" not in self.data:
            raise ConfigError("config has no [sweep] section")
        sweep = self.data["sweep"]
        axis = sweep.get("axis")
        values = sweep.get("values")
        if axis not in SWEEP_AXES:
            raise ConfigError(
                f"sweep.axis must be one of {sorted(SWEEP_AXES)}, got {axis!r}"
            )
        if not isinstance(values, list) or not values:
            raise ConfigError("sweep.values must be a nonempty list")
        if axis in _INT_AXES:
            values = [int(v) for v in values]
        return axis, values


def _per_sensor(value, index: int, n: int, key: str):
    if isinstance(value, list):
        if len(value) != n:
            raise ConfigError(
                f"{key} lists one value per sensor; expected {n}, got {len(value)}"
            )
        return value[index]
    return value


def _build_quantizer(q_cfg: dict, index: int, n: int, gamma: float) -> QuantizerSpec:
    method = str(q_cfg["method"]).lower()
    levels = int(q_cfg["levels"])
    if method == "moe":
        return design_moe_thresholds(levels, gamma)
    if method == "mmae":
        return design_mmae_thresholds(levels, gamma)
    if method == "explicit":
        if "boundaries" not in q_cfg:
            raise ConfigError("explicit quantizer needs channel.quantizer.boundaries")
        bounds = q_cfg["boundaries"]
        if bounds and isinstance(bounds[0], list):
            bounds = _per_sensor(bounds, index, n, "channel.quantizer.boundaries")
        if len(bounds) != levels:
            raise ConfigError(
                f"explicit boundaries list {len(bounds)} values but levels={levels}"
            )
        return QuantizerSpec(
            levels=levels,
            boundaries=tuple(float(b) for b in bounds) + (float("inf"),),
            method=QuantizerMethod.EXPLICIT,
        )
    raise ConfigError(f"unknown quantizer method {method!r}")


def _build_sensing(s_cfg: dict) -> SensingParams:
    priors = s_cfg["priors"]
    if not isinstance(priors, list) or len(priors) != 2:
        raise ConfigError("sensing.priors must be a [null, alt] pair")
    kwargs = {
        "prior_null": float(priors[0]),
        "prior_alt": float(priors[1]),
        "pd_bar": float(s_cfg["pd_bar"]) if "pd_bar" in s_cfg else None,
        "threshold": float(s_cfg["theta"]) if "theta" in s_cfg else None,
    }
    noise_var = float(s_cfg["obs_noise_var"])
    if "snr_s_db" in s_cfg:
        return SensingParams.from_snr_db(
            float(s_cfg["snr_s_db"]), obs_noise_var=noise_var, **kwargs
        )
    return SensingParams(
        signal_amplitude=float(s_cfg["amplitude"]), obs_noise_var=noise_var, **kwargs
    )


def _build_deployment(d_cfg: dict) -> DeploymentModel:
    kind = str(d_cfg["kind"])
    if kind == "fixed":
        return DeploymentModel.fixed()
    if kind == "random_disk":
        for key in ("p0_dbw", "r0_m", "r1_m"):
            if key not in d_cfg:
                raise ConfigError(f"random_disk deployment needs deployment.{key}")
        return DeploymentModel(
            kind="random_disk",
            source_power=10.0 ** (float(d_cfg["p0_dbw"]) / 10.0),
            r0_m=float(d_cfg["r0_m"]),
            r1_m=float(d_cfg["r1_m"]),
        )
    raise ConfigError(f"unknown deployment kind {kind!r}")


def build_network(config: ExperimentConfig) -> NetworkModel:
    """Assembles the full network model a config describes."""
    data = config.data
    n = config.n_sensors
    if n < 1:
        raise ConfigError(f"network.n must be >= 1, got {n}")
    e_cfg, c_cfg, s_cfg = data["energy"], data["channel"], data["sensing"]
    battery_shared = {
        "capacity": int(e_cfg["capacity_K"]),
        "cell_energy_j": float(e_cfg["cell_energy_J"]),
        "slot_s": float(e_cfg["slot_s"]),
    }
    levels_cells = [int(v) for v in e_cfg["levels_cells"]]
    sensing = _build_sensing(s_cfg)
    deployment = _build_deployment(data["deployment"])
    if deployment.kind == "fixed":
        censor = censor_stats_fixed(sensing)
    else:
        censor = censor_stats_random_disk(sensing, deployment)
    sensors = []
    for k in range(n):
        gamma = float(_per_sensor(c_cfg["mean_square_gain"], k, n, "channel.mean_square_gain"))
        doppler = float(_per_sensor(c_cfg["doppler_product"], k, n, "channel.doppler_product"))
        quantizer = _build_quantizer(c_cfg["quantizer"], k, n, gamma)
        params = ChannelParams(
            mean_square_gain=gamma,
            doppler_product=doppler,
            noise_variance=float(data["network"]["noise_var_mw"]),
        )
        rho = float(_per_sensor(e_cfg["rho"], k, n, "energy.rho"))
        harvest = build_harvest_chain(rho, len(levels_cells), levels_cells)
        sensors.append(
            SensorModel(
                quantizer=quantizer,
                channel=build_channel_fsmc(quantizer, params),
                channel_params=params,
                battery=BatterySpec(**battery_shared),
                harvest=harvest,
                sensing=sensing,
                deployment=deployment,
                censor=censor,
            )
        )
    r_cfg = data["reward"]
    options = RewardOptions(
        normalization=str(r_cfg["normalization"]),
        conditioning=str(r_cfg["conditioning"]),
        omega_form=str(r_cfg["omega_form"]),
    )
    return NetworkModel(
        sensors=tuple(sensors),
        p_tot_mw=float(data["network"]["p_tot_mw"]),
        discount=float(data["network"]["eta"]),
        noise_var=float(data["network"]["noise_var_mw"]),
        options=options,
    )
