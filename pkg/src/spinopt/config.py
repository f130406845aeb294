"""Run configuration: one YAML file with a section per pipeline stage.

Unknown keys are rejected with the full key path so typos cannot silently
fall back to defaults.  Command-line flags override individual entries after
the file is loaded.  All randomness in a run flows from the single top-level
seed.
"""

import copy
from dataclasses import dataclass

import numpy as np
import yaml

from .errors import ConfigError
from .fields import AntennaSpec, GridSpec, NVFrame
from .holography import HologramConfig
from .photophysics import RateModelParams, ReadoutWindow, saturation_pumping_rate
from .protocols import CWParams, EchoParams, RamseyParams

DEFAULTS = {
    "seed": 12345,
    "output_dir": "spinopt_out",
    "db_convention": "20log10",
    "protocol": "ramsey",
    "antenna": {
        "loop_radius_mm": 0.8,
        "trace_width_mm": 0.127,
        "feed_gap_mm": 0.2,
        "drive_current": 1.0,
        "evaluation_height_mm": 0.1125,
        "gap_azimuth_deg": 45.0,
    },
    "grid": {"width_mm": 5.0, "height_mm": 5.0, "nx": 500, "ny": 500},
    "frame": {"quantization_axis": [1.0, 1.0, 1.0]},
    "field": {"n_segments": 360, "import_path": None},
    "ramsey": {
        "t2_star_us": 1.0,
        "tau_us": 0.5,
        "p": 1.0,
        "contrast": 0.02,
        "n_avg": 1e5,
    },
    "echo": {
        "t2_star_us": 1.0,
        "t2_us": 10.0,
        "tau_us": 5.0,
        "p": 1.0,
        "contrast": 0.02,
        "n_avg": 1e5,
    },
    "cw": {
        "gamma1": 1e3,
        "gamma2_star": 2 * np.pi * 1e6,
        # pumping/coherence relaxation maxima tied to the five-level R_sat
        "gamma_p_max_over_rsat": 0.4,
        "gamma_c_max_over_rsat": 1.0,
        "r_max": 1e5,
        "a_over_b": 1.3,
        "omega0_hz": 2e5,
    },
    "rates": {"R": 41.07, "gamma": 67.4, "S0": 9.9, "S1": 91.6, "D0": 4.83, "D1": 2.11},
    "readout": {"t_readout_us": 0.3, "step_us": 0.001},
    "uniformity": {"targets": [0.999, 0.99, 0.90, 0.51], "shape": "contour"},
    "holography": {
        "grid_size": 512,
        "beam_waist_px": 120.0,
        "mixing": 0.55,
        "iterations": 300,
        "feedback_iterations": 19,
        "feedback_gain": 0.5,
        "feedback_refine_steps": 20,
        "aberration_amplitude_rad": 6.283185307179586,
    },
    "mc": {
        "shots": 100000,
        "lambda0": 1e4,
        "n_ensembles": 20,
        "max_sensors": 100,
        "map_downsample": 25,
    },
    "penalty": {
        "nonuniformity": 0.328,
        "mean_intensity": 1.5,
        "i_sat": 1.0,
        "t_readout_us": 0.15,
        "n_pixels": 20000,
    },
}


def _merge(defaults, override, path=""):
    out = copy.deepcopy(defaults)
    for key, value in (override or {}).items():
        where = f"{path}.{key}" if path else str(key)
        if key not in defaults:
            raise ConfigError(f"unknown configuration key: {where}")
        if isinstance(defaults[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{where} must be a mapping")
            out[key] = _merge(defaults[key], value, where)
        else:
            out[key] = value
    return out


@dataclass(frozen=True)
class RunConfig:
    """Validated configuration for a pipeline run."""

    raw: dict

    @property
    def seed(self) -> int:
        return int(self.raw["seed"])

    @property
    def output_dir(self) -> str:
        return self.raw["output_dir"]

    @property
    def db_convention(self) -> str:
        return self.raw["db_convention"]

    @property
    def protocol(self) -> str:
        return self.raw["protocol"]

    @property
    def import_path(self):
        return self.raw["field"]["import_path"]

    @property
    def n_segments(self) -> int:
        return int(self.raw["field"]["n_segments"])

    @property
    def uniformity_targets(self):
        return list(self.raw["uniformity"]["targets"])

    @property
    def uniformity_shape(self) -> str:
        return self.raw["uniformity"]["shape"]

    def antenna(self) -> AntennaSpec:
        a = self.raw["antenna"]
        return AntennaSpec(
            loop_radius_mm=a["loop_radius_mm"],
            trace_width_mm=a["trace_width_mm"],
            feed_gap_mm=a["feed_gap_mm"],
            drive_current=a["drive_current"],
            evaluation_height_mm=a["evaluation_height_mm"],
            gap_azimuth_rad=np.deg2rad(a["gap_azimuth_deg"]),
        )

    def grid(self) -> GridSpec:
        g = self.raw["grid"]
        return GridSpec(g["width_mm"], g["height_mm"], int(g["nx"]), int(g["ny"]))

    def frame(self) -> NVFrame:
        axis = np.asarray(self.raw["frame"]["quantization_axis"], dtype=float)
        return NVFrame(tuple(axis / np.linalg.norm(axis)))

    def ramsey_params(self) -> RamseyParams:
        r = self.raw["ramsey"]
        return RamseyParams(
            t2_star=r["t2_star_us"] * 1e-6,
            tau=r["tau_us"] * 1e-6,
            p=r["p"],
            contrast=r["contrast"],
            n_avg=r["n_avg"],
        )

    def echo_params(self) -> EchoParams:
        e = self.raw["echo"]
        return EchoParams(
            t2_star=e["t2_star_us"] * 1e-6,
            t2=e["t2_us"] * 1e-6,
            tau=e["tau_us"] * 1e-6,
            p=e["p"],
            contrast=e["contrast"],
            n_avg=e["n_avg"],
        )

    def cw_params(self) -> CWParams:
        c = self.raw["cw"]
        r_sat_hz = saturation_pumping_rate(self.rate_params()) * 1e6
        return CWParams(
            gamma1=c["gamma1"],
            gamma2_star=c["gamma2_star"],
            gamma_p_max=c["gamma_p_max_over_rsat"] * r_sat_hz,
            gamma_c_max=c["gamma_c_max_over_rsat"] * r_sat_hz,
            r_max=c["r_max"],
            a_over_b=c["a_over_b"],
            omega0=2 * np.pi * c["omega0_hz"],
        )

    def protocol_params(self, name=None):
        name = name or self.protocol
        if name == "ramsey":
            return self.ramsey_params()
        if name == "echo":
            return self.echo_params()
        if name == "cw":
            return self.cw_params()
        raise ConfigError(f"unknown protocol {name!r}")

    def rate_params(self) -> RateModelParams:
        return RateModelParams(**self.raw["rates"])

    def readout_window(self) -> ReadoutWindow:
        r = self.raw["readout"]
        return ReadoutWindow(r["t_readout_us"], r["step_us"])

    def holography_config(self) -> HologramConfig:
        h = self.raw["holography"]
        return HologramConfig(
            grid_size=int(h["grid_size"]),
            beam_waist_px=h["beam_waist_px"],
            mixing=h["mixing"],
            iterations=int(h["iterations"]),
            feedback_iterations=int(h["feedback_iterations"]),
            feedback_gain=h["feedback_gain"],
            feedback_refine_steps=int(h["feedback_refine_steps"]),
        )

    @property
    def aberration_amplitude(self) -> float:
        return float(self.raw["holography"]["aberration_amplitude_rad"])

    @property
    def mc(self) -> dict:
        return self.raw["mc"]

    @property
    def penalty(self) -> dict:
        return self.raw["penalty"]


def load_config(path=None, overrides=None) -> RunConfig:
    """Load a YAML config file, apply overrides, and validate all sections."""
    user = {}
    if path is not None:
        with open(path) as fh:
            user = yaml.safe_load(fh) or {}
        if not isinstance(user, dict):
            raise ConfigError("configuration file must contain a mapping")
    merged = _merge(DEFAULTS, user)
    merged = _merge(merged, overrides or {})
    if merged["protocol"] not in ("ramsey", "echo", "cw"):
        raise ConfigError(f"unknown protocol {merged['protocol']!r}")
    if merged["db_convention"] not in ("20log10", "10log10"):
        raise ConfigError("db_convention must be 20log10 or 10log10")
    cfg = RunConfig(merged)
    # construct every section once so invalid values fail at load time
    cfg.antenna(), cfg.grid(), cfg.frame(), cfg.rate_params()
    cfg.ramsey_params(), cfg.echo_params(), cfg.cw_params()
    cfg.readout_window(), cfg.holography_config()
    return cfg
