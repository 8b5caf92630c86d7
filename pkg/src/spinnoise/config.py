"""Flat key=value configuration files, presets, and run manifests.

Every physical quantity carries a unit suffix in its key name; angular
frequencies are derived on load.  A run manifest is just a config file with
every key resolved (defaults + preset + file + overrides), sufficient to
reproduce the run bit-exactly.
"""

from __future__ import annotations

import importlib.resources
import math
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .core import SystemParams
from .detection import DetectorParams
from .exceptions import ConfigError
from .integrator import TrajectoryConfig

SCAN_AXES = ("theta", "b_field", "detuning")
DETECTION_MODES = ("rnd", "end", "both")


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "1", "yes", "on"):
        return True
    if lowered in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_optional_float(text: str):
    return None if text.strip() == "" else float(text)


def _parse_optional_int(text: str):
    return None if text.strip() == "" else int(float(text))


# key -> (parser, default) ; defaults are the far-detuned bench-like point.
KEY_SPECS: dict[str, tuple] = {
    # physics
    "b_gauss": (float, 1.0),
    "rabi_hz": (float, 40e6),
    "theta_deg": (float, 0.0),
    "delta_hz": (float, 1.5e9),
    "gamma0_hz": (float, 1.6e6),
    "gamma_opt_hz": (float, 0.8e9),
    "gamma_t_hz": (float, 30e3),
    "gamma_r_hz": (float, 30e3),
    "n_atoms": (float, 3.4e9),
    "kappa": (float, 1.0),
    "mean_field_au": (float, 1.0),
    # trajectory
    "dt_s": (float, 1.0 / 18e6),
    "n_steps": (lambda s: int(float(s)), 131072),
    "burn_in_steps": (_parse_optional_int, None),   # blank -> 5/gamma_t
    "record_stride": (lambda s: int(float(s)), 1),
    "n_trajectories": (lambda s: int(float(s)), 64),
    "master_seed": (lambda s: int(float(s)), 12345),
    # detector (key casing is part of the file format)
    "responsivity_A_per_W": (float, 0.7),
    "transimpedance_V_per_A": (float, 5e3),
    "bandwidth_Hz": (float, 9e6),
    "input_power_W": (float, 1e-3),
    # spectral
    "rbw_hz": (float, 91e3),
    "vbw_hz": (_parse_optional_float, None),
    "absolute_units": (_parse_bool, False),
    # scan
    "scan_axis": (str, "theta"),
    "scan_start": (float, 0.0),
    "scan_stop": (float, 90.0),
    "scan_step": (float, 7.5),
    "detection_mode": (str, "both"),
}


@dataclass
class ExperimentConfig:
    """Fully resolved settings for a simulation, scan, or absorption run."""

    b_gauss: float
    rabi_hz: float
    theta_deg: float
    delta_hz: float
    gamma0_hz: float
    gamma_opt_hz: float
    gamma_t_hz: float
    gamma_r_hz: float
    n_atoms: float
    kappa: float
    mean_field_au: float
    dt_s: float
    n_steps: int
    burn_in_steps: int | None
    record_stride: int
    n_trajectories: int
    master_seed: int
    responsivity_A_per_W: float
    transimpedance_V_per_A: float
    bandwidth_Hz: float
    input_power_W: float
    rbw_hz: float
    vbw_hz: float | None
    absolute_units: bool
    scan_axis: str
    scan_start: float
    scan_stop: float
    scan_step: float
    detection_mode: str

    def __post_init__(self):
        if self.scan_axis not in SCAN_AXES:
            raise ConfigError(
                f"scan_axis must be one of {SCAN_AXES}, got {self.scan_axis!r}"
            )
        if self.detection_mode not in DETECTION_MODES:
            raise ConfigError(
                f"detection_mode must be one of {DETECTION_MODES}, got {self.detection_mode!r}"
            )
        if self.scan_step <= 0:
            raise ConfigError(f"scan_step must be > 0, got {self.scan_step}")
        if self.scan_stop < self.scan_start:
            raise ConfigError("scan_stop must be >= scan_start")
        if self.n_trajectories < 1:
            raise ConfigError(f"n_trajectories must be >= 1, got {self.n_trajectories}")

    def system_params(self, axis_value: float | None = None) -> SystemParams:
        """SystemParams for one scan point; axis_value overrides the scanned knob."""
        b_gauss = self.b_gauss
        theta_deg = self.theta_deg
        delta_hz = self.delta_hz
        if axis_value is not None:
            if self.scan_axis == "theta":
                theta_deg = axis_value
            elif self.scan_axis == "b_field":
                b_gauss = axis_value
            else:
                delta_hz = axis_value
        return SystemParams.from_lab_units(
            b_gauss=b_gauss,
            rabi_hz=self.rabi_hz,
            theta_deg=theta_deg,
            delta_hz=delta_hz,
            gamma0_hz=self.gamma0_hz,
            gamma_opt_hz=self.gamma_opt_hz,
            gamma_t_hz=self.gamma_t_hz,
            gamma_r_hz=self.gamma_r_hz,
            n_atoms=self.n_atoms,
            kappa=self.kappa,
        )

    def resolved_burn_in(self) -> int:
        """Configured burn-in, or 5 transit lifetimes' worth of steps."""
        if self.burn_in_steps is not None:
            return self.burn_in_steps
        gamma_t = 2.0 * math.pi * self.gamma_t_hz
        if gamma_t == 0.0:
            return 0
        return math.ceil(5.0 / (gamma_t * self.dt_s))

    def trajectory_config(self) -> TrajectoryConfig:
        return TrajectoryConfig(
            dt=self.dt_s,
            n_steps=self.n_steps,
            burn_in_steps=self.resolved_burn_in(),
            record_stride=self.record_stride,
        )

    def detector_params(self) -> DetectorParams:
        return DetectorParams(
            responsivity=self.responsivity_A_per_W,
            transimpedance=self.transimpedance_V_per_A,
            bandwidth=self.bandwidth_Hz,
            input_power=self.input_power_W,
        )

    def axis_values(self) -> np.ndarray:
        """Scan grid start, start+step, ..., up to scan_stop (inclusive)."""
        count = int(math.floor((self.scan_stop - self.scan_start) / self.scan_step + 1.5))
        values = self.scan_start + self.scan_step * np.arange(count)
        return values[values <= self.scan_stop + 1e-9 * self.scan_step]

    def modes(self) -> list[str]:
        return ["rnd", "end"] if self.detection_mode == "both" else [self.detection_mode]

    def resolved_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _format_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    """Raw key=value pairs of one file; comments and blank lines skipped."""
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{source}:{lineno}: expected key=value, got {line!r}")
        key, _, value = stripped.partition("=")
        raw[key.strip()] = value.split("#", 1)[0].strip()
    return raw


def preset_path(name: str) -> Path:
    """Path of a shipped preset; accepts 'fig3_end' or 'fig3_end.cfg'."""
    filename = name if name.endswith(".cfg") else name + ".cfg"
    resource = importlib.resources.files("spinnoise") / "presets" / filename
    if not resource.is_file():
        available = sorted(
            p.name for p in (importlib.resources.files("spinnoise") / "presets").iterdir()
        )
        raise ConfigError(f"unknown preset {name!r}; shipped presets: {available}")
    return Path(str(resource))


def load_config(
    path: str | Path | None = None,
    preset: str | None = None,
    overrides: list[str] | None = None,
) -> ExperimentConfig:
    """Resolve defaults, an optional preset, an optional file, and overrides.

    Later sources win.  Unknown keys and malformed values raise ConfigError
    naming the offending key.
    """
    raw: dict[str, str] = {}
    if preset:
        raw.update(parse_config_text(preset_path(preset).read_text(), source=preset))
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        raw.update(parse_config_text(path.read_text(), source=str(path)))
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override must look like key=value, got {item!r}")
        key, _, value = item.partition("=")
        raw[key.strip()] = value.strip()

    values = {}
    for key, (parser, default) in KEY_SPECS.items():
        if key in raw:
            try:
                values[key] = parser(raw.pop(key))
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"invalid value for key {key!r}: {exc}") from exc
        else:
            values[key] = default
    if raw:
        unknown = ", ".join(sorted(raw))
        raise ConfigError(f"unknown config key(s): {unknown}")
    return ExperimentConfig(**values)


def write_manifest(cfg: ExperimentConfig, path: str | Path) -> None:
    """Write the fully resolved configuration; reloadable via load_config."""
    resolved = cfg.resolved_dict()
    # Freeze the derived burn-in so a rerun is bit-identical even if the
    # derivation rule changes.
    resolved["burn_in_steps"] = cfg.resolved_burn_in()
    lines = [f"{key}={_format_value(resolved[key])}" for key in KEY_SPECS]
    with open(path, "w", newline="\n") as handle:
        handle.write("\n".join(lines) + "\n")
