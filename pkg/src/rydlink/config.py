"""Experiment configuration: TOML schema, validation, defaults, presets.

The config file is a single TOML document; every key is addressed by its
dotted path (e.g. ``node_b.eta_store``).  Unknown keys are rejected and
range violations name the offending path.  Defaults describe the ideal
pipeline: every efficiency 1, every noise knob 0.
"""

from __future__ import annotations

import hashlib
import sys
from dataclasses import dataclass, field, fields, replace
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - version shim
    import tomli as tomllib

from .detection import DetectorParams
from .superatom import NodeParams, Timeline

SCHEMA_VERSION = 1

SPD_IDS = ("spd1", "spd2", "spd3", "spd4", "spd5", "spd6")

#: Detector wiring: (plus, minus) detector ids per analysis path.
PATH_DETECTORS = {
    "node_a": ("spd1", "spd2"),
    "herald": ("spd3", "spd4"),
    "node_b": ("spd5", "spd6"),
}


class ConfigError(ValueError):
    """Raised for unparsable, unknown, or out-of-range configuration."""


@dataclass(frozen=True)
class NodeSettings:
    """Per-node efficiencies and noise knobs.

    ``eta_patch`` drives the herald (read-and-patch) emission;
    ``source_emission`` drives the input-photon emission when the node acts
    as the source; ``emission_crosstalk`` is the early/late cross-talk
    probability applied to every photon the node emits.
    """

    eta_store: float = 1.0
    eta_retrieve: float = 1.0
    eta_patch: float = 1.0
    source_emission: float = 1.0
    emission_crosstalk: float = 0.0
    excitation_error: float = 0.0
    dephasing_lifetime: float = 1.4e-6
    dephasing_model: str = "gaussian"
    read_phase: float = 0.0

    def params(self) -> NodeParams:
        return NodeParams(
            eta_store=self.eta_store,
            eta_retrieve=self.eta_retrieve,
            dephasing_lifetime=self.dephasing_lifetime,
            excitation_error=self.excitation_error,
            read_phase=self.read_phase,
            dephasing_model=self.dephasing_model,
        )


def _default_phase_grid() -> tuple[float, ...]:
    import numpy as np

    return tuple(float(x) for x in np.linspace(0.0, 2.0 * np.pi, 13))


@dataclass(frozen=True)
class ExperimentConfig:
    """All efficiencies, noise parameters, timings, shot counts and seeds."""

    schema_version: int = SCHEMA_VERSION
    mode: str = "analytic"
    shots: int = 100_000
    seed: int = 0
    eta_t: float = 1.0
    theta0: float = 0.0
    herald_basis_convention: str = "retain_with_correction"
    bootstrap_resamples: int = 0
    phase_grid: tuple[float, ...] = field(default_factory=_default_phase_grid)
    node_a: NodeSettings = field(default_factory=NodeSettings)
    node_b: NodeSettings = field(default_factory=NodeSettings)
    timeline: Timeline = field(default_factory=Timeline)
    detectors: Mapping[str, DetectorParams] = field(
        default_factory=lambda: {spd: DetectorParams() for spd in SPD_IDS}
    )

    def __post_init__(self) -> None:
        if self.mode not in ("analytic", "sampled"):
            raise ConfigError(f"mode: must be 'analytic' or 'sampled', got {self.mode!r}")
        if self.shots < 1:
            raise ConfigError("shots: must be >= 1")
        if self.herald_basis_convention not in ("retain_with_correction", "discard_minus"):
            raise ConfigError(
                "herald_basis_convention: must be 'retain_with_correction' or 'discard_minus'"
            )
        if not self.phase_grid:
            raise ConfigError("phase_grid: must be nonempty")
        if not 0.0 <= self.eta_t <= 1.0:
            raise ConfigError(f"eta_t: value {self.eta_t} outside [0, 1]")
        if self.bootstrap_resamples < 0:
            raise ConfigError("bootstrap_resamples: must be >= 0")
        missing = set(SPD_IDS) - set(self.detectors)
        if missing:
            raise ConfigError(f"detectors: missing {sorted(missing)}")

    def detector(self, spd: str) -> DetectorParams:
        return self.detectors[spd]

    def canonical_lines(self) -> list[str]:
        """Flat, sorted ``path = value`` lines; the hash input."""
        out: list[str] = []

        def emit(prefix: str, value: Any) -> None:
            if isinstance(value, (NodeSettings, Timeline, DetectorParams)):
                for f in fields(value):
                    emit(f"{prefix}.{f.name}", getattr(value, f.name))
            elif isinstance(value, Mapping):
                for key in sorted(value):
                    emit(f"{prefix}.{key}", value[key])
            elif isinstance(value, tuple):
                out.append(f"{prefix} = [{', '.join(repr(v) for v in value)}]")
            else:
                out.append(f"{prefix} = {value!r}")

        for f in fields(self):
            emit(f.name, getattr(self, f.name))
        return sorted(out)

    def config_hash(self) -> str:
        digest = hashlib.sha256("\n".join(self.canonical_lines()).encode())
        return digest.hexdigest()[:16]

    def with_overrides(self, **kwargs: Any) -> "ExperimentConfig":
        return replace(self, **kwargs)


# ---------------------------------------------------------------------------
# schema-driven loading

_UNIT = ("float", 0.0, 1.0)
_ANGLE = ("float", None, None)

#: dotted path -> (type, min, max); None bounds mean unbounded.
_NODE_SCHEMA = {
    "eta_store": _UNIT,
    "eta_retrieve": _UNIT,
    "eta_patch": _UNIT,
    "source_emission": _UNIT,
    "emission_crosstalk": _UNIT,
    "excitation_error": _UNIT,
    "dephasing_lifetime": ("float", 0.0, None),
    "dephasing_model": ("choice", ("gaussian", "exponential")),
    "read_phase": _ANGLE,
}

_SCHEMA: dict[str, tuple] = {
    "schema_version": ("int", 1, 1),
    "mode": ("choice", ("analytic", "sampled")),
    "shots": ("int", 1, None),
    "seed": ("int", 0, 2**64 - 1),
    "eta_t": _UNIT,
    "theta0": _ANGLE,
    "herald_basis_convention": (
        "choice",
        ("retain_with_correction", "discard_minus"),
    ),
    "bootstrap_resamples": ("int", 0, None),
    "phase_grid": ("float_list", None, None),
    "timeline.bin_separation": ("float", 0.0, None),
    "timeline.storage_hold": ("float", 0.0, None),
    "timeline.patch_to_retrieval": ("float", 0.0, None),
    "timeline.remote_idle": ("float", 0.0, None),
}
for _node in ("node_a", "node_b"):
    for _key, _spec in _NODE_SCHEMA.items():
        _SCHEMA[f"{_node}.{_key}"] = _spec
for _spd in SPD_IDS:
    _SCHEMA[f"detectors.{_spd}.efficiency"] = _UNIT
    _SCHEMA[f"detectors.{_spd}.dark_prob"] = _UNIT


def _flatten(data: Mapping[str, Any], prefix: str = "") -> dict[str, Any]:
    flat: dict[str, Any] = {}
    for key, value in data.items():
        path = f"{prefix}{key}"
        if isinstance(value, Mapping):
            flat.update(_flatten(value, f"{path}."))
        else:
            flat[path] = value
    return flat


def _validate(path: str, value: Any) -> Any:
    spec = _SCHEMA[path]
    kind = spec[0]
    if kind == "choice":
        if value not in spec[1]:
            raise ConfigError(f"{path}: must be one of {spec[1]}, got {value!r}")
        return value
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
    elif kind == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number, got {value!r}")
        value = float(value)
    elif kind == "float_list":
        if not isinstance(value, list) or not value:
            raise ConfigError(f"{path}: expected a nonempty list of numbers")
        try:
            return tuple(float(v) for v in value)
        except (TypeError, ValueError):
            raise ConfigError(f"{path}: expected a nonempty list of numbers") from None
    lo, hi = spec[1], spec[2]
    if lo is not None and value < lo:
        raise ConfigError(f"{path}: value {value} below minimum {lo}")
    if hi is not None and value > hi:
        raise ConfigError(f"{path}: value {value} above maximum {hi}")
    return value


def config_from_mapping(data: Mapping[str, Any]) -> ExperimentConfig:
    flat = _flatten(data)
    unknown = sorted(set(flat) - set(_SCHEMA))
    if unknown:
        raise ConfigError(f"unknown configuration key(s): {', '.join(unknown)}")
    values = {path: _validate(path, raw) for path, raw in flat.items()}

    def node(prefix: str) -> NodeSettings:
        kwargs = {
            key: values[f"{prefix}.{key}"]
            for key in _NODE_SCHEMA
            if f"{prefix}.{key}" in values
        }
        return NodeSettings(**kwargs)

    timeline_kwargs = {
        key.split(".", 1)[1]: values[key]
        for key in values
        if key.startswith("timeline.")
    }
    detectors = {}
    for spd in SPD_IDS:
        detectors[spd] = DetectorParams(
            efficiency=values.get(f"detectors.{spd}.efficiency", 1.0),
            dark_prob=values.get(f"detectors.{spd}.dark_prob", 0.0),
        )
    top = {
        key: values[key]
        for key in (
            "schema_version",
            "mode",
            "shots",
            "seed",
            "eta_t",
            "theta0",
            "herald_basis_convention",
            "bootstrap_resamples",
            "phase_grid",
        )
        if key in values
    }
    try:
        return ExperimentConfig(
            node_a=node("node_a"),
            node_b=node("node_b"),
            timeline=Timeline(**timeline_kwargs),
            detectors=detectors,
            **top,
        )
    except (ConfigError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None


def load_config(path: str | Path) -> ExperimentConfig:
    """Parse and validate a TOML config file.

    Parse errors carry the file name and line information; validation errors
    name the offending dotted key path.
    """
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    try:
        data = tomllib.loads(raw.decode("utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"parse error in {path}: {exc}") from None
    return config_from_mapping(data)


def load_preset(name: str) -> ExperimentConfig:
    """Load a preset shipped with the package (e.g. ``reference``)."""
    ref = resources.files("rydlink").joinpath(f"presets/{name}.toml")
    try:
        text = ref.read_text()
    except FileNotFoundError:
        raise ConfigError(f"no preset named {name!r}") from None
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:  # pragma: no cover - shipped file
        raise ConfigError(f"parse error in preset {name}: {exc}") from None
    return config_from_mapping(data)


def ideal_config(**overrides: Any) -> ExperimentConfig:
    """The all-efficiencies-one, zero-noise configuration.

    Timings keep their physical defaults; dephasing is disabled through an
    effectively infinite lifetime.
    """
    no_dephasing = NodeSettings(dephasing_lifetime=1e9)
    base: dict[str, Any] = {"node_a": no_dephasing, "node_b": no_dephasing}
    base.update(overrides)
    return ExperimentConfig(**base)
