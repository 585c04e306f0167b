"""Run configuration read from JSON.

Every section is a frozen dataclass; keys missing from the file take the defaults below,
unknown keys are rejected with their full path. ``None`` for a length or a weight scale
means it is derived from omega at run time.
"""
# Standard Library
from __future__ import annotations

from collections.abc import Mapping
from dataclasses import asdict
from dataclasses import dataclass
from dataclasses import field
from dataclasses import fields
from dataclasses import replace
import json
import logging
from pathlib import Path
import types
from typing import Any
from typing import Union
from typing import get_args
from typing import get_origin
from typing import get_type_hints

# My Modules
from kink_stability.common.template import ConfigError

LOG_NAME = "kink_stability.config"
LOG = logging.getLogger(LOG_NAME)

SIMULATION_MODES = ("pure-y", "bump", "file")
MAX_SEED = 2**64 - 1


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ConfigError(message)


@dataclass(frozen=True)
class GridConfig:
    """Analysis grid; the half length defaults to 40 / omega."""

    half_length: float | None = None
    points: int = 4001

    def __post_init__(self) -> None:
        """Check ranges."""
        _require(self.points >= 3, f"grid.points must be at least 3, got {self.points}")
        _require(
            self.half_length is None or self.half_length > 0,
            f"grid.half_length must be positive, got {self.half_length}",
        )


@dataclass(frozen=True)
class SpectralConfig:
    """Eigenvalue search bound and the tolerance of the internal mode check."""

    upper: float | None = None
    tolerance: float = 1e-6

    def __post_init__(self) -> None:
        """Check ranges."""
        _require(self.tolerance > 0, "spectral.tolerance must be positive")


@dataclass(frozen=True)
class DarbouxConfig:
    """Regularisation of the transform."""

    epsilon: float = 1e-2

    def __post_init__(self) -> None:
        """Check ranges."""
        _require(
            0 < self.epsilon < 1,
            f"darboux.epsilon must lie in (0, 1), got {self.epsilon}",
        )


@dataclass(frozen=True)
class VirialConfig:
    """Weight scales, the gamma scan and the size of the randomized probes."""

    A: float | None = None
    B: float | None = None
    gammas: tuple[float, ...] = (0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5)
    probes: int = 100

    def __post_init__(self) -> None:
        """Check ranges."""
        _require(
            all(0 < gamma < 1 for gamma in self.gammas),
            "virial.gammas must lie in (0, 1)",
        )
        _require(self.probes >= 1, "virial.probes must be positive")
        if self.A is not None and self.B is not None:
            _require(0 < self.B < self.A, "virial needs 0 < B < A")


@dataclass(frozen=True)
class FgrConfig:
    """Tolerance and required stability of the golden rule constant."""

    tolerance: float = 1e-6
    digits: int = 3

    def __post_init__(self) -> None:
        """Check ranges."""
        _require(self.tolerance > 0, "fgr.tolerance must be positive")
        _require(1 <= self.digits <= 12, "fgr.digits must lie in 1..12")


@dataclass(frozen=True)
class SimulationConfig:
    """Initial data, resolution, horizon and sponge of a nonlinear run."""

    mode: str = "pure-y"
    delta: float = 0.05
    delta_max: float = 0.5
    horizon: float = 400.0
    h_factor: float = 0.05
    length_factor: float = 200.0
    dt_factor: float = 0.4
    cadence: float = 0.5
    sponge_fraction: float = 0.2
    sponge_strength: float = 1.0
    bump_width: float = 2.0
    bump_center: float = 5.0
    initial_file: str | None = None
    window_factor: float = 10.0
    reflection_threshold: float = 1e-3

    def __post_init__(self) -> None:
        """Check ranges."""
        _require(
            self.mode in SIMULATION_MODES,
            f"simulation.mode must be one of {SIMULATION_MODES}",
        )
        _require(self.delta >= 0, "simulation.delta must be non-negative")
        _require(self.delta <= self.delta_max, "simulation.delta exceeds delta_max")
        _require(self.horizon > 0, "simulation.horizon must be positive")
        _require(
            self.h_factor > 0 and self.length_factor > 0,
            "simulation grid must be positive",
        )
        _require(0 < self.dt_factor <= 0.5, "simulation.dt_factor must lie in (0, 0.5]")
        _require(self.cadence > 0, "simulation.cadence must be positive")
        _require(
            0 <= self.sponge_fraction < 1,
            "simulation.sponge_fraction must lie in [0, 1)",
        )
        _require(self.sponge_strength >= 0, "simulation.sponge_strength must be >= 0")
        _require(self.bump_width > 0, "simulation.bump_width must be positive")
        _require(
            self.mode != "file" or self.initial_file is not None,
            "simulation.mode 'file' needs simulation.initial_file",
        )


@dataclass(frozen=True)
class RunConfig:
    """Everything one invocation needs."""

    potential: dict[str, Any] = field(default_factory=lambda: {"kind": "phi4"})
    grid: GridConfig = field(default_factory=GridConfig)
    spectral: SpectralConfig = field(default_factory=SpectralConfig)
    darboux: DarbouxConfig = field(default_factory=DarbouxConfig)
    virial: VirialConfig = field(default_factory=VirialConfig)
    fgr: FgrConfig = field(default_factory=FgrConfig)
    simulation: SimulationConfig = field(default_factory=SimulationConfig)
    output: str = "output"
    seed: int = 0
    jobs: int = 1

    def __post_init__(self) -> None:
        """Check ranges."""
        _require(
            0 <= self.seed <= MAX_SEED,
            f"seed must be an unsigned 64 bit integer, got {self.seed}",
        )
        _require(self.jobs >= 1, "jobs must be positive")
        _require("kind" in self.potential, "potential needs a kind")

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> RunConfig:
        """Build the configuration, rejecting unknown keys.

        Raises:
            ConfigError: unknown key, wrong type or value out of range
        """
        return _build(cls, data, "")

    @classmethod
    def load(cls, path: str | Path) -> RunConfig:
        """Read a JSON configuration file."""
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as err:
            raise ConfigError(f"cannot read {path}", str(err)) from err
        if not isinstance(data, dict):
            raise ConfigError(f"{path} must hold a JSON object")
        LOG.debug("loaded configuration from %s", path)
        return cls.from_dict(data)

    def to_dict(self) -> dict[str, Any]:
        """Return the effective configuration."""
        return asdict(self)

    def with_overrides(self, **changes: Any) -> RunConfig:
        """Return a copy with top level fields replaced; None values are ignored."""
        kept = {key: value for key, value in changes.items() if value is not None}
        return replace(self, **kept)

    def with_section(self, section: str, **changes: Any) -> RunConfig:
        """Return a copy with fields of one section replaced."""
        current = getattr(self, section)
        if isinstance(current, dict):
            return replace(self, **{section: {**current, **changes}})
        return replace(self, **{section: replace(current, **changes)})


def _coerce(kind: Any, value: Any, path: str) -> Any:
    origin = get_origin(kind)
    if origin in (Union, types.UnionType):
        options = [option for option in get_args(kind) if option is not type(None)]
        return None if value is None else _coerce(options[0], value, path)
    if isinstance(kind, type) and hasattr(kind, "__dataclass_fields__"):
        if not isinstance(value, Mapping):
            raise ConfigError(f"{path} must be an object")
        return _build(kind, value, f"{path}.")
    if origin is tuple:
        if not isinstance(value, list | tuple):
            raise ConfigError(f"{path} must be a list")
        return tuple(_coerce(get_args(kind)[0], item, path) for item in value)
    if origin is dict:
        if not isinstance(value, Mapping):
            raise ConfigError(f"{path} must be an object")
        return dict(value)
    try:
        if kind is bool or (kind is int and isinstance(value, bool)):
            raise TypeError(value)
        if kind is int and isinstance(value, float) and not value.is_integer():
            raise TypeError(value)
        return kind(value)
    except (TypeError, ValueError) as err:
        raise ConfigError(f"{path} has invalid value {value!r}") from err


def _build(cls: type, data: Mapping[str, Any], prefix: str) -> Any:
    hints = get_type_hints(cls)
    known = {item.name for item in fields(cls)}
    for key in data:
        if key not in known:
            raise ConfigError(f"unknown key {prefix}{key}")
    values = {
        key: _coerce(hints[key], value, f"{prefix}{key}") for key, value in data.items()
    }
    return cls(**values)
