"""Model configuration and the flat key=value config format."""

from __future__ import annotations

import configparser
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

from .atom import PotentialSpec
from .kernels import KernelContext


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    """Physical and numerical parameters shared by the CLI commands.

    ``switching_T = 0`` means a constant charge (no adiabatic ramp).
    """

    dim: int = 3
    mass: float = 1.0
    charge: float = 0.1
    omega0: float = 0.05
    potential: str = "harmonic"
    quartic_g: float = 1.0
    alpha: float = 1e4
    eta: float = 1.0
    switching_T: float = 0.0
    t_on: float = 0.0
    grid_n: int = 32
    grid_L: float = 0.0
    v_max: float = 0.1
    seed: int = 12345

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ConfigError(f"dim must be 2 or 3, got {self.dim}")
        if not (self.mass > 0 and math.isfinite(self.mass)):
            raise ConfigError("mass must be positive")
        if not math.isfinite(self.charge):
            raise ConfigError("charge must be finite")
        if not self.alpha > 0:
            raise ConfigError("alpha must be positive")
        if not self.eta > 0:
            raise ConfigError("eta must be positive")
        if self.switching_T < 0:
            raise ConfigError("switching_T must be >= 0")
        if self.grid_n < 8:
            raise ConfigError("grid_n must be >= 8")
        if self.grid_L < 0:
            raise ConfigError("grid_L must be >= 0")
        if self.potential not in ("harmonic", "quartic"):
            raise ConfigError(f"unknown potential {self.potential!r}")
        if self.potential == "harmonic" and not self.omega0 > 0:
            raise ConfigError("omega0 must be positive")
        if self.potential == "quartic" and self.dim != 2:
            raise ConfigError("quartic potential is supported in d=2 only")
        if self.potential == "quartic" and not self.quartic_g > 0:
            raise ConfigError("quartic_g must be positive")

    def potential_spec(self) -> PotentialSpec:
        try:
            if self.potential == "harmonic":
                return PotentialSpec.harmonic(self.dim, self.omega0, m=self.mass)
            return PotentialSpec.quartic(self.dim, self.quartic_g, m=self.mass)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def kernel_context(self, alpha: Optional[float] = None) -> KernelContext:
        return KernelContext(alpha=self.alpha if alpha is None else alpha, m=self.mass, eta=self.eta)

    @property
    def length_scale(self) -> float:
        """Ground-state width used to size the default grid."""
        if self.potential == "harmonic":
            return 1.0 / math.sqrt(self.mass * self.omega0)
        return (self.mass * self.quartic_g) ** (-1.0 / 6.0)

    @property
    def box(self) -> float:
        return self.grid_L if self.grid_L > 0 else 16.0 * self.length_scale

    def digest(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


_INT_KEYS = {"dim", "grid_n", "seed"}
_STR_KEYS = {"potential"}
_ALIASES = {"m": "mass", "q": "charge", "omega": "omega0", "g": "quartic_g", "d": "dim"}


def parse_config_text(text: str) -> ModelConfig:
    if not any(line.strip().startswith("[") for line in text.splitlines()):
        text = "[model]\n" + text
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"unparseable config: {exc}") from exc
    kw = {}
    known = {k.lower(): k for k in ModelConfig.__dataclass_fields__}
    for section in cp.sections():
        for key, raw in cp[section].items():
            key = _ALIASES.get(key, key)
            if key not in known:
                raise ConfigError(f"unknown key {key!r}")
            key = known[key]
            try:
                kw[key] = int(raw) if key in _INT_KEYS else raw.strip() if key in _STR_KEYS else float(raw)
            except ValueError as exc:
                raise ConfigError(f"bad value for {key}: {raw!r}") from exc
    return ModelConfig(**kw)


def load_config(path) -> ModelConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text)


@dataclass(frozen=True)
class PulseConfig:
    amplitude: float = 0.0
    center: float = 0.0
    width: float = 1.0
    omega: float = 0.05
    phase: float = 0.0
    polarization: tuple = field(default=(1.0, 0.0, 0.0))


def load_pulse(path, dim: int) -> PulseConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read pulse file {path}: {exc}") from exc
    if not any(line.strip().startswith("[") for line in text.splitlines()):
        text = "[pulse]\n" + text
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"unparseable pulse file: {exc}") from exc
    kw = {}
    for section in cp.sections():
        for key, raw in cp[section].items():
            if key not in PulseConfig.__dataclass_fields__:
                raise ConfigError(f"unknown pulse key {key!r}")
            try:
                if key == "polarization":
                    kw[key] = tuple(float(x) for x in raw.replace(",", " ").split())
                else:
                    kw[key] = float(raw)
            except ValueError as exc:
                raise ConfigError(f"bad pulse value for {key}: {raw!r}") from exc
    pol = kw.get("polarization", (1.0, 0.0, 0.0))
    pol = tuple(pol[:dim]) + (0.0,) * max(0, dim - len(pol))
    if not any(pol):
        raise ConfigError("polarization must be non-zero")
    kw["polarization"] = pol
    return PulseConfig(**kw)
