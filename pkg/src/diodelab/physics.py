"""Physical constants, laser/atom configuration and the 2x2 potential matrix.

All quantities are SI internally. Peak laser strengths are angular
frequencies (s^-1); the configuration file uses the customary units of
10^6 s^-1 ("Msi") and micrometres.
"""
from __future__ import annotations

import dataclasses
import enum
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

HBAR = 1.054571817e-34  # J s
AMU = 1.66053907e-27  # kg

MSI = 1.0e6  # s^-1
MICRON = 1.0e-6  # m

# atomic weights in amu
SPECIES = {
    "Ne20_1797": 20.1797,
}
DEFAULT_SPECIES = "Ne20_1797"


class ConfigError(ValueError):
    """Invalid laser/atom configuration."""


@dataclass(frozen=True)
class PhysicalConstants:
    hbar: float = HBAR
    amu: float = AMU

    def __post_init__(self):
        if not (self.hbar > 0 and self.amu > 0):
            raise ConfigError("physical constants must be strictly positive")


CONSTANTS = PhysicalConstants()
NEON_MASS = SPECIES[DEFAULT_SPECIES] * AMU


class CaseLabel(enum.Enum):
    """Which state-selective mirrors are switched on."""

    CASE0 = "0"
    CASE1 = "1"
    CASE2 = "2"
    CASE12 = "12"

    @classmethod
    def from_strengths(cls, w1_hat: float, w2_hat: float) -> "CaseLabel":
        if w1_hat > 0 and w2_hat > 0:
            return cls.CASE12
        if w1_hat > 0:
            return cls.CASE1
        if w2_hat > 0:
            return cls.CASE2
        return cls.CASE0


@dataclass(frozen=True)
class DiodeConfig:
    """Three Gaussian lasers acting on a two-level atom.

    The ground-state mirror ``w1_hat`` is centred at ``+d``, the excited-state
    mirror ``w2_hat`` at ``-d`` and the resonant pump ``omega_hat`` at
    ``delta``. All Gaussians share the width ``delta_x``.
    """

    omega_hat: float
    w1_hat: float
    w2_hat: float
    d: float
    delta: float = 0.0
    delta_x: float = 15.0 * MICRON
    mass: float = NEON_MASS
    hbar: float = HBAR

    def __post_init__(self):
        for name in ("omega_hat", "w1_hat", "w2_hat", "d", "delta", "delta_x", "mass", "hbar"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ConfigError(f"{name} must be a finite number, got {value!r}")
        for name in ("omega_hat", "w1_hat", "w2_hat"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")
        if self.d <= 0:
            raise ConfigError("d must be positive")
        if self.delta_x <= 0:
            raise ConfigError("delta_x must be positive")
        if self.mass <= 0:
            raise ConfigError("mass must be positive")
        if self.hbar <= 0:
            raise ConfigError("hbar must be positive")

    @classmethod
    def from_units(
        cls,
        omega_hat_Msi: float,
        w1_hat_Msi: float,
        w2_hat_Msi: float,
        d_um: float,
        delta_um: float = 0.0,
        delta_x_um: float = 15.0,
        species: str = DEFAULT_SPECIES,
    ) -> "DiodeConfig":
        try:
            mass = SPECIES[species] * AMU
        except KeyError:
            raise ConfigError(f"unknown species {species!r}; known: {sorted(SPECIES)}") from None
        try:
            return cls(
                omega_hat=float(omega_hat_Msi) * MSI,
                w1_hat=float(w1_hat_Msi) * MSI,
                w2_hat=float(w2_hat_Msi) * MSI,
                d=float(d_um) * MICRON,
                delta=float(delta_um) * MICRON,
                delta_x=float(delta_x_um) * MICRON,
                mass=mass,
            )
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc

    @property
    def case(self) -> CaseLabel:
        return CaseLabel.from_strengths(self.w1_hat, self.w2_hat)

    @property
    def species(self) -> str | None:
        for name, amu in SPECIES.items():
            if math.isclose(amu * AMU, self.mass, rel_tol=1e-12):
                return name
        return None

    def replace(self, **changes) -> "DiodeConfig":
        return dataclasses.replace(self, **changes)

    def to_units(self) -> dict:
        """Echo in configuration-file units (round-trips through `from_units`)."""
        out = {
            "omega_hat_Msi": self.omega_hat / MSI,
            "w1_hat_Msi": self.w1_hat / MSI,
            "w2_hat_Msi": self.w2_hat / MSI,
            "d_um": self.d / MICRON,
            "delta_um": self.delta / MICRON,
            "delta_x_um": self.delta_x / MICRON,
        }
        species = self.species
        if species is not None:
            out["species"] = species
        else:
            out["mass_kg"] = self.mass
        return out


_CONFIG_KEYS = {"omega_hat_Msi", "w1_hat_Msi", "w2_hat_Msi", "d_um", "delta_um", "delta_x_um", "species"}
_REQUIRED_KEYS = {"omega_hat_Msi", "w1_hat_Msi", "w2_hat_Msi", "d_um"}


def config_from_mapping(data: dict) -> DiodeConfig:
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a JSON object")
    unknown = set(data) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
    missing = _REQUIRED_KEYS - set(data)
    if missing:
        raise ConfigError(f"missing configuration keys: {sorted(missing)}")
    for key, value in data.items():
        if key != "species" and (isinstance(value, bool) or not isinstance(value, (int, float))):
            raise ConfigError(f"{key} must be a number")
    return DiodeConfig.from_units(**data)


def load_config(path: str | Path) -> DiodeConfig:
    """Read a JSON configuration file and convert it to SI."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read configuration {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path}: {exc}") from exc
    return config_from_mapping(data)


def gaussian_profile(x, x0: float, delta_x: float):
    """exp(-(x - x0)^2 / (2 delta_x^2)); works on scalars and arrays."""
    if not delta_x > 0:
        raise ValueError("delta_x must be positive")
    z = (np.asarray(x, dtype=float) - x0) / delta_x
    out = np.exp(-0.5 * z * z)
    return float(out) if out.ndim == 0 else out


def laser_profiles(x, cfg: DiodeConfig):
    """Position-dependent strengths (W1, W2, Omega) in s^-1."""
    w1 = cfg.w1_hat * gaussian_profile(x, cfg.d, cfg.delta_x)
    w2 = cfg.w2_hat * gaussian_profile(x, -cfg.d, cfg.delta_x)
    omega = cfg.omega_hat * gaussian_profile(x, cfg.delta, cfg.delta_x)
    return w1, w2, omega


def matrix_from_profiles(
    x,
    w1: Callable,
    w2: Callable,
    omega: Callable,
    hbar: float = HBAR,
) -> np.ndarray:
    """(hbar/2) [[W1, Omega], [Omega, W2]] for arbitrary profile callables.

    Returns an array of shape ``x.shape + (2, 2)``.
    """
    x = np.asarray(x, dtype=float)
    a, b, c = (np.broadcast_to(np.asarray(f(x), dtype=float), x.shape) for f in (w1, omega, w2))
    out = np.empty(x.shape + (2, 2))
    out[..., 0, 0] = a
    out[..., 0, 1] = b
    out[..., 1, 0] = b
    out[..., 1, 1] = c
    return 0.5 * hbar * out


def potential_matrix(x, cfg: DiodeConfig) -> np.ndarray:
    """Potential matrix M(x) in joules, shape ``np.shape(x) + (2, 2)``."""
    return matrix_from_profiles(
        x,
        lambda y: cfg.w1_hat * gaussian_profile(y, cfg.d, cfg.delta_x),
        lambda y: cfg.w2_hat * gaussian_profile(y, -cfg.d, cfg.delta_x),
        lambda y: cfg.omega_hat * gaussian_profile(y, cfg.delta, cfg.delta_x),
        hbar=cfg.hbar,
    )


def kinematics(v: float, cfg: DiodeConfig) -> tuple[float, float]:
    """Kinetic energy E_v = m v^2 / 2 and wavenumber k = m v / hbar."""
    if not v > 0:
        raise ValueError(f"velocity must be positive, got {v}")
    return 0.5 * cfg.mass * v * v, cfg.mass * v / cfg.hbar


def simulation_domain(cfg: DiodeConfig, margin: float = 10.0) -> tuple[float, float]:
    """Symmetric truncation interval reaching ``margin`` widths past the outermost centre."""
    if margin < 5:
        raise ValueError(f"margin must be at least 5 widths, got {margin}")
    reach = cfg.d + abs(cfg.delta) + margin * cfg.delta_x
    return -reach, reach
