"""Dielectric response of metals at imaginary frequency.

Parameters are kept in eV (``hbar*omega``) and converted to rad/s only when a
permittivity is evaluated.
"""
from __future__ import annotations

import sys
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

from ..constants import HBAR_C_EV_NM, HBAR_EV_S
from ..errors import (ConfigError, DomainError, SingularityError,
                      UnsupportedOperationError)

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

VARIANTS = ("ideal-metal", "plasma", "drude", "drude-oscillators")


@dataclass(frozen=True)
class Oscillator:
    """Lorentz term ``f / (w**2 + zeta**2 + zeta*g)``."""

    f_eV2: float
    hbar_omega_eV: float
    hbar_g_eV: float

    def __post_init__(self):
        if self.f_eV2 < 0 or self.hbar_omega_eV <= 0 or self.hbar_g_eV < 0:
            raise DomainError(f"invalid oscillator {self}")


@dataclass(frozen=True)
class Material:
    model: str
    hbar_omega_p_eV: float = 0.0
    hbar_gamma_eV: float = 0.0
    oscillators: tuple[Oscillator, ...] = field(default_factory=tuple)
    name: str = ""

    def __post_init__(self):
        if self.model not in VARIANTS:
            raise DomainError(f"unknown material model {self.model!r}")
        if self.model == "ideal-metal":
            return
        if not self.hbar_omega_p_eV > 0:
            raise DomainError("plasma frequency must be positive")
        if self.hbar_gamma_eV < 0:
            raise DomainError("relaxation must be non-negative")
        if self.model == "plasma" and self.hbar_gamma_eV != 0:
            raise DomainError("plasma model has no relaxation")
        if len(self.oscillators) > 6:
            raise DomainError("at most six oscillators are supported")
        if self.model != "drude-oscillators" and self.oscillators:
            raise DomainError(f"{self.model} model takes no oscillators")
        object.__setattr__(self, "oscillators", tuple(self.oscillators))

    @property
    def is_ideal(self):
        return self.model == "ideal-metal"

    @property
    def omega_p(self):
        """Plasma frequency in rad/s."""
        return self.hbar_omega_p_eV / HBAR_EV_S

    @property
    def gamma(self):
        return self.hbar_gamma_eV / HBAR_EV_S

    @property
    def dissipative(self):
        """True when the Drude relaxation is non-zero (TE n=0 term vanishes)."""
        return not self.is_ideal and self.hbar_gamma_eV > 0

    def as_plasma(self):
        """Same material with the relaxation switched off."""
        model = "drude-oscillators" if self.oscillators else "plasma"
        return replace(self, model=model, hbar_gamma_eV=0.0)

    def without_oscillators(self):
        if self.is_ideal:
            return self
        model = "plasma" if self.hbar_gamma_eV == 0 else "drude"
        return replace(self, model=model, oscillators=())


IDEAL_METAL = Material("ideal-metal", name="ideal metal")


def epsilon_imag(material: Material, zeta):
    """Permittivity ``eps(i*zeta)`` for ``zeta`` in rad/s (scalar or array).

    Returns ``inf`` for the ideal metal; reflection coefficients treat that
    as perfect reflection.
    """
    z = np.asarray(zeta, dtype=float)
    if np.any(z < 0):
        raise DomainError("imaginary frequency must be non-negative")
    if material.is_ideal:
        out = np.full(z.shape, np.inf)
        return out if out.ndim else float(out)
    # work in eV so that the oscillator strengths keep their tabulated units
    x = z * HBAR_EV_S
    wp = material.hbar_omega_p_eV
    g = material.hbar_gamma_eV
    if g == 0 and np.any(x == 0):
        raise SingularityError(
            "eps(i0) diverges for zero relaxation; use the n=0 Matsubara limits")
    with np.errstate(divide="ignore"):
        eps = 1.0 + wp * wp / (x * (x + g))
    for osc in material.oscillators:
        eps = eps + osc.f_eV2 / (osc.hbar_omega_eV ** 2 + x * x + x * osc.hbar_g_eV)
    return eps if eps.ndim else float(eps)


def plasma_wavelength(material: Material) -> float:
    """``2*pi*c/omega_p`` in nm."""
    if material.is_ideal:
        raise UnsupportedOperationError("ideal metal has no plasma wavelength")
    return 2 * np.pi * HBAR_C_EV_NM / material.hbar_omega_p_eV


def parse_material(text: str, name: str = "") -> Material:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"material file {name}: {exc}") from exc
    known = {"model", "name", "hbar_omega_p_eV", "hbar_gamma_eV", "oscillator"}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"material file {name}: unknown keys {sorted(unknown)}")
    if "model" not in data:
        raise ConfigError(f"material file {name}: missing 'model'")
    oscs = []
    for block in data.get("oscillator", []):
        extra = set(block) - {"f_eV2", "hbar_omega_eV", "hbar_g_eV"}
        if extra:
            raise ConfigError(f"oscillator block: unknown keys {sorted(extra)}")
        try:
            oscs.append(Oscillator(float(block["f_eV2"]), float(block["hbar_omega_eV"]),
                                   float(block["hbar_g_eV"])))
        except KeyError as exc:
            raise ConfigError(f"oscillator block missing {exc}") from exc
    return Material(
        model=data["model"],
        hbar_omega_p_eV=float(data.get("hbar_omega_p_eV", 0.0)),
        hbar_gamma_eV=float(data.get("hbar_gamma_eV", 0.0)),
        oscillators=tuple(oscs),
        name=data.get("name", name),
    )


def load_material(path) -> Material:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"material file not found: {path}")
    return parse_material(path.read_text(), name=path.stem)


def gold() -> Material:
    """The bundled Au model (Drude plus six core-electron oscillators)."""
    text = resources.files(__name__).joinpath("gold.cfg").read_text()
    return parse_material(text, name="gold")
