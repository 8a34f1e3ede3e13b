"""Providers for the gradient coefficient ``alpha(d)`` of the derivative expansion.

``alpha`` multiplies ``grad H . grad H`` (dimensionless), so it carries the
units of the plate energy per area.

The beta model ``alpha = beta * U(d)`` is a stand-in: the material-dependent
coefficient for Au at room temperature comes from a full scattering
calculation that is not reproduced here. Its default ``beta`` was chosen by
matching the measured correlation force at 130 nm; treat it as a fitted
parameter, not a prediction.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import ConfigError, DomainError, RangeError
from .lifshitz import DEFAULT_SPEC, Environment, QuadratureSpec, energy_per_area
from .materials import Material

DEFAULT_BETA = 0.205


@dataclass(frozen=True)
class BetaModel:
    beta: float = DEFAULT_BETA

    def alpha(self, d_nm, material, env, spec=DEFAULT_SPEC, energy=None):
        """``beta * U(d)``; ``energy`` may supply a precomputed ``U`` callable."""
        if np.any(np.asarray(d_nm) <= 0):
            raise DomainError("separation must be positive")
        if self.beta == 0:
            return np.zeros_like(np.asarray(d_nm, dtype=float)) + 0.0
        if energy is None:
            u = np.vectorize(lambda d: energy_per_area(material, d, env, spec))(d_nm)
        else:
            u = energy(d_nm)
        return self.beta * u


@dataclass(frozen=True, eq=False)
class TabulatedAlpha:
    d_nm: tuple
    values: tuple

    def __post_init__(self):
        d = np.asarray(self.d_nm, dtype=float)
        if d.ndim != 1 or len(d) != len(self.values):
            raise DomainError("table columns must have equal length")
        if len(d) < 4:
            raise DomainError("alpha table needs at least four rows")
        if np.any(np.diff(d) <= 0):
            raise DomainError("alpha table must be strictly increasing in d")
        object.__setattr__(self, "_interp", PchipInterpolator(d, np.asarray(self.values, float)))

    def __hash__(self):
        return hash((self.d_nm, self.values))

    def __eq__(self, other):
        return (isinstance(other, TabulatedAlpha)
                and (self.d_nm, self.values) == (other.d_nm, other.values))

    @property
    def d_range(self):
        return self.d_nm[0], self.d_nm[-1]

    def alpha(self, d_nm, material=None, env=None, spec=None, energy=None):
        d = np.asarray(d_nm, dtype=float)
        lo, hi = self.d_range
        if np.any(d < lo) or np.any(d > hi):
            raise RangeError(f"d outside tabulated alpha range [{lo}, {hi}] nm")
        out = np.asarray(self._interp(d))
        knots = np.asarray(self.d_nm, dtype=float)
        idx = np.clip(np.searchsorted(knots, d), 0, len(knots) - 1)
        hit = knots[idx] == d
        out = np.where(hit, np.asarray(self.values)[idx], out)
        return float(out) if out.ndim == 0 else out


def load_alpha_table(path) -> TabulatedAlpha:
    """Two whitespace/comma separated columns ``d_nm alpha_J_per_m2``; ``#`` comments."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"alpha table not found: {path}")
    rows = []
    for line in path.read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.replace(",", " ").split()
        if len(parts) != 2:
            raise ConfigError(f"{path}: expected two columns, got {line!r}")
        try:
            rows.append((float(parts[0]), float(parts[1])))
        except ValueError:
            if not rows:  # header line
                continue
            raise ConfigError(f"{path}: bad row {line!r}") from None
    d, a = zip(*rows)
    return TabulatedAlpha(tuple(d), tuple(a))


def alpha(provider, d_nm, material: Material, env: Environment,
          spec: QuadratureSpec = DEFAULT_SPEC):
    return provider.alpha(d_nm, material, env, spec)
