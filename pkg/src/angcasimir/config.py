"""Run configuration (TOML) with unit-suffixed keys.

Physics parameters have no defaults: a missing key is an error, and so is
any key the schema does not know. Only numerical knobs fall back to
defaults.
"""
from __future__ import annotations

import math
import sys
from dataclasses import dataclass
from pathlib import Path

from .corrugation import Geometry
from .errors import ConfigError
from .gradexp import BetaModel, load_alpha_table
from .lifshitz import Environment, QuadratureSpec
from .materials import IDEAL_METAL, gold, load_material

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

REQUIRED = object()

SCHEMA = {
    "material": REQUIRED,
    "geometry": {
        "R_um": REQUIRED, "period_nm": REQUIRED, "A1_nm": REQUIRED, "A2_nm": REQUIRED,
        "Lx_um": REQUIRED, "Ly_um": REQUIRED, "delta1_nm": REQUIRED, "delta2_nm": REQUIRED,
    },
    "environment": {"T_K": REQUIRED, "mode": "finite-T"},
    "alpha": {"provider": REQUIRED, "beta": None, "table": None},
    "quadrature": {"rtol": 1e-7, "tail_threshold": 1e-10, "cutoff": 0.0},
    "force_curve": {
        "theta_deg": REQUIRED, "z_min_nm": REQUIRED, "z_max_nm": REQUIRED,
        "z_step_nm": 1.0, "model": "both", "roughness": True,
    },
    "diff_pfa": {
        "theta_deg": REQUIRED, "z_min_nm": REQUIRED, "z_max_nm": REQUIRED,
        "z_step_nm": 1.0, "ideal_metal": True, "temperature_contrast": True,
        "roughness": True,
    },
    "calibrate": {
        "theta_deg": REQUIRED, "V0_mV": None, "z0_nm": None, "kprime_pN_per_mV": None,
        "m_nm_per_mV": REQUIRED, "voltages_mV": None, "noise_pN": 0.0,
        "repetitions": 1, "z_piezo_step_nm": 0.2, "z_max_nm": 2000.0,
        "drift_mV_per_s": 0.0, "dataset": None, "fit_span_nm": 300.0,
        "extract_z_min_nm": 127.0, "extract_z_max_nm": 300.0, "casimir": True,
    },
    "oracle": {"z_nm": REQUIRED, "nx": 128, "neta": 64},
    "material_eval": {"zeta_min_eV": REQUIRED, "zeta_max_eV": REQUIRED, "points": 200},
}

COMMAND_SECTIONS = {
    "force-curve": ("material", "geometry", "environment", "alpha", "force_curve"),
    "diff-pfa": ("material", "geometry", "environment", "alpha", "diff_pfa"),
    "calibrate": ("material", "geometry", "environment", "alpha", "calibrate"),
    "oracle": ("geometry", "oracle"),
    "material-eval": ("material", "material_eval"),
}


@dataclass
class RunConfig:
    raw: dict
    base: Path

    @classmethod
    def load(cls, path):
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            raw = tomllib.loads(path.read_text())
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        return cls.from_dict(raw, path.parent)

    @classmethod
    def from_dict(cls, raw, base="."):
        unknown = set(raw) - set(SCHEMA)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        for name, schema in SCHEMA.items():
            if isinstance(schema, dict) and name in raw:
                if not isinstance(raw[name], dict):
                    raise ConfigError(f"[{name}] must be a table")
                extra = set(raw[name]) - set(schema)
                if extra:
                    raise ConfigError(f"unknown keys in [{name}]: {sorted(extra)}")
        return cls(raw, Path(base))

    def require(self, command):
        for name in COMMAND_SECTIONS[command]:
            if name not in self.raw:
                raise ConfigError(f"'{command}' needs a [{name}] section" if name != "material"
                                  else f"'{command}' needs a 'material' entry")

    def section(self, name):
        schema = SCHEMA[name]
        given = self.raw.get(name, {})
        out = {}
        for key, default in schema.items():
            if key in given:
                out[key] = given[key]
            elif default is REQUIRED:
                raise ConfigError(f"missing [{name}] {key}")
            else:
                out[key] = default
        return out

    def path(self, p):
        p = Path(p)
        return p if p.is_absolute() else self.base / p

    def material(self):
        m = self.raw.get("material", REQUIRED)
        if m is REQUIRED:
            raise ConfigError("missing 'material'")
        if m == "gold":
            return gold()
        if m == "ideal-metal":
            return IDEAL_METAL
        return load_material(self.path(m))

    def geometry(self, theta_deg=0.0):
        g = self.section("geometry")
        try:
            vals = {k: float(v) for k, v in g.items()}
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"[geometry]: {exc}") from exc
        return Geometry(theta_rad=math.radians(theta_deg), **vals)

    def environment(self):
        e = self.section("environment")
        if e["mode"] == "zero-T":
            return Environment.zero()
        return Environment(float(e["T_K"]), e["mode"])

    def quadrature(self):
        q = self.section("quadrature")
        return QuadratureSpec(float(q["rtol"]), float(q["tail_threshold"]), float(q["cutoff"]))

    def alpha(self):
        a = self.section("alpha")
        if a["provider"] == "beta":
            if a["beta"] is None:
                raise ConfigError("[alpha] provider 'beta' needs 'beta'")
            return BetaModel(float(a["beta"]))
        if a["provider"] == "table":
            if a["table"] is None:
                raise ConfigError("[alpha] provider 'table' needs 'table'")
            return load_alpha_table(self.path(a["table"]))
        raise ConfigError(f"unknown alpha provider {a['provider']!r}")
