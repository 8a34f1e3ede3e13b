"""Casimir energy between crossed sinusoidal corrugations and the sphere force.

Plate profile ``h1(x) = A1 cos(2 pi x / L)``, sphere profile
``h2(x') = A2 cos(2 pi x' / L)`` with ``x' = x cos(theta) - y sin(theta)``,
local gap ``H = z + h1 - h2``. Energies are averaged over the finite imprint
``Lx * Ly`` centred at the origin; the sphere enters only through
``F = 2 pi R U``.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .constants import NM, PN, UM
from .errors import ContactError, DomainError, PrecisionError
from .gradexp import BetaModel
from .lifshitz import DEFAULT_SPEC, Environment, QuadratureSpec, energy_and_derivative, energy_table
from .materials import Material

MODELS = ("pfa", "derivative-expansion")


@dataclass(frozen=True)
class Geometry:
    R_um: float = 99.6
    period_nm: float = 570.5
    A1_nm: float = 40.2
    A2_nm: float = 14.6
    Lx_um: float = 14.0
    Ly_um: float = 14.0
    theta_rad: float = 0.0
    delta1_nm: float = 1.9
    delta2_nm: float = 2.9

    def __post_init__(self):
        if min(self.R_um, self.period_nm, self.Lx_um, self.Ly_um) <= 0:
            raise DomainError("R, period and imprint extents must be positive")
        if min(self.A1_nm, self.A2_nm, self.delta1_nm, self.delta2_nm) < 0:
            raise DomainError("amplitudes and roughness must be non-negative")
        if self.period_nm < 5 * max(self.A1_nm, self.A2_nm):
            warnings.warn("corrugation period is not large compared to the amplitudes; "
                          "the derivative expansion may be inaccurate", stacklevel=3)

    @classmethod
    def measured(cls, theta_deg=0.0, **kw):
        """The corrugated Au sphere/grating of the angle-resolved measurement."""
        return cls(theta_rad=math.radians(theta_deg), **kw)

    def with_angle(self, theta_rad):
        return replace(self, theta_rad=theta_rad)

    @property
    def theta_deg(self):
        return math.degrees(self.theta_rad)

    @property
    def k(self):
        return 2 * math.pi / self.period_nm

    @property
    def amplitude_sum(self):
        return self.A1_nm + self.A2_nm

    @property
    def roughness_sq(self):
        return self.delta1_nm ** 2 + self.delta2_nm ** 2


@dataclass
class ForceCurve:
    """Force magnitudes (positive = attraction) on a separation grid."""

    z_nm: np.ndarray
    F_pN: np.ndarray
    sigma_pN: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.z_nm = np.atleast_1d(np.asarray(self.z_nm, dtype=float))
        self.F_pN = np.atleast_1d(np.asarray(self.F_pN, dtype=float))
        self.sigma_pN = np.broadcast_to(np.asarray(self.sigma_pN, dtype=float),
                                        self.z_nm.shape).copy()
        if self.F_pN.shape != self.z_nm.shape:
            raise DomainError("z and F must have the same length")
        if np.any(np.diff(self.z_nm) <= 0):
            raise DomainError("separations must be strictly increasing")

    def __len__(self):
        return len(self.z_nm)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["z_nm", "F_pN", "sigma_pN"])
            for row in zip(self.z_nm, self.F_pN, self.sigma_pN):
                w.writerow([f"{v:.10g}" for v in row])

    @classmethod
    def from_csv(cls, path, **meta):
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(data[:, 0], data[:, 1], data[:, 2], dict(meta))


def _profiles(x, y, geom):
    k = geom.k
    c, s = math.cos(geom.theta_rad), math.sin(geom.theta_rad)
    xp = x * c - y * s
    h1 = geom.A1_nm * np.cos(k * x)
    h2 = geom.A2_nm * np.cos(k * xp)
    dh1 = -geom.A1_nm * k * np.sin(k * x)
    dh2 = -geom.A2_nm * k * np.sin(k * xp)
    return h1, h2, dh1, dh2


def local_separation(z_nm, x_nm, y_nm, geom: Geometry):
    """Local gap ``H`` in nm; raises ContactError where the surfaces touch."""
    x = np.asarray(x_nm, dtype=float)
    y = np.asarray(y_nm, dtype=float)
    h1, h2, _, _ = _profiles(x, y, geom)
    H = z_nm + h1 - h2
    bad = np.asarray(H <= 0)
    if bad.any():
        i = np.unravel_index(np.argmax(bad), bad.shape) if bad.ndim else ()
        xb = float(np.broadcast_to(x, bad.shape)[i])
        yb = float(np.broadcast_to(y, bad.shape)[i])
        raise ContactError(f"surfaces touch at x={xb:g} nm, y={yb:g} nm", xb, yb)
    return H if H.ndim else float(H)


def _gl_panels(length, n_panels, nodes):
    x, w = np.polynomial.legendre.leggauss(nodes)
    edges = np.linspace(-length / 2, length / 2, n_panels + 1)
    half = 0.5 * np.diff(edges)[:, None]
    pts = (edges[:-1, None] + half * (x + 1)).ravel()
    wts = (half * w).ravel() / length
    return pts, wts


def quadrature_grid(geom: Geometry, refine=1):
    """Tensor Gauss-Legendre nodes over the imprint with weights summing to 1.

    ``x``: panels no longer than one period, 16 nodes each. ``y``: panels no
    longer than the moire period ``L / sin(theta)``, 16 nodes each, at least
    32 nodes in total.
    """
    lx = geom.Lx_um * 1e3
    ly = geom.Ly_um * 1e3
    nx_pan = math.ceil(lx / geom.period_nm - 1e-9)
    xs, wx = _gl_panels(lx, nx_pan, 16 * refine)
    st = abs(math.sin(geom.theta_rad))
    ny_pan = max(1, math.ceil(ly * st / geom.period_nm - 1e-9)) if st > 0 else 1
    ny_nodes = max(16, math.ceil(32 / ny_pan)) * refine
    ys, wy = _gl_panels(ly, ny_pan, ny_nodes)
    return xs, wx, ys, wy


def _check_gap(z_nm, geom):
    if not z_nm > geom.amplitude_sum:
        raise ContactError(f"z = {z_nm} nm does not exceed A1 + A2 = {geom.amplitude_sum} nm")


def _table(z_nm, geom, material, env, spec):
    a = geom.amplitude_sum
    return energy_table(material, env, spec, float(z_nm - a), float(z_nm + a))


def _fields(z_nm, geom, refine):
    xs, wx, ys, wy = quadrature_grid(geom, refine)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    W = np.outer(wx, wy)
    h1, h2, dh1, dh2 = _profiles(X, Y, geom)
    H = local_separation(z_nm, X, Y, geom)
    return H, W, dh1, dh2


def u_pfa(z_nm, geom: Geometry, material: Material, env: Environment,
          alpha_provider=None, spec: QuadratureSpec = DEFAULT_SPEC, *, refine=1,
          table=None):
    """Area-averaged plate energy ``<U(H)>`` in J/m^2 (proximity approximation).

    ``table`` replaces the Lifshitz interpolant by any object with
    ``energy(H)`` and ``derivative(H)`` (H in nm).
    """
    _check_gap(z_nm, geom)
    if geom.amplitude_sum == 0 and table is None:
        return energy_and_derivative(material, z_nm, env, spec)[0]
    H, W, _, _ = _fields(z_nm, geom, refine)
    if table is None:
        table = _table(z_nm, geom, material, env, spec)
    return float(np.sum(W * table.energy(H)))


def u_pfa_uncorrelated(z_nm, geom: Geometry, material: Material, env: Environment,
                       spec: QuadratureSpec = DEFAULT_SPEC, n_phase=256):
    """Limit of ``u_pfa`` for an imprint infinitely long in ``y``.

    Along an unbounded ``y`` the sphere profile samples every phase relative
    to the plate profile, so its phase is averaged uniformly and the result
    no longer depends on the angle. The ``x`` window stays finite.
    """
    _check_gap(z_nm, geom)
    xs, wx, _, _ = quadrature_grid(geom)
    phase = 2 * np.pi * np.arange(n_phase) / n_phase
    H = (z_nm + geom.A1_nm * np.cos(geom.k * xs)[:, None]
         - geom.A2_nm * np.cos(phase)[None, :])
    table = _table(z_nm, geom, material, env, spec)
    return float(np.sum(wx[:, None] * table.energy(H)) / n_phase)


def u_corr(z_nm, geom: Geometry, material: Material, env: Environment,
           alpha_provider=None, spec: QuadratureSpec = DEFAULT_SPEC, *, refine=1,
           parts=False, table=None):
    """Derivative-expansion energy per area in J/m^2.

    ``<U(H) + alpha(H) |grad H|^2 - (H U'(H) - U(H)) grad h1 . grad h2 / 2>``.
    With ``parts=True`` returns ``(pfa, alpha_term, cross_term)``.
    """
    _check_gap(z_nm, geom)
    if alpha_provider is None:
        alpha_provider = BetaModel()
    if geom.amplitude_sum == 0 and table is None:
        u = energy_and_derivative(material, z_nm, env, spec)[0]
        return (u, 0.0, 0.0) if parts else u
    H, W, dh1, dh2 = _fields(z_nm, geom, refine)
    if table is None:
        table = _table(z_nm, geom, material, env, spec)
    c, s = math.cos(geom.theta_rad), math.sin(geom.theta_rad)
    U = table.energy(H)
    dU = table.derivative(H) * NM  # J/m^2 per nm, H is in nm
    grad_sq = (dh1 - c * dh2) ** 2 + (s * dh2) ** 2
    cross = dh1 * dh2 * c
    alpha = alpha_provider.alpha(H, material, env, spec, energy=table.energy)
    pfa = float(np.sum(W * U))
    a_term = float(np.sum(W * alpha * grad_sq))
    c_term = float(np.sum(W * (-0.5) * (H * dU - U) * cross))
    if parts:
        return pfa, a_term, c_term
    return pfa + a_term + c_term


def force_sphere(z_nm, geom: Geometry, material: Material, env: Environment,
                 alpha_provider=None, spec: QuadratureSpec = DEFAULT_SPEC,
                 model="derivative-expansion", *, refine=1):
    """Normal force on the sphere in pN, ``-2 pi R U`` (positive = attraction)."""
    if model not in MODELS:
        raise DomainError(f"unknown model {model!r}")
    if z_nm > geom.R_um * 1e3 / 100:
        warnings.warn("separation is not small compared to the sphere radius", stacklevel=2)
    if model == "pfa":
        u = u_pfa(z_nm, geom, material, env, alpha_provider, spec, refine=refine)
    else:
        u = u_corr(z_nm, geom, material, env, alpha_provider, spec, refine=refine)
    return -2 * math.pi * geom.R_um * UM * u / PN


def roughness_correct(curve: ForceCurve, geom: Geometry) -> ForceCurve:
    """Second-order Gaussian roughness average ``F + (d1^2 + d2^2) F'' / 2``.

    ``F''`` from three-point differences on the curve's own grid; the two end
    points cannot be corrected and are copied (listed in ``meta``).
    """
    d2 = geom.roughness_sq
    out = ForceCurve(curve.z_nm, curve.F_pN.copy(), curve.sigma_pN.copy(), dict(curve.meta))
    if d2 == 0 or len(curve) < 3:
        if d2 and len(curve) < 3:
            out.meta["roughness_uncorrected"] = list(curve.z_nm)
        return out
    z, F = curve.z_nm, curve.F_pN
    h = np.diff(z)
    if h.max() > 1.0 + 1e-9:
        raise PrecisionError("roughness correction needs a grid spacing of at most 1 nm")
    hl, hr = h[:-1], h[1:]
    f2 = 2 * (hl * F[2:] - (hl + hr) * F[1:-1] + hr * F[:-2]) / (hl * hr * (hl + hr))
    out.F_pN[1:-1] = F[1:-1] + 0.5 * d2 * f2
    out.meta["roughness_uncorrected"] = [float(z[0]), float(z[-1])]
    out.meta["roughness_nm2"] = d2
    return out


def force_curve(z_nm, thetas_rad, geom: Geometry, material: Material, env: Environment,
                alpha_provider=None, spec: QuadratureSpec = DEFAULT_SPEC,
                model="derivative-expansion", *, roughness=True, step_nm=1.0, refine=1):
    """One ForceCurve per angle.

    With ``roughness=True`` every requested separation is corrected: a dense
    grid is padded by ``step_nm`` at both ends, a sparse one gets a
    ``z +- step_nm`` stencil around each point.
    """
    z = np.atleast_1d(np.asarray(z_nm, dtype=float))
    thetas = list(np.atleast_1d(thetas_rad))
    if not thetas:
        raise DomainError("at least one angle is required")
    curves = []
    for th in thetas:
        g = geom.with_angle(float(th))

        def F(zz):
            return np.array([force_sphere(float(zi), g, material, env, alpha_provider, spec,
                                          model, refine=refine) for zi in zz])

        meta = {"theta_rad": float(th), "material": material.name or material.model,
                "model": model, "temperature_K": env.temperature, "env_mode": env.mode}
        if not (roughness and g.roughness_sq > 0):
            curves.append(ForceCurve(z, F(z), 0.0, meta))
            continue
        if len(z) > 1 and np.diff(z).max() <= step_nm + 1e-9:
            zz = np.concatenate([[z[0] - step_nm], z, [z[-1] + step_nm]])
            c = roughness_correct(ForceCurve(zz, F(zz), 0.0, meta), g)
            f = c.F_pN[1:-1]
        else:
            f0, fm, fp = F(z), F(z - step_nm), F(z + step_nm)
            f = f0 + 0.5 * g.roughness_sq * (fp - 2 * f0 + fm) / step_nm ** 2
        meta["roughness_nm2"] = g.roughness_sq
        curves.append(ForceCurve(z, f, 0.0, meta))
    return curves


def fit_beta(targets, geom: Geometry, material: Material, env: Environment,
             spec: QuadratureSpec = DEFAULT_SPEC, *, roughness=True):
    """Least-squares ``beta`` of the beta model from measured correlation forces.

    ``targets``: iterable of ``(theta_rad, z_nm, F_der - F_pfa in pN)``. The
    force is linear in ``beta``, so the fit is closed form.
    """
    rows = []
    for theta, z, target in targets:
        g = geom.with_angle(theta)
        f = {b: force_curve([z], [theta], g, material, env, BetaModel(b), spec,
                            roughness=roughness)[0].F_pN[0] for b in (0.0, 1.0)}
        pfa = force_curve([z], [theta], g, material, env, None, spec, "pfa",
                          roughness=roughness)[0].F_pN[0]
        rows.append((f[1] - f[0], target - (f[0] - pfa)))
    slope, rhs = np.array(rows).T
    return float(slope @ rhs / (slope @ slope))
