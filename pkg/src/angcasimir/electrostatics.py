"""Sphere-grating electrostatic force and a finite-difference Laplace check.

The analytic coefficient treats the sphere by the proximity approximation and
the corrugations to second order in the amplitudes; the crossing angle enters
only through a sinc factor from averaging over the imprint length.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .constants import EPS0, NM, UM
from .corrugation import Geometry
from .errors import ContactError, DomainError, RelaxationError

# 1 N/V^2 = 1e12 pN / 1e6 mV^2
N_PER_V2_TO_PN_PER_MV2 = 1e6


@dataclass(frozen=True)
class ElectroParams:
    V_mV: float
    V0_mV: float = 0.0


@dataclass(frozen=True)
class LaplaceGrid:
    """Boundary-fitted grid over one period: ``nx`` periodic columns, ``neta``
    intervals across the gap."""

    nx: int = 128
    neta: int = 64
    omega: float = 1.9
    tol: float = 1e-10
    max_iter: int = 200_000

    def __post_init__(self):
        if self.nx < 64 or self.neta < 64:
            raise DomainError("Laplace grid needs at least 64 nodes per period and across the gap")
        if self.nx % 2:
            raise DomainError("nx must be even for the four-colour sweep")
        if not 0 < self.omega < 2:
            raise DomainError("SOR factor must lie in (0, 2)")

    def refined(self):
        return LaplaceGrid(2 * self.nx, 2 * self.neta, self.omega, self.tol, self.max_iter)


def sinc(u):
    u = np.asarray(u, dtype=float)
    small = np.abs(u) < 1e-4
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(small, 1 - u * u / 6, np.sin(u) / np.where(small, 1.0, u))
    return out if out.ndim else float(out)


def _terms(z_nm, geom: Geometry):
    """Leading, self and cross pieces of X in N/V^2 (cross without the sinc)."""
    z_nm = np.asarray(z_nm, dtype=float)
    if np.any(z_nm <= geom.amplitude_sum):
        raise ContactError(f"z = {np.min(z_nm)} nm does not exceed A1 + A2")
    if geom.theta_rad < 0:
        raise DomainError("crossing angle must be non-negative")
    R = geom.R_um * UM
    z = z_nm * NM
    L = geom.period_nm * NM
    a1, a2 = geom.A1_nm * NM, geom.A2_nm * NM
    q = 2 * math.pi * z / L
    lead = math.pi * R / z
    pref = math.pi * R / z ** 2
    self_t = pref * (math.pi / L) * (a1 ** 2 + a2 ** 2) / np.tanh(q)
    cross = pref * (4 * math.pi * a1 * a2 / L) * np.exp(-q) / (-np.expm1(-2 * q))
    return EPS0 * lead, EPS0 * self_t, EPS0 * cross


def _scalar(x):
    return float(x) if np.ndim(x) == 0 else x


def cross_coupling_factor(geom: Geometry):
    """``sinc(pi Ly theta / L)``: suppression of the aligned cross term."""
    return sinc(math.pi * geom.Ly_um * 1e3 * geom.theta_rad / geom.period_nm)


def x_coefficient(z_nm, geom: Geometry):
    """Electrostatic force per squared voltage, pN/mV^2 (scalar or array)."""
    lead, self_t, cross = _terms(z_nm, geom)
    x = lead + self_t - cross * cross_coupling_factor(geom)
    return _scalar(x * N_PER_V2_TO_PN_PER_MV2)


def cross_term(z_nm, geom: Geometry) -> float:
    """The (signed) cross-coupling contribution to X, pN/mV^2."""
    _, _, cross = _terms(z_nm, geom)
    return _scalar(-cross * cross_coupling_factor(geom) * N_PER_V2_TO_PN_PER_MV2)


def electrostatic_force(z_nm, geom: Geometry, ep: ElectroParams):
    """Attractive force magnitude ``X(z) (V - V0)^2`` in pN."""
    dv = ep.V_mV - ep.V0_mV
    return x_coefficient(z_nm, geom) * dv * dv


def averaged_cross_factor(geom: Geometry, n=4001):
    """Average of the aligned cross term over the lateral phase shifts seen
    along the imprint (``k y sin(theta)`` for ``|y| <= Ly/2``)."""
    ly = geom.Ly_um * 1e3
    y = np.linspace(-ly / 2, ly / 2, n)
    phase = geom.k * y * math.sin(geom.theta_rad)
    w = np.full(n, 1.0)
    w[0] = w[-1] = 0.5
    return float(np.sum(w * np.cos(phase)) / np.sum(w))


# ---------------------------------------------------------------- oracle


def _solve_gap(z_nm, geom: Geometry, grid: LaplaceGrid):
    """Per-area electrostatic energy per V^2 (J/m^2/V^2) of one aligned cell.

    Plate at ``y = -h1(x)`` held at 0, sphere surface at ``y = z - h2(x)`` at
    1 V. Coordinates ``(x, eta)`` with ``y = -h1 + eta * G(x)``.
    """
    L = geom.period_nm
    k = geom.k
    nx, ne = grid.nx, grid.neta
    hx, he = L / nx, 1.0 / ne
    x = np.arange(nx) * hx
    eta = np.arange(ne + 1) * he
    a1, a2 = geom.A1_nm, geom.A2_nm
    yp = -a1 * np.cos(k * x)
    dyp = a1 * k * np.sin(k * x)
    d2yp = a1 * k * k * np.cos(k * x)
    G = z_nm + a1 * np.cos(k * x) - a2 * np.cos(k * x)
    if np.any(G <= 0):
        raise ContactError("surfaces touch in the oracle cell")
    dG = -(a1 - a2) * k * np.sin(k * x)
    d2G = -(a1 - a2) * k * k * np.cos(k * x)

    E = np.broadcast_to(eta, (nx, ne + 1))
    Gm = G[:, None]
    b = -(dyp[:, None] + E * dG[:, None]) / Gm
    bxx = -(d2yp[:, None] + E * d2G[:, None] + 2 * b * dG[:, None]) / Gm
    c_xx = 1.0 / hx ** 2
    c_ee = (b * b + 1.0 / Gm ** 2) / he ** 2
    c_xe = 2 * b / (4 * hx * he)
    c_e = bxx / (2 * he)
    diag = -2 * c_xx - 2 * c_ee

    psi = np.broadcast_to(eta, (nx, ne + 1)).copy()
    # four-colour ordering: the 9-point stencil never couples equal colours
    interior = np.arange(1, ne)
    masks = [(np.arange(ci, nx, 2), interior[interior % 2 == cj])
             for ci in (0, 1) for cj in (0, 1)]

    def residual(P, ii, jj):
        I = ii[:, None]
        J = jj[None, :]
        ip = (I + 1) % nx
        im = (I - 1) % nx
        r = (c_xx * (P[ip, J] + P[im, J])
             + c_ee[I, J] * (P[I, J + 1] + P[I, J - 1])
             + c_xe[I, J] * (P[ip, J + 1] - P[ip, J - 1] - P[im, J + 1] + P[im, J - 1])
             + c_e[I, J] * (P[I, J + 1] - P[I, J - 1])
             + diag[I, J] * P[I, J])
        return r / diag[I, J]

    om = grid.omega
    for it in range(grid.max_iter):
        delta = 0.0
        for ii, jj in masks:
            if len(ii) == 0 or len(jj) == 0:
                continue
            upd = residual(psi, ii, jj)
            psi[ii[:, None], jj[None, :]] -= om * upd
            delta = max(delta, float(np.abs(upd).max()))
        if delta < grid.tol:
            break
    else:
        raise RelaxationError("SOR did not converge", delta)

    # field energy from cell-centred differences
    P1 = np.roll(psi, -1, axis=0)
    px = 0.5 * ((P1[:, :-1] - psi[:, :-1]) + (P1[:, 1:] - psi[:, 1:])) / hx
    pe = 0.5 * ((psi[:, 1:] - psi[:, :-1]) + (P1[:, 1:] - P1[:, :-1])) / he
    xc = (np.arange(nx) + 0.5) * hx
    ec = (np.arange(ne) + 0.5) * he
    Gc = (z_nm + (a1 - a2) * np.cos(k * xc))[:, None]
    dypc = (a1 * k * np.sin(k * xc))[:, None]
    dGc = (-(a1 - a2) * k * np.sin(k * xc))[:, None]
    bc = -(dypc + ec[None, :] * dGc) / Gc
    dens = (px + bc * pe) ** 2 + (pe / Gc) ** 2  # 1/nm^2
    integral = np.sum(dens * Gc) * hx * he  # dimensionless (nm^2/nm^2)
    energy_per_area = 0.5 * EPS0 * integral / (L * NM)  # J/m^2 per V^2
    return energy_per_area, it + 1


def laplace_oracle(z_nm, geom: Geometry, grid: LaplaceGrid = LaplaceGrid()) -> float:
    """X(z) in pN/mV^2 from a numerical solve of the aligned (theta = 0) cell,
    wrapped to the sphere as ``2 pi R`` times the per-area energy."""
    if geom.theta_rad != 0:
        raise DomainError("the Laplace oracle covers aligned corrugations only")
    if not z_nm > geom.amplitude_sum:
        raise ContactError(f"z = {z_nm} nm does not exceed A1 + A2")
    e, _ = _solve_gap(z_nm, geom, grid)
    return 2 * math.pi * geom.R_um * UM * e * N_PER_V2_TO_PN_PER_MV2


def oracle_table(z_values, geom: Geometry, grid: LaplaceGrid = LaplaceGrid()):
    rows = []
    for z in z_values:
        xf = x_coefficient(z, geom)
        xo = laplace_oracle(z, geom, grid)
        rows.append((float(z), xf, xo, (xf - xo) / xo))
    return rows


def write_oracle_csv(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["z_nm", "X_formula", "X_oracle", "rel_diff"])
        for r in rows:
            w.writerow([f"{r[0]:.10g}"] + [f"{v:.10g}" for v in r[1:]])
