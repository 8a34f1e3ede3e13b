"""Lifshitz energy between parallel half-spaces and its separation derivative.

The transverse wavevector integral is done in the dimensionless variable
``y = 2*q*d`` (the propagation factor is ``exp(-y)``), shifted to start at the
light line of each Matsubara frequency.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator

from .constants import C, HBAR, HBAR_C_EV_NM, KB, NM
from .errors import ConvergenceError, DomainError, RangeError
from .materials import Material, epsilon_imag


@dataclass(frozen=True)
class Environment:
    """Temperature in kelvin; ``mode`` is ``"finite-T"`` or ``"zero-T"``."""

    temperature: float = 300.0
    mode: str = "finite-T"

    def __post_init__(self):
        if self.mode not in ("finite-T", "zero-T"):
            raise DomainError(f"unknown environment mode {self.mode!r}")
        if self.mode == "finite-T" and not self.temperature > 0:
            raise DomainError("finite-T mode needs T > 0")

    @classmethod
    def zero(cls):
        return cls(0.0, "zero-T")

    @property
    def thermal_wavelength(self):
        """``hbar*c/(k_B*T)`` in nm."""
        if not self.temperature > 0:
            return math.inf
        return HBAR * C / (KB * self.temperature) / NM


@dataclass(frozen=True)
class QuadratureSpec:
    rtol: float = 1e-7
    tail_threshold: float = 1e-10
    cutoff: float = 0.0

    def __post_init__(self):
        if not 0 < self.rtol <= 1e-3:
            raise DomainError("quadrature tolerance must lie in (0, 1e-3]")
        if not 0 < self.tail_threshold <= 1e-6:
            raise DomainError("Matsubara tail threshold must lie in (0, 1e-6]")
        if self.cutoff < 0:
            raise DomainError("cutoff multiplier must be non-negative")

    @property
    def y_max(self):
        return 60.0 + self.cutoff


DEFAULT_SPEC = QuadratureSpec()

# graded panels resolve the y*log(y) behaviour of the n=0 TM term at y -> 0
_PANEL_EDGES = np.array([0.0, 1 / 256, 1 / 64, 1 / 16, 0.25, 0.5, 1, 2, 4, 8, 16, 32])
_MAX_NODES = 256


def matsubara_frequency(n, temperature):
    """``xi_n = 2*pi*n*k_B*T/hbar`` in rad/s."""
    n = np.asarray(n)
    if np.any(n < 0):
        raise DomainError("Matsubara index must be non-negative")
    if not temperature > 0:
        raise DomainError("temperature must be positive")
    xi = 2 * np.pi * n * KB * temperature / HBAR
    return xi if np.ndim(xi) else float(xi)


def _nodes(m, s_max):
    edges = np.append(_PANEL_EDGES[_PANEL_EDGES < s_max], s_max)
    x, w = np.polynomial.legendre.leggauss(m)
    lo, hi = edges[:-1, None], edges[1:, None]
    half = 0.5 * (hi - lo)
    s = (lo + half * (x + 1)).ravel()
    ws = (half * w).ravel()
    return s, ws


def _reflection_sq(y, a, eps, material, zero_freq, dp):
    """Squared Fresnel coefficients (TE, TM) on the y grid.

    ``y``: (n, k) grid, ``a = 2*xi*d/c`` and ``eps`` broadcast along axis 1.
    ``dp = 2*d*omega_p/c`` feeds the plasma-model static TE limit.
    """
    if material.is_ideal:
        one = np.ones_like(y)
        return one, one
    a = a[:, None]
    eps = eps[:, None]
    with np.errstate(invalid="ignore"):
        ym = np.sqrt(y * y + (eps - 1.0) * a * a)
        rte = (y - ym) / (y + ym)
        rtm = (eps * y - ym) / (eps * y + ym)
    if zero_freq.any():
        z0 = zero_freq
        rtm[z0] = 1.0
        if material.dissipative:
            rte[z0] = 0.0
        else:
            y0 = y[z0]
            ym0 = np.sqrt(y0 * y0 + dp * dp)
            rte[z0] = (y0 - ym0) / (y0 + ym0)
    return rte * rte, rtm * rtm


def _k_integrals(a, eps, material, d, m, s_max):
    """Per-frequency integrals for energy and derivative at node count ``m``.

    Returns ``(J, K)`` with
    ``J = int y * sum_p log(1 - r_p^2 e^-y) dy`` and
    ``K = int y^2 * sum_p r_p^2 e^-y / (1 - r_p^2 e^-y) dy`` over ``y >= a``.
    """
    s, ws = _nodes(m, s_max)
    y = a[:, None] + s[None, :]
    zero_freq = a == 0
    dp = 2 * d * material.omega_p / C if not material.is_ideal else 0.0
    rte2, rtm2 = _reflection_sq(y, a, eps, material, zero_freq, dp)
    ey = np.exp(-y)
    J = np.zeros(len(a))
    K = np.zeros(len(a))
    for r2 in (rte2, rtm2):
        x = r2 * ey
        J += (y * np.log1p(-x)) @ ws
        K += (y * y * x / (1.0 - x)) @ ws
    return J, K


def _adaptive_k(a, eps, material, d, spec, scale=None):
    """Double the panel order until both integrals settle to ``spec.rtol``."""
    m = 12
    J, K = _k_integrals(a, eps, material, d, m, spec.y_max)
    while True:
        m2 = 2 * m
        J2, K2 = _k_integrals(a, eps, material, d, m2, spec.y_max)
        ref_j = abs(J2.sum()) if scale is None else scale[0]
        ref_k = abs(K2.sum()) if scale is None else scale[1]
        err = max(np.abs(J2 - J).sum() / max(ref_j, 1e-300),
                  np.abs(K2 - K).sum() / max(ref_k, 1e-300))
        if err < spec.rtol:
            return J2, K2
        if m2 >= _MAX_NODES:
            raise ConvergenceError("wavevector quadrature did not converge", err)
        m, J, K = m2, J2, K2


def _check_distance(d_nm):
    if not d_nm > 0:
        raise DomainError(f"separation must be positive, got {d_nm}")


def _finite_t(material, d, temperature, spec):
    lam_t = HBAR * C / (KB * temperature)
    n_max = math.ceil(50 * lam_t / (4 * math.pi * d))
    prefac = KB * temperature / (2 * math.pi)
    sum_j = sum_k = 0.0
    start, block = 0, 64
    while True:
        stop = min(start + block, n_max + 1)
        n = np.arange(start, stop)
        xi = matsubara_frequency(n, temperature)
        a = 2 * xi * d / C
        if material.is_ideal:
            eps = np.full(len(n), np.inf)
        else:
            eps = np.empty(len(n))
            pos = xi > 0
            eps[pos] = epsilon_imag(material, xi[pos])
            eps[~pos] = np.inf
        J, K = _adaptive_k(a, eps, material, d, spec)
        if start == 0:
            J[0] *= 0.5
            K[0] *= 0.5
        sum_j += J.sum()
        sum_k += K.sum()
        # stop once three consecutive terms are negligible in both sums
        small = (np.abs(J) < spec.tail_threshold * abs(sum_j)) & \
                (np.abs(K) < spec.tail_threshold * abs(sum_k))
        if len(small) >= 3 and small[-3:].all():
            break
        if stop > n_max:
            raise ConvergenceError("Matsubara sum hit its ceiling",
                                   float(abs(J[-1]) / abs(sum_j)))
        start, block = stop, 2 * block
    u = prefac * sum_j / (4 * d * d)
    du = prefac * sum_k / (4 * d ** 3)
    return u, du


def _zero_t(material, d, spec):
    # t = xi*d/c on a log grid; the [0, t_lo] sliver is added as a rectangle
    t_lo, t_hi = 1e-4, 1e4
    u_lo, u_hi = math.log(t_lo), math.log(t_hi)
    edges = np.linspace(u_lo, u_hi, 33)

    def evaluate(m):
        x, w = np.polynomial.legendre.leggauss(m)
        half = 0.5 * np.diff(edges)[:, None]
        u = (edges[:-1, None] + half * (x + 1)).ravel()
        wu = (half * w).ravel()
        t = np.exp(u)
        xi = t * C / d
        a = 2 * t
        eps = epsilon_imag(material, xi) if not material.is_ideal else np.full(len(t), np.inf)
        J, K = _adaptive_k(a, eps, material, d, spec)
        int_j = np.sum(J * t * wu)
        int_k = np.sum(K * t * wu)
        a0 = np.array([2 * t_lo])
        eps0 = np.atleast_1d(epsilon_imag(material, t_lo * C / d)) \
            if not material.is_ideal else np.array([np.inf])
        J0, K0 = _adaptive_k(a0, eps0, material, d, spec)
        return int_j + t_lo * J0[0], int_k + t_lo * K0[0]

    m = 8
    prev = evaluate(m)
    while True:
        m *= 2
        cur = evaluate(m)
        err = max(abs(cur[0] - prev[0]) / abs(cur[0]), abs(cur[1] - prev[1]) / abs(cur[1]))
        if err < spec.rtol:
            break
        if m >= 64:
            raise ConvergenceError("frequency quadrature did not converge", err)
        prev = cur
    pref = HBAR * C / (16 * math.pi ** 2)
    return pref * cur[0] / d ** 3, pref * cur[1] / d ** 4


def energy_and_derivative(material: Material, d_nm: float, env: Environment,
                          spec: QuadratureSpec = DEFAULT_SPEC):
    """``(U, dU/dd)`` in J/m^2 and J/m^3 for plates a distance ``d_nm`` apart."""
    _check_distance(d_nm)
    d = d_nm * NM
    if env.mode == "zero-T":
        return _zero_t(material, d, spec)
    return _finite_t(material, d, env.temperature, spec)


def energy_per_area(material: Material, d_nm: float, env: Environment,
                    spec: QuadratureSpec = DEFAULT_SPEC) -> float:
    """Casimir free energy per unit area, J/m^2 (negative)."""
    return energy_and_derivative(material, d_nm, env, spec)[0]


def energy_derivative(material: Material, d_nm: float, env: Environment,
                      spec: QuadratureSpec = DEFAULT_SPEC) -> float:
    """``dU/dd`` in J/m^3, from the analytically differentiated integrand."""
    return energy_and_derivative(material, d_nm, env, spec)[1]


def ideal_energy_zero_t(d_nm):
    """Closed form ``-pi^2 hbar c / (720 d^3)`` for perfect mirrors at T = 0."""
    d = np.asarray(d_nm) * NM
    return -math.pi ** 2 * HBAR * C / (720 * d ** 3)


@functools.lru_cache(maxsize=65536)
def _cached_knot(material, d_nm, env, spec):
    return energy_and_derivative(material, d_nm, env, spec)


class EnergyTable:
    """Monotone-cubic interpolant of ``U`` and ``U'`` on a geometric grid.

    Knots sit at ``exp(k*h)`` nm with ``h`` a power of two, so tables built
    for neighbouring windows share (and cache) their Lifshitz evaluations.
    """

    def __init__(self, material, env, spec, d_lo, d_hi, min_knots=64):
        if not 0 < d_lo < d_hi:
            raise DomainError(f"bad table range [{d_lo}, {d_hi}] nm")
        span = math.log(d_hi / d_lo)
        h = 2.0 ** math.floor(math.log2(span / min_knots))
        h = min(max(h, 2.0 ** -20), 2.0 ** -6)
        k_lo = math.floor(math.log(d_lo) / h) - 2
        k_hi = math.ceil(math.log(d_hi) / h) + 2
        self.knots = np.exp(np.arange(k_lo, k_hi + 1) * h)
        vals = np.array([_cached_knot(material, float(d), env, spec) for d in self.knots])
        self.material, self.env, self.spec = material, env, spec
        self.d_lo, self.d_hi = self.knots[0], self.knots[-1]
        logd = np.log(self.knots)
        # U and U' are interpolated in log d; U' is a separate table rather
        # than the spline derivative so it keeps the quadrature accuracy
        self._u = PchipInterpolator(logd, vals[:, 0])
        self._du = PchipInterpolator(logd, vals[:, 1])

    def _check(self, d):
        if np.any(d < self.d_lo) or np.any(d > self.d_hi):
            raise RangeError(f"separation outside energy table [{self.d_lo:.4g}, {self.d_hi:.4g}] nm")

    def energy(self, d_nm):
        d = np.asarray(d_nm, dtype=float)
        self._check(d)
        return self._u(np.log(d))

    def derivative(self, d_nm):
        d = np.asarray(d_nm, dtype=float)
        self._check(d)
        return self._du(np.log(d))


@functools.lru_cache(maxsize=256)
def energy_table(material, env, spec, d_lo, d_hi, min_knots=64):
    return EnergyTable(material, env, spec, d_lo, d_hi, min_knots)


__all__ = [
    "EnergyTable", "energy_table",
    "Environment", "QuadratureSpec", "DEFAULT_SPEC", "matsubara_frequency",
    "energy_per_area", "energy_derivative", "energy_and_derivative",
    "ideal_energy_zero_t", "HBAR_C_EV_NM",
]
