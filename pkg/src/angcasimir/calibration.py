"""Deflection data: simulation, calibration fits, Casimir extraction, errors.

Units: separations and piezo positions in nm, voltages in mV, the deflection
signal ``S`` in mV of photodetector output, forces in pN. ``m`` converts
signal to cantilever deflection (nm/mV) and ``k' = k m`` signal to force
(pN/mV).
"""
from __future__ import annotations

import csv
import functools
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import optimize, stats
from scipy.interpolate import PchipInterpolator

from .corrugation import ForceCurve, Geometry, force_curve
from .electrostatics import x_coefficient
from .errors import (ConfigError, ConsistencyError, DomainError, FitError,
                     InstabilityError, RankError)
from .lifshitz import DEFAULT_SPEC

SWEEP_HZ = 0.05  # triangular piezo drive


class ModelMismatchWarning(UserWarning):
    """Fitted calibration constants drift with separation."""


@dataclass(frozen=True)
class CalibrationTruth:
    V0_mV: float = -90.2
    z0_nm: float = 126.2
    kprime: float = 1.35  # pN/mV
    m: float = 0.1021  # nm/mV (102.1 nm per volt of signal)


MEASURED_VOLTAGES = tuple(np.round(np.linspace(-145.0, -40.0, 11), 6))


@dataclass
class DeflectionDataset:
    voltages_mV: np.ndarray
    z_piezo_nm: list
    s_def: list
    m: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.voltages_mV = np.asarray(self.voltages_mV, dtype=float)
        self.z_piezo_nm = [np.asarray(z, dtype=float) for z in self.z_piezo_nm]
        self.s_def = [np.asarray(s, dtype=float) for s in self.s_def]
        if not (len(self.voltages_mV) == len(self.z_piezo_nm) == len(self.s_def)):
            raise DomainError("one trace per voltage is required")
        for z, s in zip(self.z_piezo_nm, self.s_def):
            if z.shape != s.shape:
                raise DomainError("piezo and signal arrays differ in length")
            dz = np.diff(z)
            if not (np.all(dz > 0) or np.all(dz < 0)):
                raise DomainError("piezo positions must be strictly monotone per trace")

    @classmethod
    def concat(cls, datasets):
        """Pool repetitions into one dataset (voltages repeat)."""
        datasets = list(datasets)
        m = datasets[0].m
        if any(d.m != m for d in datasets):
            raise DomainError("repetitions must share the deflection coefficient")
        return cls(np.concatenate([d.voltages_mV for d in datasets]),
                   [z for d in datasets for z in d.z_piezo_nm],
                   [s for d in datasets for s in d.s_def], m,
                   {"repetitions": len(datasets)})

    def separation_rel(self, i):
        """``z - z0`` of trace ``i`` from the measured deflection."""
        return self.z_piezo_nm[i] + self.m * self.s_def[i]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            fh.write(f"# m_nm_per_mV={self.m!r}\n")
            w = csv.writer(fh)
            w.writerow(["voltage_mV", "z_piezo_nm", "S_def_signal"])
            for v, z, s in zip(self.voltages_mV, self.z_piezo_nm, self.s_def):
                for zi, si in zip(z, s):
                    w.writerow([repr(float(v)), repr(float(zi)), repr(float(si))])

    @classmethod
    def from_csv(cls, path, m=None):
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"dataset not found: {path}")
        rows = []
        with open(path) as fh:
            for line in fh:
                if line.startswith("#"):
                    if "m_nm_per_mV=" in line and m is None:
                        m = float(line.split("=", 1)[1])
                    continue
                rows.append(line)
        if m is None:
            raise ConfigError("deflection coefficient m is not given")
        # a trace ends where the voltage changes or the piezo turns round
        volts, zs, ss = [], [], []
        for r in csv.DictReader(rows):
            v, z, sig = float(r["voltage_mV"]), float(r["z_piezo_nm"]), float(r["S_def_signal"])
            cur = zs[-1] if zs else None
            fresh = not volts or v != volts[-1]
            if not fresh and len(cur) >= 2:
                fresh = (z - cur[-1]) * (cur[-1] - cur[-2]) <= 0
            elif not fresh:
                fresh = z == cur[-1]
            if fresh:
                volts.append(v)
                zs.append([])
                ss.append([])
            zs[-1].append(z)
            ss[-1].append(sig)
        return cls(volts, zs, ss, m)


@dataclass
class CalibrationResult:
    V0_mV: float
    V0_err: float
    z0_nm: float
    z0_err: float
    kprime: float
    kprime_err: float
    chi2_parabola: float
    chi2_curvature: float
    covariance: np.ndarray
    trend: dict = field(default_factory=dict)

    def report(self):
        """Structured-text report (TOML)."""
        c = self.covariance
        lines = [
            "[calibration]",
            f"V0_mV = {self.V0_mV:.6f}",
            f"V0_err_mV = {self.V0_err:.6f}",
            f"z0_nm = {self.z0_nm:.6f}",
            f"z0_err_nm = {self.z0_err:.6f}",
            f"kprime_pN_per_mV = {self.kprime:.8f}",
            f"kprime_err_pN_per_mV = {self.kprime_err:.8f}",
            "",
            "[fit]",
            f"chi2_parabola_mean = {self.chi2_parabola:.6g}",
            f"chi2_curvature = {self.chi2_curvature:.6g}",
            f"covariance_z0_kprime = [[{c[0, 0]:.6g}, {c[0, 1]:.6g}], [{c[1, 0]:.6g}, {c[1, 1]:.6g}]]",
            "",
            "[separation_independence]",
        ]
        for k, v in self.trend.items():
            lines.append(f"{k} = {v:.6g}" if isinstance(v, float) else f"{k} = {str(v).lower()}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class ErrorBudget:
    random_pN: float
    systematic_z: tuple  # separations (nm)
    systematic_pN: tuple
    confidence: float = 0.67

    def __post_init__(self):
        if self.random_pN < 0 or min(self.systematic_pN) < 0:
            raise DomainError("error components must be non-negative")

    @classmethod
    def measured(cls):
        """Errors of the aligned measurement, 127 to 300 nm."""
        return cls(0.51, (127.0, 300.0), (0.79, 0.64))

    def systematic(self, z_nm):
        return np.interp(z_nm, self.systematic_z, self.systematic_pN)

    def total(self, z_nm):
        return combine_errors(self.random_pN, self.systematic(z_nm))


def combine_errors(sigma_rand, sigma_syst):
    """Quadrature sum of independent random and systematic errors."""
    a = np.asarray(sigma_rand, dtype=float)
    b = np.asarray(sigma_syst, dtype=float)
    if np.any(a < 0) or np.any(b < 0):
        raise DomainError("errors must be non-negative")
    out = np.hypot(a, b)
    return out if out.ndim else float(out)


# ------------------------------------------------------------- simulation


@functools.lru_cache(maxsize=32)
def casimir_force_model(geom: Geometry, material, env, alpha_provider=None,
                        spec=DEFAULT_SPEC, model="derivative-expansion",
                        z_lo=110.0, z_hi=2200.0, n=160):
    """Interpolated ``F_Cas(z)`` (pN) over ``[z_lo, z_hi]`` for simulations."""
    z = np.geomspace(z_lo, z_hi, n)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        curve = force_curve(z, [geom.theta_rad], geom, material, env, alpha_provider,
                            spec, model)[0]
    interp = PchipInterpolator(np.log(curve.z_nm), np.log(curve.F_pN))

    def force(zq):
        zq = np.asarray(zq, dtype=float)
        if np.any(zq < z_lo) or np.any(zq > z_hi):
            raise DomainError(f"separation outside Casimir model range [{z_lo}, {z_hi}] nm")
        return np.exp(interp(np.log(zq)))

    return force


def default_piezo_grid(truth=CalibrationTruth(), z_max=2000.0, step=0.2, start=-12.0):
    """Piezo positions from near contact out to ``z_max`` separation."""
    return np.arange(start, z_max - truth.z0_nm + step / 2, step)


def simulate_deflection(truth: CalibrationTruth, geom: Geometry, casimir_force,
                        voltages=MEASURED_VOLTAGES, z_piezo=None, noise=0.0, seed=0,
                        drift=0.0, tol=1e-3, max_iter=500) -> DeflectionDataset:
    """Synthetic deflection traces.

    ``casimir_force``: callable ``z -> F`` in pN (or ``None`` for no Casimir
    force). The separation obeys ``z = z_piezo + m S + z0`` with the noiseless
    signal and is solved by fixed-point iteration. ``noise`` is the white
    signal noise (mV); ``drift`` a linear signal drift in mV/s over the
    approach half-period of the triangular sweep.
    """
    if z_piezo is None:
        z_piezo = default_piezo_grid(truth)
    zp = np.asarray(z_piezo, dtype=float)
    rng = np.random.default_rng(seed)
    volts = np.asarray(voltages, dtype=float)
    zs, ss = [], []
    for v in volts:
        dv2 = (v - truth.V0_mV) ** 2

        def signal(z):
            f = _x_array(z, geom) * dv2
            if casimir_force is not None:
                f = f + casimir_force(z)
            return f / truth.kprime

        z = zp + truth.z0_nm
        for _ in range(max_iter):
            if np.any(z <= geom.amplitude_sum):
                bad = float(zp[np.argmax(z <= geom.amplitude_sum)])
                raise InstabilityError(f"sphere snaps to contact near z_piezo = {bad:g} nm", bad)
            try:
                z_new = zp + truth.m * signal(z) + truth.z0_nm
            except DomainError as exc:
                bad = float(np.min(z))
                raise InstabilityError(
                    f"deflection pulls the sphere out of the force model range (z = {bad:g} nm)",
                    bad) from exc
            step = np.abs(z_new - z)
            z = z_new
            if step.max() < tol:
                break
            if not np.all(np.isfinite(z)) or step.max() > 1e6:
                break
        else:
            i = int(np.argmax(step))
            raise InstabilityError(f"deflection feedback diverges near z = {z[i]:g} nm", float(z[i]))
        if step.max() >= tol:
            i = int(np.nanargmax(step))
            raise InstabilityError(f"deflection feedback diverges near z = {z[i]:g} nm", float(z[i]))
        s = signal(z)
        if noise:
            s = s + rng.normal(0.0, noise, size=s.shape)
        if drift:
            # approach half-period, far end first
            t = (zp.max() - zp) / (zp.max() - zp.min()) / (2 * SWEEP_HZ)
            s = s + drift * t
        zs.append(zp.copy())
        ss.append(s)
    return DeflectionDataset(volts, zs, ss, truth.m,
                             {"truth": truth, "noise": noise, "seed": seed, "drift": drift})


def simulate_repetitions(truth, geom, casimir_force, repetitions=10, seed=0, **kw):
    """``repetitions`` independent sweeps pooled into one dataset."""
    seeds = np.random.SeedSequence(seed).spawn(repetitions)
    return DeflectionDataset.concat(
        simulate_deflection(truth, geom, casimir_force, seed=s, **kw) for s in seeds)


def remove_drift(ds: DeflectionDataset, tail_nm=1500.0, force_model=None):
    """Subtract a straight line in piezo position fitted to the far tail.

    ``force_model(i, z_rel)`` may give the signal expected from real forces
    in the tail (it is removed before the line fit, not from the data).
    """
    out = []
    for i in range(len(ds.voltages_mV)):
        zr = ds.separation_rel(i)
        zp, s = ds.z_piezo_nm[i], ds.s_def[i]
        tail = zr > tail_nm
        if tail.sum() < 10:
            raise DomainError("too few points beyond the drift-fit threshold")
        target = s[tail] - (force_model(i, zr[tail]) if force_model else 0.0)
        coef = np.polyfit(zp[tail], target, 1)
        out.append(s - np.polyval(coef, zp))
    return DeflectionDataset(ds.voltages_mV, ds.z_piezo_nm, out, ds.m, dict(ds.meta))


# ------------------------------------------------------------------ fits


@dataclass
class ParabolaFits:
    z_rel: np.ndarray
    vertex: np.ndarray
    vertex_err: np.ndarray
    curvature: np.ndarray
    curvature_err: np.ndarray
    chi2: np.ndarray


def common_grid(ds: DeflectionDataset, step=1.0):
    """Signals of every trace linearly interpolated on one ``z - z0`` grid."""
    lo = max(ds.separation_rel(i).min() for i in range(len(ds.voltages_mV)))
    hi = min(ds.separation_rel(i).max() for i in range(len(ds.voltages_mV)))
    grid = np.arange(math.ceil(lo / step) * step, hi + 1e-9, step)
    sig = np.empty((len(ds.voltages_mV), len(grid)))
    for i in range(len(ds.voltages_mV)):
        zr = ds.separation_rel(i)
        order = np.argsort(zr)
        sig[i] = np.interp(grid, zr[order], ds.s_def[i][order])
    return grid, sig


def fit_parabolas(ds: DeflectionDataset, step=1.0) -> ParabolaFits:
    """Least-squares ``S(V) = a (V - V_v)^2 + c`` at every grid separation."""
    v = ds.voltages_mV
    if len(np.unique(v)) < 3:
        raise RankError("at least three distinct voltages are needed for a parabola")
    grid, sig = common_grid(ds, step)
    vc = v.mean()
    A = np.column_stack([(v - vc) ** 2, v - vc, np.ones_like(v)])
    coef, _, rank, _ = np.linalg.lstsq(A, sig, rcond=None)
    if rank < 3:
        raise RankError("voltage design matrix is rank deficient")
    a, b, _ = coef
    resid = sig - A @ coef
    dof = len(v) - 3
    s2 = (resid ** 2).sum(axis=0) / dof if dof > 0 else np.zeros(len(grid))
    cov0 = np.linalg.inv(A.T @ A)
    vertex = vc - b / (2 * a)
    # delta method for -b/(2a)
    dva, dvb = b / (2 * a * a), -1 / (2 * a)
    var_v = s2 * (dva ** 2 * cov0[0, 0] + 2 * dva * dvb * cov0[0, 1] + dvb ** 2 * cov0[1, 1])
    return ParabolaFits(grid, vertex, np.sqrt(var_v), a, np.sqrt(s2 * cov0[0, 0]),
                        (resid ** 2).sum(axis=0))


@dataclass
class CurvatureFit:
    z0_nm: float
    z0_err: float
    kprime: float
    kprime_err: float
    chi2: float
    covariance: np.ndarray
    residual_slope_z: float


def _x_array(z, geom):
    return np.asarray(x_coefficient(np.asarray(z, dtype=float), geom))


def fit_curvature(z_rel, curvature, geom: Geometry, z0_guess=None):
    """Fit ``a(z) = X(z_rel + z0) / k'`` for ``(z0, k')`` by Levenberg-Marquardt."""
    z_rel = np.asarray(z_rel, dtype=float)
    a = np.asarray(curvature, dtype=float)
    if len(z_rel) < 10 or np.ptp(z_rel) < 100:
        raise DomainError("curvature fit needs at least 10 points spanning 100 nm")
    zmin = geom.amplitude_sum - z_rel.min() + 1e-6

    def kfit(z0):
        x = _x_array(z_rel + z0, geom)
        inv_k = (x @ a) / (x @ x)
        return 1 / inv_k, np.sum((a - x * inv_k) ** 2)

    if z0_guess is None:
        cands = np.linspace(max(zmin + 1, 20.0), 400.0, 96)
        z0_guess = cands[int(np.argmin([kfit(c)[1] for c in cands]))]
    k_guess = kfit(z0_guess)[0]

    def resid(p):
        z0, kp = p
        if np.any(z_rel + z0 <= geom.amplitude_sum):
            return np.full_like(a, 1e3)
        return _x_array(z_rel + z0, geom) / kp - a

    sol = optimize.least_squares(resid, [z0_guess, k_guess], method="lm",
                                 x_scale=[10.0, 0.1], xtol=1e-12, ftol=1e-12, gtol=1e-12)
    if not sol.success:
        raise FitError(f"curvature fit failed: {sol.message}", float(np.sum(sol.fun ** 2)))
    r = sol.fun
    dof = max(len(a) - 2, 1)
    s2 = np.sum(r ** 2) / dof
    J = sol.jac
    try:
        cov = np.linalg.inv(J.T @ J) * s2
    except np.linalg.LinAlgError as exc:
        raise FitError("singular curvature-fit Jacobian", float(np.sum(r ** 2))) from exc
    trend = stats.linregress(z_rel, r) if np.ptp(r) > 0 else None
    tz = float(trend.slope / trend.stderr) if trend is not None and trend.stderr > 0 else 0.0
    if abs(tz) > stats.norm.ppf(0.975):
        warnings.warn(f"curvature residuals trend with separation (z = {tz:.2f})",
                      ModelMismatchWarning, stacklevel=2)
    z0, kp = sol.x
    return CurvatureFit(float(z0), float(np.sqrt(cov[0, 0])), float(kp),
                        float(np.sqrt(cov[1, 1])), float(np.sum(r ** 2)), cov, tz)


def _weighted_mean(x, err):
    w = 1 / err ** 2
    mean = np.sum(w * x) / np.sum(w)
    return float(mean), float(1 / np.sqrt(np.sum(w)))


def calibrate(ds: DeflectionDataset, geom: Geometry, fit_span_nm=300.0, step=1.0):
    """Parabola vertices and curvatures -> ``V0, z0, k'`` with uncertainties.

    Only the closest ``fit_span_nm`` of the common grid is used; further out
    the electrostatic curvature is lost in the noise.
    """
    pf = fit_parabolas(ds, step)
    sel = pf.z_rel <= pf.z_rel.min() + fit_span_nm
    if sel.sum() < 10:
        raise DomainError("too few separations for the calibration fit")
    zr, vert, verr = pf.z_rel[sel], pf.vertex[sel], pf.vertex_err[sel]
    if np.all(verr == 0):
        verr = np.ones_like(verr)
    v0, v0_err = _weighted_mean(vert, np.maximum(verr, 1e-12))
    cf = fit_curvature(zr, pf.curvature[sel], geom)
    vt = stats.linregress(zr, vert) if np.ptp(vert) > 0 else None
    vz = float(vt.slope / vt.stderr) if vt is not None and vt.stderr > 0 else 0.0
    crit = float(stats.norm.ppf(0.975))
    trend = {"V0_slope_z": vz, "curvature_residual_slope_z": cf.residual_slope_z,
             "independent_of_separation": bool(abs(vz) < crit and abs(cf.residual_slope_z) < crit)}
    return CalibrationResult(v0, v0_err, cf.z0_nm, cf.z0_err, cf.kprime, cf.kprime_err,
                             float(np.mean(pf.chi2[sel])), cf.chi2, cf.covariance, trend)


def calibrate_with_drift(ds: DeflectionDataset, geom: Geometry, casimir_force=None,
                         tail_nm=1500.0, passes=2, **kw):
    """Tail detrending followed by calibration.

    A drift common to all voltages only shifts the parabola offsets, so the
    first calibration runs on the raw data. The forces it implies in the tail
    are then kept out of the drift line, and the calibration is repeated on
    the detrended data.
    """
    calib = calibrate(ds, geom, **kw)
    clean = ds
    for _ in range(passes):

        def model(i, z_rel, c=calib):
            z = z_rel + c.z0_nm
            f = _x_array(z, geom) * (ds.voltages_mV[i] - c.V0_mV) ** 2
            if casimir_force is not None:
                f = f + casimir_force(z)
            return f / c.kprime

        clean = remove_drift(ds, tail_nm, model)
        calib = calibrate(clean, geom, **kw)
    return clean, calib


def extract_casimir(datasets, calib: CalibrationResult, geom: Geometry,
                    z_range=(127.0, 300.0), step=1.0, consistency_sigma=5.0) -> ForceCurve:
    """Casimir force ``k' S - X(z) (V_i - V0)^2`` averaged over traces.

    ``datasets``: one dataset or a sequence of repetitions. ``sigma`` of the
    returned curve is the standard error of the mean over all traces.
    """
    if isinstance(datasets, DeflectionDataset):
        datasets = [datasets]
    grid = np.arange(z_range[0], z_range[1] + step / 2, step)
    xg = _x_array(grid, geom)
    traces = []
    for ds in datasets:
        for i, v in enumerate(ds.voltages_mV):
            z = ds.separation_rel(i) + calib.z0_nm
            order = np.argsort(z)
            if z.min() > grid[0] + 1e-9 or z.max() < grid[-1] - 1e-9:
                raise DomainError("trace does not cover the requested separation range")
            s = np.interp(grid, z[order], ds.s_def[i][order])
            traces.append(calib.kprime * s - xg * (v - calib.V0_mV) ** 2)
    traces = np.array(traces)
    n = len(traces)
    mean = traces.mean(axis=0)
    if n > 1:
        spread = traces.std(axis=0, ddof=1)
        sigma = spread / np.sqrt(n)
        pooled = float(np.sqrt(np.mean(spread ** 2)))
        if pooled > 0:
            for j in range(n):
                others = (mean * n - traces[j]) / (n - 1)
                d = traces[j] - others
                se = pooled * np.sqrt(1 + 1 / (n - 1)) / np.sqrt(len(grid))
                if abs(d.mean()) > consistency_sigma * se:
                    raise ConsistencyError(
                        f"trace {j} deviates from the others by {d.mean() / se:.1f} sigma")
    else:
        sigma = np.zeros_like(mean)
    return ForceCurve(grid, mean, sigma, {"n_traces": n, "source": "extracted"})
