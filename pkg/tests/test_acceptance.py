"""Acceptance criteria, one test each.

Every test prints (and records for the terminal summary) a single line
``criterion N: PASS|FAIL <details>`` before asserting at the stated tolerance.
"""
import math

import numpy as np
import pytest

import conftest
from angcasimir.calibration import (MEASURED_VOLTAGES, CalibrationTruth, calibrate,
                                    casimir_force_model, combine_errors, extract_casimir,
                                    simulate_deflection, simulate_repetitions)
from angcasimir.constants import C, HBAR
from angcasimir.corrugation import (ForceCurve, Geometry, force_curve, quadrature_grid,
                                    roughness_correct, u_corr)
from angcasimir.electrostatics import cross_term, laplace_oracle, x_coefficient
from angcasimir.gradexp import BetaModel
from angcasimir.lifshitz import Environment, energy_per_area
from angcasimir.materials import IDEAL_METAL

ROOM = Environment(300.0)
ZERO = Environment.zero()
ANGLES = (0.0, 1.2, 1.8, 2.4)
Z = np.arange(127.0, 301.0, 1.0)


def report(n, ok, detail):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} {detail}"
    print(line)
    conftest.ACCEPTANCE_LINES.append(line)
    assert ok, line


@pytest.fixture(scope="module")
def at130(au, beta):
    """F_der and F_pfa at 130 nm for the four measured angles."""
    out = {}
    for deg in ANGLES:
        g = Geometry.measured(deg)
        der = force_curve([130.0], [g.theta_rad], g, au, ROOM, beta)[0].F_pN[0]
        pfa = force_curve([130.0], [g.theta_rad], g, au, ROOM, beta, model="pfa")[0].F_pN[0]
        out[deg] = (der, pfa)
    return out


def test_criterion_01_ideal_closed_form():
    worst = 0.0
    for d in (50.0, 100.0, 500.0, 1000.0):
        exact = -math.pi ** 2 * HBAR * C / (720 * (d * 1e-9) ** 3)
        worst = max(worst, abs(energy_per_area(IDEAL_METAL, d, ZERO) / exact - 1))
    report(1, worst < 1e-3, f"max relative error {worst:.2e} (limit 1e-3)")


def test_criterion_02_matsubara_continuity(au):
    worst = 0.0
    for m in (IDEAL_METAL, au):
        a = energy_per_area(m, 100.0, Environment(1.0))
        b = energy_per_area(m, 100.0, ZERO)
        worst = max(worst, abs(a / b - 1))
    report(2, worst < 5e-3, f"|U(1 K)/U(0 K) - 1| = {worst:.2e} at 100 nm (limit 5e-3)")


def test_criterion_03_drude_plasma(au, beta):
    g = Geometry.measured(0.0)
    drude = force_curve(Z, [0.0], g, au, ROOM, beta)[0].F_pN
    plasma = force_curve(Z, [0.0], g, au.as_plasma(), ROOM, beta)[0].F_pN
    diff = np.abs(drude - plasma)
    limit = np.interp(Z, [127.0, 300.0], [0.94, 0.82])
    bad = Z[diff >= limit]
    detail = (f"|F_drude - F_plasma| = {diff[0]:.2f} pN at 127 nm, {diff[-1]:.2f} pN at 300 nm; "
              f"limit 0.94 to 0.82 pN; exceeded on {len(bad)} of {len(Z)} points")
    report(3, len(bad) == 0, detail)


def test_criterion_04_angle_sweep(at130):
    target = dict(zip(ANGLES, (84.9, 88.8, 92.5, 97.8)))
    rel = {deg: at130[deg][0] / target[deg] - 1 for deg in ANGLES}
    ratio = at130[2.4][0] / at130[0.0][0] - 1
    ok = all(abs(r) <= 0.05 for r in rel.values()) and abs(ratio - 0.15) <= 0.03
    forces = ", ".join(f"{at130[d][0]:.2f}" for d in ANGLES)
    report(4, ok, f"F(130 nm) = [{forces}] pN, max deviation {max(map(abs, rel.values())):.1%}, "
                  f"F(2.4)/F(0) - 1 = {ratio:.3f}")


def test_criterion_05_pfa_deviation(au, beta):
    g = Geometry.measured(0.0)
    der = force_curve(Z, [0.0], g, au, ROOM, beta)[0].F_pN
    pfa = force_curve(Z, [0.0], g, au, ROOM, beta, model="pfa")[0].F_pN
    dev = der / pfa - 1
    peak_ok = abs(dev[0] - 0.077) <= 0.02
    decays = bool(np.all(np.diff(dev) < 0))
    report(5, peak_ok and decays,
           f"deviation {dev[0]:.2%} at 127 nm, {dev[Z == 200][0]:.2%} at 200 nm, "
           f"{dev[-1]:.2%} at 300 nm (target 7.7 +- 2 points, decaying: {decays})")


def test_criterion_06_correlation_difference(at130):
    d0 = at130[0.0][0] - at130[0.0][1]
    d12 = at130[1.2][0] - at130[1.2][1]
    ok = abs(d0 - 5.9) <= 1.5 and abs(d12 - 4.2) <= 1.5
    report(6, ok, f"F_der - F_pfa = {d0:.2f} pN (0 deg), {d12:.2f} pN (1.2 deg)")


def test_criterion_07_electrostatic_oracle():
    g = Geometry.measured(0.0)
    rel = [abs(x_coefficient(z, g) / laplace_oracle(z, g) - 1) for z in (160.0, 200.0, 300.0, 400.0)]
    report(7, max(rel) < 0.01, f"max relative difference {max(rel):.2e} (limit 1e-2)")


def test_criterion_08_sinc_null():
    g = Geometry.measured(0.0)
    th = g.period_nm / (g.Ly_um * 1e3)
    g = g.with_angle(th)
    aligned = abs(cross_term(200.0, Geometry.measured(0.0)))
    residual = abs(cross_term(200.0, g))
    ok = residual < 1e-12 * aligned and abs(math.degrees(th) - 2.335) < 1e-3
    report(8, ok, f"theta = {math.degrees(th):.4f} deg, cross term {residual:.1e} "
                  f"vs {aligned:.2e} pN/mV^2 aligned")


def test_criterion_09_calibration_round_trip(au, beta):
    truth = CalibrationTruth()
    g = Geometry.measured(0.0)
    fcas = casimir_force_model(g, au, ROOM, beta)
    err = np.array([[c.V0_mV - truth.V0_mV, c.z0_nm - truth.z0_nm, c.kprime - truth.kprime]
                    for c in (calibrate(simulate_repetitions(truth, g, fcas, 10, seed=s,
                                                             noise=0.5 / truth.kprime), g)
                              for s in range(10))])
    worst = np.abs(err).max(axis=0)
    ok = worst[0] <= 1.5 and worst[1] <= 0.5 and worst[2] <= 0.02
    report(9, ok, f"max |error| over 10 seeds: V0 {worst[0]:.3f} mV, z0 {worst[1]:.3f} nm, "
                  f"k' {worst[2]:.4f} pN/mV")


def test_criterion_10_error_combination():
    a, b = combine_errors(0.51, 0.79), combine_errors(0.51, 0.64)
    report(10, round(a, 2) == 0.94 and round(b, 2) == 0.82, f"{a:.4f} pN, {b:.4f} pN")


def test_criterion_11_property_suites(au, beta):
    checks = {}
    a = u_corr(130.0, Geometry.measured(1.8), au, ROOM, beta)
    b = u_corr(130.0, Geometry.measured(-1.8), au, ROOM, beta)
    checks["parity"] = abs(a / b - 1) < 1e-10
    d = np.geomspace(50, 1000, 12)
    u = np.array([energy_per_area(au, x, ROOM) for x in d])
    f = force_curve(Z[::20], [0.0], Geometry.measured(0.0), au, ROOM, beta)[0].F_pN
    checks["monotone"] = bool(np.all(np.diff(u) > 0) and np.all(np.diff(f) < 0))
    worst = 0.0
    for deg in ANGLES:
        g = Geometry.measured(deg)
        worst = max(worst, abs(u_corr(130.0, g, au, ROOM, beta, refine=1)
                               / u_corr(130.0, g, au, ROOM, beta, refine=2) - 1))
    checks["doubling"] = worst < 1e-4
    z = np.arange(120.0, 141.0)
    c = roughness_correct(ForceCurve(z, 1e6 / z ** 3, 0.0), Geometry())
    expect = 1 + 6 * Geometry().roughness_sq / z[1:-1] ** 2
    checks["roughness"] = bool(np.allclose(c.F_pN[1:-1] * z[1:-1] ** 3 / 1e6, expect, rtol=1e-5))
    truth = CalibrationTruth()
    g = Geometry.measured(0.0)
    fcas = casimir_force_model(g, au, ROOM, beta)
    r1 = simulate_deflection(truth, g, fcas, noise=0.4, seed=42)
    r2 = simulate_deflection(truth, g, fcas, noise=0.4, seed=42)
    checks["determinism"] = all(np.array_equal(x, y) for x, y in zip(r1.s_def, r2.s_def))
    failed = [k for k, v in checks.items() if not v]
    report(11, not failed, f"{len(checks) - len(failed)}/{len(checks)} suites green"
                           + (f", failed: {failed}" if failed else f", doubling {worst:.1e}"))


def test_criterion_12_temperature_contrast(au, beta):
    g = Geometry.measured(0.0)
    hot = casimir_force_model(g, au, ROOM, beta)
    cold = casimir_force_model(g, au, ZERO, beta)
    truth = CalibrationTruth()
    ds = simulate_repetitions(truth, g, hot, 10, seed=2024, noise=0.5 / truth.kprime)
    curve = extract_casimir(ds, calibrate(ds, g), g)
    to_hot = curve.F_pN / hot(curve.z_nm)
    to_cold = curve.F_pN / cold(curve.z_nm)
    ratio = hot(curve.z_nm) / cold(curve.z_nm)
    dh, dc = np.mean(np.abs(to_hot - 1)), np.mean(np.abs(to_cold - 1))
    report(12, dh < dc and np.all(ratio < 1),
           f"mean |exp/theory - 1|: {dh:.4f} vs 300 K, {dc:.4f} vs 0 K; "
           f"F(300 K)/F(0 K) = {ratio[0]:.4f} at 127 nm, {ratio[-1]:.4f} at 300 nm")
