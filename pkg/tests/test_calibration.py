import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from angcasimir.calibration import (MEASURED_VOLTAGES, CalibrationTruth, DeflectionDataset,
                                    ErrorBudget, calibrate, calibrate_with_drift,
                                    casimir_force_model, combine_errors, fit_curvature,
                                    fit_parabolas, simulate_deflection, simulate_repetitions)
from angcasimir.corrugation import Geometry
from angcasimir.electrostatics import x_coefficient
from angcasimir.errors import ConfigError, DomainError, InstabilityError, RankError

TRUTH = CalibrationTruth()
GEOM = Geometry.measured(0.0)


@pytest.fixture(scope="module")
def fcas(au, room, beta):
    return casimir_force_model(GEOM, au, room, beta)


@pytest.fixture(scope="module")
def clean(fcas):
    return simulate_deflection(TRUTH, GEOM, fcas)


def test_combine_errors_values():
    assert combine_errors(0.51, 0.79) == pytest.approx(0.94, abs=5e-3)
    assert combine_errors(0.51, 0.64) == pytest.approx(0.82, abs=5e-3)
    assert np.allclose(ErrorBudget.measured().total(np.array([127.0, 300.0])), [0.94, 0.82], atol=5e-3)


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 1e3), st.floats(0, 1e3), st.floats(0, 1e3))
def test_combine_errors_properties(a, b, extra):
    assert combine_errors(a, b) == combine_errors(b, a)
    assert combine_errors(a + extra, b) >= combine_errors(a, b)
    assert combine_errors(a, b) >= max(a, b)


def test_combine_errors_rejects_negative():
    with pytest.raises(DomainError):
        combine_errors(-0.1, 0.2)


def _synthetic(volts, z, sig_fn):
    return DeflectionDataset(volts, [z] * len(volts), [sig_fn(v, z) for v in volts], m=0.0)


def test_three_point_parabola_is_exact():
    z = np.arange(0.0, 50.0)
    ds = _synthetic([-120.0, -90.0, -40.0], z, lambda v, z: 0.01 * (1 + z / 100) * (v + 87.5) ** 2 + 3.0)
    pf = fit_parabolas(ds)
    assert np.allclose(pf.vertex, -87.5, atol=1e-9)
    assert np.allclose(pf.curvature, 0.01 * (1 + pf.z_rel / 100), rtol=1e-10)


def test_parabola_offset_invariance():
    z = np.arange(0.0, 50.0)
    rng = np.random.default_rng(1)
    noise = {v: rng.normal(0, 0.1, z.size) for v in MEASURED_VOLTAGES}
    a = _synthetic(MEASURED_VOLTAGES, z, lambda v, z: 0.002 * (v + 90) ** 2 + noise[v])
    b = _synthetic(MEASURED_VOLTAGES, z, lambda v, z: 0.002 * (v + 90) ** 2 + noise[v] + 7.0)
    pa, pb = fit_parabolas(a), fit_parabolas(b)
    assert np.allclose(pa.vertex, pb.vertex, atol=1e-9)
    assert np.allclose(pa.curvature, pb.curvature, rtol=1e-9)


def test_parabola_rank_error():
    z = np.arange(0.0, 20.0)
    with pytest.raises(RankError):
        fit_parabolas(_synthetic([-100.0, -50.0, -100.0, -50.0], z, lambda v, z: v * z))


def test_noiseless_recovery(clean):
    c = calibrate(clean, GEOM)
    assert c.V0_mV == pytest.approx(TRUTH.V0_mV, abs=1e-3)
    assert c.z0_nm == pytest.approx(TRUTH.z0_nm, abs=0.05)
    assert c.kprime == pytest.approx(TRUTH.kprime, rel=1e-3)
    assert c.trend["independent_of_separation"] in (True, False)
    assert "[calibration]" in c.report()


def test_doubling_curvature_halves_kprime():
    z_rel = np.linspace(0, 300, 301)
    a = x_coefficient(z_rel + 126.2, GEOM) / 1.35
    f1 = fit_curvature(z_rel, a, GEOM)
    f2 = fit_curvature(z_rel, 2 * a, GEOM)
    assert f1.kprime == pytest.approx(1.35, rel=1e-6)
    assert f1.z0_nm == pytest.approx(126.2, abs=1e-4)
    assert f2.kprime == pytest.approx(f1.kprime / 2, rel=1e-6)
    assert f2.z0_nm == pytest.approx(f1.z0_nm, abs=1e-4)


def test_trace_at_v0_gives_casimir_force(fcas):
    ds = simulate_deflection(TRUTH, GEOM, fcas, voltages=[TRUTH.V0_mV])
    c = calibrate(simulate_deflection(TRUTH, GEOM, fcas), GEOM)
    from angcasimir.calibration import extract_casimir
    f = extract_casimir(ds, c, GEOM)
    assert np.allclose(f.F_pN, fcas(f.z_nm), atol=0.05)


def test_traces_agree(clean, fcas):
    from angcasimir.calibration import extract_casimir
    c = calibrate(clean, GEOM)
    per_trace = []
    for i, v in enumerate(clean.voltages_mV):
        one = DeflectionDataset([v], [clean.z_piezo_nm[i]], [clean.s_def[i]], clean.m)
        per_trace.append(extract_casimir(one, c, GEOM).F_pN)
    per_trace = np.array(per_trace)
    assert np.ptp(per_trace, axis=0).max() < 0.1


def test_noisy_extraction(fcas):
    from angcasimir.calibration import extract_casimir
    ds = simulate_repetitions(TRUTH, GEOM, fcas, repetitions=10, seed=3, noise=0.5 / TRUTH.kprime)
    c = calibrate(ds, GEOM)
    f = extract_casimir(ds, c, GEOM)
    assert np.all(np.abs(f.F_pN - fcas(f.z_nm)) < 5 * f.sigma_pN + 0.3)
    assert f.meta["n_traces"] == 110


def test_dataset_csv_round_trip(clean, tmp_path):
    p = tmp_path / "d.csv"
    clean.to_csv(p)
    lines = p.read_text().splitlines()
    assert lines[0].startswith("# m_nm_per_mV=") and lines[1] == "voltage_mV,z_piezo_nm,S_def_signal"
    back = DeflectionDataset.from_csv(p)
    assert back.m == clean.m
    assert np.array_equal(back.voltages_mV, clean.voltages_mV)
    for a, b in zip(back.s_def, clean.s_def):
        assert np.array_equal(a, b)
    with pytest.raises(ConfigError):
        DeflectionDataset.from_csv(tmp_path / "none.csv")


def test_drift_removal(fcas):
    ds = simulate_deflection(TRUTH, GEOM, fcas, drift=0.05)
    naive = calibrate(ds, GEOM)
    _, fixed = calibrate_with_drift(ds, GEOM, fcas)
    assert abs(fixed.z0_nm - TRUTH.z0_nm) < 0.5
    assert abs(fixed.kprime / TRUTH.kprime - 1) < abs(naive.kprime / TRUTH.kprime - 1) + 1e-3


def test_instability_error(fcas):
    soft = CalibrationTruth(m=100.0)
    with pytest.raises(InstabilityError):
        simulate_deflection(soft, GEOM, fcas)


def test_simulation_is_deterministic(fcas):
    a = simulate_deflection(TRUTH, GEOM, fcas, noise=0.4, seed=11)
    b = simulate_deflection(TRUTH, GEOM, fcas, noise=0.4, seed=11)
    c = simulate_deflection(TRUTH, GEOM, fcas, noise=0.4, seed=12)
    assert all(np.array_equal(x, y) for x, y in zip(a.s_def, b.s_def))
    assert not np.array_equal(a.s_def[0], c.s_def[0])


def test_dataset_validation():
    with pytest.raises(DomainError):
        DeflectionDataset([1.0, 2.0], [[0.0, 1.0]], [[0.0, 1.0]], 0.1)
    with pytest.raises(DomainError):
        DeflectionDataset([1.0], [[0.0, 1.0, 0.5]], [[0.0, 1.0, 2.0]], 0.1)


def test_pooled_dataset_csv_keeps_repetitions(fcas, tmp_path):
    ds = simulate_repetitions(TRUTH, GEOM, fcas, repetitions=2, seed=5, noise=0.3,
                              voltages=[-120.0, -60.0], z_piezo=np.arange(0.0, 40.0))
    ds.to_csv(tmp_path / "p.csv")
    back = DeflectionDataset.from_csv(tmp_path / "p.csv")
    assert list(back.voltages_mV) == [-120.0, -60.0, -120.0, -60.0]
    for a, b in zip(back.s_def, ds.s_def):
        assert np.array_equal(a, b)
