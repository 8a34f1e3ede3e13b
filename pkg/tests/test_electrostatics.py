import math

import numpy as np
import pytest

from angcasimir.corrugation import Geometry
from angcasimir.electrostatics import (ElectroParams, LaplaceGrid, averaged_cross_factor,
                                       cross_coupling_factor, cross_term, electrostatic_force,
                                       laplace_oracle, oracle_table, sinc, write_oracle_csv,
                                       x_coefficient)
from angcasimir.errors import ContactError, DomainError

FLAT = Geometry(A1_nm=0.0, A2_nm=0.0)


def test_flat_coefficient_value():
    # pi eps0 R / z with R = 99.6 um, z = 130 nm, in pN/mV^2
    assert x_coefficient(130.0, FLAT) == pytest.approx(2.131e-2, rel=1e-3)


def test_sinc():
    assert sinc(0.0) == 1.0
    assert sinc(1e-6) == pytest.approx(1.0)
    assert sinc(math.pi / 2) == pytest.approx(2 / math.pi)
    assert np.allclose(sinc(np.array([0.0, math.pi])), [1.0, 0.0], atol=1e-15)


def test_cross_term_null_at_first_zero():
    g = Geometry.measured(0.0)
    g = g.with_angle(g.period_nm / (g.Ly_um * 1e3))
    assert abs(cross_coupling_factor(g)) < 1e-12
    assert abs(cross_term(200.0, g)) < 1e-15


def test_cross_term_angle_ratio_independent_of_z():
    g0, g1 = Geometry.measured(0.0), Geometry.measured(1.2)
    ratios = [cross_term(z, g1) / cross_term(z, g0) for z in (130.0, 200.0, 400.0)]
    assert np.allclose(ratios, cross_coupling_factor(g1), rtol=1e-12)


def test_cross_term_reduces_attraction_when_aligned():
    g = Geometry.measured(0.0)
    assert cross_term(130.0, g) < 0
    assert x_coefficient(130.0, g) < x_coefficient(130.0, Geometry.measured(1.2))


@pytest.mark.parametrize("deg", [0.3, 1.2, 2.4])
def test_averaged_cross_factor_matches_sinc(deg):
    g = Geometry.measured(deg)
    assert averaged_cross_factor(g) == pytest.approx(cross_coupling_factor(g), abs=1e-3)


def test_x_decreasing():
    z = np.linspace(127, 400, 50)
    for deg in (0.0, 1.2, 2.4):
        x = x_coefficient(z, Geometry.measured(deg))
        assert np.all(x > 0) and np.all(np.diff(x) < 0)


def test_force_even_in_voltage_offset():
    g = Geometry.measured(1.2)
    f1 = electrostatic_force(150.0, g, ElectroParams(-90.2 + 30, -90.2))
    f2 = electrostatic_force(150.0, g, ElectroParams(-90.2 - 30, -90.2))
    assert f1 == pytest.approx(f2, rel=1e-14)
    assert electrostatic_force(150.0, g, ElectroParams(-90.2, -90.2)) == 0.0


def test_contact_and_domain_errors():
    with pytest.raises(ContactError):
        x_coefficient(50.0, Geometry.measured(0.0))
    with pytest.raises(DomainError):
        x_coefficient(150.0, Geometry(theta_rad=-0.01))
    with pytest.raises(DomainError):
        LaplaceGrid(nx=32)
    with pytest.raises(DomainError):
        LaplaceGrid(nx=65)
    with pytest.raises(DomainError):
        laplace_oracle(200.0, Geometry.measured(1.2))


def test_oracle_flat_gap():
    assert laplace_oracle(200.0, FLAT) == pytest.approx(x_coefficient(200.0, FLAT), rel=2e-3)


def test_oracle_grid_convergence():
    g = Geometry.measured(0.0)
    coarse = laplace_oracle(200.0, g, LaplaceGrid())
    fine = laplace_oracle(200.0, g, LaplaceGrid().refined())
    assert abs(coarse / fine - 1) < 1e-3


def test_oracle_csv(tmp_path):
    rows = oracle_table([300.0], Geometry.measured(0.0))
    assert abs(rows[0][3]) < 1e-3
    write_oracle_csv(rows, tmp_path / "o.csv")
    lines = (tmp_path / "o.csv").read_text().splitlines()
    assert lines[0] == "z_nm,X_formula,X_oracle,rel_diff" and len(lines) == 2
