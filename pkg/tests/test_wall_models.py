# GrateWave/tests/test_wall_models.py

"""
Drywall slab reflection, grating order bookkeeping and coefficient tables.
"""

import math
import os
import sys

import numpy as np
import pytest

# Add the project root to Python path
project_root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, project_root)

from core.exceptions import (CoefficientValidationError, ConfigurationError, ExtrapolationError,
                             IncidenceAngleError)
from core.geometry import MU_0, RoomGeometry
from core.wall_models import (DrywallMaterial, GratingSpec, coefficients_from_direction,
                              drywall_reflection_curve, grating_coefficients, grating_orders,
                              load_coefficient_table, order_coefficients, slab_reflection,
                              validate_coefficient_table)

ROOM = RoomGeometry(3.75, 3.75, 2.4e9)
WAVELENGTH = ROOM.wavelength


def transfer_matrix_reflection(theta: float, mat: DrywallMaterial, room: RoomGeometry) -> complex:
    """Characteristic-matrix reflection of one slab between two air half-spaces (TE)."""
    omega = room.omega
    k0 = room.k0
    k2 = mat.wavenumber(room)
    kt = k0 * math.sin(theta)
    kz1 = k0 * math.cos(theta)
    kz2 = np.sqrt(k2 * k2 - kt * kt + 0j)
    y1 = kz1 / (omega * MU_0)
    y2 = kz2 / (omega * MU_0 * mat.mu_rel)
    delta = kz2 * mat.thickness
    m11 = np.cos(delta)
    m12 = 1j * np.sin(delta) / y2
    m21 = 1j * y2 * np.sin(delta)
    m22 = np.cos(delta)
    numerator = y1 * m11 + y1 * y1 * m12 - m21 - y1 * m22
    denominator = y1 * m11 + y1 * y1 * m12 + m21 + y1 * m22
    return complex(numerator / denominator)


def write_table(path, rows, header="theta_deg m re im"):
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(header + "\n")
        for row in rows:
            handle.write(" ".join(repr(float(v)) for v in row) + "\n")
    return str(path)


# --- Drywall slab ---------------------------------------------------------------

def test_slab_matches_transfer_matrix():
    print("🧪 Slab reflection vs characteristic-matrix oracle")
    mat = DrywallMaterial()
    for degrees in range(0, 90, 5):
        theta = math.radians(degrees)
        expected = transfer_matrix_reflection(theta, mat, ROOM)
        assert abs(slab_reflection(theta, mat, ROOM) - expected) < 1e-10, degrees


def test_vanishing_thickness_is_transparent():
    mat = DrywallMaterial(thickness=1e-15)
    for degrees in (0.0, 30.0, 60.0, 85.0):
        assert abs(slab_reflection(math.radians(degrees), mat, ROOM)) < 1e-10


def test_lossless_half_wave_slab_is_transparent_at_normal_incidence():
    eps = 2.75
    thickness = WAVELENGTH / (2.0 * math.sqrt(eps))
    mat = DrywallMaterial(eps_real=eps, loss_tangent=0.0, thickness=thickness)
    assert abs(slab_reflection(0.0, mat, ROOM)) < 1e-10


def test_reflection_is_passive_and_grows_toward_grazing():
    curve = drywall_reflection_curve(DrywallMaterial(), ROOM, 1000)
    assert curve.theta[0] == 0.0
    assert curve.magnitude[0] == pytest.approx(abs(slab_reflection(0.0, DrywallMaterial(), ROOM)))
    assert np.all(curve.magnitude <= 1.0)
    assert curve.magnitude[-1] > 0.9
    assert curve.magnitude[-1] > curve.magnitude[0]
    assert len(curve.theta) == 1000


def test_slab_rejects_out_of_range_angles():
    mat = DrywallMaterial()
    with pytest.raises(IncidenceAngleError):
        slab_reflection(0.5 * math.pi, mat, ROOM)
    with pytest.raises(IncidenceAngleError):
        slab_reflection(-0.1, mat, ROOM)
    with pytest.raises(IncidenceAngleError):
        slab_reflection(np.array([0.1, float("nan")]), mat, ROOM)


def test_material_validation():
    with pytest.raises(ConfigurationError):
        DrywallMaterial(thickness=0.0)
    with pytest.raises(ConfigurationError):
        DrywallMaterial(eps_real=0.5)


# --- Grating orders ---------------------------------------------------------------

def test_orders_at_normal_incidence():
    orders = dict(grating_orders(0.0, 2.0 * WAVELENGTH, WAVELENGTH))
    assert sorted(orders) == [-1, 0, 1]
    assert math.degrees(orders[0]) == pytest.approx(0.0, abs=1e-12)
    assert math.degrees(orders[1]) == pytest.approx(-30.0, abs=1e-9)
    assert math.degrees(orders[-1]) == pytest.approx(30.0, abs=1e-9)


def test_orders_at_oblique_incidence_exclude_grazing():
    orders = dict(grating_orders(math.radians(30.0), 2.0 * WAVELENGTH, WAVELENGTH))
    assert sorted(orders) == [0, 1, 2]
    assert math.degrees(orders[0]) == pytest.approx(30.0, abs=1e-9)
    assert math.degrees(orders[1]) == pytest.approx(0.0, abs=1e-9)
    assert math.degrees(orders[2]) == pytest.approx(-30.0, abs=1e-9)


def test_subwavelength_period_keeps_only_specular():
    for degrees in (0.0, 20.0, 60.0, 85.0):
        assert [m for m, _ in grating_orders(math.radians(degrees), 0.25 * WAVELENGTH, WAVELENGTH)] == [0]


def test_orders_follow_grating_equation():
    rng = np.random.default_rng(7)
    for _ in range(100):
        theta = rng.uniform(-0.49 * math.pi, 0.49 * math.pi)
        period = rng.uniform(0.3, 5.0) * WAVELENGTH
        for m, theta_m in grating_orders(theta, period, WAVELENGTH):
            expected = math.asin(math.sin(theta) - m * (WAVELENGTH / period))
            assert theta_m == pytest.approx(expected, abs=1e-12)


# --- Kirchhoff coefficients ----------------------------------------------------------

def test_all_pec_and_all_drywall_limits():
    theta = math.radians(20.0)
    pec = grating_coefficients(theta, GratingSpec(period=2.0 * WAVELENGTH, pec_duty=1.0), ROOM)
    assert pec[0] == pytest.approx(-1.0 + 0j, abs=1e-15)
    assert all(abs(value) == 0.0 for m, value in pec.items() if m != 0)

    drywall = grating_coefficients(theta, GratingSpec(period=2.0 * WAVELENGTH, pec_duty=0.0), ROOM)
    assert drywall[0] == pytest.approx(slab_reflection(theta, DrywallMaterial(), ROOM), abs=1e-15)
    assert all(abs(value) == 0.0 for m, value in drywall.items() if m != 0)


def test_half_duty_first_orders():
    spec = GratingSpec(period=2.0 * WAVELENGTH, pec_duty=0.5)
    gamma = slab_reflection(0.0, DrywallMaterial(), ROOM)
    coefficients = grating_coefficients(0.0, spec, ROOM)
    assert set(coefficients) == {-1, 0, 1}
    assert coefficients[0] == pytest.approx(-0.5 + 0.5 * gamma, abs=1e-12)
    for m in (-1, 1):
        assert abs(coefficients[m]) == pytest.approx(abs(-1.0 - gamma) / math.pi, abs=1e-12)


def test_kirchhoff_coefficients_are_passive():
    spec = GratingSpec(period=1.3 * WAVELENGTH, pec_duty=0.35, max_order=5)
    theta = np.linspace(-1.5, 1.5, 301)
    orders, values = order_coefficients(theta, spec, ROOM)
    sin_m = np.sin(theta)[:, None] - orders[None, :] * WAVELENGTH / spec.period
    propagating = np.abs(sin_m) < 1.0 - 1e-9
    cos_m = np.sqrt(np.clip(1.0 - sin_m ** 2, 0.0, 1.0))
    energy = np.sum(np.where(propagating, np.abs(values) ** 2 * cos_m / np.cos(theta)[:, None], 0.0), axis=1)
    assert np.all(energy <= 1.0 + 1e-12)


def test_grating_spec_validation():
    with pytest.raises(ConfigurationError):
        GratingSpec(period=WAVELENGTH, pec_duty=1.5)
    with pytest.raises(ConfigurationError):
        GratingSpec(period=0.0)
    with pytest.raises(ConfigurationError):
        GratingSpec(period=WAVELENGTH, max_order=-1)


# --- Coefficient tables -------------------------------------------------------------

def test_table_lookup_interpolates_and_mirrors(tmp_path):
    rows = []
    for theta in (0.0, 10.0, 20.0):
        for m, value in ((-1, 0.1 + 0.01 * theta), (0, -0.5), (1, 0.2j)):
            value = complex(value)
            rows.append((theta, m, value.real, value.imag))
    table = load_coefficient_table(write_table(tmp_path / "table.txt", rows))
    assert table.orders == (-1, 0, 1)
    assert table.mirrored

    spec = GratingSpec(period=2.0 * WAVELENGTH, coeff_source=table, max_order=1)
    orders, values = order_coefficients(np.radians([5.0, -5.0]), spec, ROOM)
    column = {int(m): i for i, m in enumerate(orders)}
    assert values[0, column[-1]] == pytest.approx(0.15 + 0j)
    # R_m(-theta) = R_{-m}(theta)
    assert values[1, column[1]] == pytest.approx(values[0, column[-1]])
    assert values[1, column[-1]] == pytest.approx(values[0, column[1]])


def test_table_extrapolation_raises(tmp_path):
    rows = [(theta, 0, -0.5, 0.0) for theta in (0.0, 45.0)]
    table = load_coefficient_table(write_table(tmp_path / "short.txt", rows))
    spec = GratingSpec(period=WAVELENGTH, coeff_source=table, max_order=0)
    with pytest.raises(ExtrapolationError):
        coefficients_from_direction(np.array([math.sin(math.radians(60.0))]),
                                    np.array([math.cos(math.radians(60.0))]), spec, ROOM)


def test_table_rejects_bad_files(tmp_path):
    with pytest.raises(CoefficientValidationError):
        load_coefficient_table(write_table(tmp_path / "header.txt", [(0.0, 0, 0.5, 0.0)], header="a b c d"))
    with pytest.raises(CoefficientValidationError):
        load_coefficient_table(write_table(tmp_path / "big.txt", [(0.0, 0, 1.5, 0.0), (10.0, 0, 0.5, 0.0)]))
    with pytest.raises(CoefficientValidationError):
        load_coefficient_table(write_table(tmp_path / "order.txt", [(10.0, 0, 0.5, 0.0), (0.0, 0, 0.5, 0.0)]))
    with pytest.raises(CoefficientValidationError):
        load_coefficient_table(str(tmp_path / "missing.txt"))


def test_table_energy_validation(tmp_path):
    rows = []
    for theta in (0.0, 10.0):
        rows += [(theta, -1, 0.9, 0.0), (theta, 0, 0.9, 0.0), (theta, 1, 0.9, 0.0)]
    table = load_coefficient_table(write_table(tmp_path / "hot.txt", rows))
    with pytest.raises(CoefficientValidationError):
        validate_coefficient_table(table, 2.0 * WAVELENGTH, WAVELENGTH)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
