# GrateWave/tests/test_specfun.py

"""
Bessel / Hankel checks against scipy.special, which serves only as an oracle
here. Run with `pytest tests/test_specfun.py` or directly as a script.
"""

import math
import os
import sys

import numpy as np
import pytest
from scipy import special

# Add the project root to Python path
project_root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, project_root)

from core.exceptions import SpecialFunctionDomainError
from core.specfun import FAR_SWITCHOVER, SWITCHOVER, bessel_j0, bessel_y0, hankel2_0, log_bessel_i0


def test_known_values():
    assert bessel_j0(0.0) == pytest.approx(1.0, abs=1e-15)
    assert bessel_j0(1.0) == pytest.approx(0.7651976866, abs=1e-9)
    assert bessel_y0(1.0) == pytest.approx(0.0882569642, abs=1e-9)
    h = hankel2_0(1.0)
    assert h.real == pytest.approx(0.7651976866, abs=1e-9)
    assert h.imag == pytest.approx(-0.0882569642, abs=1e-9)


def test_first_zeros():
    assert abs(bessel_j0(2.404825557695773)) < 1e-10
    assert abs(bessel_y0(0.8935769662791675)) < 1e-10


def test_hankel_magnitude_at_fifteen_wavelengths():
    x = 2.0 * math.pi * 15.0
    assert abs(hankel2_0(x)) == pytest.approx(0.08218, rel=1e-3)


def test_against_scipy_small_and_large():
    print("🧪 Comparing J0, Y0 and H0(2) with scipy.special")
    x = np.concatenate([np.linspace(0.01, 30.0, 3001), np.linspace(30.0, 2000.0, 4001)])
    np.testing.assert_allclose(bessel_j0(x), special.j0(x), rtol=0, atol=1e-10)
    np.testing.assert_allclose(bessel_y0(x), special.y0(x), rtol=0, atol=1e-10)
    np.testing.assert_allclose(hankel2_0(x), special.hankel2(0, x), rtol=0, atol=1e-10)


def test_switchover_is_continuous():
    below = np.nextafter(SWITCHOVER, 0.0)
    above = SWITCHOVER
    assert abs(bessel_j0(below) - bessel_j0(above)) < 1e-10
    assert abs(bessel_y0(below) - bessel_y0(above)) < 1e-10
    for x in (SWITCHOVER - 1e-6, SWITCHOVER + 1e-6):
        assert bessel_j0(x) == pytest.approx(special.j0(x), abs=1e-10)


def test_far_hankel_regime_is_continuous():
    x = np.array([np.nextafter(FAR_SWITCHOVER, 0.0), FAR_SWITCHOVER, 450.0, 6283.0])
    np.testing.assert_allclose(hankel2_0(x), special.hankel2(0, x), rtol=1e-12, atol=0)
    assert abs(hankel2_0(x[0]) - hankel2_0(x[1])) < 1e-12


def test_large_argument_matches_leading_asymptote():
    x = np.array([150.0, 500.0, 1e4])
    leading = np.sqrt(2.0 / (math.pi * x)) * np.exp(-1j * (x - 0.25 * math.pi))
    np.testing.assert_allclose(hankel2_0(x), leading, rtol=1e-3)
    assert abs(hankel2_0(1e4)) * math.sqrt(math.pi * 1e4 / 2.0) == pytest.approx(1.0, abs=1e-4)


def test_j0_is_even_and_keeps_shape():
    assert bessel_j0(-3.0) == bessel_j0(3.0)
    grid = np.linspace(0.5, 5.0, 12).reshape(3, 4)
    assert bessel_j0(grid).shape == (3, 4)
    assert hankel2_0(grid).shape == (3, 4)
    assert isinstance(hankel2_0(2.0), complex)


def test_log_i0():
    assert log_bessel_i0(0.0) == 0.0
    assert log_bessel_i0(1.0) == pytest.approx(math.log(1.2660658777520082), abs=1e-12)
    assert log_bessel_i0(1e4) == pytest.approx(9994.47, abs=0.01)
    x = np.linspace(0.0, 600.0, 2401)
    np.testing.assert_allclose(log_bessel_i0(x), np.log(special.i0e(x)) + x, rtol=1e-11, atol=1e-12)
    assert np.isfinite(log_bessel_i0(1e5))


def test_domain_errors():
    with pytest.raises(SpecialFunctionDomainError):
        bessel_y0(0.0)
    with pytest.raises(SpecialFunctionDomainError):
        hankel2_0(-1.0)
    with pytest.raises(SpecialFunctionDomainError):
        bessel_j0(float("nan"))
    with pytest.raises(SpecialFunctionDomainError):
        log_bessel_i0(-1.0)
    with pytest.raises(SpecialFunctionDomainError):
        hankel2_0(np.array([1.0, np.inf]))


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
