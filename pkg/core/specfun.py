# GrateWave/core/specfun.py

"""
Zero-order Bessel, Hankel and modified Bessel functions.

Small arguments use the ascending power series; large arguments use the
Hankel asymptotic expansion. The switchover sits at x = 12, where the
truncated asymptotic series (24 terms) and the series cancellation error
are both near 1e-12 absolute. H0^(2) switches to a six-term amplitude
series at x = 200, the range of distant image sources.

Every function accepts a scalar or a numpy array and returns the same shape.
"""

import math
from typing import Tuple, Union

import numpy as np

from core.exceptions import SpecialFunctionDomainError

ArrayLike = Union[float, np.ndarray]

SWITCHOVER = 12.0
FAR_SWITCHOVER = 200.0
LOG_I0_SWITCHOVER = 20.0

_SERIES_TERMS = 60
_ASYMPTOTIC_TERMS = 24
# beyond FAR_SWITCHOVER the seventh term is below 1e-16
_FAR_TERMS = 6
_LOG_I0_ASYMPTOTIC_TERMS = 20
_EULER_GAMMA = 0.57721566490153286


def _real_input(x: ArrayLike, name: str) -> np.ndarray:
    values = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(values)):
        raise SpecialFunctionDomainError(f"{name}: argument must be finite")
    return values


def _shape_output(values: np.ndarray, x: ArrayLike):
    if np.ndim(x) == 0:
        return values.reshape(()).item()
    return values


def _j0_series(x: np.ndarray) -> np.ndarray:
    quarter_square = 0.25 * x * x
    term = np.ones_like(x)
    total = np.ones_like(x)
    for k in range(1, _SERIES_TERMS + 1):
        term = term * (-quarter_square) / (k * k)
        total = total + term
    return total


def _j0_y0_series(x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    quarter_square = 0.25 * x * x
    term = np.ones_like(x)
    j0 = np.ones_like(x)
    harmonic_tail = np.zeros_like(x)
    harmonic = 0.0
    for k in range(1, _SERIES_TERMS + 1):
        term = term * (-quarter_square) / (k * k)
        harmonic += 1.0 / k
        j0 = j0 + term
        harmonic_tail = harmonic_tail - harmonic * term
    y0 = (2.0 / math.pi) * ((np.log(0.5 * x) + _EULER_GAMMA) * j0 + harmonic_tail)
    return j0, y0


def _hankel_amplitudes(x: np.ndarray, terms: int = _ASYMPTOTIC_TERMS) -> Tuple[np.ndarray, np.ndarray]:
    """P(x) and Q(x) of the Hankel asymptotic expansion for order zero."""
    inverse = 1.0 / x
    power = np.ones_like(x)
    p = np.ones_like(x)
    q = np.zeros_like(x)
    coefficient = 1.0
    for k in range(1, terms + 1):
        coefficient *= -((2 * k - 1) ** 2) / (8.0 * k)
        power = power * inverse
        term = coefficient * power
        if k % 2:
            q = q + (-1.0) ** ((k - 1) // 2) * term
        else:
            p = p + (-1.0) ** (k // 2) * term
    return p, q


def _j0_y0_asymptotic(x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    p, q = _hankel_amplitudes(x)
    chi = x - 0.25 * math.pi
    amplitude = np.sqrt(2.0 / (math.pi * x))
    cos_chi = np.cos(chi)
    sin_chi = np.sin(chi)
    j0 = amplitude * (p * cos_chi - q * sin_chi)
    y0 = amplitude * (p * sin_chi + q * cos_chi)
    return j0, y0


def _j0_y0(x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    j0 = np.empty_like(x)
    y0 = np.empty_like(x)
    small = x < SWITCHOVER
    if np.any(small):
        j0[small], y0[small] = _j0_y0_series(x[small])
    large = ~small
    if np.any(large):
        j0[large], y0[large] = _j0_y0_asymptotic(x[large])
    return j0, y0


def bessel_j0(x: ArrayLike) -> ArrayLike:
    """
    Bessel function of the first kind, order zero.

    Args:
        x: Finite real argument (scalar or array). J0 is even, so negative
           arguments are allowed.

    Returns:
        J0(x) with absolute error below 1e-10 for |x| <= 2000.
    """
    values = np.abs(_real_input(x, "bessel_j0"))
    flat = np.atleast_1d(values).astype(float)
    result = np.empty_like(flat)
    small = flat < SWITCHOVER
    if np.any(small):
        result[small] = _j0_series(flat[small])
    large = ~small
    if np.any(large):
        result[large] = _j0_y0_asymptotic(flat[large])[0]
    return _shape_output(result.reshape(values.shape), x)


def bessel_y0(x: ArrayLike) -> ArrayLike:
    """Bessel function of the second kind, order zero, for x > 0."""
    values = _real_input(x, "bessel_y0")
    if np.any(values <= 0.0):
        raise SpecialFunctionDomainError("bessel_y0: argument must be positive")
    flat = np.atleast_1d(values).astype(float)
    _, y0 = _j0_y0(flat)
    return _shape_output(y0.reshape(values.shape), x)


def hankel2_0(x: ArrayLike) -> ArrayLike:
    """
    Hankel function of the second kind, order zero: J0(x) - j*Y0(x).

    Args:
        x: Positive real argument (scalar or array).

    Returns:
        Complex scalar or complex array.
    """
    values = _real_input(x, "hankel2_0")
    if np.any(values <= 0.0):
        raise SpecialFunctionDomainError("hankel2_0: argument must be positive")
    flat = np.atleast_1d(values).astype(float)
    result = np.empty(flat.shape, dtype=complex)
    near = flat < FAR_SWITCHOVER
    if np.any(near):
        j0, y0 = _j0_y0(flat[near])
        result[near] = j0 - 1j * y0
    far = ~near
    if np.any(far):
        result[far] = _hankel2_far(flat[far])
    return _shape_output(result.reshape(values.shape), x)


def _hankel2_far(x: np.ndarray) -> np.ndarray:
    """sqrt(2 / (pi x)) (P - jQ) exp(-j(x - pi/4)) with a short amplitude series."""
    p, q = _hankel_amplitudes(x, _FAR_TERMS)
    return np.sqrt(2.0 / (math.pi * x)) * (p - 1j * q) * np.exp(-1j * (x - 0.25 * math.pi))


def _log_i0_series(x: np.ndarray) -> np.ndarray:
    quarter_square = 0.25 * x * x
    term = np.ones_like(x)
    total = np.ones_like(x)
    for k in range(1, _SERIES_TERMS + 1):
        term = term * quarter_square / (k * k)
        total = total + term
    return np.log(total)


def _log_i0_asymptotic(x: np.ndarray) -> np.ndarray:
    inverse = 1.0 / x
    term = np.ones_like(x)
    total = np.ones_like(x)
    for k in range(1, _LOG_I0_ASYMPTOTIC_TERMS + 1):
        term = term * ((2 * k - 1) ** 2) * inverse / (8.0 * k)
        total = total + term
    return x - 0.5 * np.log(2.0 * math.pi * x) + np.log(total)


def log_bessel_i0(x: ArrayLike) -> ArrayLike:
    """
    Natural log of the modified Bessel function I0, overflow-free up to 1e5.

    Args:
        x: Non-negative real argument (scalar or array).

    Returns:
        ln I0(x).
    """
    values = _real_input(x, "log_bessel_i0")
    if np.any(values < 0.0):
        raise SpecialFunctionDomainError("log_bessel_i0: argument must be non-negative")
    flat = np.atleast_1d(values).astype(float)
    result = np.empty_like(flat)
    small = flat < LOG_I0_SWITCHOVER
    if np.any(small):
        result[small] = _log_i0_series(flat[small])
    large = ~small
    if np.any(large):
        result[large] = _log_i0_asymptotic(flat[large])
    return _shape_output(result.reshape(values.shape), x)


if __name__ == "__main__":
    for argument in (0.5, 1.0, 2.4048255577, 12.0, 94.2478):
        h = hankel2_0(argument)
        print(f"x={argument:<12} J0={bessel_j0(argument):+.12f} |H0(2)|={abs(h):.8f}")
    print(f"ln I0(1e4) = {log_bessel_i0(1e4):.4f}")
