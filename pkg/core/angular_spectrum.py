# GrateWave/core/angular_spectrum.py

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np

from core.exceptions import ConfigurationError, GeometryError
from core.field_maps import field_at_points
from core.scenario import WINDOWS, Scenario
from core.wall_models import FreeSpace
from utils.logger import get_logger

logger = get_logger("core.angular_spectrum")

MIN_SPECTRUM_SAMPLES = 8

FieldFunction = Callable[[np.ndarray], np.ndarray]


@dataclass
class ApertureSampling:
    """Complex samples at n uniformly spaced points from start to end (inclusive)."""
    start: Tuple[float, float]
    end: Tuple[float, float]
    n_samples: int
    samples: np.ndarray
    wavelength: float

    @property
    def length(self) -> float:
        return math.hypot(self.end[0] - self.start[0], self.end[1] - self.start[1])

    @property
    def spacing(self) -> float:
        return self.length / (self.n_samples - 1)

    def points(self) -> np.ndarray:
        return aperture_points(self.start, self.end, self.n_samples)


@dataclass
class AngularSpectrum:
    sin_theta: np.ndarray
    magnitude: np.ndarray
    metadata: Dict = field(default_factory=dict)


def aperture_points(start: Sequence[float], end: Sequence[float], n: int) -> np.ndarray:
    fraction = np.linspace(0.0, 1.0, n)
    a = np.asarray(start, dtype=float)
    b = np.asarray(end, dtype=float)
    return a[None, :] + fraction[:, None] * (b - a)[None, :]


def plane_wave(k0: float, theta0: float, axis: Sequence[float] = (1.0, 0.0)) -> FieldFunction:
    """exp(-j k0 sin(theta0) t) with t the coordinate along `axis`."""
    direction = np.asarray(axis, dtype=float)
    direction = direction / np.linalg.norm(direction)
    kt = k0 * math.sin(theta0)

    def evaluate(points: np.ndarray) -> np.ndarray:
        return np.exp(-1j * kt * (points @ direction))

    return evaluate


def sample_line(field_fn: FieldFunction, start: Sequence[float], end: Sequence[float], n: int,
                wavelength: float) -> ApertureSampling:
    """
    Samples an arbitrary field function along a straight aperture.

    Raises:
        ConfigurationError: fewer than 2 points, a zero-length line, or spacing above lambda/2.
    """
    if n < 2:
        raise ConfigurationError("an aperture needs at least 2 samples")
    length = math.hypot(end[0] - start[0], end[1] - start[1])
    if length <= 0:
        raise ConfigurationError("aperture start and end coincide")
    spacing = length / (n - 1)
    if spacing > 0.5 * wavelength * (1.0 + 1e-12):
        raise ConfigurationError(f"aperture spacing {spacing / wavelength:.4f} lambda exceeds lambda/2 (Nyquist)")
    points = aperture_points(start, end, n)
    samples = np.asarray(field_fn(points), dtype=complex)
    return ApertureSampling(start=(float(start[0]), float(start[1])), end=(float(end[0]), float(end[1])),
                            n_samples=n, samples=samples, wavelength=wavelength)


def sample_aperture(scenario: Scenario, excitation: Optional[Sequence[complex]], start: Sequence[float],
                    end: Sequence[float], n: int, workers: int = 1) -> ApertureSampling:
    """
    Scattered field (total minus free-space incident) along an aperture line.

    Args:
        scenario: Room, wall and transmit array.
        excitation: Transmit weights; None means all ones.
        start: First aperture point.
        end: Last aperture point.
        n: Number of uniformly spaced samples.
        workers: Thread count.

    Raises:
        GeometryError: aperture leaves the room while walls are present.
        ConfigurationError: spacing violates lambda/2.
    """
    weights = (np.ones(scenario.tx.element_count, dtype=complex) if excitation is None
               else np.asarray(excitation, dtype=complex))
    if not isinstance(scenario.wall, FreeSpace):
        scenario.room.require_inside(np.asarray([start, end], dtype=float), "aperture endpoint")
    incident_scenario = scenario.with_wall(FreeSpace())

    def scattered(points: np.ndarray) -> np.ndarray:
        if isinstance(scenario.wall, FreeSpace):
            return np.zeros(len(points), dtype=complex)
        total = field_at_points(scenario, weights, points, workers)
        incident = field_at_points(incident_scenario, weights, points, workers)
        return total - incident

    return sample_line(scattered, start, end, n, scenario.wavelength)


def default_aperture(scenario: Scenario) -> Tuple[Tuple[float, float], Tuple[float, float], int]:
    """
    Line parallel to the right wall (x = L_x) at the configured offset in front
    of it, spanning the wall with the same inset at both ends.
    """
    offset = scenario.analysis.aperture_offset or 0.5 * scenario.wavelength
    room = scenario.room
    if not 0 < offset < 0.5 * min(room.length_x, room.length_y):
        raise GeometryError(f"aperture offset {offset:.4g} m does not fit the room")
    x = room.length_x - offset
    return (x, offset), (x, room.length_y - offset), scenario.analysis.aperture_samples


def _window(n: int, window: str) -> np.ndarray:
    if window not in WINDOWS:
        raise ConfigurationError(f"unknown window {window!r}; expected one of {WINDOWS}")
    return np.hanning(n) if window == "hann" else np.ones(n)


def raw_spectrum(ap: ApertureSampling, window: str = "none", zero_pad: int = 4) -> Tuple[np.ndarray, np.ndarray]:
    """
    Unnormalized DFT X_k = sum_n x_n exp(+j 2 pi k n / M) of the windowed,
    zero-padded samples, with the spatial frequencies k_x in fftshift order.
    """
    if ap.n_samples < MIN_SPECTRUM_SAMPLES:
        raise ConfigurationError(f"need at least {MIN_SPECTRUM_SAMPLES} samples, got {ap.n_samples}")
    if zero_pad < 1:
        raise ConfigurationError("zero_pad must be at least 1")
    length = ap.n_samples * int(zero_pad)
    padded = np.zeros(length, dtype=complex)
    padded[:ap.n_samples] = ap.samples * _window(ap.n_samples, window)
    bins = np.fft.fftshift(length * np.fft.ifft(padded))
    kx = 2.0 * math.pi * np.fft.fftshift(np.fft.fftfreq(length, d=ap.spacing))
    return kx, bins


def angular_spectrum(ap: ApertureSampling, window: str = "none", zero_pad: int = 4) -> AngularSpectrum:
    """
    Plane-wave content of an aperture sampling as a function of sin(theta).

    Bins with |k_x| > k0 are evanescent and discarded; for even transform
    lengths the unpaired -M/2 bin is dropped so the grid is symmetric about 0.
    Magnitudes are normalized to a peak of 1 (all zeros stay zero).
    """
    kx, bins = raw_spectrum(ap, window, zero_pad)
    if len(kx) % 2 == 0:
        kx, bins = kx[1:], bins[1:]
    k0 = 2.0 * math.pi / ap.wavelength
    keep = np.abs(kx) <= k0 * (1.0 + 1e-12)
    magnitude = np.abs(bins[keep])
    peak = float(magnitude.max()) if magnitude.size else 0.0
    if peak > 0:
        magnitude = magnitude / peak
    metadata = {
        "start": list(ap.start), "end": list(ap.end), "n_samples": ap.n_samples,
        "spacing_m": ap.spacing, "window": window, "zero_pad": int(zero_pad),
    }
    return AngularSpectrum(sin_theta=kx[keep] / k0, magnitude=magnitude, metadata=metadata)


def count_lobes(spectrum: AngularSpectrum, threshold: float = 0.1) -> int:
    """Local maxima whose normalized magnitude is at least `threshold` of the peak."""
    m = spectrum.magnitude
    if m.size == 0 or m.max() <= 0:
        return 0
    level = threshold * m.max()
    left = np.concatenate([[-np.inf], m[:-1]])
    right = np.concatenate([m[1:], [-np.inf]])
    peaks = (m > left) & (m >= right) & (m >= level)
    return int(np.count_nonzero(peaks))
