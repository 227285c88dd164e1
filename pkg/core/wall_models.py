# GrateWave/core/wall_models.py

"""
Wall models and their reflection physics.

All four walls of a room share one model: free space (no walls), PEC,
a finite-thickness drywall slab, or a binary PEC/drywall grating. The
drywall slab is the TE air/slab/air stack; grating order amplitudes come
either from the Kirchhoff Fourier approximation or from a user table.
"""

import math
import os
from dataclasses import dataclass, field
from typing import ClassVar, Dict, List, Tuple, Union

import numpy as np

from core.exceptions import (CoefficientValidationError, ConfigurationError,
                             ExtrapolationError, IncidenceAngleError)
from core.geometry import EPSILON_0, MU_0, RoomGeometry

GRAZING_TOLERANCE = 1e-9
ENERGY_TOLERANCE = 1e-6
MAGNITUDE_TOLERANCE = 1e-9


@dataclass(frozen=True)
class DrywallMaterial:
    """Gypsum board slab. Defaults: eps' = 2.75, tan(delta) = 0.01, 13 mm."""
    eps_real: float = 2.75
    loss_tangent: float = 0.01
    thickness: float = 0.013
    mu_rel: float = 1.0

    def __post_init__(self):
        if self.eps_real < 1.0:
            raise ConfigurationError("drywall eps_real must be >= 1")
        if self.loss_tangent < 0.0:
            raise ConfigurationError("drywall loss_tangent must be >= 0")
        if not self.thickness > 0.0:
            raise ConfigurationError("drywall thickness must be positive")
        if not self.mu_rel > 0.0:
            raise ConfigurationError("drywall mu_rel must be positive")

    def conductivity(self, room: RoomGeometry) -> float:
        """sigma = omega * eps0 * eps''."""
        return room.omega * EPSILON_0 * self.eps_real * self.loss_tangent

    def complex_permittivity(self) -> complex:
        return self.eps_real * (1.0 - 1j * self.loss_tangent)

    def propagation_constant(self, room: RoomGeometry) -> complex:
        """gamma = sqrt(j omega mu (sigma + j omega eps0 eps'))."""
        omega = room.omega
        admittivity = self.conductivity(room) + 1j * omega * EPSILON_0 * self.eps_real
        return complex(np.sqrt(1j * omega * MU_0 * self.mu_rel * admittivity))

    def intrinsic_impedance(self, room: RoomGeometry) -> complex:
        omega = room.omega
        admittivity = self.conductivity(room) + 1j * omega * EPSILON_0 * self.eps_real
        return complex(np.sqrt(1j * omega * MU_0 * self.mu_rel / admittivity))

    def wavenumber(self, room: RoomGeometry) -> complex:
        """Complex wavenumber k = -j*gamma, with Im(k) <= 0 for a lossy slab."""
        return -1j * self.propagation_constant(room)


@dataclass(frozen=True)
class KirchhoffApprox:
    """Order amplitudes from the Fourier series of the local reflection profile."""
    name: ClassVar[str] = "kirchhoff"


@dataclass(frozen=True)
class CoefficientTable:
    """
    Tabulated grating reflection coefficients R_m(theta).

    angles_deg is strictly increasing; values has shape (len(angles_deg), len(orders)).
    A table with only non-negative angles is mirrored for negative incidence
    using R_m(-theta) = R_{-m}(theta).
    """
    angles_deg: np.ndarray
    orders: Tuple[int, ...]
    values: np.ndarray
    source_path: str = ""
    name: ClassVar[str] = "table"

    @property
    def mirrored(self) -> bool:
        return bool(self.angles_deg[0] >= 0.0)

    def _column(self, m: int) -> np.ndarray:
        if m in self.orders:
            return self.values[:, self.orders.index(m)]
        return np.zeros(len(self.angles_deg), dtype=complex)

    def lookup(self, theta: np.ndarray, m: int) -> np.ndarray:
        """Linear interpolation in angle for order m (m is an exact key)."""
        degrees = np.degrees(np.asarray(theta, dtype=float))
        if self.mirrored:
            low = self.angles_deg[0]
            negative = degrees < 0.0
            positive_part = self._interpolate(np.where(negative, low, degrees), m)
            negative_part = self._interpolate(np.where(negative, -degrees, low), -m)
            return np.where(negative, negative_part, positive_part)
        return self._interpolate(degrees, m)

    def _interpolate(self, degrees: np.ndarray, m: int) -> np.ndarray:
        low, high = self.angles_deg[0], self.angles_deg[-1]
        if np.any(degrees < low - 1e-12) or np.any(degrees > high + 1e-12):
            raise ExtrapolationError(
                f"coefficient table covers {low:g}..{high:g} deg; "
                f"lookup requested {float(np.min(degrees)):g}..{float(np.max(degrees)):g} deg")
        column = self._column(m)
        real = np.interp(degrees, self.angles_deg, column.real)
        imag = np.interp(degrees, self.angles_deg, column.imag)
        return real + 1j * imag


CoefficientSource = Union[KirchhoffApprox, CoefficientTable]


@dataclass(frozen=True)
class GratingSpec:
    """Binary grating of alternating PEC and drywall strips."""
    period: float
    pec_duty: float = 0.5
    dielectric: DrywallMaterial = field(default_factory=DrywallMaterial)
    coeff_source: CoefficientSource = field(default_factory=KirchhoffApprox)
    max_order: int = 3

    def __post_init__(self):
        if not self.period > 0.0:
            raise ConfigurationError("grating period must be positive")
        if not 0.0 <= self.pec_duty <= 1.0:
            raise ConfigurationError("grating pec_duty must lie in [0, 1]")
        if self.max_order < 0:
            raise ConfigurationError("grating max_order must be >= 0")

    def validate(self, room: RoomGeometry):
        if isinstance(self.coeff_source, CoefficientTable):
            validate_coefficient_table(self.coeff_source, self.period, room.wavelength)


@dataclass(frozen=True)
class FreeSpace:
    tag: ClassVar[str] = "free-space"


@dataclass(frozen=True)
class PEC:
    tag: ClassVar[str] = "pec"


@dataclass(frozen=True)
class Drywall:
    material: DrywallMaterial = field(default_factory=DrywallMaterial)
    tag: ClassVar[str] = "drywall"


@dataclass(frozen=True)
class Grating:
    spec: GratingSpec
    tag: ClassVar[str] = "grating"


WallModel = Union[FreeSpace, PEC, Drywall, Grating]

WALL_TAGS = (FreeSpace.tag, PEC.tag, Drywall.tag, Grating.tag)


@dataclass(frozen=True)
class PathTraceLimits:
    """Truncation of the image and beam-trace sums."""
    max_bounces: int = 2
    max_image_order: int = 40
    artificial_loss: float = 1e-3

    def __post_init__(self):
        if self.max_bounces < 0:
            raise ConfigurationError("max_bounces must be >= 0")
        if self.max_image_order < 0:
            raise ConfigurationError("max_image_order must be >= 0")
        if self.artificial_loss < 0.0:
            raise ConfigurationError("artificial_loss must be >= 0")


def reflection_from_cos(cos_i: np.ndarray, mat: DrywallMaterial, room: RoomGeometry) -> np.ndarray:
    """TE slab reflection for an array of incidence cosines (no range check)."""
    cos_i = np.asarray(cos_i, dtype=float)
    sin_i = np.sqrt(np.clip(1.0 - cos_i * cos_i, 0.0, 1.0))
    k2 = mat.wavenumber(room)
    eta1 = room.eta0
    eta2 = mat.intrinsic_impedance(room)

    # Principal root keeps Im(kz2) <= 0 for the decaying branch.
    kz2 = np.sqrt(k2 * k2 - (room.k0 * sin_i) ** 2 + 0j)
    cos_t = kz2 / k2

    gamma12 = (eta2 * cos_i - eta1 * cos_t) / (eta2 * cos_i + eta1 * cos_t)
    t12 = 1.0 + gamma12
    gamma21 = -gamma12
    gamma23 = gamma21
    t21 = 1.0 + gamma21
    round_trip = np.exp(-2j * kz2 * mat.thickness)
    return gamma12 + t12 * gamma23 * t21 * round_trip / (1.0 - gamma21 * gamma23 * round_trip)


def slab_reflection(theta_i, mat: DrywallMaterial, room: RoomGeometry):
    """
    Reflection coefficient of the air/drywall/air stack for TE incidence.

    Args:
        theta_i: Incidence angle in radians from the wall normal, 0 <= theta_i < pi/2
                 (scalar or array).
        mat: Slab material and thickness.
        room: Supplies the operating frequency.

    Returns:
        Complex reflection coefficient, same shape as theta_i.
    """
    theta = np.asarray(theta_i, dtype=float)
    if not np.all(np.isfinite(theta)) or np.any(theta < 0.0) or np.any(theta >= 0.5 * math.pi):
        raise IncidenceAngleError("incidence angle must lie in [0, pi/2)")
    gamma = reflection_from_cos(np.cos(theta), mat, room)
    if np.ndim(theta_i) == 0:
        return complex(gamma)
    return gamma


@dataclass
class ReflectanceCurve:
    theta: np.ndarray
    magnitude: np.ndarray
    phase: np.ndarray


def drywall_reflection_curve(mat: DrywallMaterial, room: RoomGeometry, n_angles: int) -> ReflectanceCurve:
    """Samples slab_reflection at theta_k = k * (pi/2) / n_angles, k = 0..n_angles-1."""
    if n_angles < 2:
        raise ConfigurationError("n_angles must be at least 2")
    theta = np.arange(n_angles) * (0.5 * math.pi / n_angles)
    gamma = slab_reflection(theta, mat, room)
    return ReflectanceCurve(theta=theta, magnitude=np.abs(gamma), phase=np.angle(gamma))


def grating_orders(theta_i: float, period: float, wavelength: float) -> List[Tuple[int, float]]:
    """
    Propagating Floquet orders: sin(theta_m) = sin(theta_i) - m * wavelength / period.

    Grazing orders (|sin(theta_m)| within 1e-9 of 1) are excluded.
    """
    sin_i = math.sin(theta_i)
    ratio = wavelength / period
    reach = int(math.floor((1.0 + abs(sin_i)) / ratio)) + 1
    orders = []
    for m in range(-reach, reach + 1):
        sin_m = sin_i - m * ratio
        if abs(sin_m) < 1.0 - GRAZING_TOLERANCE:
            theta_m = theta_i if m == 0 else math.asin(sin_m)
            orders.append((m, theta_m))
    return orders


def propagating_mask(sin_i: np.ndarray, orders: np.ndarray, period: float, wavelength: float) -> np.ndarray:
    sin_m = np.asarray(sin_i)[..., None] - orders[None, :] * (wavelength / period)
    return np.abs(sin_m) < 1.0 - GRAZING_TOLERANCE


def _kirchhoff_orders(sin_i: np.ndarray, cos_i: np.ndarray, spec: GratingSpec,
                      room: RoomGeometry, orders: np.ndarray) -> np.ndarray:
    gamma_dw = reflection_from_cos(cos_i, spec.dielectric, room)
    duty = spec.pec_duty
    values = np.empty(cos_i.shape + orders.shape, dtype=complex)
    for column, m in enumerate(orders):
        if m == 0:
            values[..., column] = -duty + (1.0 - duty) * gamma_dw
        elif duty in (0.0, 1.0):
            values[..., column] = 0.0
        else:
            values[..., column] = (-1.0 - gamma_dw) * math.sin(math.pi * m * duty) / (math.pi * m)

    # Uniform rescale wherever the propagating orders carry more power than arrives.
    wavelength = room.wavelength
    mask = propagating_mask(sin_i, orders, spec.period, wavelength)
    sin_m = sin_i[..., None] - orders * (wavelength / spec.period)
    cos_m = np.sqrt(np.clip(1.0 - sin_m * sin_m, 0.0, 1.0))
    ratio = np.where(mask, cos_m / np.maximum(cos_i[..., None], 1e-300), 0.0)
    energy = np.sum(np.abs(values) ** 2 * ratio, axis=-1)
    scale = np.where(energy > 1.0, 1.0 / np.sqrt(np.maximum(energy, 1.0)), 1.0)
    return values * scale[..., None]


def coefficients_from_direction(sin_i, cos_i, spec: GratingSpec,
                                room: RoomGeometry) -> Tuple[np.ndarray, np.ndarray]:
    """
    R_m for every |m| <= spec.max_order, propagating or not.

    Args:
        sin_i: Signed tangential direction cosine of the incident ray (array).
        cos_i: Normal direction cosine, > 0 (array).

    Returns:
        (orders, values) where values has shape sin_i.shape + (len(orders),).
    """
    sin_i = np.asarray(sin_i, dtype=float)
    cos_i = np.asarray(cos_i, dtype=float)
    orders = np.arange(-spec.max_order, spec.max_order + 1)
    source = spec.coeff_source
    if isinstance(source, CoefficientTable):
        theta = np.arctan2(sin_i, cos_i)
        values = np.stack([source.lookup(theta, int(m)) for m in orders], axis=-1)
    else:
        values = _kirchhoff_orders(sin_i, cos_i, spec, room, orders)
    return orders, values


def order_coefficients(theta, spec: GratingSpec, room: RoomGeometry) -> Tuple[np.ndarray, np.ndarray]:
    """R_m at signed incidence angles theta (radians); see coefficients_from_direction."""
    theta = np.asarray(theta, dtype=float)
    return coefficients_from_direction(np.sin(theta), np.cos(theta), spec, room)


def specular_coefficient(cos_i: np.ndarray, sin_i: np.ndarray, spec: GratingSpec,
                         room: RoomGeometry) -> np.ndarray:
    """R_0 for the specular image paths, from the unfolded incidence cosines."""
    orders, values = coefficients_from_direction(sin_i, cos_i, spec, room)
    return values[..., spec.max_order]


def grating_coefficients(theta_i: float, spec: GratingSpec, room: RoomGeometry) -> Dict[int, complex]:
    """Reflection coefficients of the propagating orders |m| <= max_order at theta_i."""
    orders, values = order_coefficients(np.array([theta_i]), spec, room)
    propagating = {m for m, _ in grating_orders(theta_i, spec.period, room.wavelength)}
    return {int(m): complex(values[0, column])
            for column, m in enumerate(orders) if int(m) in propagating}


def load_coefficient_table(path: str) -> CoefficientTable:
    """
    Reads a `theta_deg m re im` table. Rows must be sorted by (theta, m).

    Raises:
        CoefficientValidationError: malformed file, unsorted rows or |R_m| > 1.
    """
    if not os.path.exists(path):
        raise CoefficientValidationError(f"coefficient table not found: {path}")
    with open(path, "r", encoding="utf-8") as handle:
        header = handle.readline().split()
    if header != ["theta_deg", "m", "re", "im"]:
        raise CoefficientValidationError(f"{path}: header must be 'theta_deg m re im'")
    try:
        rows = np.loadtxt(path, skiprows=1, ndmin=2)
    except ValueError as exc:
        raise CoefficientValidationError(f"{path}: {exc}") from exc
    if rows.shape[0] == 0 or rows.shape[1] != 4:
        raise CoefficientValidationError(f"{path}: expected rows of four columns")

    keys = list(zip(rows[:, 0], rows[:, 1]))
    if keys != sorted(keys) or len(set(keys)) != len(keys):
        raise CoefficientValidationError(f"{path}: rows must be sorted by (theta, m) without duplicates")

    angles = np.unique(rows[:, 0])
    if len(angles) < 2:
        raise CoefficientValidationError(f"{path}: at least two angles are required")
    orders = tuple(int(m) for m in np.unique(rows[:, 1]))
    values = np.zeros((len(angles), len(orders)), dtype=complex)
    for theta_deg, m, re, im in rows:
        values[np.searchsorted(angles, theta_deg), orders.index(int(m))] = complex(re, im)

    if np.any(np.abs(values) > 1.0 + MAGNITUDE_TOLERANCE):
        raise CoefficientValidationError(f"{path}: |R_m| exceeds 1")
    return CoefficientTable(angles_deg=angles, orders=orders, values=values, source_path=path)


def validate_coefficient_table(table: CoefficientTable, period: float, wavelength: float):
    """Energy bound sum |R_m|^2 cos(theta_m)/cos(theta_i) <= 1 over propagating orders."""
    orders = np.asarray(table.orders)
    for row, theta_deg in enumerate(table.angles_deg):
        theta = math.radians(theta_deg)
        cos_i = math.cos(theta)
        if cos_i <= 0.0:
            raise CoefficientValidationError(f"table angle {theta_deg:g} deg is grazing or beyond")
        sin_m = math.sin(theta) - orders * wavelength / period
        mask = np.abs(sin_m) < 1.0 - GRAZING_TOLERANCE
        cos_m = np.sqrt(np.clip(1.0 - sin_m ** 2, 0.0, 1.0))
        energy = float(np.sum(np.abs(table.values[row, mask]) ** 2 * cos_m[mask] / cos_i))
        if energy > 1.0 + ENERGY_TOLERANCE:
            raise CoefficientValidationError(
                f"table row at {theta_deg:g} deg carries {energy:.6f} of the incident power")
