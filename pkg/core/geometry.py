# GrateWave/core/geometry.py

import math
from dataclasses import dataclass, replace
from typing import Tuple

import numpy as np

from core.exceptions import GeometryError

SPEED_OF_LIGHT = 299792458.0
EPSILON_0 = 8.8541878128e-12
MU_0 = 1.25663706212e-6

Point = Tuple[float, float]


@dataclass(frozen=True)
class RoomGeometry:
    """Rectangular room [0, length_x] x [0, length_y] at one frequency."""
    length_x: float
    length_y: float
    frequency: float

    def __post_init__(self):
        if not (self.length_x > 0 and self.length_y > 0):
            raise GeometryError("room lengths must be positive")
        if not self.frequency > 0:
            raise GeometryError("frequency must be positive")

    @property
    def omega(self) -> float:
        return 2.0 * math.pi * self.frequency

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.frequency

    @property
    def k0(self) -> float:
        return self.omega * math.sqrt(EPSILON_0 * MU_0)

    @property
    def eta0(self) -> float:
        return math.sqrt(MU_0 / EPSILON_0)

    def contains(self, points: np.ndarray, margin: float = 0.0) -> np.ndarray:
        """Boolean mask of points strictly inside the room, shrunk by margin."""
        pts = np.asarray(points, dtype=float)
        x = pts[..., 0]
        y = pts[..., 1]
        return (x > margin) & (x < self.length_x - margin) & (y > margin) & (y < self.length_y - margin)

    def require_inside(self, point, label: str = "point"):
        if not bool(np.all(self.contains(np.asarray(point, dtype=float)))):
            raise GeometryError(f"{label} {tuple(np.round(np.asarray(point, dtype=float).ravel(), 6))} "
                                f"is not strictly inside the {self.length_x:g} x {self.length_y:g} m room")

    def scaled(self, factor: float) -> "RoomGeometry":
        return replace(self, length_x=self.length_x * factor, length_y=self.length_y * factor)


@dataclass(frozen=True)
class ArrayLayout:
    """
    Uniform linear array of line sources or receivers.

    orientation is the boresight (broadside) direction of the array; the
    elements lie along the perpendicular axis, centered on `center`.
    """
    center: Point
    element_count: int = 1
    spacing: float = 0.0
    orientation: float = 0.0

    def __post_init__(self):
        if self.element_count < 1:
            raise GeometryError("element_count must be at least 1")
        if self.element_count > 1 and not self.spacing > 0:
            raise GeometryError("spacing must be positive for multi-element arrays")

    @property
    def axis(self) -> np.ndarray:
        return np.array([-math.sin(self.orientation), math.cos(self.orientation)])

    @property
    def boresight(self) -> np.ndarray:
        return np.array([math.cos(self.orientation), math.sin(self.orientation)])

    def element_positions(self) -> np.ndarray:
        """Element coordinates, shape (element_count, 2)."""
        offsets = (np.arange(self.element_count) - 0.5 * (self.element_count - 1)) * self.spacing
        return np.asarray(self.center, dtype=float)[None, :] + offsets[:, None] * self.axis[None, :]

    def aperture(self) -> float:
        return (self.element_count - 1) * self.spacing

    def wall_distances(self) -> Tuple[float, float]:
        """Center-to-wall distances (d_TWx from x=0, d_TWy from y=0)."""
        return float(self.center[0]), float(self.center[1])

    def distance_to(self, other: "ArrayLayout") -> float:
        return float(np.hypot(self.center[0] - other.center[0], self.center[1] - other.center[1]))

    def moved_to(self, center: Point) -> "ArrayLayout":
        return replace(self, center=(float(center[0]), float(center[1])))


def far_field_distance(aperture: float, wavelength: float) -> float:
    """Fraunhofer distance 2 D^2 / lambda."""
    if not (aperture > 0 and wavelength > 0):
        raise GeometryError("aperture and wavelength must be positive")
    return 2.0 * aperture * aperture / wavelength


if __name__ == "__main__":
    wavelength = SPEED_OF_LIGHT / 2.4e9
    room = RoomGeometry(30 * wavelength, 30 * wavelength, 2.4e9)
    print(f"lambda = {room.wavelength * 1e3:.2f} mm, k0 = {room.k0:.3f} rad/m")
    print(f"far-field distance of the room: {far_field_distance(room.length_x, room.wavelength) / room.wavelength:.0f} lambda")
