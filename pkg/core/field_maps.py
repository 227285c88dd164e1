# GrateWave/core/field_maps.py

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from core.exceptions import FieldShapeError
from core.geometry import RoomGeometry
from core.greens import efield_scale, greens_for_wall
from core.scenario import Scenario
from core.wall_models import FreeSpace
from utils.logger import get_logger
from utils.worker_pool import map_blocks

logger = get_logger("core.field_maps")


@dataclass(frozen=True)
class SamplingGrid:
    """Rectilinear grid; points() has shape (len(y), len(x), 2)."""
    x: np.ndarray
    y: np.ndarray

    @classmethod
    def covering(cls, room: RoomGeometry, spacing: float, margin: float = 0.0) -> "SamplingGrid":
        """
        Grid of the given spacing centered in the room, at least `margin` away
        from every wall.
        """
        def axis(length: float) -> np.ndarray:
            count = int(math.floor((length - 2.0 * margin) / spacing + 1e-9))
            if length - 2.0 * margin - (count - 1) * spacing < 1e-9 * spacing:
                count -= 1
            count = max(count, 1)
            start = 0.5 * (length - (count - 1) * spacing)
            return start + spacing * np.arange(count)

        return cls(x=axis(room.length_x), y=axis(room.length_y))

    @classmethod
    def uniform(cls, x_range: Sequence[float], y_range: Sequence[float], nx: int, ny: int) -> "SamplingGrid":
        return cls(x=np.linspace(x_range[0], x_range[1], nx), y=np.linspace(y_range[0], y_range[1], ny))

    @classmethod
    def around(cls, center: Sequence[float], half_width: float, spacing: float) -> "SamplingGrid":
        """Square grid centered on `center`, used for ring ensembles."""
        count = int(math.floor(half_width / spacing))
        offsets = spacing * np.arange(-count, count + 1)
        return cls(x=center[0] + offsets, y=center[1] + offsets)

    @property
    def shape(self):
        return len(self.y), len(self.x)

    def points(self) -> np.ndarray:
        grid_x, grid_y = np.meshgrid(self.x, self.y)
        return np.stack([grid_x, grid_y], axis=-1)

    def congruent(self, other: "SamplingGrid") -> bool:
        return (self.shape == other.shape and np.array_equal(self.x, other.x)
                and np.array_equal(self.y, other.y))


@dataclass
class FieldGrid:
    """Complex E_z samples with a mask of excluded points."""
    grid: SamplingGrid
    values: np.ndarray
    masked: np.ndarray

    @property
    def magnitude(self) -> np.ndarray:
        return np.abs(self.values)

    def unmasked_magnitudes(self) -> np.ndarray:
        return np.abs(self.values[~self.masked])


def guard_mask(points: np.ndarray, sources: np.ndarray, room: RoomGeometry, radius: float,
               require_inside: bool = True) -> np.ndarray:
    """True where a point is outside the room or within `radius` of any source."""
    masked = ~room.contains(points) if require_inside else np.zeros(points.shape[:-1], dtype=bool)
    for source in sources:
        masked |= np.hypot(points[..., 0] - source[0], points[..., 1] - source[1]) < radius
    return masked


def field_at_points(scenario: Scenario, excitation: np.ndarray, points: np.ndarray,
                    workers: int = 1) -> np.ndarray:
    """Superposed E_z at valid points of shape (P, 2)."""
    sources = scenario.tx.element_positions()
    weights = np.asarray(excitation, dtype=complex)
    scale = efield_scale(scenario.room, scenario.current)

    def block(start: int, stop: int) -> np.ndarray:
        chunk = points[start:stop]
        total = np.zeros(len(chunk), dtype=complex)
        for weight, source in zip(weights, sources):
            green = greens_for_wall(chunk, source, scenario.room, scenario.wall, scenario.limits)
            total = total + weight * np.atleast_1d(green)
        return scale * total

    parts = map_blocks(block, len(points), workers)
    return np.concatenate(parts) if parts else np.zeros(0, dtype=complex)


def field_map(scenario: Scenario, excitation: Optional[Sequence[complex]], grid: SamplingGrid,
              workers: int = 1, exclude: Optional[np.ndarray] = None) -> FieldGrid:
    """
    E_z over a grid for complex weights on the transmit elements.

    Args:
        scenario: Room, wall model and transmit array.
        excitation: One complex weight per transmit element; None means all ones.
        grid: Sampling grid.
        workers: Thread count; results do not depend on it.
        exclude: Optional boolean grid of extra points to skip and mask.

    Returns:
        FieldGrid with points outside the room, within lambda/8 of a source or
        excluded masked.
    """
    count = scenario.tx.element_count
    weights = np.ones(count, dtype=complex) if excitation is None else np.asarray(excitation, dtype=complex)
    if weights.shape != (count,):
        raise FieldShapeError(f"excitation needs {count} weights, got shape {weights.shape}")

    points = grid.points()
    masked = guard_mask(points, scenario.tx.element_positions(), scenario.room, scenario.guard_radius)
    if exclude is not None:
        masked = masked | np.asarray(exclude, dtype=bool)
    values = np.zeros(grid.shape, dtype=complex)
    valid = points[~masked]
    logger.debug(f"🔍 Field map: {len(valid)} points, wall={scenario.wall.tag}")
    values[~masked] = field_at_points(scenario, weights, valid, workers)
    return FieldGrid(grid=grid, values=values, masked=masked)


def incident_field(scenario: Scenario, excitation: Optional[Sequence[complex]], grid: SamplingGrid,
                   workers: int = 1) -> FieldGrid:
    """Free-space field of the same excitation."""
    return field_map(scenario.with_wall(FreeSpace()), excitation, grid, workers)


def scattered_field(total: FieldGrid, incident: FieldGrid) -> FieldGrid:
    """Pointwise total - incident on congruent grids."""
    if not total.grid.congruent(incident.grid) or total.values.shape != incident.values.shape:
        raise FieldShapeError("total and incident grids are not congruent")
    return FieldGrid(grid=total.grid, values=total.values - incident.values,
                     masked=total.masked | incident.masked)
