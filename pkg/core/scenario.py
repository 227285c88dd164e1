# GrateWave/core/scenario.py

import math
from dataclasses import dataclass, field, replace
from typing import Tuple

import numpy as np

from core.exceptions import CoefficientValidationError, GeometryError, ScenarioValidationError
from core.geometry import ArrayLayout, RoomGeometry
from core.mimo import PowerBudget
from core.wall_models import FreeSpace, Grating, PathTraceLimits, WallModel

WINDOWS = ("none", "hann")
STATS_SOURCES = ("simulated", "synthetic")
FADING_MODELS = ("rician", "hoyt")


@dataclass(frozen=True)
class AnalysisSettings:
    """Per-command settings; lengths in meters."""
    distances: Tuple[float, ...] = ()
    theta_tr: float = 0.25 * math.pi
    ring_r_min: float = 0.0
    ring_r_max: float = 0.0
    bins: int = 50
    pooled_room_sizes: Tuple[float, ...] = ()
    periods: Tuple[float, ...] = ()
    aperture_samples: int = 256
    aperture_offset: float = 0.0
    window: str = "none"
    zero_pad: int = 4
    reflectance_angles: int = 181
    map_points: int = 0
    stats_source: str = "simulated"
    synthetic_model: str = "rician"
    synthetic_parameter: float = 1.0
    synthetic_samples: int = 100000
    # artificial loss of the ring-ensemble field
    ring_loss: float = 1e-5

    @classmethod
    def defaults(cls, wavelength: float, room_size: float) -> "AnalysisSettings":
        return cls(
            distances=tuple(np.round(np.arange(1.0, 0.5 * room_size / wavelength, 0.5), 6) * wavelength),
            ring_r_min=3.0 * wavelength,
            ring_r_max=3.2 * wavelength,
            pooled_room_sizes=(20.0 * wavelength, 25.0 * wavelength, 30.0 * wavelength),
            periods=(0.25 * wavelength, 2.0 * wavelength, 30.0 * wavelength),
            aperture_offset=0.5 * wavelength,
        )


@dataclass(frozen=True)
class Scenario:
    """A complete experiment: room, walls, arrays, powers and truncation."""
    room: RoomGeometry
    wall: WallModel
    tx: ArrayLayout
    rx: ArrayLayout
    budget: PowerBudget = field(default_factory=PowerBudget)
    limits: PathTraceLimits = field(default_factory=PathTraceLimits)
    grid_spacing: float = 0.0
    seed: int = 0
    current: float = 1.0
    analysis: AnalysisSettings = field(default_factory=AnalysisSettings)

    @property
    def wavelength(self) -> float:
        return self.room.wavelength

    @property
    def guard_radius(self) -> float:
        return self.room.wavelength / 8.0

    def with_wall(self, wall: WallModel) -> "Scenario":
        return replace(self, wall=wall)

    def with_rx(self, rx: ArrayLayout) -> "Scenario":
        return replace(self, rx=rx)

    def with_room(self, room: RoomGeometry) -> "Scenario":
        return replace(self, room=room)

    def scaled(self, factor: float) -> "Scenario":
        """Shrinks or grows the room and array centers; element spacing is kept."""
        if not factor > 0:
            raise ScenarioValidationError("scale", "scale factor must be positive")
        if factor == 1.0:
            return self
        analysis = replace(
            self.analysis,
            distances=tuple(d * factor for d in self.analysis.distances),
            pooled_room_sizes=tuple(s * factor for s in self.analysis.pooled_room_sizes),
        )
        return replace(
            self,
            room=self.room.scaled(factor),
            tx=self.tx.moved_to((self.tx.center[0] * factor, self.tx.center[1] * factor)),
            rx=self.rx.moved_to((self.rx.center[0] * factor, self.rx.center[1] * factor)),
            analysis=analysis,
        )

    def validate(self) -> "Scenario":
        """
        Cross-checks the scenario.

        Raises:
            ScenarioValidationError: naming the violated constraint, e.g. `rx.center`.
        """
        walls_present = not isinstance(self.wall, FreeSpace)
        for label, layout in (("tx", self.tx), ("rx", self.rx)):
            if walls_present:
                try:
                    self.room.require_inside(layout.element_positions(), f"{label} element")
                except GeometryError as exc:
                    raise ScenarioValidationError(f"{label}.center", str(exc)) from exc

        tx_points = self.tx.element_positions()
        rx_points = self.rx.element_positions()
        gaps = np.hypot(rx_points[:, None, 0] - tx_points[None, :, 0],
                        rx_points[:, None, 1] - tx_points[None, :, 1])
        if np.any(gaps <= 1e-12 * self.wavelength):
            raise ScenarioValidationError("rx.center", "a receive element coincides with a transmit element")

        if not self.grid_spacing > 0:
            raise ScenarioValidationError("grid_spacing", "must be positive")
        if self.grid_spacing > 0.5 * self.wavelength * (1.0 + 1e-9):
            raise ScenarioValidationError("grid_spacing", "must not exceed half a wavelength")
        if self.current < 0:
            raise ScenarioValidationError("current", "must be non-negative")

        analysis = self.analysis
        if not analysis.ring_r_max > analysis.ring_r_min > 0:
            raise ScenarioValidationError("analysis.ring", "need ring_r_max > ring_r_min > 0")
        if analysis.map_points < 0 or analysis.map_points == 1:
            raise ScenarioValidationError("analysis.map_points", "use 0 (grid spacing) or at least 2 points")
        if analysis.bins < 2:
            raise ScenarioValidationError("analysis.bins", "need at least 2 bins")
        if analysis.ring_loss < 0.0:
            raise ScenarioValidationError("analysis.ring_loss", "must be non-negative")
        if analysis.window not in WINDOWS:
            raise ScenarioValidationError("analysis.window", f"must be one of {WINDOWS}")
        if analysis.zero_pad < 1:
            raise ScenarioValidationError("analysis.zero_pad", "must be at least 1")
        if analysis.aperture_samples < 8:
            raise ScenarioValidationError("analysis.aperture_samples", "need at least 8 samples")
        if analysis.stats_source not in STATS_SOURCES:
            raise ScenarioValidationError("analysis.stats_source", f"must be one of {STATS_SOURCES}")
        if analysis.synthetic_model not in FADING_MODELS:
            raise ScenarioValidationError("analysis.synthetic_model", f"must be one of {FADING_MODELS}")
        if any(p <= 0 for p in analysis.periods):
            raise ScenarioValidationError("analysis.periods", "periods must be positive")

        if isinstance(self.wall, Grating):
            try:
                self.wall.spec.validate(self.room)
            except CoefficientValidationError as exc:
                raise ScenarioValidationError("wall.coefficients", str(exc)) from exc
        return self
