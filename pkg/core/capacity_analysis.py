# GrateWave/core/capacity_analysis.py

"""
Capacity maps, relative improvement over free space, capacity along a ray
and per-distance mode analysis.

Every receiver position is handled the same way: the receive array is
translated to the position, the channel matrix is rebuilt from the wall's
Green's function and its water-filled capacity is computed. Positions where
any receive element leaves the room or comes within lambda/8 of a transmit
element are masked.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from core.field_maps import SamplingGrid
from core.geometry import far_field_distance
from core.greens import efield_scale, greens_for_wall
from core.mimo import CapacityResult, batch_capacities
from core.scenario import Scenario
from utils.logger import get_logger
from utils.worker_pool import map_blocks

logger = get_logger("core.capacity_analysis")


@dataclass
class CapacityMap:
    """Capacity (bits/s/Hz) at each receiver-center grid point; NaN where masked."""
    grid: SamplingGrid
    capacity: np.ndarray
    masked: np.ndarray
    metadata: Dict = field(default_factory=dict)

    @property
    def mean_capacity(self) -> float:
        valid = self.capacity[~self.masked]
        return float(np.mean(valid)) if valid.size else float("nan")


@dataclass
class ImprovementResult:
    delta: np.ndarray
    mean: float
    excluded: np.ndarray
    n_points: int


@dataclass
class DistanceCurve:
    theta_tr: float
    distances: np.ndarray
    capacity: np.ndarray
    masked: np.ndarray
    results: List[Optional[CapacityResult]]


@dataclass
class ModeSnapshot:
    distance: float
    sigmas: np.ndarray
    gammas: np.ndarray
    useful_modes: int

    def to_dict(self) -> Dict:
        return {
            "distance": float(self.distance),
            "sigmas": [float(s) for s in self.sigmas],
            "gammas": [float(g) for g in self.gammas],
            "useful_modes": int(self.useful_modes),
        }


def receiver_points(scenario: Scenario, centers: np.ndarray) -> np.ndarray:
    """Receive-element coordinates for each center, shape (P, N_R, 2)."""
    offsets = scenario.rx.element_positions() - np.asarray(scenario.rx.center, dtype=float)[None, :]
    return centers[:, None, :] + offsets[None, :, :]


def receiver_mask(scenario: Scenario, rx_points: np.ndarray) -> np.ndarray:
    """True for centers whose array leaves the room or enters a transmit guard disc."""
    bad = ~scenario.room.contains(rx_points)
    for source in scenario.tx.element_positions():
        bad |= np.hypot(rx_points[..., 0] - source[0], rx_points[..., 1] - source[1]) < scenario.guard_radius
    return np.any(bad, axis=-1)


def channel_stack(scenario: Scenario, centers: np.ndarray, workers: int = 1) -> Tuple[np.ndarray, np.ndarray]:
    """
    Channel matrices for the receive array placed at each center.

    Args:
        scenario: Room, wall, arrays and truncation limits.
        centers: Receiver-array centers, shape (P, 2).
        workers: Thread count; the result does not depend on it.

    Returns:
        (stack, masked): stack has shape (P_valid, N_R, N_T) for the unmasked
        centers in order; masked has shape (P,).
    """
    centers = np.asarray(centers, dtype=float).reshape(-1, 2)
    rx_points = receiver_points(scenario, centers)
    masked = receiver_mask(scenario, rx_points)
    n_rx = scenario.rx.element_count
    sources = scenario.tx.element_positions()
    flat = rx_points[~masked].reshape(-1, 2)

    def block(start: int, stop: int) -> np.ndarray:
        chunk = flat[start:stop]
        columns = [np.atleast_1d(greens_for_wall(chunk, source, scenario.room, scenario.wall, scenario.limits))
                   for source in sources]
        return np.stack(columns, axis=-1)

    parts = map_blocks(block, len(flat), workers)
    entries = np.concatenate(parts) if parts else np.zeros((0, len(sources)), dtype=complex)
    stack = efield_scale(scenario.room, scenario.current) * entries.reshape(-1, n_rx, len(sources))
    return stack, masked


def _capacities_at(scenario: Scenario, centers: np.ndarray,
                   workers: int) -> Tuple[np.ndarray, np.ndarray, List[Optional[CapacityResult]]]:
    stack, masked = channel_stack(scenario, centers, workers)
    valid_results = iter(batch_capacities(stack, scenario.budget))
    results: List[Optional[CapacityResult]] = [None if bad else next(valid_results) for bad in masked]
    values = np.array([float("nan") if r is None else r.capacity for r in results])
    return values, masked, results


def default_map_grid(scenario: Scenario) -> SamplingGrid:
    """Receiver-center grid: the configured point count, else the scenario grid spacing."""
    margin = 0.5 * scenario.rx.aperture() + scenario.guard_radius
    room = scenario.room
    count = scenario.analysis.map_points
    if count > 1:
        return SamplingGrid.uniform((margin, room.length_x - margin), (margin, room.length_y - margin), count, count)
    return SamplingGrid.covering(room, scenario.grid_spacing, margin)


def _far_field_note(scenario: Scenario, centers: np.ndarray, masked: np.ndarray) -> Dict:
    aperture = max(scenario.tx.aperture(), scenario.rx.aperture())
    if aperture <= 0:
        return {"far_field_distance_m": 0.0, "points_inside_far_field": 0}
    distance = far_field_distance(aperture, scenario.wavelength)
    gaps = np.hypot(centers[:, 0] - scenario.tx.center[0], centers[:, 1] - scenario.tx.center[1])
    inside = int(np.count_nonzero((gaps < distance) & ~masked))
    if inside:
        logger.info(f"📏 {inside} receiver positions are closer than the array far-field distance "
                    f"{distance / scenario.wavelength:.2f} lambda")
    return {"far_field_distance_m": distance, "points_inside_far_field": inside}


def capacity_map(scenario: Scenario, grid: Optional[SamplingGrid] = None, workers: int = 1) -> CapacityMap:
    """
    Water-filled capacity with the receiver array centered on each grid point.

    Args:
        scenario: Validated scenario.
        grid: Receiver-center grid; defaults to default_map_grid(scenario).
        workers: Thread count.

    Returns:
        CapacityMap with masked points set to NaN.
    """
    grid = grid or default_map_grid(scenario)
    centers = grid.points().reshape(-1, 2)
    values, masked, _ = _capacities_at(scenario, centers, workers)
    metadata = {"wall": scenario.wall.tag, "n_tx": scenario.tx.element_count,
                "n_rx": scenario.rx.element_count, "masked_points": int(np.count_nonzero(masked))}
    metadata.update(_far_field_note(scenario, centers, masked))
    logger.debug(f"📊 Capacity map ({scenario.wall.tag}): {len(centers)} centers, "
                 f"{metadata['masked_points']} masked")
    return CapacityMap(grid=grid, capacity=values.reshape(grid.shape), masked=masked.reshape(grid.shape),
                       metadata=metadata)


def _values_and_mask(data: Union[CapacityMap, np.ndarray]) -> Tuple[np.ndarray, np.ndarray]:
    if isinstance(data, CapacityMap):
        return np.asarray(data.capacity, dtype=float), np.asarray(data.masked, dtype=bool)
    values = np.asarray(data, dtype=float)
    return values, ~np.isfinite(values)


def capacity_improvement(c_wall: Union[CapacityMap, np.ndarray],
                         c_fs: Union[CapacityMap, np.ndarray]) -> ImprovementResult:
    """
    Relative improvement (C_wall - C_FS) / C_FS per point and its mean.

    Points masked in either map, or with a non-positive free-space capacity,
    are excluded from the mean and flagged in `excluded`.
    """
    wall_values, wall_masked = _values_and_mask(c_wall)
    fs_values, fs_masked = _values_and_mask(c_fs)
    if wall_values.shape != fs_values.shape:
        raise ValueError(f"capacity grids differ in shape: {wall_values.shape} vs {fs_values.shape}")

    excluded = wall_masked | fs_masked | ~(fs_values > 0)
    delta = np.full(wall_values.shape, np.nan)
    keep = ~excluded
    delta[keep] = (wall_values[keep] - fs_values[keep]) / fs_values[keep]
    count = int(np.count_nonzero(keep))
    if count == 0:
        logger.warning("⚠️ No comparable points between the two capacity maps")
        mean = float("nan")
    else:
        mean = float(np.mean(delta[keep]))
    return ImprovementResult(delta=delta, mean=mean, excluded=excluded, n_points=count)


def ray_centers(scenario: Scenario, theta_tr: float, distances: Sequence[float]) -> np.ndarray:
    d = np.asarray(distances, dtype=float)
    origin = np.asarray(scenario.tx.center, dtype=float)
    return origin[None, :] + d[:, None] * np.array([math.cos(theta_tr), math.sin(theta_tr)])[None, :]


def capacity_vs_distance(scenario: Scenario, theta_tr: Optional[float] = None,
                         distances: Optional[Sequence[float]] = None, workers: int = 1) -> DistanceCurve:
    """Capacity along the ray at angle theta_tr from the transmit-array center."""
    theta = scenario.analysis.theta_tr if theta_tr is None else theta_tr
    d = np.asarray(scenario.analysis.distances if distances is None else distances, dtype=float)
    values, masked, results = _capacities_at(scenario, ray_centers(scenario, theta, d), workers)
    if np.any(masked):
        logger.warning(f"⚠️ {int(np.count_nonzero(masked))} of {len(d)} distances are invalid and masked")
    return DistanceCurve(theta_tr=theta, distances=d, capacity=values, masked=masked, results=results)


def mode_analysis(scenario: Scenario, distances: Optional[Sequence[float]] = None,
                  theta_tr: Optional[float] = None, workers: int = 1) -> List[ModeSnapshot]:
    """
    Singular values normalized by the largest one, water-filling coefficients
    and useful-mode count at each valid distance along theta_tr.
    """
    curve = capacity_vs_distance(scenario, theta_tr, distances, workers)
    snapshots = []
    for distance, result in zip(curve.distances, curve.results):
        if result is None:
            continue
        sigmas = result.singular_values
        normalized = sigmas / sigmas[0] if len(sigmas) and sigmas[0] > 0 else np.zeros_like(sigmas)
        snapshots.append(ModeSnapshot(distance=float(distance), sigmas=normalized,
                                      gammas=np.asarray(result.gammas, dtype=float),
                                      useful_modes=result.useful_modes))
    return snapshots
