# GrateWave/tests/test_capacity_analysis.py

"""
Capacity maps, improvement over free space, capacity along a ray and mode
snapshots.
"""

import math
import os
import sys
from dataclasses import replace

import numpy as np
import pytest

# Add the project root to Python path
project_root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, project_root)

from core.capacity_analysis import (CapacityMap, capacity_improvement, capacity_map, capacity_vs_distance,
                                    default_map_grid, mode_analysis, ray_centers)
from core.field_maps import SamplingGrid
from core.geometry import ArrayLayout, RoomGeometry
from core.scenario import AnalysisSettings, Scenario
from core.wall_models import PEC, Drywall, FreeSpace, Grating, GratingSpec

FREQUENCY = 2.4e9
WAVELENGTH = RoomGeometry(1.0, 1.0, FREQUENCY).wavelength


def make_scenario(size: float, tx_center, wall=None, elements: int = 1) -> Scenario:
    room = RoomGeometry(size * WAVELENGTH, size * WAVELENGTH, FREQUENCY)
    spacing = 0.5 * WAVELENGTH if elements > 1 else 0.0
    center = (tx_center[0] * WAVELENGTH, tx_center[1] * WAVELENGTH)
    tx = ArrayLayout(center=center, element_count=elements, spacing=spacing)
    rx = ArrayLayout(center=(center[0] + 2.0 * WAVELENGTH, center[1]), element_count=elements, spacing=spacing)
    return Scenario(room=room, wall=wall or FreeSpace(), tx=tx, rx=rx, grid_spacing=0.5 * WAVELENGTH,
                    analysis=AnalysisSettings.defaults(WAVELENGTH, room.length_x)).validate()


# --- Improvement -----------------------------------------------------------------

def test_improvement_of_plain_arrays():
    wall = np.array([[2.0, 3.0], [np.nan, 1.0]])
    free = np.array([[1.0, 2.0], [1.0, 0.0]])
    result = capacity_improvement(wall, free)
    np.testing.assert_allclose(result.delta[0], [1.0, 0.5])
    assert np.all(np.isnan(result.delta[1]))
    assert result.mean == pytest.approx(0.75)
    assert result.n_points == 2
    assert result.excluded.tolist() == [[False, False], [True, True]]


def test_improvement_uses_map_masks():
    grid = SamplingGrid.uniform((0.0, 1.0), (0.0, 1.0), 2, 1)
    wall = CapacityMap(grid=grid, capacity=np.array([[4.0, 9.0]]), masked=np.array([[False, True]]))
    free = CapacityMap(grid=grid, capacity=np.array([[2.0, 3.0]]), masked=np.array([[False, False]]))
    result = capacity_improvement(wall, free)
    assert result.mean == pytest.approx(1.0)
    assert result.n_points == 1


def test_improvement_with_nothing_comparable_is_nan():
    result = capacity_improvement(np.array([1.0, 2.0]), np.array([0.0, np.nan]))
    assert math.isnan(result.mean)
    assert result.n_points == 0


def test_improvement_shape_mismatch():
    with pytest.raises(ValueError):
        capacity_improvement(np.ones(3), np.ones(4))


# --- Capacity along a ray ----------------------------------------------------------

def test_ray_centers_follow_angle():
    scenario = make_scenario(10.0, (5.0, 5.0))
    centers = ray_centers(scenario, 0.5 * math.pi, [WAVELENGTH, 2.0 * WAVELENGTH])
    np.testing.assert_allclose(centers[:, 0], scenario.tx.center[0], atol=1e-12)
    np.testing.assert_allclose(centers[:, 1] - scenario.tx.center[1], [WAVELENGTH, 2.0 * WAVELENGTH])


def test_free_space_siso_capacity_falls_with_distance():
    scenario = make_scenario(30.0, (5.0, 15.0))
    distances = np.arange(1.0, 20.5, 0.5) * WAVELENGTH
    curve = capacity_vs_distance(scenario, theta_tr=0.0, distances=distances)
    assert not np.any(curve.masked)
    assert np.all(np.diff(curve.capacity) < 0)


def test_pec_siso_capacity_is_not_monotone():
    print("🧪 Standing waves along a ray in a PEC room")
    scenario = make_scenario(10.0, (3.0, 5.0), wall=PEC())
    distances = np.arange(0.5, 5.25, 0.25) * WAVELENGTH
    curve = capacity_vs_distance(scenario, theta_tr=0.0, distances=distances)
    steps = np.diff(curve.capacity)
    assert np.any(steps > 0) and np.any(steps < 0)


def test_positions_outside_room_are_masked():
    scenario = make_scenario(10.0, (5.0, 5.0))
    curve = capacity_vs_distance(scenario, theta_tr=0.0, distances=[2.0 * WAVELENGTH, 6.0 * WAVELENGTH])
    assert curve.masked.tolist() == [False, True]
    assert math.isnan(curve.capacity[1])
    assert curve.results[1] is None


def test_broadside_beats_end_fire_in_free_space():
    scenario = make_scenario(30.0, (15.0, 15.0), elements=4)
    broadside = capacity_vs_distance(scenario, theta_tr=0.0, distances=[6.0 * WAVELENGTH])
    end_fire = capacity_vs_distance(scenario, theta_tr=0.5 * math.pi, distances=[6.0 * WAVELENGTH])
    assert broadside.capacity[0] > end_fire.capacity[0]


# --- Capacity maps -------------------------------------------------------------------

def test_capacity_map_masks_the_transmitter():
    scenario = make_scenario(6.0, (3.0, 3.0), wall=Drywall())
    grid = SamplingGrid.uniform((2.0 * WAVELENGTH, 4.0 * WAVELENGTH), (3.0 * WAVELENGTH, 3.0 * WAVELENGTH), 5, 1)
    result = capacity_map(scenario, grid)
    assert result.masked.tolist() == [[False, False, True, False, False]]
    assert math.isnan(result.capacity[0, 2])
    assert np.isfinite(result.mean_capacity)
    assert result.metadata["wall"] == "drywall"
    assert result.metadata["masked_points"] == 1


def test_capacity_map_does_not_depend_on_workers():
    scenario = make_scenario(6.0, (3.0, 3.0), wall=Drywall(), elements=2)
    grid = SamplingGrid.uniform((0.6 * WAVELENGTH, 5.4 * WAVELENGTH), (0.6 * WAVELENGTH, 5.4 * WAVELENGTH), 12, 12)
    serial = capacity_map(scenario, grid, workers=1)
    threaded = capacity_map(scenario, grid, workers=3)
    assert np.array_equal(serial.masked, threaded.masked)
    assert np.array_equal(serial.capacity[~serial.masked], threaded.capacity[~threaded.masked])


def test_default_map_grid_honors_point_count():
    scenario = make_scenario(6.0, (3.0, 3.0))
    counted = replace(scenario, analysis=replace(scenario.analysis, map_points=5))
    assert default_map_grid(counted).shape == (5, 5)
    assert default_map_grid(scenario).shape == SamplingGrid.covering(
        scenario.room, scenario.grid_spacing, scenario.guard_radius).shape


# --- Modes ---------------------------------------------------------------------------

def test_mode_snapshots_are_normalized():
    scenario = make_scenario(30.0, (15.0, 15.0), elements=4)
    snapshots = mode_analysis(scenario, distances=[3.0 * WAVELENGTH, 6.0 * WAVELENGTH], theta_tr=0.0)
    assert len(snapshots) == 2
    for snapshot in snapshots:
        assert snapshot.sigmas[0] == pytest.approx(1.0)
        assert np.all(np.diff(snapshot.sigmas) <= 0)
        assert 1 <= snapshot.useful_modes <= 4
        assert sum(snapshot.gammas) == pytest.approx(4.0)
        assert snapshot.to_dict()["useful_modes"] == snapshot.useful_modes


def test_grating_keeps_at_least_the_free_space_modes():
    print("🧪 Useful modes with a 2 lambda grating against free space")
    distances = [2.0 * WAVELENGTH, 3.0 * WAVELENGTH, 4.0 * WAVELENGTH]
    free = make_scenario(10.0, (3.0, 5.0), elements=4)
    grating = free.with_wall(Grating(GratingSpec(period=2.0 * WAVELENGTH)))
    free_snapshots = mode_analysis(free, distances, theta_tr=0.0)
    grating_snapshots = mode_analysis(grating, distances, theta_tr=0.0)
    for with_walls, without in zip(grating_snapshots, free_snapshots):
        print(f"   📊 d={with_walls.distance / WAVELENGTH:.1f} lambda: "
              f"grating {with_walls.useful_modes}, free space {without.useful_modes}")
        assert with_walls.useful_modes >= without.useful_modes


def test_pec_room_opens_more_modes_than_free_space():
    distances = [2.0 * WAVELENGTH, 3.0 * WAVELENGTH, 4.0 * WAVELENGTH]
    free = make_scenario(10.0, (3.0, 5.0), elements=4)
    pec = free.with_wall(PEC())
    free_modes = sum(s.useful_modes for s in mode_analysis(free, distances, theta_tr=0.0))
    pec_modes = sum(s.useful_modes for s in mode_analysis(pec, distances, theta_tr=0.0))
    assert pec_modes >= free_modes


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
