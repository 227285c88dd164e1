# GrateWave/core/beam_tracing.py

"""
Beam tracing of grating diffraction branches.

A branch is a first wall plus a sequence of diffraction orders, one per
bounce, with at least one order m != 0. Rays are launched from the source
toward sample points along the first wall, turned at every hit by the
grating equation and followed to the next wall. For each observation point
the launch positions whose final ray passes through the point are found by
scanning for sign changes of the miss distance and refining by bisection.

The field of a branch is a cylindrical wave from an effective launch point
placed behind the last hit along the final ray, at the unfolded path length,
weighted by the product of the order coefficients met along the way. With
only m = 0 this is exactly the image method.
"""

import itertools
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from core.exceptions import ConfigurationError
from core.geometry import RoomGeometry
from core.specfun import hankel2_0
from core.wall_models import GRAZING_TOLERANCE, GratingSpec, coefficients_from_direction

MAX_BRANCHES = 20000
SCAN_SAMPLES = 96
BISECTION_STEPS = 50
OBS_BLOCK = 2048
MISS_TOLERANCE = 1e-7  # in wavelengths

# Walls: 0 is x = 0, 1 is x = Lx, 2 is y = 0, 3 is y = Ly.
_TANGENTS = np.array([[0.0, 1.0], [0.0, 1.0], [1.0, 0.0], [1.0, 0.0]])
_NORMALS = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])


@dataclass
class RayBundle:
    hit: np.ndarray
    direction: np.ndarray
    length: np.ndarray
    weight: np.ndarray
    valid: np.ndarray
    walls: np.ndarray


def _wall_length(wall: int, room: RoomGeometry) -> float:
    return room.length_y if wall < 2 else room.length_x


def _wall_points(wall: int, t: np.ndarray, room: RoomGeometry) -> np.ndarray:
    fixed = {0: 0.0, 1: room.length_x, 2: 0.0, 3: room.length_y}[wall]
    if wall < 2:
        return np.stack([np.full_like(t, fixed), t], axis=-1)
    return np.stack([t, np.full_like(t, fixed)], axis=-1)


def _next_wall(hit: np.ndarray, direction: np.ndarray, room: RoomGeometry) -> Tuple[np.ndarray, np.ndarray]:
    ux, uy = direction[:, 0], direction[:, 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        sx = np.where(ux > 0.0, (room.length_x - hit[:, 0]) / ux,
                      np.where(ux < 0.0, -hit[:, 0] / ux, np.inf))
        sy = np.where(uy > 0.0, (room.length_y - hit[:, 1]) / uy,
                      np.where(uy < 0.0, -hit[:, 1] / uy, np.inf))
    x_first = sx <= sy
    distance = np.where(x_first, sx, sy)
    wall = np.where(x_first, np.where(ux > 0.0, 1, 0), np.where(uy > 0.0, 3, 2))
    return distance, wall


def trace_rays(src: np.ndarray, first_wall: int, t: np.ndarray, orders: Tuple[int, ...],
               room: RoomGeometry, spec: GratingSpec) -> RayBundle:
    """
    Follows rays launched from src toward wall positions t through one
    diffraction event per entry of `orders`.
    """
    t = np.asarray(t, dtype=float)
    hit = _wall_points(first_wall, t, room)
    delta = hit - src[None, :]
    length = np.hypot(delta[:, 0], delta[:, 1])
    direction = delta / length[:, None]
    weight = np.ones(len(t), dtype=complex)
    valid = length > 0.0
    wall = np.full(len(t), first_wall)
    walls = np.full(len(t), first_wall + 1, dtype=np.int64)
    step = room.wavelength / spec.period
    column_of = {m: m + spec.max_order for m in range(-spec.max_order, spec.max_order + 1)}

    for level, m in enumerate(orders):
        if level > 0:
            travel, wall = _next_wall(hit, direction, room)
            valid &= np.isfinite(travel)
            travel = np.where(np.isfinite(travel), travel, 0.0)
            hit = hit + travel[:, None] * direction
            length = length + travel
            walls = walls * 5 + wall + 1
        tangent = _TANGENTS[wall]
        normal = _NORMALS[wall]
        sin_i = np.sum(direction * tangent, axis=1)
        cos_i = -np.sum(direction * normal, axis=1)
        valid &= cos_i > 0.0
        sin_out = sin_i - m * step
        valid &= np.abs(sin_out) < 1.0 - GRAZING_TOLERANCE
        cos_out = np.sqrt(np.clip(1.0 - sin_out * sin_out, 0.0, 1.0))
        factor = np.zeros(len(t), dtype=complex)
        if np.any(valid):
            _, coefficients = coefficients_from_direction(sin_i[valid], cos_i[valid], spec, room)
            factor[valid] = coefficients[:, column_of[m]]
        weight = weight * factor
        direction = sin_out[:, None] * tangent + cos_out[:, None] * normal
        direction = direction / np.hypot(direction[:, 0], direction[:, 1])[:, None]

    return RayBundle(hit=hit, direction=direction, length=length, weight=weight, valid=valid, walls=walls)


def _miss(points: np.ndarray, hit: np.ndarray, direction: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Signed perpendicular offset of points from the rays, and whether they lie ahead."""
    dx = points[..., 0] - hit[..., 0]
    dy = points[..., 1] - hit[..., 1]
    offset = direction[..., 0] * dy - direction[..., 1] * dx
    ahead = direction[..., 0] * dx + direction[..., 1] * dy > 0.0
    return offset, ahead


def branch_catalog(max_order: int, max_bounces: int, spec: GratingSpec,
                   wavelength: float) -> List[Tuple[int, Tuple[int, ...]]]:
    """
    Every (first wall, order sequence) with at least one nonzero order, in
    summation order (bounces, first wall, orders lexicographic). Orders that
    can never propagate (|m| lambda / p >= 2) are pruned.

    Raises:
        ConfigurationError: more than MAX_BRANCHES candidate branches.
    """
    candidates = 4 * sum((2 * max_order + 1) ** b - 1 for b in range(1, max_bounces + 1))
    if candidates > MAX_BRANCHES:
        raise ConfigurationError(
            f"grating beam trace would visit {candidates} branches (cap {MAX_BRANCHES}); "
            f"lower max_bounces or max_order")
    usable = [m for m in range(-max_order, max_order + 1) if abs(m) * wavelength / spec.period < 2.0]
    catalog = []
    for bounces in range(1, max_bounces + 1):
        for first_wall in range(4):
            for orders in itertools.product(usable, repeat=bounces):
                if any(orders):
                    catalog.append((first_wall, orders))
    return catalog


def _branch_field(points: np.ndarray, src: np.ndarray, first_wall: int, orders: Tuple[int, ...],
                  scan: RayBundle, scan_t: np.ndarray, room: RoomGeometry, spec: GratingSpec) -> np.ndarray:
    result = np.zeros(len(points), dtype=complex)
    offset, ahead = _miss(points[:, None, :], scan.hit[None, :, :], scan.direction[None, :, :])
    usable = scan.valid[None, :] & ahead
    same_path = (scan.walls[:-1] == scan.walls[1:])[None, :]
    crossing = np.sign(offset[:, :-1]) * np.sign(offset[:, 1:]) < 0.0
    bracket = usable[:, :-1] & usable[:, 1:] & same_path & crossing
    obs_index, sample_index = np.nonzero(bracket)
    if len(obs_index) == 0:
        return result

    targets = points[obs_index]
    low = scan_t[sample_index].copy()
    high = scan_t[sample_index + 1].copy()
    low_sign = np.sign(offset[obs_index, sample_index])
    for _ in range(BISECTION_STEPS):
        middle = 0.5 * (low + high)
        rays = trace_rays(src, first_wall, middle, orders, room, spec)
        middle_offset, _ = _miss(targets, rays.hit, rays.direction)
        same_side = np.sign(middle_offset) == low_sign
        low = np.where(same_side, middle, low)
        high = np.where(same_side, high, middle)

    rays = trace_rays(src, first_wall, 0.5 * (low + high), orders, room, spec)
    final_offset, final_ahead = _miss(targets, rays.hit, rays.direction)
    keep = (rays.valid & final_ahead & (rays.walls == scan.walls[sample_index])
            & (np.abs(final_offset) < MISS_TOLERANCE * room.wavelength))
    last_leg = np.hypot(targets[:, 0] - rays.hit[:, 0], targets[:, 1] - rays.hit[:, 1])
    unfolded = np.where(keep, rays.length + last_leg, 1.0)
    contribution = np.where(keep, rays.weight * 0.25j * hankel2_0(room.k0 * unfolded), 0.0)
    np.add.at(result, obs_index, contribution)
    return result


def diffracted_sum(points: np.ndarray, src: np.ndarray, room: RoomGeometry, spec: GratingSpec,
                   max_bounces: int) -> np.ndarray:
    """
    Sum of all beam-traced branches with at least one nonzero diffraction order.

    Args:
        points: Observation points, shape (P, 2), strictly inside the room.
        src: Source point.
        max_bounces: Longest order sequence.

    Returns:
        Complex array of shape (P,).
    """
    total = np.zeros(len(points), dtype=complex)
    if max_bounces == 0 or spec.max_order == 0:
        return total
    for first_wall, orders in branch_catalog(spec.max_order, max_bounces, spec, room.wavelength):
        length = _wall_length(first_wall, room)
        scan_t = (np.arange(SCAN_SAMPLES) + 0.5) * (length / SCAN_SAMPLES)
        scan = trace_rays(src, first_wall, scan_t, orders, room, spec)
        if not np.any(scan.valid):
            continue
        for start in range(0, len(points), OBS_BLOCK):
            block = points[start:start + OBS_BLOCK]
            total[start:start + OBS_BLOCK] += _branch_field(block, src, first_wall, orders,
                                                            scan, scan_t, room, spec)
    return total
