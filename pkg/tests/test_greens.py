# GrateWave/tests/test_greens.py

"""
Green's functions of the room: free space, PEC images against a modal
expansion, drywall images and the grating beam trace.
"""

import math
import os
import sys

import numpy as np
import pytest

# Add the project root to Python path
project_root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, project_root)

from core.beam_tracing import branch_catalog, diffracted_sum, trace_rays
from core.exceptions import ConfigurationError, GeometryError, SingularityError
from core.geometry import RoomGeometry, far_field_distance
from core.greens import (MAX_IMAGE_ORDER, _strip_mode_sum, efield_line_source, evaluation_count,
                         greens_drywall, greens_for_wall, greens_free_space, greens_grating,
                         greens_pec, pec_image_set, pec_summation, specular_path_sum)
from core.wall_models import (PEC, DrywallMaterial, FreeSpace, GratingSpec, PathTraceLimits,
                              load_coefficient_table, slab_reflection, specular_coefficient)

FREQUENCY = 2.4e9
WAVELENGTH = RoomGeometry(1.0, 1.0, FREQUENCY).wavelength


def room_of(size_lambda: float) -> RoomGeometry:
    return RoomGeometry(size_lambda * WAVELENGTH, size_lambda * WAVELENGTH, FREQUENCY)


def interior_points(room: RoomGeometry, inset: float, count: int) -> np.ndarray:
    xs = np.linspace(inset, room.length_x - inset, count)
    ys = np.linspace(inset, room.length_y - inset, count)
    gx, gy = np.meshgrid(xs, ys)
    return np.stack([gx.ravel(), gy.ravel()], axis=1)


def modal_greens(points: np.ndarray, src, room: RoomGeometry, loss: float, modes: int = 2000) -> np.ndarray:
    """Dirichlet eigenfunction expansion in x with the closed-form 1D Green's function in y."""
    k = room.k0 * (1.0 - 1j * loss)
    lx, ly = room.length_x, room.length_y
    m = np.arange(1, modes + 1)
    kx = m * math.pi / lx
    q = np.sqrt(kx * kx - k * k + 0j)
    lower = np.minimum(points[:, 1:2], src[1])
    upper = np.maximum(points[:, 1:2], src[1])
    a = lower
    b = ly - upper
    g = (-np.exp(-q * (ly - a - b)) * (1.0 - np.exp(-2.0 * q * a)) * (1.0 - np.exp(-2.0 * q * b))
         / (2.0 * q * (1.0 - np.exp(-2.0 * q * ly))))
    shape = (2.0 / lx) * np.sin(kx * points[:, 0:1]) * np.sin(kx * src[0])
    return np.sum(shape * g, axis=1)


# --- Free space ---------------------------------------------------------------------

def test_free_space_magnitude_at_fifteen_wavelengths():
    room = room_of(30.0)
    value = greens_free_space((15.0 * WAVELENGTH, 0.0), (0.0, 0.0), room.k0)
    assert abs(value) == pytest.approx(0.02054, rel=1e-3)


def test_free_space_reciprocity_and_singularity():
    k0 = room_of(10.0).k0
    a, b = (0.31, 0.77), (0.05, 0.12)
    assert greens_free_space(a, b, k0) == greens_free_space(b, a, k0)
    with pytest.raises(SingularityError):
        greens_free_space(a, a, k0)


def test_line_source_field_anchor():
    room = room_of(30.0)
    field = efield_line_source((15.0 * WAVELENGTH, 0.0), (0.0, 0.0), room, 1.0)
    assert abs(field) == pytest.approx(389.3, rel=2e-3)
    assert efield_line_source((15.0 * WAVELENGTH, 0.0), (0.0, 0.0), room, 0.0) == 0
    doubled = efield_line_source((15.0 * WAVELENGTH, 0.0), (0.0, 0.0), room, 2.0)
    assert doubled == pytest.approx(2.0 * field, rel=1e-15)


def test_far_field_distance():
    assert far_field_distance(30.0 * WAVELENGTH, WAVELENGTH) == pytest.approx(1800.0 * WAVELENGTH)
    assert far_field_distance(WAVELENGTH, WAVELENGTH) == pytest.approx(2.0 * WAVELENGTH)
    with pytest.raises(GeometryError):
        far_field_distance(0.0, WAVELENGTH)


# --- PEC images ---------------------------------------------------------------------

def test_first_order_images():
    room = RoomGeometry(10.0, 10.0, FREQUENCY)
    images = pec_image_set((2.0, 5.0), room, 1)
    assert len(images) == 8
    along_x = {(int(nx), int(ny)): tuple(p) for p, nx, ny in zip(images.points, images.nx, images.ny) if ny == 0}
    assert along_x[(-1, 0)] == pytest.approx((-2.0, 5.0))
    assert along_x[(1, 0)] == pytest.approx((18.0, 5.0))
    assert all(images.signs[images.bounces == 1] == -1)
    assert all(images.signs[images.bounces == 2] == 1)
    assert list(images.bounces) == sorted(images.bounces)


def test_centered_source_images_are_symmetric():
    room = RoomGeometry(4.0, 4.0, FREQUENCY)
    images = pec_image_set((2.0, 2.0), room, 3)
    points = {tuple(np.round(p, 9)) for p in images.points}
    mirrored = {tuple(np.round(4.0 - p, 9)) for p in images.points}
    assert points == mirrored


def test_pec_without_images_is_free_space():
    room = room_of(5.0)
    src = np.array([1.3, 2.1]) * WAVELENGTH
    points = interior_points(room, 0.4 * WAVELENGTH, 6)
    limits = PathTraceLimits(max_image_order=0, artificial_loss=0.0)
    np.testing.assert_allclose(greens_pec(points, src, room, limits),
                               greens_free_space(points, src, room.k0), rtol=1e-14)


def test_pec_images_match_modal_expansion():
    print("🧪 PEC image sum vs eigenfunction expansion (3 lambda room)")
    room = room_of(3.0)
    loss = 1e-3
    src = np.array([1.23, 1.37]) * WAVELENGTH
    count = 25
    step = room.length_x / (count + 1)
    xs = step * np.arange(1, count + 1)
    gx, gy = np.meshgrid(xs, xs)
    points = np.stack([gx.ravel(), gy.ravel()], axis=1)
    limits = PathTraceLimits(max_image_order=40, artificial_loss=loss)

    images = greens_pec(points, src, room, limits)
    modes = modal_greens(points, src, room, loss)
    deviation = math.sqrt(np.mean(np.abs(images - modes) ** 2) / np.mean(np.abs(modes) ** 2))
    print(f"   📊 RMS relative deviation {deviation:.4f}")
    assert deviation < 0.02

    inset = 1e-4 * WAVELENGTH
    t = np.linspace(0.1, 2.9, 15) * WAVELENGTH
    wall_points = np.concatenate([
        np.stack([np.full_like(t, inset), t], axis=1),
        np.stack([np.full_like(t, room.length_x - inset), t], axis=1),
        np.stack([t, np.full_like(t, inset)], axis=1),
        np.stack([t, np.full_like(t, room.length_y - inset)], axis=1),
    ])
    residual = math.sqrt(np.mean(np.abs(greens_pec(wall_points, src, room, limits)) ** 2))
    interior = math.sqrt(np.mean(np.abs(images) ** 2))
    assert residual <= 0.05 * interior


def test_image_order_follows_damping():
    limits = PathTraceLimits(max_image_order=40, artificial_loss=1e-3)
    small = pec_summation(room_of(3.0), limits)
    assert (small.order_x, small.order_y, small.modal) == (282, 282, False)
    assert pec_summation(room_of(10.0), limits).order_x == 85
    # a large room is already damped within the configured order
    assert pec_summation(room_of(30.0), limits).order_x == 40

    rectangle = RoomGeometry(3.0 * WAVELENGTH, 10.0 * WAVELENGTH, FREQUENCY)
    uneven = pec_summation(rectangle, limits)
    assert uneven.order_x > uneven.order_y == 85
    assert uneven.image_count == (2 * uneven.order_x + 1) * (2 * uneven.order_y + 1) - 1

    nearly_lossless = pec_summation(room_of(10.0), PathTraceLimits(artificial_loss=1e-5))
    assert nearly_lossless.modal and nearly_lossless.order_x > MAX_IMAGE_ORDER

    assert pec_summation(room_of(3.0), PathTraceLimits(max_image_order=12, artificial_loss=0.0)).order_x == 12
    direct_only = pec_summation(room_of(3.0), PathTraceLimits(max_image_order=0, artificial_loss=1e-3))
    assert (direct_only.order_x, direct_only.image_count) == (0, 0)
    assert len(pec_image_set((1.0, 1.0), room_of(3.0), 0)) == 0


def test_strip_modes_agree_with_images():
    room = room_of(3.0)
    loss = 5e-3
    src = np.array([1.23, 1.37]) * WAVELENGTH
    points = interior_points(room, 0.17 * WAVELENGTH, 9)
    points = points[np.hypot(*(points - src).T) > 0.3 * WAVELENGTH]
    images = greens_pec(points, src, room, PathTraceLimits(artificial_loss=loss))
    modes = _strip_mode_sum(points, src, room, loss)
    deviation = math.sqrt(np.mean(np.abs(images - modes) ** 2) / np.mean(np.abs(modes) ** 2))
    assert deviation < 0.02


def test_nearly_lossless_room_uses_strip_modes():
    room = room_of(3.0)
    loss = 1e-5
    src = np.array([1.23, 1.37]) * WAVELENGTH
    points = interior_points(room, 0.21 * WAVELENGTH, 8)
    limits = PathTraceLimits(artificial_loss=loss)
    assert pec_summation(room, limits).modal

    field = greens_pec(points, src, room, limits)
    reference = modal_greens(points, src, room, loss, modes=20000)
    np.testing.assert_allclose(field, reference, rtol=1e-6, atol=1e-9 * np.max(np.abs(reference)))

    a = np.array([0.7, 2.1]) * WAVELENGTH
    b = np.array([2.4, 0.6]) * WAVELENGTH
    assert greens_pec(a, b, room, limits) == pytest.approx(greens_pec(b, a, room, limits), rel=1e-10)
    assert evaluation_count(10, PEC(), limits, room) < 10 * pec_summation(room, limits).image_count


def test_pec_reciprocity_and_bounds():
    room = room_of(4.0)
    limits = PathTraceLimits(max_image_order=10)
    a = np.array([0.7, 2.9]) * WAVELENGTH
    b = np.array([3.1, 1.2]) * WAVELENGTH
    assert greens_pec(a, b, room, limits) == pytest.approx(greens_pec(b, a, room, limits), rel=1e-10)
    with pytest.raises(GeometryError):
        greens_pec(np.array([-0.1, 1.0]), b, room, limits)


# --- Drywall images -----------------------------------------------------------------

def test_drywall_without_bounces_is_free_space():
    room = room_of(5.0)
    src = np.array([1.3, 2.1]) * WAVELENGTH
    points = interior_points(room, 0.4 * WAVELENGTH, 6)
    result = greens_drywall(points, src, room, DrywallMaterial(), PathTraceLimits(max_bounces=0))
    assert np.array_equal(result, greens_free_space(points, src, room.k0))


def test_drywall_reciprocity():
    room = room_of(5.0)
    limits = PathTraceLimits(max_bounces=3)
    a = np.array([0.7, 3.9]) * WAVELENGTH
    b = np.array([4.1, 1.2]) * WAVELENGTH
    forward = greens_drywall(a, b, room, DrywallMaterial(), limits)
    backward = greens_drywall(b, a, room, DrywallMaterial(), limits)
    assert abs(forward - backward) <= 1e-10 * abs(forward)


def test_matched_slab_reflects_nothing():
    room = room_of(5.0)
    src = np.array([1.3, 2.1]) * WAVELENGTH
    points = interior_points(room, 0.4 * WAVELENGTH, 5)
    air = DrywallMaterial(eps_real=1.0, loss_tangent=0.0)
    np.testing.assert_allclose(greens_drywall(points, src, room, air, PathTraceLimits()),
                               greens_free_space(points, src, room.k0), atol=1e-12)


def test_single_bounce_paths_by_hand():
    room = room_of(5.0)
    mat = DrywallMaterial()
    src = np.array([1.3, 2.1]) * WAVELENGTH
    obs = np.array([3.6, 3.3]) * WAVELENGTH
    lx, ly = room.length_x, room.length_y
    images = [
        (np.array([-src[0], src[1]]), 0),
        (np.array([2 * lx - src[0], src[1]]), 0),
        (np.array([src[0], -src[1]]), 1),
        (np.array([src[0], 2 * ly - src[1]]), 1),
    ]
    expected = greens_free_space(obs, src, room.k0)
    for image, axis in images:
        rho = float(np.hypot(*(obs - image)))
        theta = math.acos(abs(obs[axis] - image[axis]) / rho)
        expected += slab_reflection(theta, mat, room) * greens_free_space(obs, image, room.k0)
    result = greens_drywall(obs, src, room, mat, PathTraceLimits(max_bounces=1))
    assert result == pytest.approx(expected, rel=1e-12)


# --- Gratings -----------------------------------------------------------------------

def test_all_drywall_grating_equals_drywall_exactly():
    room = room_of(5.0)
    src = np.array([1.3, 2.1]) * WAVELENGTH
    points = interior_points(room, 0.5 * WAVELENGTH, 5)
    limits = PathTraceLimits(max_bounces=2)
    spec = GratingSpec(period=2.0 * WAVELENGTH, pec_duty=0.0)
    assert np.array_equal(greens_grating(points, src, room, spec, limits),
                          greens_drywall(points, src, room, DrywallMaterial(), limits))


def test_grating_without_bounces_is_free_space():
    room = room_of(5.0)
    src = np.array([1.3, 2.1]) * WAVELENGTH
    points = interior_points(room, 0.5 * WAVELENGTH, 4)
    spec = GratingSpec(period=2.0 * WAVELENGTH)
    result = greens_grating(points, src, room, spec, PathTraceLimits(max_bounces=0))
    assert np.array_equal(result, greens_free_space(points, src, room.k0))


def test_specular_table_reproduces_drywall(tmp_path):
    room = room_of(5.0)
    mat = DrywallMaterial()
    angles = np.round(np.arange(0.0, 89.95, 0.1), 6)
    gamma = slab_reflection(np.radians(angles), mat, room)
    path = tmp_path / "specular.txt"
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("theta_deg m re im\n")
        for theta, value in zip(angles, gamma):
            handle.write(f"{float(theta)!r} 0 {float(value.real)!r} {float(value.imag)!r}\n")
    spec = GratingSpec(period=2.0 * WAVELENGTH, coeff_source=load_coefficient_table(str(path)), max_order=0)

    src = np.array([1.3, 2.1]) * WAVELENGTH
    points = interior_points(room, 0.5 * WAVELENGTH, 5)
    limits = PathTraceLimits(max_bounces=2)
    expected = greens_drywall(points, src, room, mat, limits)
    result = greens_grating(points, src, room, spec, limits)
    assert np.max(np.abs(result - expected)) <= 1e-4 * np.max(np.abs(expected))


def test_subwavelength_grating_has_no_diffracted_branches():
    room = room_of(5.0)
    spec = GratingSpec(period=0.25 * WAVELENGTH)
    src = np.array([1.3, 2.1]) * WAVELENGTH
    points = interior_points(room, 0.5 * WAVELENGTH, 4)
    limits = PathTraceLimits(max_bounces=2)
    assert branch_catalog(spec.max_order, 2, spec, WAVELENGTH) == []
    specular = specular_path_sum(points, src, room, limits,
                                 lambda c, s: specular_coefficient(c, s, spec, room))
    assert np.array_equal(greens_grating(points, src, room, spec, limits), specular)


def test_branch_catalog_and_cap():
    spec = GratingSpec(period=2.0 * WAVELENGTH, max_order=3)
    catalog = branch_catalog(3, 2, spec, WAVELENGTH)
    assert len(catalog) == 4 * ((7 - 1) + (49 - 1))
    # |m| lambda / p >= 2 is pruned: only m in {-1, 0, 1} at p = lambda
    assert len(branch_catalog(3, 2, GratingSpec(period=WAVELENGTH, max_order=3), WAVELENGTH)) == 4 * (2 + 8)
    assert all(any(orders) for _, orders in catalog)
    with pytest.raises(ConfigurationError):
        branch_catalog(20, 3, GratingSpec(period=2.0 * WAVELENGTH, max_order=20), WAVELENGTH)


def test_ray_turns_by_grating_equation():
    room = room_of(5.0)
    spec = GratingSpec(period=2.0 * WAVELENGTH)
    src = np.array([2.0, 1.0]) * WAVELENGTH
    rays = trace_rays(src, 2, np.array([src[0]]), (1,), room, spec)
    assert rays.valid[0]
    np.testing.assert_allclose(rays.hit[0], [src[0], 0.0], atol=1e-15)
    np.testing.assert_allclose(rays.direction[0], [-0.5, math.sqrt(0.75)], atol=1e-12)
    assert rays.length[0] == pytest.approx(src[1])


def test_grating_adds_diffracted_field():
    room = room_of(5.0)
    spec = GratingSpec(period=2.0 * WAVELENGTH)
    src = np.array([1.3, 2.1]) * WAVELENGTH
    points = interior_points(room, 0.5 * WAVELENGTH, 4)
    diffracted = diffracted_sum(points, src, room, spec, 1)
    assert np.all(np.isfinite(diffracted))
    assert np.max(np.abs(diffracted)) > 0.0


def test_dispatch():
    room = room_of(5.0)
    src = np.array([1.3, 2.1]) * WAVELENGTH
    obs = np.array([3.0, 4.0]) * WAVELENGTH
    limits = PathTraceLimits(max_image_order=5)
    assert greens_for_wall(obs, src, room, FreeSpace(), limits) == greens_free_space(obs, src, room.k0)
    assert greens_for_wall(obs, src, room, PEC(), limits) == greens_pec(obs, src, room, limits)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
