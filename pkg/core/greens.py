# GrateWave/core/greens.py

"""
Two-dimensional Green's functions of a rectangular room.

G0(r, r') = (j/4) H0^(2)(k0 |r - r'|) is the free-space kernel. PEC and
drywall walls are handled with the image lattice of the rectangle; gratings
add beam-traced diffraction branches (see core/beam_tracing.py) to the
specular image sum.

Observation points may be a single point of shape (2,) or an array of shape
(..., 2); the result has the leading shape of `obs`.
"""

import math
from dataclasses import dataclass
from typing import Callable, Iterator, Optional, Tuple

import numpy as np

from core.beam_tracing import diffracted_sum
from core.exceptions import GeometryError, SingularityError
from core.geometry import MU_0, RoomGeometry
from core.specfun import hankel2_0
from core.wall_models import (PEC, Drywall, FreeSpace, Grating, GratingSpec, PathTraceLimits,
                              DrywallMaterial, WallModel, reflection_from_cos,
                              specular_coefficient)

# Fixed block of observation points per vectorized evaluation. Never tied to
# the worker count so sums are bit-identical for any pool size.
OBS_BLOCK = 32
# Images per chunk inside a block, bounding the (block, images) work arrays.
IMAGE_BLOCK = 4096

# Relative size of the PEC image tail left out under artificial loss.
PEC_TAIL_TOLERANCE = 5e-3
# Per-axis image order above which the strip-mode series takes over.
MAX_IMAGE_ORDER = 400
# Evanescent strip modes are kept until exp(-STRIP_DECAY).
STRIP_DECAY = 30.0
MAX_STRIP_MODES = 20000

_COINCIDENCE_FRACTION = 1e-12

ReflectionFunction = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass
class ImageSet:
    """Image sources of the rectangle, in deterministic summation order."""
    points: np.ndarray
    signs: np.ndarray
    nx: np.ndarray
    ny: np.ndarray

    def __len__(self) -> int:
        return len(self.signs)

    def __iter__(self) -> Iterator[Tuple[Tuple[float, float], int]]:
        for point, sign in zip(self.points, self.signs):
            yield (float(point[0]), float(point[1])), int(sign)

    @property
    def bounces(self) -> np.ndarray:
        return np.abs(self.nx) + np.abs(self.ny)

    def subset(self, mask: np.ndarray) -> "ImageSet":
        return ImageSet(self.points[mask], self.signs[mask], self.nx[mask], self.ny[mask])


def _as_points(obs) -> Tuple[np.ndarray, Tuple[int, ...]]:
    points = np.asarray(obs, dtype=float)
    if points.shape[-1] != 2:
        raise GeometryError("observation points must have a trailing dimension of 2")
    return points.reshape(-1, 2), points.shape[:-1]


def _shape_result(values: np.ndarray, lead_shape: Tuple[int, ...]):
    if lead_shape == ():
        return complex(values[0])
    return values.reshape(lead_shape)


def _kernel(rho: np.ndarray, k0: float, loss: float = 0.0) -> np.ndarray:
    """(j/4) H0^(2)(k0 rho), damped by exp(-k0 loss rho) for a lossy wavenumber."""
    values = 0.25j * hankel2_0(k0 * rho)
    if loss > 0.0:
        values = values * np.exp(-k0 * loss * rho)
    return values


def _direct_distances(points: np.ndarray, src: np.ndarray, wavelength: float) -> np.ndarray:
    rho = np.hypot(points[:, 0] - src[0], points[:, 1] - src[1])
    if np.any(rho <= _COINCIDENCE_FRACTION * wavelength):
        raise SingularityError("observation point coincides with the source")
    return rho


def greens_free_space(obs, src, k0: float):
    """
    Free-space 2D Green's function (j/4) H0^(2)(k0 |obs - src|).

    Raises:
        SingularityError: obs coincides with src.
    """
    points, lead_shape = _as_points(obs)
    source = np.asarray(src, dtype=float)
    rho = _direct_distances(points, source, 2.0 * np.pi / k0)
    return _shape_result(_kernel(rho, k0), lead_shape)


def efield_scale(room: RoomGeometry, current: float) -> complex:
    """j omega mu0 I0, turning a Green's function into E_z in V/m."""
    return 1j * room.omega * MU_0 * current


def efield_line_source(obs, src, room: RoomGeometry, current: float):
    """E_z of a line current: -(I0 k0^2 / (4 omega eps0)) H0^(2)(k0 rho)."""
    points, lead_shape = _as_points(obs)
    green = np.atleast_1d(greens_free_space(points, src, room.k0))
    return _shape_result(efield_scale(room, current) * green, lead_shape)


def _axis_images(s: float, length: float, max_order: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Image coordinates along one axis indexed by the signed reflection index n.

    Even n: n*L + s (unmirrored family). Odd n: (n+1)*L - s (mirrored family).
    |n| is the number of reflections on the walls normal to this axis.
    """
    indices = np.arange(-max_order, max_order + 1)
    even = indices % 2 == 0
    coords = np.where(even, indices * length + s, (indices + 1) * length - s)
    return coords, indices


def pec_image_set(src, room: RoomGeometry, max_order: int, order_y: Optional[int] = None) -> ImageSet:
    """
    Dirichlet image lattice of the rectangle with |n_x|, |n_y| <= max_order.

    Args:
        src: Source point strictly inside the room.
        room: Room geometry.
        max_order: Largest per-axis reflection index.
        order_y: Largest |n_y| when it differs from max_order.

    Returns:
        ImageSet sorted by (|n_x| + |n_y|, n_x, n_y), source excluded. Each
        image carries the sign (-1)^(|n_x| + |n_y|).
    """
    source = np.asarray(src, dtype=float)
    room.require_inside(source, "source")
    xs, nx = _axis_images(source[0], room.length_x, max_order)
    ys, ny = _axis_images(source[1], room.length_y, max_order if order_y is None else order_y)

    grid_nx, grid_ny = np.meshgrid(nx, ny, indexing="ij")
    grid_x, grid_y = np.meshgrid(xs, ys, indexing="ij")
    grid_nx, grid_ny = grid_nx.ravel(), grid_ny.ravel()
    points = np.stack([grid_x.ravel(), grid_y.ravel()], axis=1)

    keep = ~((grid_nx == 0) & (grid_ny == 0))
    grid_nx, grid_ny, points = grid_nx[keep], grid_ny[keep], points[keep]

    order = np.lexsort((grid_ny, grid_nx, np.abs(grid_nx) + np.abs(grid_ny)))
    grid_nx, grid_ny, points = grid_nx[order], grid_ny[order], points[order]
    signs = np.where((np.abs(grid_nx) + np.abs(grid_ny)) % 2 == 0, 1, -1)
    return ImageSet(points=points, signs=signs, nx=grid_nx, ny=grid_ny)


@dataclass(frozen=True)
class PecSummation:
    """Per-axis image orders of a PEC room, or the strip-mode series when those are too large."""
    order_x: int
    order_y: int
    modal: bool = False

    @property
    def image_count(self) -> int:
        return (2 * self.order_x + 1) * (2 * self.order_y + 1) - 1


def pec_summation(room: RoomGeometry, limits: PathTraceLimits) -> PecSummation:
    """
    Chooses how far the PEC image lattice is summed.

    max_image_order is a floor. With an artificial loss each axis is extended
    until its outermost images are damped by exp(-k0 loss n L) <=
    PEC_TAIL_TOLERANCE, which bounds the relative size of the dropped tail.
    Orders above MAX_IMAGE_ORDER switch to the strip-mode series, which sums
    the whole lattice. max_image_order = 0 keeps the direct term only.
    """
    floor = limits.max_image_order
    loss = limits.artificial_loss
    if floor == 0 or loss <= 0.0:
        return PecSummation(floor, floor)

    def damped(length: float) -> int:
        return max(floor, math.ceil(math.log(1.0 / PEC_TAIL_TOLERANCE) / (room.k0 * loss * length)))

    order_x, order_y = damped(room.length_x), damped(room.length_y)
    return PecSummation(order_x, order_y, modal=max(order_x, order_y) > MAX_IMAGE_ORDER)


def _strip_series(u: np.ndarray, v: np.ndarray, source_u: float, source_v: float,
                  length_u: float, length_v: float, k: complex, k0: float) -> np.ndarray:
    """
    Dirichlet rectangle Green's function as sine modes along u, each with the
    closed-form 1D Green's function along v. Converges like exp(-m pi |v - v'| / L_u).
    """
    gap = np.abs(v - source_v)
    propagating = int(k0 * length_u / math.pi)
    evanescent = math.ceil(STRIP_DECAY * length_u / (math.pi * float(np.min(gap))))
    modes = min(propagating + evanescent + 8, MAX_STRIP_MODES)
    km = np.arange(1, modes + 1) * (math.pi / length_u)
    q = np.sqrt(km * km - k * k + 0j)[None, :]
    lower = np.minimum(v, source_v)[:, None]
    upper = length_v - np.maximum(v, source_v)[:, None]
    along = (-np.exp(-q * gap[:, None]) * (1.0 - np.exp(-2.0 * q * lower)) * (1.0 - np.exp(-2.0 * q * upper))
             / (2.0 * q * (1.0 - np.exp(-2.0 * q * length_v))))
    across = (2.0 / length_u) * np.sin(km[None, :] * u[:, None]) * np.sin(km * source_u)[None, :]
    return np.sum(across * along, axis=1)


def _strip_mode_sum(points: np.ndarray, source: np.ndarray, room: RoomGeometry, loss: float) -> np.ndarray:
    """
    Full PEC lattice with the wavenumber k0 (1 - j*loss), summed in closed
    form along one axis. Each point uses the mode axis across which it is
    farther from the source.
    """
    k = room.k0 * (1.0 - 1j * loss)
    lx, ly = room.length_x, room.length_y
    total = np.zeros(len(points), dtype=complex)
    for start in range(0, len(points), OBS_BLOCK):
        block = points[start:start + OBS_BLOCK]
        modes_along_x = np.abs(block[:, 1] - source[1]) >= np.abs(block[:, 0] - source[0])
        values = np.empty(len(block), dtype=complex)
        if np.any(modes_along_x):
            chosen = block[modes_along_x]
            values[modes_along_x] = _strip_series(chosen[:, 0], chosen[:, 1], source[0], source[1],
                                                  lx, ly, k, room.k0)
        if not np.all(modes_along_x):
            chosen = block[~modes_along_x]
            values[~modes_along_x] = _strip_series(chosen[:, 1], chosen[:, 0], source[1], source[0],
                                                   ly, lx, k, room.k0)
        total[start:start + OBS_BLOCK] = values
    return total


def _bounce_weights(reflection: ReflectionFunction, cos_i: np.ndarray, sin_i: np.ndarray,
                    bounces: np.ndarray) -> np.ndarray:
    """reflection(cos, sin)^bounces, evaluated only for images that hit these walls."""
    weights = np.ones(cos_i.shape, dtype=complex)
    hit = bounces > 0
    if np.any(hit):
        weights[:, hit] = reflection(cos_i[:, hit], sin_i[:, hit]) ** bounces[None, hit]
    return weights


def _image_sum(points: np.ndarray, images: ImageSet, room: RoomGeometry, loss: float,
               reflection: Optional[ReflectionFunction]) -> np.ndarray:
    """
    Sum of image contributions at each observation point.

    With `reflection` None every image is weighted by its PEC sign; otherwise
    by reflection(cos, sin)^|n_x| at the x-walls times the same at the y-walls,
    evaluated at the unfolded specular angle of the path.
    """
    total = np.zeros(len(points), dtype=complex)
    if len(images) == 0:
        return total
    k0 = room.k0
    coincidence = _COINCIDENCE_FRACTION * room.wavelength
    bx = np.abs(images.nx)
    by = np.abs(images.ny)
    for start in range(0, len(points), OBS_BLOCK):
        block = points[start:start + OBS_BLOCK]
        block_total = np.zeros(len(block), dtype=complex)
        for first in range(0, len(images), IMAGE_BLOCK):
            chunk = slice(first, first + IMAGE_BLOCK)
            dx = block[:, None, 0] - images.points[None, chunk, 0]
            dy = block[:, None, 1] - images.points[None, chunk, 1]
            rho = np.hypot(dx, dy)
            if np.any(rho <= coincidence):
                raise SingularityError("observation point coincides with an image source")
            terms = _kernel(rho, k0, loss)
            if reflection is None:
                terms = terms * images.signs[None, chunk]
            else:
                cos_x = np.abs(dx) / rho
                cos_y = np.abs(dy) / rho
                terms = (terms * _bounce_weights(reflection, cos_x, cos_y, bx[chunk])
                         * _bounce_weights(reflection, cos_y, cos_x, by[chunk]))
            block_total += np.sum(terms, axis=1)
        total[start:start + OBS_BLOCK] = block_total
    return total


def _prepare(obs, src, room: RoomGeometry) -> Tuple[np.ndarray, Tuple[int, ...], np.ndarray]:
    points, lead_shape = _as_points(obs)
    source = np.asarray(src, dtype=float)
    room.require_inside(source, "source")
    if not np.all(room.contains(points)):
        raise GeometryError("observation points must lie strictly inside the room")
    return points, lead_shape, source


def greens_pec(obs, src, room: RoomGeometry, limits: PathTraceLimits):
    """
    Green's function of a PEC-walled room by the image method.

    The image series is damped with the wavenumber k0 (1 - j*artificial_loss)
    and summed to the per-axis orders of pec_summation. When those exceed
    MAX_IMAGE_ORDER the strip-mode series is used instead.

    Raises:
        SingularityError: obs coincides with src or a retained image.
        GeometryError: obs or src not strictly inside the room.
    """
    points, lead_shape, source = _prepare(obs, src, room)
    loss = limits.artificial_loss
    rho = _direct_distances(points, source, room.wavelength)
    summation = pec_summation(room, limits)
    if summation.modal:
        return _shape_result(_strip_mode_sum(points, source, room, loss), lead_shape)
    direct = _kernel(rho, room.k0, loss)
    images = pec_image_set(source, room, summation.order_x, summation.order_y)
    return _shape_result(direct + _image_sum(points, images, room, loss, None), lead_shape)


def _bounded_images(source: np.ndarray, room: RoomGeometry, limits: PathTraceLimits) -> ImageSet:
    images = pec_image_set(source, room, limits.max_image_order)
    return images.subset(images.bounces <= limits.max_bounces)


def specular_path_sum(obs, src, room: RoomGeometry, limits: PathTraceLimits,
                      reflection: ReflectionFunction):
    """
    G0 plus every image path of at most max_bounces reflections, each weighted
    by the product of per-bounce reflection coefficients.

    Args:
        reflection: Maps (cos_i, sin_i) arrays at a wall hit to complex coefficients.
    """
    points, lead_shape, source = _prepare(obs, src, room)
    direct = _kernel(_direct_distances(points, source, room.wavelength), room.k0)
    images = _bounded_images(source, room, limits)
    return _shape_result(direct + _image_sum(points, images, room, 0.0, reflection), lead_shape)


def greens_drywall(obs, src, room: RoomGeometry, mat: DrywallMaterial, limits: PathTraceLimits):
    """Image paths of up to max_bounces reflections weighted by the slab coefficient."""
    return specular_path_sum(obs, src, room, limits,
                             lambda cos_i, sin_i: reflection_from_cos(cos_i, mat, room))


def greens_grating(obs, src, room: RoomGeometry, spec: GratingSpec, limits: PathTraceLimits):
    """
    Specular (m = 0) image paths weighted by R_0 plus beam-traced branches
    containing at least one diffraction order m != 0.

    Raises:
        ConfigurationError: branch count exceeds the cap.
    """
    points, lead_shape, source = _prepare(obs, src, room)
    specular = np.atleast_1d(specular_path_sum(
        points, source, room, limits,
        lambda cos_i, sin_i: specular_coefficient(cos_i, sin_i, spec, room)))
    diffracted = diffracted_sum(points, source, room, spec, limits.max_bounces)
    return _shape_result(specular + diffracted, lead_shape)


def greens_for_wall(obs, src, room: RoomGeometry, wall: WallModel, limits: PathTraceLimits):
    """Dispatches to the Green's function of the wall model."""
    if isinstance(wall, FreeSpace):
        return greens_free_space(obs, src, room.k0)
    if isinstance(wall, PEC):
        return greens_pec(obs, src, room, limits)
    if isinstance(wall, Drywall):
        return greens_drywall(obs, src, room, wall.material, limits)
    if isinstance(wall, Grating):
        return greens_grating(obs, src, room, wall.spec, limits)
    raise TypeError(f"unknown wall model {wall!r}")


def _strip_mode_count(room: RoomGeometry) -> int:
    """Strip modes for a point a quarter of the shorter side away from the source."""
    length = max(room.length_x, room.length_y)
    gap = 0.25 * min(room.length_x, room.length_y)
    evanescent = math.ceil(STRIP_DECAY * length / (math.pi * gap))
    return min(int(room.k0 * length / math.pi) + evanescent + 8, MAX_STRIP_MODES)


def evaluation_count(n_points: int, wall: WallModel, limits: PathTraceLimits,
                     room: RoomGeometry) -> int:
    """Rough number of kernel evaluations for n_points observation points per source."""
    if isinstance(wall, FreeSpace):
        return n_points
    if isinstance(wall, PEC):
        summation = pec_summation(room, limits)
        if summation.modal:
            return n_points * _strip_mode_count(room)
        return n_points * summation.image_count
    bounded = sum(1 for nx in range(-limits.max_image_order, limits.max_image_order + 1)
                  for ny in range(-limits.max_image_order, limits.max_image_order + 1)
                  if abs(nx) + abs(ny) <= limits.max_bounces)
    if isinstance(wall, Grating):
        orders = 2 * wall.spec.max_order + 1
        branches = 4 * sum(orders ** b - 1 for b in range(1, limits.max_bounces + 1))
        return n_points * (bounded + branches)
    return n_points * bounded
