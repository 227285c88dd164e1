# GrateWave/core/mimo.py

"""
Channel matrices, singular values and water-filling capacity.

g_ij is the raw E-field at receiver i produced by a 1 A line current at
transmitter j, so the receiver SNR is (P_T / P_N) |g|^2 without any extra
normalization constant.
"""

import math
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np

from core.exceptions import ConfigurationError, SingularityError
from core.geometry import ArrayLayout, RoomGeometry
from core.greens import efield_scale, greens_for_wall
from core.wall_models import FreeSpace, PathTraceLimits, WallModel

MODE_THRESHOLD_FACTOR = 1e-9


@dataclass
class ChannelMatrix:
    """Complex N_R x N_T coupling matrix (V/m per ampere)."""
    entries: np.ndarray

    def __post_init__(self):
        self.entries = np.atleast_2d(np.asarray(self.entries, dtype=complex))
        if not np.all(np.isfinite(self.entries)):
            raise ValueError("channel matrix entries must be finite")

    @property
    def n_rx(self) -> int:
        return self.entries.shape[0]

    @property
    def n_tx(self) -> int:
        return self.entries.shape[1]


@dataclass(frozen=True)
class PowerBudget:
    p_tx: float = 1.0
    p_noise: float = 1e4

    def __post_init__(self):
        if not (self.p_tx > 0 and self.p_noise > 0):
            raise ConfigurationError("p_tx and p_noise must be positive")

    @property
    def snr_scale(self) -> float:
        return self.p_tx / self.p_noise


@dataclass
class CapacityResult:
    singular_values: np.ndarray
    gammas: np.ndarray
    capacity: float
    useful_modes: int
    rank: int
    water_level: float = float("nan")
    extras: dict = field(default_factory=dict)


def build_channel_matrix(tx: ArrayLayout, rx: ArrayLayout, room: RoomGeometry, wall: WallModel,
                         limits: PathTraceLimits, current: float = 1.0) -> ChannelMatrix:
    """
    Couplings between every transmit and receive element.

    Args:
        tx: Transmit array.
        rx: Receive array.
        room: Room geometry (frequency and walls).
        wall: Wall model shared by the four walls.
        limits: Truncation of the image and branch sums.
        current: Line-source current in amperes.

    Returns:
        ChannelMatrix of shape (rx.element_count, tx.element_count).

    Raises:
        SingularityError: a transmit element coincides with a receive element.
    """
    tx_points = tx.element_positions()
    rx_points = rx.element_positions()
    separation = np.hypot(rx_points[:, None, 0] - tx_points[None, :, 0],
                          rx_points[:, None, 1] - tx_points[None, :, 1])
    if np.any(separation <= 1e-12 * room.wavelength):
        raise SingularityError("a transmit element coincides with a receive element")
    if not isinstance(wall, FreeSpace):
        room.require_inside(tx_points, "tx element")
        room.require_inside(rx_points, "rx element")

    entries = np.empty((len(rx_points), len(tx_points)), dtype=complex)
    for column, source in enumerate(tx_points):
        entries[:, column] = greens_for_wall(rx_points, source, room, wall, limits)
    return ChannelMatrix(efield_scale(room, current) * entries)


def singular_values(h) -> np.ndarray:
    """Descending singular values; accepts a ChannelMatrix, an array, or a stack of matrices."""
    matrix = h.entries if isinstance(h, ChannelMatrix) else np.asarray(h, dtype=complex)
    return np.linalg.svd(matrix, compute_uv=False)


def _mode_gains(sv: Sequence[float], budget: PowerBudget, n_tx: int) -> np.ndarray:
    sigma = np.asarray(sv, dtype=float)
    return budget.p_tx * sigma * sigma / (n_tx * budget.p_noise)


def waterfill(sv: Sequence[float], budget: PowerBudget, n_tx: int) -> Tuple[np.ndarray, float]:
    """
    Water-filling allocation over eigenchannels under sum(gamma) = N_T.

    Args:
        sv: Singular values in descending order.
        budget: Transmit and noise powers.
        n_tx: Number of transmit elements.

    Returns:
        (gammas, capacity in bits/s/Hz).
    """
    if n_tx < 1:
        raise ConfigurationError("n_tx must be at least 1")
    gains = _mode_gains(sv, budget, n_tx)
    count = len(gains)
    gammas = np.zeros(count)
    if count == 0:
        return gammas, 0.0
    if not np.any(gains > 0.0):
        return np.full(count, n_tx / count), 0.0

    # Sorted inversion: assume the k strongest modes are active, drop the weakest violator.
    order = np.argsort(-gains, kind="stable")
    active = int(np.count_nonzero(gains > 0.0))
    while active > 0:
        chosen = order[:active]
        level = (n_tx + np.sum(1.0 / gains[chosen])) / active
        if level - 1.0 / gains[chosen[-1]] > 0.0:
            break
        active -= 1
    chosen = order[:active]
    gammas[chosen] = level - 1.0 / gains[chosen]
    capacity = float(np.sum(np.log2(1.0 + gammas[chosen] * gains[chosen])))
    return gammas, capacity


def water_level(gammas: np.ndarray, sv: Sequence[float], budget: PowerBudget, n_tx: int) -> float:
    """Common level gamma_i + 1/a_i of the active modes (nan when none is active)."""
    gains = _mode_gains(sv, budget, n_tx)
    active = (gammas > 0.0) & (gains > 0.0)
    if not np.any(active):
        return float("nan")
    return float(np.mean(gammas[active] + 1.0 / gains[active]))


def useful_mode_count(gammas: np.ndarray, n_tx: int) -> int:
    """Modes with gamma above 1e-9 * N_T."""
    return int(np.count_nonzero(np.asarray(gammas) > MODE_THRESHOLD_FACTOR * n_tx))


def matrix_rank(sv: np.ndarray, shape: Tuple[int, int]) -> int:
    if len(sv) == 0 or sv[0] == 0.0:
        return 0
    tolerance = sv[0] * max(shape) * np.finfo(float).eps
    return int(np.count_nonzero(sv > tolerance))


def capacity_from_singular_values(sv: np.ndarray, budget: PowerBudget, n_tx: int,
                                  shape: Tuple[int, int]) -> CapacityResult:
    gammas, value = waterfill(sv, budget, n_tx)
    return CapacityResult(
        singular_values=np.asarray(sv, dtype=float),
        gammas=gammas,
        capacity=value,
        useful_modes=useful_mode_count(gammas, n_tx) if value > 0.0 else 0,
        rank=matrix_rank(np.asarray(sv, dtype=float), shape),
        water_level=water_level(gammas, sv, budget, n_tx),
    )


def capacity(h: ChannelMatrix, budget: PowerBudget) -> CapacityResult:
    """Spectral efficiency of one channel; SISO reduces to log2(1 + P_T |g|^2 / P_N)."""
    sv = singular_values(h)
    return capacity_from_singular_values(sv, budget, h.n_tx, h.entries.shape)


def uniform_capacity(sv: Sequence[float], budget: PowerBudget, n_tx: int) -> float:
    """Capacity with gamma_i = 1 on every mode, for comparison with water-filling."""
    gains = _mode_gains(sv, budget, n_tx)
    return float(np.sum(np.log2(1.0 + gains)))


def snr_db(h: ChannelMatrix, budget: PowerBudget) -> float:
    """Mean per-link receiver SNR in dB."""
    power = float(np.mean(np.abs(h.entries) ** 2)) * budget.snr_scale
    return 10.0 * math.log10(power) if power > 0 else float("-inf")


def batch_capacities(stack: np.ndarray, budget: PowerBudget) -> List[CapacityResult]:
    """Capacity of each matrix in an (n, N_R, N_T) stack."""
    if len(stack) == 0:
        return []
    sv_stack = singular_values(stack)
    shape = stack.shape[1:]
    return [capacity_from_singular_values(sv, budget, shape[1], shape) for sv in sv_stack]
