"""
Geometry

SE(2) poses and pose changes, conversions between metric coordinates and
grid cells, and the spatial transform that resamples a grid under a pose
change.

Grid convention: cell (row, col) is centred at x = col * res, y = row * res
and orientations are measured counter-clockwise from +x towards +y.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy import ndimage

from navsim import config
from navsim.models import InvalidArgumentError


def _check_finite(*values):
    for value in values:
        if not math.isfinite(value):
            raise InvalidArgumentError(f"Non-finite value in pose: {value}")


def wrap_angle(theta: float) -> float:
    """Maps an angle in radians to (-pi, pi]"""
    _check_finite(theta)
    if -math.pi < theta <= math.pi:
        return float(theta)
    wrapped = math.atan2(math.sin(theta), math.cos(theta))
    if wrapped <= -math.pi:
        wrapped = math.pi
    return wrapped


######################################################################
#  P O S E   T Y P E S
######################################################################
@dataclass(frozen=True)
class Pose:
    """An agent state (x, y in meters, o in radians)"""

    x: float = 0.0
    y: float = 0.0
    o: float = 0.0

    def __post_init__(self):
        _check_finite(self.x, self.y, self.o)
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "o", wrap_angle(self.o))

    def cell(self, resolution: float = config.RESOLUTION) -> Tuple[int, int]:
        """Grid cell (row, col) containing the position"""
        return metric_to_cell(self.x, self.y, resolution)

    def as_tuple(self) -> Tuple[float, float, float]:
        return (self.x, self.y, self.o)

    def distance_to(self, other: "Pose") -> float:
        return math.hypot(other.x - self.x, other.y - self.y)

    @classmethod
    def from_cell(cls, cell, o: float = 0.0, resolution: float = config.RESOLUTION) -> "Pose":
        x, y = cell_center(cell, resolution)
        return cls(x, y, o)


@dataclass(frozen=True)
class PoseDelta:
    """A pose change expressed in the frame of the earlier pose"""

    dx: float = 0.0
    dy: float = 0.0
    do: float = 0.0

    def __post_init__(self):
        _check_finite(self.dx, self.dy, self.do)
        object.__setattr__(self, "dx", float(self.dx))
        object.__setattr__(self, "dy", float(self.dy))
        object.__setattr__(self, "do", wrap_angle(self.do))

    def __add__(self, other: "PoseDelta") -> "PoseDelta":
        """Component-wise sum, used to add a noise draw to a command"""
        return PoseDelta(self.dx + other.dx, self.dy + other.dy, self.do + other.do)

    def as_tuple(self) -> Tuple[float, float, float]:
        return (self.dx, self.dy, self.do)

    def is_zero(self) -> bool:
        return self.dx == 0.0 and self.dy == 0.0 and self.do == 0.0

    @property
    def translation(self) -> float:
        return math.hypot(self.dx, self.dy)


@dataclass(frozen=True)
class GridTransform:
    """
    Parameters of a grid resampling: the delta is applied about the grid
    centre with dx along +col, dy along +row and do counter-clockwise
    """

    delta: PoseDelta = PoseDelta()
    resolution: float = config.RESOLUTION

    def __post_init__(self):
        if not self.resolution > 0:
            raise InvalidArgumentError(f"resolution must be positive: {self.resolution}")


######################################################################
#  P O S E   A L G E B R A
######################################################################
def compose(base: Pose, delta: PoseDelta) -> Pose:
    """Applies delta (given in the frame of base) to base"""
    cos_o, sin_o = math.cos(base.o), math.sin(base.o)
    return Pose(
        base.x + cos_o * delta.dx - sin_o * delta.dy,
        base.y + sin_o * delta.dx + cos_o * delta.dy,
        base.o + delta.do,
    )


def between(a: Pose, b: Pose) -> PoseDelta:
    """The delta that takes pose a to pose b, in the frame of a"""
    cos_o, sin_o = math.cos(a.o), math.sin(a.o)
    ex, ey = b.x - a.x, b.y - a.y
    return PoseDelta(cos_o * ex + sin_o * ey, -sin_o * ex + cos_o * ey, b.o - a.o)


def compose_deltas(first: PoseDelta, second: PoseDelta) -> PoseDelta:
    """Single delta equivalent to applying first then second"""
    return between(Pose(), compose(compose(Pose(), first), second))


def relative_polar(pose: Pose, x: float, y: float) -> Tuple[float, float]:
    """Distance (meters) and bearing (radians, CCW positive) of a point seen from pose"""
    local = between(pose, Pose(x, y, pose.o))
    return math.hypot(local.dx, local.dy), math.atan2(local.dy, local.dx)


######################################################################
#  G R I D   C O N V E R S I O N S
######################################################################
def metric_to_cell(x: float, y: float, resolution: float = config.RESOLUTION) -> Tuple[int, int]:
    return (int(math.floor(y / resolution + 0.5)), int(math.floor(x / resolution + 0.5)))


def cell_center(cell, resolution: float = config.RESOLUTION) -> Tuple[float, float]:
    """Metric (x, y) of a cell centre"""
    row, col = cell
    return (col * resolution, row * resolution)


def ego_agent_cell(size: int = config.VISION_RANGE) -> Tuple[int, int]:
    """The agent sits at the bottom-centre cell of an egocentric grid"""
    return (size - 1, size // 2)


def ego_grid_transform(
    delta: PoseDelta, size: int = config.VISION_RANGE, resolution: float = config.RESOLUTION
) -> GridTransform:
    """
    Expresses the agent moving by ``delta`` as a centre-relative transform
    of its egocentric grid: spatial_transform(prev_ego, result) shows the
    previous observation in the current agent frame.

    Agent-frame (forward, left) maps to grid (col, row) offsets through
    A = [[0, 1], [-1, 0]] about the agent cell b.
    """
    agent_row, agent_col = ego_agent_cell(size)
    centre = (size - 1) / 2.0
    # A t / res in (col, row) units
    shift_u, shift_v = delta.dy / resolution, -delta.dx / resolution
    phi = -delta.do
    cos_p, sin_p = math.cos(phi), math.sin(phi)
    qu = centre - agent_col - shift_u
    qv = centre - agent_row - shift_v
    tau_u = cos_p * qu - sin_p * qv + (agent_col - centre)
    tau_v = sin_p * qu + cos_p * qv + (agent_row - centre)
    return GridTransform(PoseDelta(tau_u * resolution, tau_v * resolution, phi), resolution)


######################################################################
#  S P A T I A L   T R A N S F O R M
######################################################################
def _check_grid(grid: np.ndarray):
    if not np.all(np.isfinite(grid)):
        raise InvalidArgumentError("Grid contains non-finite values")
    if grid.size and (grid.min() < 0.0 or grid.max() > 1.0):
        raise InvalidArgumentError("Grid values must lie in [0, 1]")


def spatial_transform(grid: np.ndarray, transform: GridTransform) -> np.ndarray:
    """
    Resamples a (C, H, W) or (H, W) grid under a pose change

    Each output cell is bilinearly sampled at the inverse-transformed
    coordinate; samples falling outside the source grid read 0.
    Args:
        grid (ndarray): values in [0, 1]
        transform (GridTransform): pose change about the grid centre
    """
    grid = np.asarray(grid)
    _check_grid(grid)
    delta = transform.delta
    if delta.is_zero():
        return grid.copy()

    channels = grid if grid.ndim == 3 else grid[np.newaxis]
    height, width = channels.shape[-2:]
    centre_u, centre_v = (width - 1) / 2.0, (height - 1) / 2.0
    rows, cols = np.mgrid[0:height, 0:width].astype(np.float64)
    qu = cols - centre_u - delta.dx / transform.resolution
    qv = rows - centre_v - delta.dy / transform.resolution
    cos_p, sin_p = math.cos(delta.do), math.sin(delta.do)
    src_u = cos_p * qu + sin_p * qv + centre_u
    src_v = -sin_p * qu + cos_p * qv + centre_v

    out = np.empty(channels.shape, dtype=np.result_type(channels.dtype, np.float32))
    for index, channel in enumerate(channels):
        out[index] = ndimage.map_coordinates(
            channel.astype(np.float64), [src_v, src_u], order=1, mode="grid-constant", cval=0.0
        )
    np.clip(out, 0.0, 1.0, out=out)
    return out if grid.ndim == 3 else out[0]
