"""
Mapping

Egocentric projection of a range scan and its geocentric aggregation into
the episode's spatial map. Both grids have an obstacle channel (0) and an
explored channel (1) holding values in [0, 1].

Egocentric grids are V x V with the agent at cell (V - 1, V / 2) looking
towards row 0; agent-frame left is +col. The spatial map is M x M in the
episode frame with the start pose at cell (M / 2, M / 2) facing +x.
"""
from __future__ import annotations

import logging
import math
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage

from navsim import config
from navsim.common.file_utils import atomic_write
from navsim.geometry import Pose, compose, PoseDelta, ego_agent_cell
from navsim.models import InvalidArgumentError, OutOfBoundsError
from navsim.world import RangeScan

logger = logging.getLogger(__name__)

OBSTACLE = 0
EXPLORED = 1

# an (2, V, V) float32 array
EgoMap = np.ndarray


def empty_ego(size: int = config.VISION_RANGE) -> EgoMap:
    return np.zeros((2, size, size), dtype=np.float32)


def check_layers(grid: np.ndarray, name: str):
    if grid.ndim != 3 or grid.shape[0] != 2 or grid.shape[1] != grid.shape[2]:
        raise InvalidArgumentError(f"{name} must have shape (2, N, N), got {grid.shape}")
    if not np.all(np.isfinite(grid)) or grid.min() < 0.0 or grid.max() > 1.0:
        raise InvalidArgumentError(f"{name} values must lie in [0, 1]")


######################################################################
#  E G O C E N T R I C   P R O J E C T I O N
######################################################################
def project_ego(
    scan: RangeScan, size: int = config.VISION_RANGE, resolution: float = config.RESOLUTION
) -> EgoMap:
    """
    Rasterizes a scan into an egocentric grid

    Every ray marks the cells it crosses before its range as explored;
    a ray that hit something also marks the cell just beyond its range
    as obstacle (and explored). Cells outside the grid are dropped.
    """
    if len(scan) == 0:
        raise InvalidArgumentError("Cannot project an empty scan")
    if scan.max_range > size * resolution + 1e-9:
        raise InvalidArgumentError(
            f"max_range {scan.max_range} exceeds the {size * resolution:.2f} m vision range"
        )
    ego = empty_ego(size)
    agent_row, agent_col = ego_agent_cell(size)
    cos_b, sin_b = np.cos(scan.bearings), np.sin(scan.bearings)

    # explored: samples every half cell strictly before the range
    spacing = resolution / 2.0
    steps = np.arange(int(math.ceil(scan.max_range / spacing)) + 1) * spacing
    inside = steps[np.newaxis, :] < scan.ranges[:, np.newaxis]
    forward = steps[np.newaxis, :] * cos_b[:, np.newaxis]
    left = steps[np.newaxis, :] * sin_b[:, np.newaxis]
    _paint(ego[EXPLORED], agent_row - forward[inside] / resolution, agent_col + left[inside] / resolution)

    # obstacles: a quarter cell past the boundary the ray stopped at
    hit_range = scan.ranges[scan.hits] + 0.25 * resolution
    rows = agent_row - hit_range * cos_b[scan.hits] / resolution
    cols = agent_col + hit_range * sin_b[scan.hits] / resolution
    _paint(ego[OBSTACLE], rows, cols)
    _paint(ego[EXPLORED], rows, cols)
    return ego


def _paint(layer: np.ndarray, rows: np.ndarray, cols: np.ndarray):
    rows = np.floor(rows + 0.5).astype(int)
    cols = np.floor(cols + 0.5).astype(int)
    keep = (rows >= 0) & (rows < layer.shape[0]) & (cols >= 0) & (cols < layer.shape[1])
    layer[rows[keep], cols[keep]] = 1.0


######################################################################
#  S P A T I A L   M A P
######################################################################
class SpatialMap:
    """
    Class that represents the geocentric obstacle and explored map

    ``explored_bounds`` is the (r0, c0, r1, c1) inclusive box of cells
    ever touched by an aggregation, or None for a fresh map.
    """

    def __init__(self, size: int = config.MAP_SIZE, resolution: float = config.RESOLUTION):
        if size < 2 or size % 2:
            raise InvalidArgumentError(f"Map size must be a positive even number, got {size}")
        if not resolution > 0:
            raise InvalidArgumentError(f"resolution must be positive: {resolution}")
        self.size = size
        self.resolution = resolution
        self.grid = np.zeros((2, size, size), dtype=np.float32)
        self.explored_bounds: Optional[Tuple[int, int, int, int]] = None

    def __repr__(self):
        return f"<SpatialMap {self.size}x{self.size} explored={self.explored_bounds}>"

    @property
    def obstacle(self) -> np.ndarray:
        return self.grid[OBSTACLE]

    @property
    def explored(self) -> np.ndarray:
        return self.grid[EXPLORED]

    def origin_pose(self) -> Pose:
        """The episode start: map centre facing +x"""
        half = self.size / 2 * self.resolution
        return Pose(half, half, 0.0)

    def in_bounds(self, cell) -> bool:
        return 0 <= cell[0] < self.size and 0 <= cell[1] < self.size

    def copy(self) -> "SpatialMap":
        other = SpatialMap(self.size, self.resolution)
        other.grid = self.grid.copy()
        other.explored_bounds = self.explored_bounds
        return other

    def extend_bounds(self, r0: int, c0: int, r1: int, c1: int):
        if self.explored_bounds is None:
            self.explored_bounds = (r0, c0, r1, c1)
        else:
            b = self.explored_bounds
            self.explored_bounds = (min(b[0], r0), min(b[1], c0), max(b[2], r1), max(b[3], c1))

    def mark_collision(self, pose: Pose, ahead: float = 0.15, half_width: float = 0.1):
        """Paints a short obstacle segment across the heading just ahead of the pose"""
        painted = 0
        for lateral in np.linspace(-half_width, half_width, 9):
            point = compose(pose, PoseDelta(ahead, float(lateral), 0.0))
            cell = point.cell(self.resolution)
            if self.in_bounds(cell):
                self.grid[:, cell[0], cell[1]] = 1.0
                self.extend_bounds(cell[0], cell[1], cell[0], cell[1])
                painted += 1
        logger.debug("Marked collision ahead of %s (%d cells)", pose.as_tuple(), painted)


######################################################################
#  A G G R E G A T I O N
######################################################################
def aggregate(m: SpatialMap, ego: EgoMap, pose: Pose, in_place: bool = False) -> SpatialMap:
    """
    Transforms an egocentric grid to the map frame at ``pose`` and merges
    it with the map by a per-cell, per-channel maximum

    Map cells are inverse-mapped into the ego grid and sampled bilinearly;
    samples outside the ego grid read 0.
    """
    ego = np.asarray(ego)
    check_layers(ego, "Egocentric grid")
    cell = pose.cell(m.resolution)
    if not m.in_bounds(cell):
        raise OutOfBoundsError(f"Pose {pose.as_tuple()} lies outside the {m.size}x{m.size} map")
    out = m if in_place else m.copy()

    size = ego.shape[-1]
    agent_row, agent_col = ego_agent_cell(size)
    reach = int(math.ceil(size * math.sqrt(2))) + 2
    r0, r1 = max(cell[0] - reach, 0), min(cell[0] + reach, m.size - 1)
    c0, c1 = max(cell[1] - reach, 0), min(cell[1] + reach, m.size - 1)
    rows, cols = np.mgrid[r0 : r1 + 1, c0 : c1 + 1].astype(np.float64)

    # map cell -> agent frame (forward, left) -> ego (row, col)
    ex = cols * m.resolution - pose.x
    ey = rows * m.resolution - pose.y
    cos_o, sin_o = math.cos(pose.o), math.sin(pose.o)
    forward = cos_o * ex + sin_o * ey
    left = -sin_o * ex + cos_o * ey
    src_row = agent_row - forward / m.resolution
    src_col = agent_col + left / m.resolution

    patch = np.empty((2,) + rows.shape, dtype=np.float32)
    for channel in (OBSTACLE, EXPLORED):
        patch[channel] = ndimage.map_coordinates(
            ego[channel].astype(np.float64), [src_row, src_col], order=1, mode="grid-constant", cval=0.0
        )
    np.clip(patch, 0.0, 1.0, out=patch)
    window = out.grid[:, r0 : r1 + 1, c0 : c1 + 1]
    np.maximum(window, patch, out=window)

    touched = np.argwhere(patch.max(axis=0) > 1e-6)
    if len(touched):
        low, high = touched.min(axis=0), touched.max(axis=0)
        out.extend_bounds(r0 + int(low[0]), c0 + int(low[1]), r0 + int(high[0]), c0 + int(high[1]))
    return out


def predicted_coverage(m: SpatialMap) -> Tuple[float, float]:
    """(explored area, explored free area) in square meters"""
    explored = m.explored > 0.5
    free = explored & (m.obstacle < 0.5)
    cell_area = m.resolution**2
    return float(explored.sum()) * cell_area, float(free.sum()) * cell_area


######################################################################
#  M A P   D U M P S
######################################################################
def save_pgm(layer: np.ndarray, path: str):
    """Writes a [0, 1] layer as an 8-bit binary PGM, one byte per cell in row order"""
    layer = np.asarray(layer, dtype=np.float64)
    if layer.ndim != 2:
        raise InvalidArgumentError("A PGM holds a single 2D layer")
    pixels = np.clip(np.round(layer * 255.0), 0, 255).astype(np.uint8)
    header = f"P5\n{layer.shape[1]} {layer.shape[0]}\n255\n".encode("ascii")
    with atomic_write(path, "wb") as stream:
        stream.write(header)
        stream.write(pixels.tobytes())


def load_pgm(path: str) -> np.ndarray:
    """Reads a binary PGM written by save_pgm back into [0, 1]"""
    with open(path, "rb") as stream:
        data = stream.read()
    fields = data.split(maxsplit=4)
    if len(fields) < 4 or fields[0] != b"P5":
        raise InvalidArgumentError(f"{path} is not a binary PGM")
    width, height = int(fields[1]), int(fields[2])
    pixels = np.frombuffer(data[len(data) - width * height :], dtype=np.uint8)
    return pixels.reshape(height, width) / 255.0


def save_map(m: SpatialMap, prefix: str):
    """Dumps both channels as ``<prefix>_obstacle.pgm`` and ``<prefix>_explored.pgm``"""
    save_pgm(m.obstacle, f"{prefix}_obstacle.pgm")
    save_pgm(m.explored, f"{prefix}_explored.pgm")


def render_composite(
    m: SpatialMap,
    path: str,
    trajectory: Optional[Sequence[Tuple[float, float]]] = None,
    goal: Optional[Tuple[int, int]] = None,
    margin: int = 20,
):
    """PNG of the explored part of the map: obstacles dark, explored light, path overlaid"""
    import matplotlib  # pylint: disable=import-outside-toplevel

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt  # pylint: disable=import-outside-toplevel

    image = np.full(m.obstacle.shape, 0.6)
    image[m.explored > 0.5] = 0.95
    image[m.obstacle > 0.5] = 0.1
    if m.explored_bounds is None:
        r0, c0, r1, c1 = 0, 0, m.size - 1, m.size - 1
    else:
        r0, c0, r1, c1 = m.explored_bounds
        r0, c0 = max(r0 - margin, 0), max(c0 - margin, 0)
        r1, c1 = min(r1 + margin, m.size - 1), min(c1 + margin, m.size - 1)
    figure, axes = plt.subplots(figsize=(6, 6))
    axes.imshow(
        image[r0 : r1 + 1, c0 : c1 + 1],
        cmap="gray",
        vmin=0.0,
        vmax=1.0,
        origin="lower",
        interpolation="nearest",
    )
    if trajectory:
        points = np.array(trajectory) / m.resolution
        axes.plot(points[:, 0] - c0, points[:, 1] - r0, color="tab:red", linewidth=1.0)
    if goal is not None:
        axes.plot(goal[1] - c0, goal[0] - r0, "*", color="tab:blue", markersize=10)
    axes.set_axis_off()
    with atomic_write(path, "wb") as stream:
        figure.savefig(stream, format="png", bbox_inches="tight", dpi=100)
    plt.close(figure)
