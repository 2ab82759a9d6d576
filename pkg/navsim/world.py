"""
World

Ground-truth 2D environment: a closed occupancy grid, the agent's true
pose, noisy action execution with collision truncation, a range-scan
sensor and the coverage accounting used for metrics.

World file format (ASCII)::

    ANSW1 <H> <W> <resolution_m>
    <H rows of '#' (obstacle) or '.' (free)>
    A <row> <col> <o_deg>            (optional start pose)
"""
from __future__ import annotations

import io
import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage

from navsim import config
from navsim.common.file_utils import atomic_write
from navsim.geometry import Pose, PoseDelta, compose, between, metric_to_cell
from navsim.models import (
    Action,
    NoiseKind,
    DataValidationError,
    GenerationFailureError,
    InvalidActionError,
    InvalidArgumentError,
    OutOfBoundsError,
    ParseError,
)
from navsim.noise import COMMANDS, NoiseModelSet, sample

logger = logging.getLogger(__name__)

MAGIC = "ANSW1"
DOOR_WIDTH = 16  # cells
WALL_THICKNESS = 3  # cells
MIN_ROOM = 24  # cells
CORRIDOR_WIDTH = 16  # cells
START_CLEARANCE = 0.25  # meters


######################################################################
#  R A N G E   S C A N
######################################################################
@dataclass
class RangeScan:
    """Ranges along fixed bearings in the agent frame"""

    bearings: np.ndarray
    ranges: np.ndarray
    hits: np.ndarray
    max_range: float

    def __post_init__(self):
        self.bearings = np.asarray(self.bearings, dtype=float)
        self.ranges = np.asarray(self.ranges, dtype=float)
        self.hits = np.asarray(self.hits, dtype=bool)
        if not len(self.bearings) == len(self.ranges) == len(self.hits):
            raise DataValidationError("bearings, ranges and hits must have the same length")
        if len(self.ranges) and (
            np.any(self.ranges <= 0.0) or np.any(self.ranges > self.max_range + 1e-12)
        ):
            raise DataValidationError("ranges must lie in (0, max_range]")

    def __len__(self):
        return len(self.ranges)


def square_gap(dv, du):
    """Distance in cells from a point at offset (dv, du) of a cell centre to that cell's square"""
    return np.hypot(np.maximum(np.abs(dv) - 0.5, 0.0), np.maximum(np.abs(du) - 0.5, 0.0))


######################################################################
#  G R I D   W O R L D
######################################################################
class GridWorld:  # pylint: disable=too-many-instance-attributes
    """
    Class that represents the ground truth environment of one episode

    occupancy is True on obstacle cells; the border is always obstacle.
    The actuation and sensor noise streams are derived from one seed.
    """

    def __init__(
        self,
        occupancy: np.ndarray,
        resolution: float = config.RESOLUTION,
        start: Optional[Tuple[int, int, float]] = None,
        seed: int = 0,
    ):
        occupancy = np.asarray(occupancy, dtype=bool)
        if occupancy.ndim != 2 or min(occupancy.shape) < 3:
            raise DataValidationError("A world is a 2D grid of at least 3x3 cells")
        if abs(resolution - config.RESOLUTION) > 1e-12:
            raise DataValidationError(f"Only {config.RESOLUTION} m cells are supported")
        open_border = _first_open_border_cell(occupancy)
        if open_border is not None:
            raise DataValidationError(f"Border cell {open_border} is free; the world must be closed")
        self.occupancy = occupancy
        self.resolution = resolution
        self.radius = config.AGENT_RADIUS
        self.seen_mask = np.zeros_like(occupancy)
        self.collided = False
        self._clearance = None
        self._footprint = None
        self.reseed(seed)
        if start is None:
            start = self.default_start()
        self.start = (int(start[0]), int(start[1]), float(start[2]))
        self.agent_true = Pose()
        self.place_agent(Pose.from_cell(self.start[:2], math.radians(self.start[2]), resolution))

    def __repr__(self):
        return f"<GridWorld {self.height}x{self.width} free={self.free_mask.sum()}>"

    @property
    def height(self) -> int:
        return self.occupancy.shape[0]

    @property
    def width(self) -> int:
        return self.occupancy.shape[1]

    @property
    def free_mask(self) -> np.ndarray:
        return ~self.occupancy

    def reseed(self, seed: int):
        """Re-derives the actuation and sensor noise streams from one seed"""
        actuation, sensor = np.random.SeedSequence(seed).spawn(2)
        self.actuation_rng = np.random.default_rng(actuation)
        self.sensor_rng = np.random.default_rng(sensor)

    def in_bounds(self, cell) -> bool:
        row, col = cell
        return 0 <= row < self.height and 0 <= col < self.width

    def is_free(self, cell) -> bool:
        return self.in_bounds(cell) and not self.occupancy[cell[0], cell[1]]

    def clearance(self) -> np.ndarray:
        """Distance in meters from each cell centre to the nearest obstacle cell centre"""
        if self._clearance is None:
            self._clearance = ndimage.distance_transform_edt(self.free_mask) * self.resolution
        return self._clearance

    def footprint_mask(self) -> np.ndarray:
        """Cells where the agent disc, centred on the cell, overlaps no obstacle square"""
        if self._footprint is None:
            reach = self.radius / self.resolution
            span = int(math.ceil(reach + 0.5))
            offsets = np.arange(-span, span + 1)
            overlap = square_gap(offsets[:, np.newaxis], offsets[np.newaxis, :]) < reach - 1e-9
            blocked = ndimage.binary_dilation(self.occupancy, structure=overlap)
            self._footprint = ~blocked
        return self._footprint

    def default_start(self) -> Tuple[int, int, float]:
        """The free cell farthest from any obstacle (first in row-major order on ties)"""
        clearance = self.clearance()
        row, col = np.unravel_index(int(np.argmax(clearance)), clearance.shape)
        if self.occupancy[row, col]:
            raise DataValidationError("The world has no free cell")
        return (int(row), int(col), 0.0)

    def place_agent(self, pose: Pose):
        """Moves the agent; its cell must be free"""
        cell = pose.cell(self.resolution)
        if not self.in_bounds(cell):
            raise OutOfBoundsError(f"Pose {pose.as_tuple()} lies outside the world")
        if self.occupancy[cell]:
            raise InvalidArgumentError(f"Cell {cell} is an obstacle")
        self.agent_true = pose

    def _footprint_gap(self, x: float, y: float) -> float:
        """
        Distance in cells from (x, y) to the nearest obstacle square the
        agent disc overlaps, inf if it overlaps none
        """
        u, v = x / self.resolution, y / self.resolution
        reach = self.radius / self.resolution
        r0, r1 = int(math.floor(v - reach - 0.5)), int(math.ceil(v + reach + 0.5))
        c0, c1 = int(math.floor(u - reach - 0.5)), int(math.ceil(u + reach + 0.5))
        r0, c0 = max(r0, 0), max(c0, 0)
        r1, c1 = min(r1, self.height - 1), min(c1, self.width - 1)
        rows = np.arange(r0, r1 + 1)[:, np.newaxis]
        cols = np.arange(c0, c1 + 1)[np.newaxis, :]
        gaps = square_gap(rows - v, cols - u)
        blocked = self.occupancy[r0 : r1 + 1, c0 : c1 + 1] & (gaps < reach - 1e-9)
        return float(gaps[blocked].min()) if blocked.any() else math.inf

    def footprint_clear(self, x: float, y: float) -> bool:
        """True when the agent disc at (x, y) overlaps no obstacle square"""
        return self._footprint_gap(x, y) == math.inf

    ##################################################################
    # Acting and sensing
    ##################################################################
    def step(self, action: Action, noise: Optional[NoiseModelSet], enabled: bool) -> PoseDelta:
        """
        Executes an action and returns the realized true delta

        The translation is applied in sub-steps of a quarter cell and stops
        at the last position before the footprint closes in on an obstacle.
        Rotation always applies in full.
        """
        if action not in COMMANDS:
            raise InvalidActionError(f"{action.value} cannot be executed by the world")
        delta = COMMANDS[action]
        if enabled:
            delta = delta + sample(noise.get(action, NoiseKind.ACTUATION), self.actuation_rng)
        old = self.agent_true
        target = compose(old, delta)
        distance = math.hypot(target.x - old.x, target.y - old.y)
        substeps = int(math.ceil(distance / (self.resolution / 4.0)))
        last_x, last_y = old.x, old.y
        start_gap = self._footprint_gap(old.x, old.y)
        self.collided = False
        for index in range(1, substeps + 1):
            fraction = index / substeps
            x = old.x + (target.x - old.x) * fraction
            y = old.y + (target.y - old.y) * fraction
            gap = self._footprint_gap(x, y)
            # a disc that already overlaps a square may move but not intrude further
            if gap < start_gap - 1e-9 or not self.is_free(metric_to_cell(x, y, self.resolution)):
                self.collided = True
                break
            last_x, last_y = x, y
        new = Pose(last_x, last_y, target.o) if self.collided else target
        self.agent_true = new
        if self.collided:
            logger.debug("Collision at %s", new.as_tuple())
        return between(old, new)

    def odometry(
        self, true_delta: PoseDelta, noise: Optional[NoiseModelSet], enabled: bool, action: Action
    ) -> PoseDelta:
        """The pose change reported by odometry for the last action"""
        if not enabled:
            return true_delta
        return true_delta + sample(noise.get(action, NoiseKind.SENSOR), self.sensor_rng)

    def range_scan(
        self,
        fov: float = config.FOV,
        n_rays: int = config.N_RAYS,
        max_range: float = config.MAX_RANGE,
    ) -> RangeScan:
        """
        Casts rays across [-fov/2, +fov/2] by grid traversal and marks every
        traversed free cell and every hit obstacle cell as seen
        """
        bearings = np.linspace(-fov / 2.0, fov / 2.0, n_rays) if n_rays > 1 else np.zeros(n_rays)
        ranges = np.empty(n_rays)
        hits = np.zeros(n_rays, dtype=bool)
        pose = self.agent_true
        for index, bearing in enumerate(bearings):
            ranges[index], hits[index] = self._cast(pose.x, pose.y, pose.o + bearing, max_range)
        return RangeScan(bearings, ranges, hits, max_range)

    def _cast(self, x: float, y: float, theta: float, max_range: float) -> Tuple[float, bool]:
        """Amanatides-Woo traversal; cell (r, c) spans [c - 0.5, c + 0.5] x [r - 0.5, r + 0.5]"""
        res = self.resolution
        u, v = x / res + 0.5, y / res + 0.5
        col, row = int(math.floor(u)), int(math.floor(v))
        du, dv = math.cos(theta), math.sin(theta)
        step_c = 1 if du > 0 else -1
        step_r = 1 if dv > 0 else -1
        t_delta_c = abs(1.0 / du) if du != 0 else math.inf
        t_delta_r = abs(1.0 / dv) if dv != 0 else math.inf
        t_max_c = ((col + 1 - u) if du > 0 else (u - col)) * t_delta_c if du != 0 else math.inf
        t_max_r = ((row + 1 - v) if dv > 0 else (v - row)) * t_delta_r if dv != 0 else math.inf
        limit = max_range / res
        self.seen_mask[row, col] = True
        while True:
            if t_max_c < t_max_r:
                t_enter = t_max_c
                t_max_c += t_delta_c
                col += step_c
            else:
                t_enter = t_max_r
                t_max_r += t_delta_r
                row += step_r
            if t_enter >= limit:
                return max_range, False
            if not self.in_bounds((row, col)) or self.occupancy[row, col]:
                if self.in_bounds((row, col)):
                    self.seen_mask[row, col] = True
                return max(t_enter * res, 1e-9), True
            self.seen_mask[row, col] = True

    ##################################################################
    # Coverage accounting
    ##################################################################
    def explorable_area(self) -> float:
        """Free cells times the cell area, in square meters"""
        return float(self.free_mask.sum()) * self.resolution**2

    def true_coverage(self) -> Tuple[float, float]:
        """(Cov in m2, fraction of the explorable area) from the seen mask"""
        covered = float((self.seen_mask & self.free_mask).sum()) * self.resolution**2
        explorable = self.explorable_area()
        return covered, (covered / explorable if explorable > 0 else 0.0)


def _first_open_border_cell(occupancy: np.ndarray):
    height, width = occupancy.shape
    for row in range(height):
        for col in (0, width - 1):
            if not occupancy[row, col]:
                return (row, col)
    for col in range(width):
        for row in (0, height - 1):
            if not occupancy[row, col]:
                return (row, col)
    return None


######################################################################
#  W O R L D   G E N E R A T I O N
######################################################################
def largest_component(free: np.ndarray) -> np.ndarray:
    """Keeps only the largest 4-connected free region"""
    labels, count = ndimage.label(free)
    if count == 0:
        return free.copy()
    sizes = ndimage.sum(free, labels, index=np.arange(1, count + 1))
    return labels == (int(np.argmax(sizes)) + 1)


def _split_rooms(free, rect, rng, blocked_rows, blocked_cols):
    """Binary space partition of rect (r0, c0, r1, c1, half-open) with one door per wall"""
    r0, c0, r1, c1 = rect
    height, width = r1 - r0, c1 - c0
    options = []
    rows = [
        r
        for r in range(r0 + MIN_ROOM, r1 - MIN_ROOM - WALL_THICKNESS + 1)
        if not any(lo <= r + WALL_THICKNESS and r <= hi for lo, hi in blocked_rows)
    ]
    cols = [
        c
        for c in range(c0 + MIN_ROOM, c1 - MIN_ROOM - WALL_THICKNESS + 1)
        if not any(lo <= c + WALL_THICKNESS and c <= hi for lo, hi in blocked_cols)
    ]
    if rows:
        options.append("h")
    if cols:
        options.append("v")
    if not options or (height * width < 4 * MIN_ROOM * MIN_ROOM and rng.random() < 0.5):
        return
    horizontal = (height >= width) if len(options) == 2 else options[0] == "h"
    if len(options) == 2 and rng.random() < 0.25:
        horizontal = not horizontal
    if horizontal:
        wall = int(rng.choice(rows))
        free[wall : wall + WALL_THICKNESS, c0:c1] = False
        door = int(rng.integers(c0 + 2, max(c0 + 3, c1 - DOOR_WIDTH - 1)))
        free[wall : wall + WALL_THICKNESS, door : door + DOOR_WIDTH] = True
        door_span = (door - 6, door + DOOR_WIDTH + 6)
        _split_rooms(free, (r0, c0, wall, c1), rng, blocked_rows, blocked_cols + [door_span])
        _split_rooms(
            free, (wall + WALL_THICKNESS, c0, r1, c1), rng, blocked_rows, blocked_cols + [door_span]
        )
    else:
        wall = int(rng.choice(cols))
        free[r0:r1, wall : wall + WALL_THICKNESS] = False
        door = int(rng.integers(r0 + 2, max(r0 + 3, r1 - DOOR_WIDTH - 1)))
        free[door : door + DOOR_WIDTH, wall : wall + WALL_THICKNESS] = True
        door_span = (door - 6, door + DOOR_WIDTH + 6)
        _split_rooms(free, (r0, c0, r1, wall), rng, blocked_rows + [door_span], blocked_cols)
        _split_rooms(
            free, (r0, wall + WALL_THICKNESS, r1, c1), rng, blocked_rows + [door_span], blocked_cols
        )


def _generate_rooms(size, rng, min_area, max_area) -> np.ndarray:
    cell_area = config.RESOLUTION**2
    target = rng.uniform(min_area, max_area) / cell_area / 0.92
    aspect = rng.uniform(0.75, 1.0 / 0.75)
    height = int(round(math.sqrt(target / aspect)))
    width = int(round(target / max(height, 1)))
    limit = size - 2 * WALL_THICKNESS
    height, width = min(height, limit), min(width, limit)
    free = np.zeros((size, size), dtype=bool)
    if height < 3 or width < 3:
        return free
    top = int(rng.integers(WALL_THICKNESS, size - WALL_THICKNESS - height + 1))
    left = int(rng.integers(WALL_THICKNESS, size - WALL_THICKNESS - width + 1))
    free[top : top + height, left : left + width] = True
    _split_rooms(free, (top, left, top + height, left + width), rng, [], [])
    return free


def _generate_maze(size, rng) -> np.ndarray:
    pitch = CORRIDOR_WIDTH + WALL_THICKNESS
    cells = (size - WALL_THICKNESS) // pitch
    free = np.zeros((size, size), dtype=bool)
    if cells < 1:
        return free
    visited = np.zeros((cells, cells), dtype=bool)

    def carve(row, col):
        top = WALL_THICKNESS + row * pitch
        left = WALL_THICKNESS + col * pitch
        free[top : top + CORRIDOR_WIDTH, left : left + CORRIDOR_WIDTH] = True

    start = (int(rng.integers(cells)), int(rng.integers(cells)))
    stack = [start]
    visited[start] = True
    carve(*start)
    while stack:
        row, col = stack[-1]
        neighbours = [
            (row + dr, col + dc)
            for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1))
            if 0 <= row + dr < cells and 0 <= col + dc < cells and not visited[row + dr, col + dc]
        ]
        if not neighbours:
            stack.pop()
            continue
        nxt = neighbours[int(rng.integers(len(neighbours)))]
        visited[nxt] = True
        carve(*nxt)
        top = WALL_THICKNESS + min(row, nxt[0]) * pitch
        left = WALL_THICKNESS + min(col, nxt[1]) * pitch
        if nxt[0] != row:
            free[top + CORRIDOR_WIDTH : top + pitch, left : left + CORRIDOR_WIDTH] = True
        else:
            free[top : top + CORRIDOR_WIDTH, left + CORRIDOR_WIDTH : left + pitch] = True
        stack.append(nxt)
    return free


def _generate_cave(size, rng) -> np.ndarray:
    block = 4
    coarse = max(3, size // block)
    solid = rng.random((coarse, coarse)) < 0.45
    kernel = np.ones((3, 3))
    for _ in range(5):
        neighbours = ndimage.convolve(solid.astype(int), kernel, mode="constant", cval=1)
        solid = neighbours >= 5
    free = np.kron(~solid, np.ones((block, block), dtype=bool))
    out = np.zeros((size, size), dtype=bool)
    out[: free.shape[0], : free.shape[1]] = free[:size, :size]
    return out


def _close_border(free: np.ndarray):
    free[:WALL_THICKNESS, :] = False
    free[-WALL_THICKNESS:, :] = False
    free[:, :WALL_THICKNESS] = False
    free[:, -WALL_THICKNESS:] = False


def generate_world(
    seed: int,
    size: int = config.WORLD_SIZE,
    style: str = config.WORLD_STYLE,
    min_free_fraction: float = config.MIN_FREE_FRACTION,
    min_explorable_m2: float = config.MIN_EXPLORABLE_M2,
    max_explorable_m2: float = config.MAX_EXPLORABLE_M2,
) -> GridWorld:
    """
    Generates a closed world with a single connected free region

    The rooms style also keeps its explorable area inside
    [min_explorable_m2, max_explorable_m2]. The start is drawn uniformly
    among cells with at least 0.25 m of clearance, heading in whole degrees.
    """
    if size < 40:
        raise InvalidArgumentError("Worlds need at least 40x40 cells")
    if style not in ("rooms", "maze", "cave"):
        raise InvalidArgumentError(f"Unknown world style: {style}")
    rng = np.random.default_rng(seed)
    for attempt in range(config.GENERATION_ATTEMPTS):
        if style == "rooms":
            free = _generate_rooms(size, rng, min_explorable_m2, max_explorable_m2)
        elif style == "maze":
            free = _generate_maze(size, rng)
        else:
            free = _generate_cave(size, rng)
        _close_border(free)
        free = largest_component(free)
        area = float(free.sum()) * config.RESOLUTION**2
        if free.sum() == 0 or free.mean() < min_free_fraction:
            continue
        if style == "rooms" and not min_explorable_m2 <= area <= max_explorable_m2:
            continue
        clearance = ndimage.distance_transform_edt(free) * config.RESOLUTION
        candidates = np.argwhere(clearance >= START_CLEARANCE)
        if len(candidates) == 0:
            continue
        row, col = candidates[int(rng.integers(len(candidates)))]
        heading = float(rng.integers(-179, 181))
        logger.debug("Generated %s world %d after %d attempts", style, seed, attempt + 1)
        return GridWorld(~free, config.RESOLUTION, (int(row), int(col), heading), seed=seed)
    raise GenerationFailureError(
        f"Could not generate a {style} world of size {size} in {config.GENERATION_ATTEMPTS} attempts"
    )


######################################################################
#  F I L E   F O R M A T
######################################################################
def dumps_world(world: GridWorld) -> str:
    """The ASCII form of a world"""
    out = io.StringIO()
    out.write(f"{MAGIC} {world.height} {world.width} {world.resolution!r}\n")
    for row in world.occupancy:
        out.write("".join("#" if cell else "." for cell in row))
        out.write("\n")
    row, col, heading = world.start
    heading_text = str(int(heading)) if float(heading).is_integer() else repr(heading)
    out.write(f"A {row} {col} {heading_text}\n")
    return out.getvalue()


def save_world(world: GridWorld, path: str):
    with atomic_write(path) as stream:
        stream.write(dumps_world(world))


def loads_world(text: str) -> GridWorld:
    """Parses the ASCII form of a world"""
    lines = text.splitlines()
    if not lines:
        raise ParseError("empty world file", line=1)
    header = lines[0].split()
    if len(header) != 4 or header[0] != MAGIC:
        raise ParseError(f"expected '{MAGIC} <H> <W> <resolution_m>'", line=1)
    try:
        height, width, resolution = int(header[1]), int(header[2]), float(header[3])
    except ValueError as error:
        raise ParseError(f"bad header: {error}", line=1) from error
    if height < 1 or width < 1 or not resolution > 0:
        raise ParseError("header sizes must be positive", line=1)
    if len(lines) < height + 1:
        raise ParseError(f"expected {height} rows, found {len(lines) - 1}", line=len(lines) + 1)
    occupancy = np.zeros((height, width), dtype=bool)
    for row in range(height):
        line_number = row + 2
        line = lines[row + 1]
        if len(line) != width:
            raise ParseError(f"expected {width} characters, found {len(line)}", line=line_number)
        for col, char in enumerate(line):
            if char == "#":
                occupancy[row, col] = True
            elif char != ".":
                raise ParseError(f"unknown character {char!r}", line=line_number, field_name=f"col {col}")
    start = None
    for offset, line in enumerate(lines[height + 1 :]):
        line_number = height + 2 + offset
        if not line.strip():
            continue
        parts = line.split()
        if parts[0] != "A" or len(parts) != 4 or start is not None:
            raise ParseError("expected a single 'A <row> <col> <o_deg>' trailer", line=line_number)
        try:
            start = (int(parts[1]), int(parts[2]), float(parts[3]))
        except ValueError as error:
            raise ParseError(f"bad start pose: {error}", line=line_number) from error
        if not 0 <= start[0] < height or not 0 <= start[1] < width:
            raise DataValidationError(f"Start cell {start[:2]} lies outside the world")
        if occupancy[start[0], start[1]]:
            raise DataValidationError(f"Start cell {start[:2]} is an obstacle")
    return GridWorld(occupancy, resolution, start)


def load_world(path: str) -> GridWorld:
    with open(path, encoding="utf-8") as stream:
        return loads_world(stream.read())


######################################################################
#  R E N D E R I N G
######################################################################
def render_world(
    world: GridWorld,
    path: str,
    trajectory: Optional[Sequence[Tuple[float, float]]] = None,
    goal: Optional[Tuple[int, int]] = None,
):
    """Writes a PNG of the world with the seen area and an optional trajectory"""
    import matplotlib  # pylint: disable=import-outside-toplevel

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt  # pylint: disable=import-outside-toplevel

    image = np.where(world.occupancy, 0.15, np.where(world.seen_mask, 0.95, 0.75))
    figure, axes = plt.subplots(figsize=(6, 6))
    axes.imshow(image, cmap="gray", vmin=0.0, vmax=1.0, origin="lower", interpolation="nearest")
    if trajectory:
        points = np.array(trajectory) / world.resolution
        axes.plot(points[:, 0], points[:, 1], color="tab:red", linewidth=1.0)
        axes.plot(points[0, 0], points[0, 1], "o", color="tab:green", markersize=4)
    if goal is not None:
        axes.plot(goal[1], goal[0], "*", color="tab:blue", markersize=10)
    axes.set_axis_off()
    with atomic_write(path, "wb") as stream:
        figure.savefig(stream, format="png", bbox_inches="tight", dpi=100)
    plt.close(figure)
