"""
Planner

Fast Marching distance fields over the obstacle map, steepest-descent
path extraction and the short-term goal handed to the local policy.

The solver marches a first-order upwind wavefront out of the goal cell
with unit speed. Each tentative value is the best of two quadratic
updates: from the axis neighbours (spacing 1) and from the diagonal
neighbours (spacing sqrt 2). An axis quadrant is only solved when its
corner cell is traversable, and a diagonal neighbour is only used when
both axis cells it would cut past are traversable, the same corner rule
the path follower obeys. Values are stored in meters.
"""
from __future__ import annotations

import heapq
import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Tuple

import numpy as np
from scipy import ndimage

from navsim import config
from navsim.mapping import save_pgm
from navsim.models import InvalidArgumentError

logger = logging.getLogger(__name__)

INF = math.inf
SQRT2 = math.sqrt(2.0)

Cell = Tuple[int, int]
Window = Tuple[int, int, int, int]


######################################################################
#  D I S T A N C E   F I E L D
######################################################################
@dataclass
class DistanceField:
    """
    Travel times to the goal (meters) over a window of the grid

    Cells the wavefront never settled, or could not reach, hold +inf.
    ``complete`` is False when the solve stopped early.
    """

    T: np.ndarray
    origin: Cell
    shape: Tuple[int, int]
    goal: Cell
    traversable: np.ndarray
    resolution: float = config.RESOLUTION
    complete: bool = True
    accepted_count: int = 0

    def in_window(self, cell) -> bool:
        row, col = cell[0] - self.origin[0], cell[1] - self.origin[1]
        return 0 <= row < self.T.shape[0] and 0 <= col < self.T.shape[1]

    def value(self, cell) -> float:
        """T at a grid cell, +inf outside the window"""
        if not self.in_window(cell):
            return INF
        return float(self.T[cell[0] - self.origin[0], cell[1] - self.origin[1]])

    def is_traversable(self, cell) -> bool:
        if not self.in_window(cell):
            return False
        return bool(self.traversable[cell[0] - self.origin[0], cell[1] - self.origin[1]])

    def full(self) -> np.ndarray:
        """T embedded in the whole grid"""
        out = np.full(self.shape, INF)
        r0, c0 = self.origin
        out[r0 : r0 + self.T.shape[0], c0 : c0 + self.T.shape[1]] = self.T
        return out


@dataclass
class PlanResult:
    """A path from the agent towards the goal and the waypoint to follow now"""

    path: List[Cell] = field(default_factory=list)
    short_term_goal: Optional[Cell] = None
    reachable: bool = False
    distance: float = INF


######################################################################
#  F A S T   M A R C H I N G
######################################################################
def disk(radius: int) -> np.ndarray:
    """Structuring element of the cells within ``radius`` of the centre"""
    offsets = np.arange(-radius, radius + 1)
    return offsets[:, np.newaxis] ** 2 + offsets[np.newaxis, :] ** 2 <= radius * radius


def _solve(a: float, b: float, h: float) -> float:
    """Upwind quadratic update from two orthogonal neighbour values at spacing h"""
    if a > b:
        a, b = b, a
    if a == INF:
        return INF
    if b - a >= h:
        return a + h
    return 0.5 * (a + b + math.sqrt(2.0 * h * h - (a - b) ** 2))


def _clip_window(window: Optional[Window], shape, cells: Iterable[Cell]) -> Window:
    height, width = shape
    if window is None:
        return (0, 0, height - 1, width - 1)
    r0, c0, r1, c1 = window
    for row, col in cells:
        r0, c0, r1, c1 = min(r0, row), min(c0, col), max(r1, row), max(c1, col)
    return (max(r0, 0), max(c0, 0), min(r1, height - 1), min(c1, width - 1))


def traversable_mask(
    obstacle: np.ndarray,
    window: Window,
    threshold: float = config.OBSTACLE_THRESHOLD,
    dilation: int = config.OBSTACLE_DILATION,
    clear_around: Optional[Cell] = None,
) -> np.ndarray:
    """Cells of the window below the obstacle threshold after inflating obstacles"""
    r0, c0, r1, c1 = window
    height, width = obstacle.shape
    # dilate over a margin so obstacles just outside the window still inflate into it
    m0, n0 = max(r0 - dilation, 0), max(c0 - dilation, 0)
    m1, n1 = min(r1 + dilation, height - 1), min(c1 + dilation, width - 1)
    raw = np.asarray(obstacle[m0 : m1 + 1, n0 : n1 + 1]) >= threshold
    blocked = ndimage.binary_dilation(raw, structure=disk(dilation)) if dilation > 0 else raw
    if clear_around is not None:
        row, col = clear_around[0] - m0, clear_around[1] - n0
        rows, cols = np.ogrid[0 : blocked.shape[0], 0 : blocked.shape[1]]
        near = (rows - row) ** 2 + (cols - col) ** 2 <= dilation * dilation
        blocked[near] = raw[near]
    blocked = blocked[r0 - m0 : r1 - m0 + 1, c0 - n0 : c1 - n0 + 1]
    return ~blocked


def fmm(  # pylint: disable=too-many-arguments,too-many-locals,too-many-branches,too-many-statements
    obstacle_grid: np.ndarray,
    goal: Cell,
    threshold: float = config.OBSTACLE_THRESHOLD,
    dilation: int = config.OBSTACLE_DILATION,
    resolution: float = config.RESOLUTION,
    window: Optional[Window] = None,
    stop_at: Optional[Cell] = None,
    targets: Optional[Iterable[Cell]] = None,
    force_free: Optional[np.ndarray] = None,
    clear_around: Optional[Cell] = None,
) -> DistanceField:
    """
    Solves the eikonal equation from ``goal`` over the traversable cells

    Args:
        obstacle_grid (ndarray): obstacle probabilities; unexplored cells read 0
        goal (cell): source of the wavefront, always traversable
        window (r0, c0, r1, c1): inclusive sub-window to solve in
        stop_at (cell): stop once this cell is settled
        targets (cells): stop once the nearest target (and any tie) is settled
        force_free (ndarray): full-grid mask of cells that stay traversable
        clear_around (cell): undo obstacle inflation within ``dilation`` of this cell
    """
    obstacle_grid = np.asarray(obstacle_grid)
    if obstacle_grid.ndim != 2:
        raise InvalidArgumentError("fmm needs a 2D obstacle grid")
    height, width = obstacle_grid.shape
    goal = (int(goal[0]), int(goal[1]))
    if not (0 <= goal[0] < height and 0 <= goal[1] < width):
        raise InvalidArgumentError(f"Goal {goal} lies outside the {height}x{width} grid")
    window = _clip_window(window, obstacle_grid.shape, [goal])
    r0, c0, r1, c1 = window
    rows, cols = r1 - r0 + 1, c1 - c0 + 1

    traversable = traversable_mask(obstacle_grid, window, threshold, dilation, clear_around)
    if force_free is not None:
        traversable |= np.asarray(force_free, dtype=bool)[r0 : r1 + 1, c0 : c1 + 1]
    traversable[goal[0] - r0, goal[1] - c0] = True

    # flat lists over the window padded with one blocked cell on every side
    stride = cols + 2
    padded = np.zeros((rows + 2, stride), dtype=bool)
    padded[1:-1, 1:-1] = traversable
    free = padded.ravel().tolist()
    known = [False] * len(free)
    values = [INF] * len(free)
    tentative = [INF] * len(free)

    def flat(cell: Cell) -> int:
        return (cell[0] - r0 + 1) * stride + (cell[1] - c0 + 1)

    stop_index = -1
    if stop_at is not None and r0 <= stop_at[0] <= r1 and c0 <= stop_at[1] <= c1:
        stop_index = flat(stop_at)
    target_set = set()
    if targets is not None:
        target_set = {
            flat(cell) for cell in targets if r0 <= cell[0] <= r1 and c0 <= cell[1] <= c1
        }
    neighbours = (-stride - 1, -stride, -stride + 1, -1, 1, stride - 1, stride, stride + 1)

    def update(n: int) -> float:
        up, down, left, right = values[n - stride], values[n + stride], values[n - 1], values[n + 1]
        corners = (free[n - stride - 1], free[n - stride + 1], free[n + stride - 1], free[n + stride + 1])
        # a quadrant update only when the wavefront can pass through its corner cell
        best = min(up, down, left, right) + 1.0
        for vertical, horizontal, corner in (
            (up, left, corners[0]),
            (up, right, corners[1]),
            (down, left, corners[2]),
            (down, right, corners[3]),
        ):
            if corner:
                best = min(best, _solve(vertical, horizontal, 1.0))
        is_up, is_down, is_left, is_right = free[n - stride], free[n + stride], free[n - 1], free[n + 1]
        up_left = values[n - stride - 1] if is_up and is_left else INF
        up_right = values[n - stride + 1] if is_up and is_right else INF
        down_left = values[n + stride - 1] if is_down and is_left else INF
        down_right = values[n + stride + 1] if is_down and is_right else INF
        for first, second in (
            (up_left, up_right),
            (up_right, down_right),
            (down_right, down_left),
            (down_left, up_left),
        ):
            best = min(best, _solve(first, second, SQRT2))
        return best

    start = flat(goal)
    tentative[start] = 0.0
    heap = [(0.0, start)]
    accepted = 0
    stop_value = INF
    stopped = False
    while heap:
        t, index = heapq.heappop(heap)
        if known[index] or t > tentative[index]:
            continue
        if t > stop_value:
            stopped = True
            break
        known[index] = True
        values[index] = t
        accepted += 1
        if index == stop_index:
            stopped = True
            break
        if index in target_set and stop_value == INF:
            stop_value = t + 1e-9
        for offset in neighbours:
            n = index + offset
            if not free[n] or known[n]:
                continue
            candidate = update(n)
            if candidate < tentative[n]:
                tentative[n] = candidate
                heapq.heappush(heap, (candidate, n))
    field_values = np.array(values).reshape(rows + 2, stride)[1:-1, 1:-1] * resolution
    logger.debug("fmm from %s settled %d of %d cells", goal, accepted, rows * cols)
    return DistanceField(
        T=field_values,
        origin=(r0, c0),
        shape=(height, width),
        goal=goal,
        traversable=traversable,
        resolution=resolution,
        complete=not stopped,
        accepted_count=accepted,
    )


######################################################################
#  P A T H   E X T R A C T I O N
######################################################################
def _descend(distance: DistanceField, cell: Cell) -> Optional[Cell]:
    """The neighbour with the steepest drop in T, or None at a minimum"""
    here = distance.value(cell)
    goal = distance.goal
    best, best_key = None, None
    for dr in (-1, 0, 1):
        for dc in (-1, 0, 1):
            if dr == 0 and dc == 0:
                continue
            nxt = (cell[0] + dr, cell[1] + dc)
            there = distance.value(nxt)
            if not there < here:
                continue
            if dr and dc and not (
                distance.is_traversable((cell[0] + dr, cell[1]))
                and distance.is_traversable((cell[0], cell[1] + dc))
            ):
                continue
            slope = (there - here) / (SQRT2 if dr and dc else 1.0)
            key = (round(slope, 12), math.hypot(nxt[0] - goal[0], nxt[1] - goal[1]), nxt)
            if best_key is None or key < best_key:
                best, best_key = nxt, key
    return best


def extract_path(
    distance: DistanceField, start: Cell, short_goal_distance: float = config.SHORT_GOAL_DISTANCE
) -> PlanResult:
    """
    Walks down T from ``start`` to the goal and picks the short-term goal:
    the farthest path cell whose distance along the path is at most
    ``short_goal_distance``
    """
    start = (int(start[0]), int(start[1]))
    total = distance.value(start)
    if total == INF:
        return PlanResult(path=[], short_term_goal=start, reachable=False)
    path = [start]
    cell = start
    while cell != distance.goal:
        cell = _descend(distance, cell)
        if cell is None:
            break
        path.append(cell)
    limit = short_goal_distance / distance.resolution + 1e-9
    travelled = 0.0
    short_term_goal = start
    for previous, cell in zip(path, path[1:]):
        travelled += math.hypot(cell[0] - previous[0], cell[1] - previous[1])
        if travelled > limit:
            break
        short_term_goal = cell
    return PlanResult(path=path, short_term_goal=short_term_goal, reachable=True, distance=total)


######################################################################
#  C O N V E N I E N C E   W R A P P E R S
######################################################################
def geodesic_distance(
    free_mask: np.ndarray, a: Cell, b: Cell, resolution: float = config.RESOLUTION
) -> float:
    """Shortest traversable path length in meters between two cells of a free mask"""
    free_mask = np.asarray(free_mask, dtype=bool)
    if tuple(a) == tuple(b):
        return 0.0
    if not free_mask[tuple(a)] or not free_mask[tuple(b)]:
        return INF
    distance = fmm((~free_mask).astype(np.float32), b, dilation=0, resolution=resolution, stop_at=a)
    return distance.value(a)


def planning_window(
    bounds: Optional[Window], cells: Iterable[Cell], size: int, margin: int = config.PLANNING_MARGIN
) -> Window:
    """The box around the explored area and the given cells, grown by ``margin``"""
    boxes = list(cells)
    if bounds is not None:
        boxes += [(bounds[0], bounds[1]), (bounds[2], bounds[3])]
    rows = [cell[0] for cell in boxes]
    cols = [cell[1] for cell in boxes]
    return (
        max(min(rows) - margin, 0),
        max(min(cols) - margin, 0),
        min(max(rows) + margin, size - 1),
        min(max(cols) + margin, size - 1),
    )


def plan(spatial_map, start: Cell, goal: Cell, visited: Optional[np.ndarray] = None):
    """
    Plans on the current spatial map from the agent cell to a goal cell

    Returns the PlanResult and the DistanceField it was extracted from.
    """
    window = planning_window(spatial_map.explored_bounds, [start, goal], spatial_map.size)
    distance = fmm(
        spatial_map.obstacle,
        goal,
        resolution=spatial_map.resolution,
        window=window,
        stop_at=start,
        force_free=visited,
        clear_around=start,
    )
    result = extract_path(distance, start)
    if not result.reachable:
        logger.debug("Goal %s is unreachable from %s", goal, start)
    return result, distance


def debug_pgm(distance: DistanceField, path: str):
    """Dumps T as an 8-bit PGM scaled to the largest finite value, +inf as 255"""
    values = distance.T
    finite = np.isfinite(values)
    top = values[finite].max() if finite.any() else 0.0
    layer = np.ones(values.shape)
    if top > 0:
        layer[finite] = values[finite] / top * (254.0 / 255.0)
    else:
        layer[finite] = 0.0
    save_pgm(layer, path)
