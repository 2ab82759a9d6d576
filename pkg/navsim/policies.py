"""
Policies

Global policies choose the long-term goal on the spatial map; local
policies turn the short-term goal from the planner into an action.

The global input stacks a G x G crop of the four map channels around the
agent (obstacle, explored, agent position, visited cells) on top of the
whole map max-pooled down to G x G.
"""
from __future__ import annotations

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Optional, Tuple, Union

import numpy as np

from navsim import config
from navsim.geometry import Pose, cell_center, relative_polar
from navsim.mapping import SpatialMap
from navsim.models import Action, DataValidationError, OutOfBoundsError
from navsim.planner import Cell, DistanceField, fmm, planning_window

logger = logging.getLogger(__name__)

# upper edges (meters) of the distance bins; the last bin is open
DISTANCE_EDGES = (0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0)
DISTANCE_BINS = len(DISTANCE_EDGES) + 1
ANGLE_BIN_DEG = 5.0
ANGLE_BINS = 72
TIME_BIN_STEPS = 30
TIME_BINS = 34

Visited = Union[np.ndarray, Iterable[Cell], None]
# 8 x G x G float32: agent-centred crop of the map channels, then the pooled full map
GlobalInput = np.ndarray


######################################################################
#  G L O B A L   I N P U T
######################################################################
def _visited_mask(visited: Visited, size: int) -> np.ndarray:
    if isinstance(visited, np.ndarray):
        return visited.astype(bool)
    mask = np.zeros((size, size), dtype=bool)
    for row, col in visited or ():
        if 0 <= row < size and 0 <= col < size:
            mask[row, col] = True
    return mask


def _max_pool(layers: np.ndarray, out_size: int) -> np.ndarray:
    channels, size = layers.shape[0], layers.shape[-1]
    factor = max(1, -(-size // out_size))
    padded = np.zeros((channels, factor * out_size, factor * out_size), dtype=layers.dtype)
    padded[:, :size, :size] = layers
    return padded.reshape(channels, out_size, factor, out_size, factor).max(axis=(2, 4))


def build_global_input(
    m: SpatialMap, pose: Pose, visited: Visited = None, size: int = config.GLOBAL_SIZE
) -> GlobalInput:
    """
    Builds the 8 x G x G global policy input

    Channels 0-3 are the G x G window of the map channels centred on the
    agent, zero-padded beyond the map; channels 4-7 are the whole map
    max-pooled to G x G.
    """
    cell = pose.cell(m.resolution)
    if not m.in_bounds(cell):
        raise OutOfBoundsError(f"Pose {pose.as_tuple()} lies outside the {m.size}x{m.size} map")
    full = np.zeros((4, m.size, m.size), dtype=np.float32)
    full[0:2] = m.grid
    full[2, cell[0], cell[1]] = 1.0
    full[3] = _visited_mask(visited, m.size)

    crop = np.zeros((4, size, size), dtype=np.float32)
    r0, c0 = cell[0] - size // 2, cell[1] - size // 2
    src_r0, src_c0 = max(r0, 0), max(c0, 0)
    src_r1, src_c1 = min(r0 + size, m.size), min(c0 + size, m.size)
    crop[:, src_r0 - r0 : src_r1 - r0, src_c0 - c0 : src_c1 - c0] = full[:, src_r0:src_r1, src_c0:src_c1]
    return np.concatenate([crop, _max_pool(full, size)])


######################################################################
#  F R O N T I E R S
######################################################################
def frontier_mask(m: SpatialMap) -> np.ndarray:
    """Explored-free cells with an unexplored 4-neighbour"""
    explored = m.explored > 0.5
    free = explored & (m.obstacle < 0.5)
    unexplored = ~explored
    beside = np.zeros_like(unexplored)
    beside[1:, :] |= unexplored[:-1, :]
    beside[:-1, :] |= unexplored[1:, :]
    beside[:, 1:] |= unexplored[:, :-1]
    beside[:, :-1] |= unexplored[:, 1:]
    return free & beside


def is_frontier_cell(m: SpatialMap, cell: Cell) -> bool:
    row, col = cell
    if not m.in_bounds(cell) or m.explored[row, col] <= 0.5 or m.obstacle[row, col] >= 0.5:
        return False
    for nr, nc in ((row - 1, col), (row + 1, col), (row, col - 1), (row, col + 1)):
        if m.in_bounds((nr, nc)) and m.explored[nr, nc] <= 0.5:
            return True
    return False


@dataclass
class FrontierResult:
    """A long-term goal from the frontier search"""

    cell: Cell
    saturated: bool
    distance: Optional[DistanceField] = None


def frontier_goal(
    m: SpatialMap,
    pose: Pose,
    visited: Optional[np.ndarray] = None,
    dilation: int = config.OBSTACLE_DILATION,
) -> FrontierResult:
    """
    Picks the frontier cell geodesically closest to the agent

    Ties go to the smallest (row, col). Without a reachable frontier the
    farthest reachable explored-free cell is returned, flagged saturated.
    """
    agent = pose.cell(m.resolution)
    if not m.in_bounds(agent):
        raise OutOfBoundsError(f"Pose {pose.as_tuple()} lies outside the {m.size}x{m.size} map")
    window = planning_window(m.explored_bounds, [agent], m.size)
    options = {
        "dilation": dilation,
        "resolution": m.resolution,
        "window": window,
        "force_free": visited,
        "clear_around": agent,
    }

    rows, cols = np.nonzero(frontier_mask(m))
    targets = list(zip(rows.tolist(), cols.tolist()))
    if targets:
        distance = fmm(m.obstacle, agent, targets=targets, **options)
        reachable = [(distance.value(cell), cell) for cell in targets]
        reachable = [(value, cell) for value, cell in reachable if value < math.inf]
        if reachable:
            value, cell = min(reachable)
            logger.debug("Frontier goal %s at %.2f m", cell, value)
            return FrontierResult(cell, False, distance)

    distance = fmm(m.obstacle, agent, **options)
    values = distance.full()
    free = (m.explored > 0.5) & (m.obstacle < 0.5) & np.isfinite(values)
    if not free.any():
        return FrontierResult(agent, True, distance)
    rows, cols = np.nonzero(free)
    order = np.lexsort((cols, rows, -values[rows, cols]))
    cell = (int(rows[order[0]]), int(cols[order[0]]))
    logger.debug("No reachable frontier, falling back to %s", cell)
    return FrontierResult(cell, True, distance)


######################################################################
#  G L O B A L   P O L I C I E S
######################################################################
@dataclass
class PolicyObservation:
    """What a global policy may look at when it samples a goal"""

    spatial_map: SpatialMap
    pose: Pose
    visited: Optional[np.ndarray] = None
    step: int = 0

    @cached_property
    def global_input(self) -> GlobalInput:
        return build_global_input(self.spatial_map, self.pose, self.visited)


class GlobalPolicy(ABC):
    """Interface of a long-term goal sampler"""

    name = "global"

    @abstractmethod
    def next_goal(self, observation: PolicyObservation) -> Cell:
        """Returns a map cell"""

    def is_stale(self, observation: PolicyObservation, goal: Cell) -> bool:
        """True when the current goal no longer serves its purpose"""
        return False


class FrontierPolicy(GlobalPolicy):
    """Frontier-based exploration: ignores the global input"""

    name = "frontier"

    def __init__(self, dilation: int = config.OBSTACLE_DILATION):
        self.dilation = dilation
        self.last: Optional[FrontierResult] = None

    def next_goal(self, observation: PolicyObservation) -> Cell:
        self.last = frontier_goal(
            observation.spatial_map, observation.pose, observation.visited, self.dilation
        )
        return self.last.cell

    @property
    def saturated(self) -> bool:
        return self.last is not None and self.last.saturated

    def is_stale(self, observation: PolicyObservation, goal: Cell) -> bool:
        if self.saturated:
            return False
        return not is_frontier_cell(observation.spatial_map, goal)


class RandomPolicy(GlobalPolicy):
    """Uniform goals on the G x G grid, scaled to map cells"""

    name = "random"

    def __init__(self, seed: int = 0):
        self.rng = np.random.default_rng(seed)

    def next_goal(self, observation: PolicyObservation) -> Cell:
        size = config.GLOBAL_SIZE
        scale = observation.spatial_map.size / size
        row, col = self.rng.integers(0, size, size=2)
        last = observation.spatial_map.size - 1
        return (min(int((row + 0.5) * scale), last), min(int((col + 0.5) * scale), last))


class FixedGoalPolicy(GlobalPolicy):
    """Always the same goal, for PointGoal episodes"""

    name = "fixed_goal"

    def __init__(self, goal: Cell):
        self.goal = (int(goal[0]), int(goal[1]))

    def next_goal(self, observation: PolicyObservation) -> Cell:
        return self.goal


def make_global_policy(name: str, seed: int = 0, goal: Optional[Cell] = None) -> GlobalPolicy:
    """Global policy factory keyed by the configuration string"""
    if name == FrontierPolicy.name:
        return FrontierPolicy()
    if name == RandomPolicy.name:
        return RandomPolicy(seed)
    if name == FixedGoalPolicy.name:
        if goal is None:
            raise DataValidationError("fixed_goal needs a goal cell")
        return FixedGoalPolicy(goal)
    raise DataValidationError(f"Unknown global policy: {name}")


class GoalScheduler:
    """
    Holds the long-term goal between sampling ticks

    A new goal is sampled every ``interval`` steps, and early when the
    agent reached the goal, the planner found it unreachable or the
    policy reports it stale.
    """

    def __init__(
        self,
        policy: GlobalPolicy,
        interval: int = config.GOAL_INTERVAL,
        reach: float = config.SHORT_GOAL_DISTANCE,
    ):
        if interval < 1:
            raise DataValidationError("Goal interval must be at least 1")
        self.policy = policy
        self.interval = interval
        self.reach = reach
        self.goal: Optional[Cell] = None
        self.samples = 0
        self._unreachable = False

    def mark_unreachable(self):
        self._unreachable = True

    def _reached(self, observation: PolicyObservation) -> bool:
        x, y = cell_center(self.goal, observation.spatial_map.resolution)
        return math.hypot(x - observation.pose.x, y - observation.pose.y) <= self.reach

    def goal_for(self, observation: PolicyObservation) -> Cell:
        """The goal for this step, resampling when due"""
        due = (
            self.goal is None
            or observation.step % self.interval == 0
            or self._unreachable
            or self._reached(observation)
            or self.policy.is_stale(observation, self.goal)
        )
        if due:
            self.resample(observation)
            logger.debug("Step %d: new long-term goal %s", observation.step, self.goal)
        return self.goal

    def resample(self, observation: PolicyObservation) -> Cell:
        """Samples immediately, whatever the tick"""
        self.goal = self.policy.next_goal(observation)
        self.samples += 1
        self._unreachable = False
        return self.goal


def global_reward(prev_cov: float, cur_cov: float, scale: float = config.REWARD_SCALE) -> float:
    """Coverage gain in square meters, scaled"""
    return scale * max(0.0, cur_cov - prev_cov)


######################################################################
#  L O C A L   P O L I C I E S
######################################################################
def relative_goal(pose: Pose, cell: Cell, resolution: float = config.RESOLUTION) -> Tuple[float, float]:
    """(distance m, bearing rad) of a cell centre seen from the pose"""
    x, y = cell_center(cell, resolution)
    return relative_polar(pose, x, y)


@dataclass(frozen=True)
class LocalInput:
    """Binned relative position of the short-term goal and the time step"""

    distance_bin: int
    angle_bin: int
    time_bin: int

    def __post_init__(self):
        if not 0 <= self.distance_bin < DISTANCE_BINS:
            raise DataValidationError(f"distance bin out of range: {self.distance_bin}")
        if not 0 <= self.angle_bin < ANGLE_BINS:
            raise DataValidationError(f"angle bin out of range: {self.angle_bin}")
        if not 0 <= self.time_bin < TIME_BINS:
            raise DataValidationError(f"time bin out of range: {self.time_bin}")


def angle_bin(degrees: float) -> int:
    """
    5 degree bin of a relative angle

    Bins are centred on multiples of 5 degrees: bin k holds
    [5k - 2.5, 5k + 2.5) modulo 360. Straight ahead is bin 0, +90 degrees
    bin 18, -90 degrees bin 54, and both +180 and -180 degrees land in
    bin 36 since they name the same direction.
    """
    return int(math.floor((degrees + ANGLE_BIN_DEG / 2) / ANGLE_BIN_DEG)) % ANGLE_BINS


def featurize_local(
    pose: Pose, short_term_goal: Cell, step: int, resolution: float = config.RESOLUTION
) -> LocalInput:
    """
    Bins the short-term goal seen from the agent

    Distance bins are closed on the right: (0, 0.25] is bin 0. Angle bins
    follow ``angle_bin``.
    """
    distance, bearing = relative_goal(pose, short_term_goal, resolution)
    distance_bin = int(np.searchsorted(DISTANCE_EDGES, distance - 1e-9, side="right"))
    time_bin = min(int(step) // TIME_BIN_STEPS, TIME_BINS - 1)
    return LocalInput(distance_bin, angle_bin(math.degrees(bearing)), time_bin)


def deterministic_local(
    pose: Pose,
    short_term_goal: Cell,
    threshold_deg: float = config.TURN_THRESHOLD_DEG,
    resolution: float = config.RESOLUTION,
) -> Action:
    """Turns towards the short-term goal until it is within the threshold, then goes forward"""
    if pose.cell(resolution) == tuple(short_term_goal):
        return Action.FORWARD
    _, bearing = relative_goal(pose, short_term_goal, resolution)
    angle = math.degrees(bearing)
    if abs(angle) > threshold_deg:
        return Action.TURN_LEFT if angle > 0 else Action.TURN_RIGHT
    return Action.FORWARD


class LocalPolicy(ABC):
    """Interface of a short-term goal follower"""

    name = "local"

    @abstractmethod
    def act(self, pose: Pose, short_term_goal: Cell, step: int) -> Action:
        """Returns the next action"""


class DeterministicLocalPolicy(LocalPolicy):
    """Rule-based follower used in place of a learned local policy"""

    name = "deterministic"

    def __init__(self, threshold_deg: float = config.TURN_THRESHOLD_DEG):
        self.threshold_deg = threshold_deg

    def act(self, pose: Pose, short_term_goal: Cell, step: int) -> Action:
        return deterministic_local(pose, short_term_goal, self.threshold_deg)


def make_local_policy(name: str) -> LocalPolicy:
    if name == DeterministicLocalPolicy.name:
        return DeterministicLocalPolicy()
    raise DataValidationError(f"Unknown local policy: {name}")
