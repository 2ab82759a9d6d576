"""
Episode

Runs Exploration and PointGoal episodes end to end, generates PointGoal
episode sets and aggregates metrics over batches of episodes.

Every step the runner samples (or keeps) the long-term goal, plans to it
on the current spatial map, lets the local policy act, executes the
action in the world and folds the new observation into the map at the
corrected pose. Frames used in the step log:

    true_pose, sensor_pose   world frame (ground truth, integrated odometry)
    est_pose, goal_lt/st     map frame: the agent starts at the map centre facing +x
"""
from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import partial
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from navsim import config
from navsim.common.file_utils import atomic_write
from navsim.common.log_handlers import init_worker_logging
from navsim.geometry import Pose, between, cell_center, compose
from navsim.mapping import SpatialMap, aggregate, project_ego, render_composite
from navsim.models import (
    Action,
    DataValidationError,
    EpisodeConfig,
    EpisodeMetrics,
    EpisodeStatus,
    GenerationFailureError,
    InsufficientDataError,
    InvalidArgumentError,
    OutOfBoundsError,
    ParseError,
    SchemaError,
    Task,
)
from navsim.noise import NoiseModelSet, default_noise_models, load_models
from navsim.planner import Cell, fmm, geodesic_distance, plan
from navsim.policies import (
    GoalScheduler,
    PolicyObservation,
    global_reward,
    make_global_policy,
    make_local_policy,
)
from navsim.pose_estimator import SearchBox, SlamState, update
from navsim.world import GridWorld, generate_world, load_world

logger = logging.getLogger(__name__)

GEODESIC_BINS = (5.0, 10.0)  # meters
GED_RATIO_BINS = (1.5, 2.0)


######################################################################
#  S M A L L   H E L P E R S
######################################################################
def spl(success: bool, shortest: float, path_length: float) -> float:
    """Success weighted by l / max(p, l)"""
    if not success:
        return 0.0
    longest = max(path_length, shortest)
    return 1.0 if longest <= 0.0 else shortest / longest


def ged_ratio(geodesic: float, euclidean: float) -> float:
    """Geodesic over Euclidean distance, at least 1"""
    if euclidean <= 0.0:
        return 1.0
    # the discrete solve can land a hair under the straight line
    return max(1.0, geodesic / euclidean)


def build_world(cfg: EpisodeConfig) -> GridWorld:
    """The world an episode runs in, with the configured start and noise streams"""
    if cfg.world_file:
        world = load_world(cfg.world_file)
    else:
        world = generate_world(
            cfg.world_seed,
            size=cfg.world_size,
            style=cfg.world_style,
            min_explorable_m2=cfg.min_explorable_m2,
            max_explorable_m2=cfg.max_explorable_m2,
        )
    return prepare_world(world, cfg)


def prepare_world(world: GridWorld, cfg: EpisodeConfig) -> GridWorld:
    if cfg.start is not None:
        row, col, heading = cfg.start
        world.place_agent(Pose.from_cell((row, col), math.radians(heading), world.resolution))
        world.start = (int(row), int(col), float(heading))
    world.reseed(cfg.seed)
    return world


def _pose_list(pose: Pose) -> List[float]:
    return [pose.x, pose.y, pose.o]


######################################################################
#  E P I S O D E   R U N N E R
######################################################################
@dataclass
class EpisodeResult:
    """Metrics, step log and trajectories of one episode"""

    metrics: EpisodeMetrics
    steps: List[dict] = field(default_factory=list)
    trajectory: List[Tuple[float, float]] = field(default_factory=list)
    estimated: List[Tuple[float, float]] = field(default_factory=list)
    goal_map: Optional[Cell] = None
    spatial_map: Optional[SpatialMap] = None
    world: Optional[GridWorld] = None


class EpisodeRunner:  # pylint: disable=too-many-instance-attributes
    """
    Class that runs one episode

    PointGoal episodes use the fixed goal policy; the runner issues Stop
    once the estimated distance to the goal falls under the stop radius.
    """

    def __init__(
        self,
        cfg: EpisodeConfig,
        world: Optional[GridWorld] = None,
        noise_models: Optional[NoiseModelSet] = None,
    ):
        self.cfg = cfg
        self.world = prepare_world(world, cfg) if world is not None else build_world(cfg)
        if noise_models is None:
            noise_models = load_models(cfg.noise_file) if cfg.noise_file else default_noise_models()
        self.noise_models = noise_models
        self.resolution = self.world.resolution
        self.spatial = SpatialMap(cfg.map_size, self.resolution)
        self.origin = self.spatial.origin_pose()
        self.start_true = self.world.agent_true
        self.sensor_pose = self.start_true
        self.visited = np.zeros((cfg.map_size, cfg.map_size), dtype=bool)
        self.goal_map = self.to_map_cell(cfg.goal) if cfg.task == Task.POINTGOAL else None
        policy = make_global_policy(cfg.global_policy, seed=cfg.seed, goal=self.goal_map)
        self.scheduler = GoalScheduler(policy)
        self.local_policy = make_local_policy(cfg.local_policy)
        self.result = EpisodeResult(EpisodeMetrics(), goal_map=self.goal_map)

    def __repr__(self):
        return f"<EpisodeRunner {self.cfg!r}>"

    def to_map(self, pose: Pose) -> Pose:
        """A world-frame pose seen in the map frame"""
        return compose(self.origin, between(self.start_true, pose))

    def to_map_cell(self, cell: Cell) -> Cell:
        x, y = cell_center(cell, self.resolution)
        return self.to_map(Pose(x, y, self.start_true.o)).cell(self.resolution)

    def _visit(self, pose: Pose):
        row, col = pose.cell(self.resolution)
        if self.spatial.in_bounds((row, col)):
            self.visited[row, col] = True

    def _goal_distance(self, pose: Pose) -> float:
        x, y = cell_center(self.goal_map, self.resolution)
        return math.hypot(x - pose.x, y - pose.y)

    def _shortest_path(self) -> Tuple[float, float]:
        """Geodesic start-goal distance on the ground truth and its GED ratio"""
        world = self.world
        start, goal = self.start_true.cell(self.resolution), tuple(self.cfg.goal)
        if not world.in_bounds(goal):
            raise InvalidArgumentError(f"Goal {goal} lies outside the world")
        free = world.footprint_mask().copy()
        for cell in (start, goal):
            free[cell] = world.is_free(cell)
        shortest = geodesic_distance(free, start, goal, self.resolution)
        if math.isinf(shortest):
            raise GenerationFailureError(f"Goal {goal} is unreachable from {start}")
        euclidean = math.hypot(goal[0] - start[0], goal[1] - start[1]) * self.resolution
        return shortest, ged_ratio(shortest, euclidean)

    def _decide(self, observation: PolicyObservation) -> Tuple[Action, Optional[Cell], Optional[Cell]]:
        """The action for this step with the long-term and short-term goals behind it"""
        pose = observation.pose
        if self.goal_map is not None and self._goal_distance(pose) < config.STOP_RADIUS:
            return Action.STOP, self.goal_map, None
        agent = pose.cell(self.resolution)
        goal = self.scheduler.goal_for(observation)
        result, _ = plan(self.spatial, agent, goal, self.visited)
        if not result.reachable:
            goal = self.scheduler.resample(observation)
            result, _ = plan(self.spatial, agent, goal, self.visited)
        if not result.reachable:
            logger.debug("Step %d: no path to %s, turning in place", observation.step, goal)
            return Action.TURN_LEFT, goal, None
        if result.short_term_goal == agent:
            # goal is the agent's own cell: look around until it stops being a frontier
            return Action.TURN_LEFT, goal, agent
        action = self.local_policy.act(pose, result.short_term_goal, observation.step)
        return action, goal, result.short_term_goal

    def run(self) -> EpisodeResult:
        """Runs the episode to the step budget, a Stop or a map overflow"""
        cfg, world, result = self.cfg, self.world, self.result
        metrics = result.metrics
        metrics.episode_id, metrics.task, metrics.seed = cfg.episode_id, cfg.task, cfg.seed
        metrics.explorable_m2 = world.explorable_area()
        if cfg.task == Task.POINTGOAL:
            metrics.shortest_path_m, metrics.ged_ratio = self._shortest_path()
        logger.info("Starting episode %s (%s, seed %d)", cfg.episode_id, cfg.task.value, cfg.seed)

        ego = project_ego(world.range_scan())
        slam = SlamState.initial(
            ego, self.sensor_pose, cfg.map_size, self.resolution, search=SearchBox.for_noise(cfg.noise)
        )
        pose = slam.pose_estimate
        aggregate(self.spatial, ego, pose, in_place=True)
        self._visit(pose)
        result.trajectory.append((world.agent_true.x, world.agent_true.y))
        result.estimated.append((pose.x, pose.y))
        cov_m2, pct_cov = world.true_coverage()
        correct = cfg.pose_correction
        path_length = 0.0

        status = EpisodeStatus.DONE
        if self.goal_map is not None and not self.spatial.in_bounds(self.goal_map):
            logger.warning("Goal of %s lies outside the %d cell map", cfg.episode_id, cfg.map_size)
            status = EpisodeStatus.MAP_OVERFLOW
        for step in range(cfg.max_steps if status == EpisodeStatus.DONE else 0):
            observation = PolicyObservation(self.spatial, pose, self.visited, step)
            action, goal_lt, goal_st = self._decide(observation)
            if action == Action.STOP:
                status = EpisodeStatus.STOPPED
            else:
                true_delta = world.step(action, self.noise_models, cfg.noise)
                sensed = world.odometry(true_delta, self.noise_models, cfg.noise, action)
                self.sensor_pose = compose(self.sensor_pose, sensed)
                path_length += true_delta.translation
                ego = project_ego(world.range_scan())
                pose = update(slam, ego, self.sensor_pose, correct=correct)
                if action == Action.FORWARD and sensed.translation < config.COLLISION_TRANSLATION:
                    self.spatial.mark_collision(pose)
                try:
                    aggregate(self.spatial, ego, pose, in_place=True)
                    self._visit(pose)
                except OutOfBoundsError:
                    logger.warning("Episode %s left the map at step %d", cfg.episode_id, step)
                    status = EpisodeStatus.MAP_OVERFLOW
                result.trajectory.append((world.agent_true.x, world.agent_true.y))
                result.estimated.append((pose.x, pose.y))

            previous = cov_m2
            cov_m2, pct_cov = world.true_coverage()
            metrics.cov_curve.append(pct_cov)
            result.steps.append(
                {
                    "t": step,
                    "action": action.value,
                    "true_pose": _pose_list(world.agent_true),
                    "sensor_pose": _pose_list(self.sensor_pose),
                    "est_pose": _pose_list(pose),
                    "goal_lt": [int(v) for v in goal_lt] if goal_lt is not None else None,
                    "goal_st": [int(v) for v in goal_st] if goal_st is not None else None,
                    "cov_m2": cov_m2,
                    "pct_cov": pct_cov,
                    "reward": global_reward(previous, cov_m2),
                }
            )
            if status != EpisodeStatus.DONE:
                break

        metrics.cov_m2, metrics.pct_cov = cov_m2, pct_cov
        metrics.steps = len(result.steps)
        metrics.status = status
        metrics.path_length_m = path_length
        metrics.final_pose_error_m = slam.pose_estimate.distance_to(self.to_map(world.agent_true))
        if cfg.task == Task.POINTGOAL:
            gx, gy = cell_center(cfg.goal, self.resolution)
            gap = math.hypot(world.agent_true.x - gx, world.agent_true.y - gy)
            metrics.success = gap <= config.SUCCESS_RADIUS
            metrics.spl = spl(metrics.success, metrics.shortest_path_m, path_length)
        logger.info(
            "Episode %s %s after %d steps: %.2f m2 (%.3f), pose error %.3f m",
            cfg.episode_id,
            status.value,
            metrics.steps,
            metrics.cov_m2,
            metrics.pct_cov,
            metrics.final_pose_error_m,
        )
        return result


def run_exploration(cfg: EpisodeConfig, world: Optional[GridWorld] = None) -> EpisodeResult:
    """Runs an Exploration episode"""
    if cfg.task != Task.EXPLORATION:
        raise DataValidationError(f"{cfg!r} is not an exploration episode")
    return EpisodeRunner(cfg, world).run()


def run_pointgoal(cfg: EpisodeConfig, world: Optional[GridWorld] = None) -> EpisodeResult:
    """Runs a PointGoal episode with the goal as the fixed long-term goal"""
    if cfg.task != Task.POINTGOAL:
        raise DataValidationError(f"{cfg!r} is not a PointGoal episode")
    return EpisodeRunner(cfg, world).run()


def run_episode(cfg: EpisodeConfig, keep_map: bool = False) -> EpisodeResult:
    """Runs any episode; the world and map are kept only on request"""
    runner = EpisodeRunner(cfg)
    result = runner.run()
    if keep_map:
        result.spatial_map = runner.spatial
        result.world = runner.world
    return result


def run_batch(
    configs: Sequence[EpisodeConfig], workers: int = 1, keep_maps: bool = False
) -> List[EpisodeResult]:
    """Runs episodes in a process pool; results come back in submission order"""
    task = partial(run_episode, keep_map=keep_maps)
    if workers <= 1 or len(configs) <= 1:
        return [task(cfg) for cfg in configs]
    logger.info("Running %d episodes on %d workers", len(configs), workers)
    level = logging.getLogger("navsim").getEffectiveLevel()
    with ProcessPoolExecutor(
        max_workers=min(workers, len(configs)),
        initializer=init_worker_logging,
        initargs=(level,),
    ) as pool:
        return list(pool.map(task, configs))


######################################################################
#  E P I S O D E   S E T S
######################################################################
@dataclass(frozen=True)
class EpisodeFilters:
    """Minimum geodesic distance and GED ratio of generated PointGoal episodes"""

    min_geodesic_m: float = config.MIN_GEODESIC_M
    min_ged_ratio: float = 1.0

    def accepts(self, geodesic: float, ratio: float) -> bool:
        return math.isfinite(geodesic) and geodesic >= self.min_geodesic_m and ratio >= self.min_ged_ratio


PRESETS = {
    "default": EpisodeFilters(),
    "hard-dist": EpisodeFilters(min_geodesic_m=10.0),
    "hard-gedr": EpisodeFilters(min_ged_ratio=2.0),
}


@dataclass
class EpisodeRecord:
    """A PointGoal episode with its geodesic length and GED ratio"""

    config: EpisodeConfig
    geodesic_m: float
    euclidean_m: float
    ged_ratio: float

    def serialize(self) -> dict:
        data = self.config.serialize()
        data.update(geodesic_m=self.geodesic_m, euclidean_m=self.euclidean_m, ged_ratio=self.ged_ratio)
        return data

    @classmethod
    def deserialize(cls, data: dict) -> "EpisodeRecord":
        if not isinstance(data, dict):
            raise SchemaError("An episode entry is a JSON object")
        values = dict(data)
        try:
            measures = [float(values.pop(name)) for name in ("geodesic_m", "euclidean_m", "ged_ratio")]
        except KeyError as error:
            raise SchemaError(f"Episode entry is missing {error}") from error
        except (TypeError, ValueError) as error:
            raise DataValidationError(f"Invalid episode entry: {error}") from error
        return cls(EpisodeConfig().deserialize(values), *measures)


def _sample_pair(world: GridWorld, rng: np.random.Generator, filters: EpisodeFilters, attempts: int):
    """Rejection-samples a start and goal on cells the agent fits in"""
    footprint = world.footprint_mask()
    cells = np.argwhere(footprint)
    if len(cells) < 2:
        raise GenerationFailureError("The world has fewer than two cells the agent fits in")
    obstacles = (~footprint).astype(np.float32)
    for _ in range(attempts):
        start = tuple(int(v) for v in cells[rng.integers(len(cells))])
        values = fmm(obstacles, start, dilation=0, resolution=world.resolution).full()
        reach = values[cells[:, 0], cells[:, 1]]
        straight = np.hypot(cells[:, 0] - start[0], cells[:, 1] - start[1]) * world.resolution
        fits = (
            np.isfinite(reach)
            & (straight > 0)
            & (reach >= filters.min_geodesic_m)
            & (reach >= filters.min_ged_ratio * straight)
        )
        choices = np.nonzero(fits)[0]
        if len(choices) == 0:
            continue
        goal = tuple(int(v) for v in cells[choices[rng.integers(len(choices))]])
        geodesic = geodesic_distance(footprint, start, goal, world.resolution)
        euclidean = math.hypot(goal[0] - start[0], goal[1] - start[1]) * world.resolution
        ratio = ged_ratio(geodesic, euclidean)
        if filters.accepts(geodesic, ratio):
            return start, goal, geodesic, euclidean, ratio
    raise GenerationFailureError(
        f"No start/goal pair with geodesic >= {filters.min_geodesic_m} m and GED ratio >= "
        f"{filters.min_ged_ratio} in {attempts} attempts"
    )


def generate_episode_set(  # pylint: disable=too-many-arguments
    n: int,
    seed: int = 0,
    filters: Optional[EpisodeFilters] = None,
    world_size: int = config.WORLD_SIZE,
    world_style: str = config.WORLD_STYLE,
    world_file: Optional[str] = None,
    noise: bool = True,
    pose_correction: bool = True,
    attempts: int = config.PAIR_ATTEMPTS,
) -> List[EpisodeRecord]:
    """
    Generates n PointGoal episodes, each on its own generated world
    (or all on ``world_file``), whose start/goal pairs pass the filters
    """
    if n < 1:
        raise InvalidArgumentError("An episode set holds at least one episode")
    filters = filters or EpisodeFilters()
    rng = np.random.default_rng(seed)
    records = []
    for index in range(n):
        world_seed = int(rng.integers(2**31 - 1))
        if world_file:
            world = load_world(world_file)
        else:
            world = generate_world(world_seed, size=world_size, style=world_style)
        start, goal, geodesic, euclidean, ratio = _sample_pair(world, rng, filters, attempts)
        heading = float(rng.integers(-179, 181))
        cfg = EpisodeConfig(
            task=Task.POINTGOAL,
            episode_id=f"pointgoal-{index:04d}",
            world_seed=world_seed,
            world_file=world_file,
            world_style=world_style,
            world_size=world_size,
            start=(start[0], start[1], heading),
            goal=goal,
            noise=noise,
            pose_correction=pose_correction,
            seed=world_seed,
        )
        records.append(EpisodeRecord(cfg, geodesic, euclidean, ratio))
        logger.debug("Episode %d: geodesic %.2f m, GED ratio %.2f", index, geodesic, ratio)
    logger.info("Generated %d PointGoal episodes", len(records))
    return records


def save_episode_set(records: Sequence[EpisodeRecord], path: str):
    with atomic_write(path) as stream:
        json.dump({"episodes": [record.serialize() for record in records]}, stream, indent=2)
        stream.write("\n")


def load_episode_set(path: str) -> List[EpisodeRecord]:
    """Reads an episode set written by save_episode_set"""
    try:
        with open(path, encoding="utf-8") as stream:
            data = json.load(stream)
    except json.JSONDecodeError as error:
        raise ParseError(error.msg, line=error.lineno) from error
    if not isinstance(data, dict) or not isinstance(data.get("episodes"), list):
        raise SchemaError("An episode set holds an 'episodes' list")
    return [EpisodeRecord.deserialize(entry) for entry in data["episodes"]]


######################################################################
#  M E T R I C S
######################################################################
@dataclass
class MetricsSummary:
    """Means over a batch of episodes plus the mean coverage curve"""

    episodes: int
    means: Dict[str, float]
    stds: Dict[str, float]
    curve_mean: List[float]
    curve_std: List[float]
    scene_split: Dict[str, Dict[str, float]] = field(default_factory=dict)
    pointgoal_bins: Dict[str, Dict[str, float]] = field(default_factory=dict)

    def serialize(self) -> dict:
        return asdict(self)


def _padded_curves(runs: Sequence[EpisodeMetrics]) -> np.ndarray:
    """Curves stretched to the longest one by holding their last value"""
    length = max(len(run.cov_curve) for run in runs)
    curves = np.zeros((len(runs), length))
    for index, run in enumerate(runs):
        if run.cov_curve:
            curves[index, : len(run.cov_curve)] = run.cov_curve
            curves[index, len(run.cov_curve) :] = run.cov_curve[-1]
    return curves


def _group(runs: Sequence[EpisodeMetrics]) -> Dict[str, float]:
    return {
        "episodes": len(runs),
        "cov_m2": float(np.mean([run.cov_m2 for run in runs])),
        "pct_cov": float(np.mean([run.pct_cov for run in runs])),
        "success_rate": float(np.mean([float(run.success) for run in runs])),
        "spl": float(np.mean([run.spl for run in runs])),
    }


def _bin_label(value: float, edges: Sequence[float], unit: str) -> str:
    bounds = [0.0 if unit == "m" else 1.0] + list(edges) + [math.inf]
    index = int(np.searchsorted(edges, value, side="right"))
    return f"[{bounds[index]:g}, {bounds[index + 1]:g}) {unit}".rstrip()


def aggregate_metrics(
    runs: Sequence[EpisodeMetrics], large_scene_m2: float = config.LARGE_SCENE_M2
) -> MetricsSummary:
    """
    Means and standard deviations of every scalar metric, the per-step
    coverage curve statistics, a small/large scene split and, for
    PointGoal runs, success and SPL binned by geodesic distance and GED ratio
    """
    if not runs:
        raise InsufficientDataError("There are no episodes to aggregate")
    means, stds = {}, {}
    for name in EpisodeMetrics.SCALARS:
        values = np.array([float(getattr(run, name)) for run in runs])
        means[name], stds[name] = float(values.mean()), float(values.std())
    curves = _padded_curves(runs)
    summary = MetricsSummary(
        episodes=len(runs),
        means=means,
        stds=stds,
        curve_mean=curves.mean(axis=0).tolist(),
        curve_std=curves.std(axis=0).tolist(),
    )
    small = [run for run in runs if run.explorable_m2 < large_scene_m2]
    large = [run for run in runs if run.explorable_m2 >= large_scene_m2]
    for name, group in (("small", small), ("large", large)):
        if group:
            summary.scene_split[name] = _group(group)

    pointgoal = [run for run in runs if run.task == Task.POINTGOAL]
    bins: Dict[str, List[EpisodeMetrics]] = {}
    for run in pointgoal:
        bins.setdefault("geodesic " + _bin_label(run.shortest_path_m, GEODESIC_BINS, "m"), []).append(run)
        bins.setdefault("ged_ratio " + _bin_label(run.ged_ratio, GED_RATIO_BINS, ""), []).append(run)
    summary.pointgoal_bins = {label: _group(group) for label, group in sorted(bins.items())}
    return summary


CSV_FIELDS = ("episode_id", "task", "seed", "status") + EpisodeMetrics.SCALARS


def write_metrics_csv(runs: Sequence[EpisodeMetrics], path: str):
    """One row per episode and a final row of means"""
    summary = aggregate_metrics(runs)
    with atomic_write(path, newline="") as stream:
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(CSV_FIELDS)
        for run in runs:
            row = [run.episode_id, run.task.value, run.seed, run.status.value]
            row += [int(run.success) if name == "success" else getattr(run, name) for name in run.SCALARS]
            writer.writerow([repr(value) if isinstance(value, float) else value for value in row])
        writer.writerow(["mean", "", "", ""] + [repr(summary.means[name]) for name in EpisodeMetrics.SCALARS])


def write_curve_csv(summary: MetricsSummary, path: str):
    """Mean and standard deviation of %Cov at every step"""
    with atomic_write(path, newline="") as stream:
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(("step", "pct_cov_mean", "pct_cov_std"))
        for step, (mean, std) in enumerate(zip(summary.curve_mean, summary.curve_std)):
            writer.writerow((step, repr(mean), repr(std)))


def write_step_log(steps: Sequence[dict], path: str):
    """JSON lines, one record per step"""
    with atomic_write(path) as stream:
        for record in steps:
            stream.write(json.dumps(record))
            stream.write("\n")


def load_step_log(path: str) -> List[dict]:
    records = []
    with open(path, encoding="utf-8") as stream:
        for number, line in enumerate(stream, start=1):
            if not line.strip():
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as error:
                raise ParseError(error.msg, line=number) from error
    return records


def write_results(results: Sequence[EpisodeResult], output_dir: str, render: bool = False) -> MetricsSummary:
    """
    Collects the outputs of a batch: a step log per episode, optional
    map renders, metrics.csv, coverage_curve.csv and summary.json
    """
    runs = [result.metrics for result in results]
    for result in results:
        name = result.metrics.episode_id or f"episode-{result.metrics.seed:04d}"
        write_step_log(result.steps, f"{output_dir}/{name}.jsonl")
        if render and result.spatial_map is not None:
            render_composite(
                result.spatial_map, f"{output_dir}/{name}.png", result.estimated, result.goal_map
            )
    summary = aggregate_metrics(runs)
    write_metrics_csv(runs, f"{output_dir}/metrics.csv")
    write_curve_csv(summary, f"{output_dir}/coverage_curve.csv")
    with atomic_write(f"{output_dir}/summary.json") as stream:
        json.dump(summary.serialize(), stream, indent=2)
        stream.write("\n")
    return summary
