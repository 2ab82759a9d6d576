"""
Test cases for the Episode runner, episode sets and metrics

"""
import csv
import logging
import math
import os
import tempfile
from unittest import TestCase

import numpy as np

from navsim import app
from navsim.episode import (
    EpisodeRunner,
    EpisodeFilters,
    PRESETS,
    aggregate_metrics,
    generate_episode_set,
    ged_ratio,
    load_episode_set,
    load_step_log,
    run_batch,
    run_exploration,
    run_pointgoal,
    save_episode_set,
    spl,
    write_metrics_csv,
    write_results,
    write_step_log,
)
from navsim.geometry import Pose
from navsim.models import (
    DataValidationError,
    EpisodeConfig,
    EpisodeMetrics,
    EpisodeStatus,
    GenerationFailureError,
    InsufficientDataError,
    InvalidArgumentError,
    Task,
)
from navsim.planner import geodesic_distance
from navsim.world import GridWorld, generate_world, save_world

STEP_KEYS = {
    "t",
    "action",
    "true_pose",
    "sensor_pose",
    "est_pose",
    "goal_lt",
    "goal_st",
    "cov_m2",
    "pct_cov",
    "reward",
}


def walled(height, width, start, walls=()):
    """An open room with a closed border and optional extra wall cells"""
    occupancy = np.ones((height, width), dtype=bool)
    occupancy[1:-1, 1:-1] = False
    for row, col in walls:
        occupancy[row, col] = True
    return GridWorld(occupancy, start=start)


def corridor(length=120):
    return walled(20, length, (10, 10, 0.0))


def pointgoal_config(goal, **kwargs):
    values = {"task": Task.POINTGOAL, "goal": goal, "noise": False, "map_size": 256, "episode_id": "pg"}
    values.update(kwargs)
    return EpisodeConfig(**values)


def metrics_with(**kwargs):
    metrics = EpisodeMetrics(episode_id="m", cov_curve=[0.1, 0.2])
    for name, value in kwargs.items():
        setattr(metrics, name, value)
    return metrics


######################################################################
#  P O I N T G O A L   T E S T   C A S E S
######################################################################
class TestPointGoal(TestCase):
    """Test Cases for PointGoal episodes"""

    @classmethod
    def setUpClass(cls):
        """This runs once before the entire test suite"""
        app.logger.setLevel(logging.CRITICAL)

    def test_straight_corridor(self):
        """It should reach a goal 5 m down an open corridor"""
        result = run_pointgoal(pointgoal_config((10, 110)), corridor())
        metrics = result.metrics
        self.assertTrue(metrics.success)
        self.assertEqual(metrics.status, EpisodeStatus.STOPPED)
        self.assertAlmostEqual(metrics.shortest_path_m, 5.0, delta=0.01)
        self.assertGreaterEqual(metrics.spl, 0.9)
        self.assertGreaterEqual(metrics.path_length_m, metrics.shortest_path_m - 0.05)
        self.assertLess(metrics.steps, 500)
        self.assertEqual(result.steps[-1]["action"], "stop")

    def test_start_is_goal(self):
        """It should stop at once when the start is the goal"""
        metrics = run_pointgoal(pointgoal_config((10, 10)), corridor()).metrics
        self.assertEqual(metrics.steps, 1)
        self.assertTrue(metrics.success)
        self.assertEqual(metrics.spl, 1.0)
        self.assertEqual(metrics.path_length_m, 0.0)
        self.assertEqual(metrics.status, EpisodeStatus.STOPPED)

    def test_unreachable_goal(self):
        """It should refuse a goal walled off from the start"""
        world = walled(20, 120, (10, 10, 0.0), [(row, 60) for row in range(20)])
        self.assertRaises(GenerationFailureError, run_pointgoal, pointgoal_config((10, 100)), world)
        self.assertRaises(GenerationFailureError, run_pointgoal, pointgoal_config((0, 50)), corridor())

    def test_goal_beyond_map(self):
        """It should end with a map overflow when the goal lies outside the map"""
        result = run_pointgoal(pointgoal_config((10, 290), map_size=128), corridor(300))
        self.assertEqual(result.metrics.status, EpisodeStatus.MAP_OVERFLOW)
        self.assertEqual(result.metrics.steps, 0)
        self.assertFalse(result.metrics.success)
        self.assertEqual(result.metrics.spl, 0.0)

    def test_wrong_task(self):
        """It should not run an exploration config as PointGoal and vice versa"""
        exploration = EpisodeConfig(noise=False, map_size=256, max_steps=5)
        self.assertRaises(DataValidationError, run_pointgoal, exploration, corridor())
        self.assertRaises(DataValidationError, run_exploration, pointgoal_config((10, 20)), corridor())


######################################################################
#  E X P L O R A T I O N   T E S T   C A S E S
######################################################################
class TestExploration(TestCase):
    """Test Cases for Exploration episodes"""

    @classmethod
    def setUpClass(cls):
        """This runs once before the entire test suite"""
        app.logger.setLevel(logging.CRITICAL)

    def test_small_room(self):
        """It should explore a small room with a monotone coverage curve"""
        cfg = EpisodeConfig(noise=False, map_size=256, max_steps=40, episode_id="room")
        result = run_exploration(cfg, walled(50, 50, (25, 25, 0.0)))
        metrics = result.metrics
        self.assertEqual(metrics.status, EpisodeStatus.DONE)
        self.assertEqual(metrics.steps, 40)
        self.assertEqual(len(metrics.cov_curve), 40)
        self.assertTrue(np.all(np.diff(metrics.cov_curve) >= 0.0))
        self.assertGreater(metrics.pct_cov, 0.2)
        self.assertLessEqual(metrics.pct_cov, 1.0)
        self.assertAlmostEqual(metrics.final_pose_error_m, 0.0, places=6)
        self.assertEqual(set(result.steps[0]), STEP_KEYS)
        self.assertEqual([record["t"] for record in result.steps], list(range(40)))
        rewards = sum(record["reward"] for record in result.steps)
        gained = result.steps[-1]["cov_m2"] - result.steps[0]["cov_m2"] + result.steps[0]["reward"] / 0.02
        self.assertAlmostEqual(rewards, 0.02 * gained, places=9)

    def test_deterministic(self):
        """It should repeat metrics and logs for the same config and seed"""
        cfg = EpisodeConfig(map_size=256, max_steps=12, seed=5, episode_id="noisy")
        first = run_exploration(cfg, walled(50, 50, (25, 25, 30.0)))
        second = run_exploration(cfg, walled(50, 50, (25, 25, 30.0)))
        self.assertEqual(first.metrics.serialize(), second.metrics.serialize())
        self.assertEqual(first.steps, second.steps)

    def test_noise_free_estimate(self):
        """It should keep the corrected estimate on the true pose when noise is off"""
        cfg = EpisodeConfig(
            noise=False, pose_correction=True, map_size=256, max_steps=200, episode_id="exact"
        )
        runner = EpisodeRunner(cfg, walled(50, 50, (25, 25, 0.0)))
        result = runner.run()
        self.assertEqual(len(result.steps), 200)
        for record in result.steps:
            truth = runner.to_map(Pose(*record["true_pose"]))
            x, y, heading = record["est_pose"]
            self.assertAlmostEqual(x, truth.x, delta=1e-6)
            self.assertAlmostEqual(y, truth.y, delta=1e-6)
            self.assertAlmostEqual(math.remainder(heading - truth.o, math.tau), 0.0, delta=1e-6)
        self.assertAlmostEqual(result.metrics.final_pose_error_m, 0.0, places=6)

    def test_noise_moves_the_estimate(self):
        """It should keep the pose estimate near the truth under noise"""
        cfg = EpisodeConfig(map_size=256, max_steps=12, seed=2)
        metrics = run_exploration(cfg, walled(50, 50, (25, 25, 0.0))).metrics
        self.assertGreater(metrics.final_pose_error_m, 0.0)
        self.assertLess(metrics.final_pose_error_m, 1.0)


######################################################################
#  E P I S O D E   S E T   T E S T   C A S E S
######################################################################
class TestEpisodeSets(TestCase):
    """Test Cases for PointGoal episode set generation"""

    @classmethod
    def setUpClass(cls):
        """This runs once before the entire test suite"""
        app.logger.setLevel(logging.CRITICAL)

    def setUp(self):
        self.tempdir = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.tempdir.cleanup()

    def test_hard_gedr(self):
        """It should only emit episodes with a GED ratio of at least 2"""
        records = generate_episode_set(3, seed=1, filters=PRESETS["hard-gedr"], world_style="maze")
        self.assertEqual(len(records), 3)
        for record in records:
            self.assertGreaterEqual(record.ged_ratio, 2.0)
            self.assertGreaterEqual(record.geodesic_m, 1.0)
            world = generate_world(record.config.world_seed, size=record.config.world_size, style="maze")
            start, goal = record.config.start[:2], record.config.goal
            self.assertEqual(geodesic_distance(world.footprint_mask(), start, goal), record.geodesic_m)
            euclidean = math.hypot(goal[0] - start[0], goal[1] - start[1]) * 0.05
            self.assertAlmostEqual(record.euclidean_m, euclidean)
            self.assertEqual(record.config.task, Task.POINTGOAL)

    def test_unfiltered(self):
        """It should never emit a GED ratio below 1"""
        records = generate_episode_set(2, seed=4, world_style="cave")
        for record in records:
            self.assertGreaterEqual(record.ged_ratio, 1.0)
            self.assertGreaterEqual(record.geodesic_m, 1.0)

    def test_infeasible_distance(self):
        """It should fail after bounded attempts when no pair is long enough"""
        path = os.path.join(self.tempdir.name, "room.answ")
        save_world(walled(40, 40, (20, 20, 0.0)), path)
        self.assertRaises(
            GenerationFailureError,
            generate_episode_set,
            1,
            filters=PRESETS["hard-dist"],
            world_file=path,
            attempts=3,
        )

    def test_save_and_load(self):
        """It should read back a saved episode set"""
        path = os.path.join(self.tempdir.name, "room.answ")
        save_world(walled(40, 40, (20, 20, 0.0)), path)
        records = generate_episode_set(2, seed=3, world_file=path)
        target = os.path.join(self.tempdir.name, "episodes.json")
        save_episode_set(records, target)
        loaded = load_episode_set(target)
        self.assertEqual([r.serialize() for r in loaded], [r.serialize() for r in records])
        self.assertEqual(loaded[0].config.world_file, path)

    def test_filters(self):
        """It should accept pairs on both thresholds"""
        filters = EpisodeFilters(min_geodesic_m=2.0, min_ged_ratio=1.5)
        self.assertTrue(filters.accepts(2.0, 1.5))
        self.assertFalse(filters.accepts(1.99, 3.0))
        self.assertFalse(filters.accepts(5.0, 1.2))
        self.assertFalse(filters.accepts(math.inf, 3.0))
        self.assertRaises(InvalidArgumentError, generate_episode_set, 0)


######################################################################
#  M E T R I C S   T E S T   C A S E S
######################################################################
class TestMetrics(TestCase):
    """Test Cases for metric helpers and aggregation"""

    @classmethod
    def setUpClass(cls):
        """This runs once before the entire test suite"""
        app.logger.setLevel(logging.CRITICAL)

    def setUp(self):
        self.tempdir = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.tempdir.cleanup()

    def test_spl(self):
        """It should weight success by the inverse path length"""
        self.assertEqual(spl(True, 4.0, 8.0), 0.5)
        self.assertEqual(spl(True, 4.0, 3.0), 1.0)
        self.assertEqual(spl(False, 4.0, 4.0), 0.0)
        self.assertEqual(spl(True, 0.0, 0.0), 1.0)

    def test_ged_ratio(self):
        """It should divide geodesic by Euclidean distance"""
        self.assertEqual(ged_ratio(6.0, 2.0), 3.0)
        self.assertEqual(ged_ratio(1.99, 2.0), 1.0)
        self.assertEqual(ged_ratio(0.0, 0.0), 1.0)

    def test_single_run(self):
        """It should summarize a single run as the run itself"""
        run = metrics_with(cov_m2=12.5, pct_cov=0.4, steps=7)
        summary = aggregate_metrics([run])
        self.assertEqual(summary.episodes, 1)
        self.assertEqual(summary.means["cov_m2"], 12.5)
        self.assertEqual(summary.means["steps"], 7.0)
        self.assertEqual(summary.curve_mean, [0.1, 0.2])
        self.assertEqual(summary.stds["pct_cov"], 0.0)

    def test_identical_runs(self):
        """It should report zero spread for identical runs"""
        summary = aggregate_metrics([metrics_with(pct_cov=0.5), metrics_with(pct_cov=0.5)])
        self.assertTrue(all(value == 0.0 for value in summary.stds.values()))
        self.assertEqual(summary.curve_std, [0.0, 0.0])

    def test_known_means(self):
        """It should average known constants and pad short curves"""
        first = metrics_with(pct_cov=0.2, explorable_m2=20.0)
        second = metrics_with(pct_cov=0.4, explorable_m2=80.0, cov_curve=[0.3])
        summary = aggregate_metrics([first, second])
        self.assertAlmostEqual(summary.means["pct_cov"], 0.3)
        self.assertAlmostEqual(summary.curve_mean[1], 0.25)
        self.assertAlmostEqual(summary.scene_split["small"]["pct_cov"], 0.2)
        self.assertAlmostEqual(summary.scene_split["large"]["pct_cov"], 0.4)
        self.assertEqual(summary.pointgoal_bins, {})

    def test_pointgoal_bins(self):
        """It should bin PointGoal runs by geodesic distance and GED ratio"""
        near = metrics_with(task=Task.POINTGOAL, success=True, spl=0.8, shortest_path_m=3.0, ged_ratio=1.1)
        far = metrics_with(task=Task.POINTGOAL, shortest_path_m=12.0, ged_ratio=2.5)
        summary = aggregate_metrics([near, far])
        self.assertEqual(summary.means["success"], 0.5)
        self.assertEqual(summary.pointgoal_bins["geodesic [0, 5) m"]["spl"], 0.8)
        self.assertEqual(summary.pointgoal_bins["geodesic [10, inf) m"]["success_rate"], 0.0)
        self.assertEqual(summary.pointgoal_bins["ged_ratio [2, inf)"]["episodes"], 1)

    def test_no_runs(self):
        """It should refuse to aggregate nothing"""
        self.assertRaises(InsufficientDataError, aggregate_metrics, [])

    def test_metrics_csv(self):
        """It should write one row per episode and a mean row"""
        path = os.path.join(self.tempdir.name, "metrics.csv")
        write_metrics_csv([metrics_with(pct_cov=0.2), metrics_with(pct_cov=0.6, success=True)], path)
        with open(path, encoding="utf-8", newline="") as stream:
            rows = list(csv.DictReader(stream))
        self.assertEqual(len(rows), 3)
        self.assertEqual(rows[-1]["episode_id"], "mean")
        self.assertAlmostEqual(float(rows[-1]["pct_cov"]), 0.4)
        self.assertEqual(rows[1]["success"], "1")

    def test_step_log(self):
        """It should write one JSON record per line"""
        path = os.path.join(self.tempdir.name, "log.jsonl")
        records = [{"t": 0, "action": "forward"}, {"t": 1, "action": "stop"}]
        write_step_log(records, path)
        self.assertEqual(load_step_log(path), records)


######################################################################
#  B A T C H   T E S T   C A S E S
######################################################################
class TestBatch(TestCase):
    """Test Cases for batches of episodes"""

    @classmethod
    def setUpClass(cls):
        """This runs once before the entire test suite"""
        app.logger.setLevel(logging.CRITICAL)

    def setUp(self):
        self.tempdir = tempfile.TemporaryDirectory()
        self.world_file = os.path.join(self.tempdir.name, "corridor.answ")
        save_world(corridor(), self.world_file)

    def tearDown(self):
        self.tempdir.cleanup()

    def configs(self):
        return [
            pointgoal_config((10, 10 + seed), world_file=self.world_file, seed=seed, episode_id=f"pg-{seed}")
            for seed in range(3)
        ]

    def test_ordered_results(self):
        """It should return results in submission order with two workers"""
        results = run_batch(self.configs(), workers=2)
        self.assertEqual([r.metrics.episode_id for r in results], ["pg-0", "pg-1", "pg-2"])
        serial = run_batch(self.configs(), workers=1)
        self.assertEqual(
            [r.metrics.serialize() for r in results], [r.metrics.serialize() for r in serial]
        )

    def test_write_results(self):
        """It should collect logs, renders and summaries into the output directory"""
        out = os.path.join(self.tempdir.name, "out")
        results = run_batch(self.configs()[:1], keep_maps=True)
        summary = write_results(results, out, render=True)
        self.assertEqual(summary.episodes, 1)
        for name in ("pg-0.jsonl", "pg-0.png", "metrics.csv", "coverage_curve.csv", "summary.json"):
            self.assertTrue(os.path.exists(os.path.join(out, name)), name)
        self.assertEqual(len(load_step_log(os.path.join(out, "pg-0.jsonl"))), results[0].metrics.steps)
