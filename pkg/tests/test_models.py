# Copyright 2016, 2023 John J. Rofrano. All Rights Reserved.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
# https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""
Test cases for the configuration and metrics models

Test cases can be run with:
    nosetests
    coverage report -m

While debugging just these tests it's convenient to use this:
    nosetests --stop tests/test_models.py:TestEpisodeConfig

"""
import logging
import unittest
from navsim import app, config
from navsim.models import (
    DataValidationError,
    EpisodeConfig,
    EpisodeMetrics,
    EpisodeStatus,
    ParseError,
    RunConfig,
    Task,
    parse_seeds,
)
from tests.factories import EpisodeConfigFactory


######################################################################
#  E P I S O D E   C O N F I G   T E S T   C A S E S
######################################################################
class TestEpisodeConfig(unittest.TestCase):
    """Test Cases for EpisodeConfig"""

    @classmethod
    def setUpClass(cls):
        """This runs once before the entire test suite"""
        app.config["TESTING"] = True
        app.logger.setLevel(logging.CRITICAL)

    ######################################################################
    #  T E S T   C A S E S
    ######################################################################
    def test_create_exploration_config(self):
        """It should create an exploration config with its defaults"""
        cfg = EpisodeConfig()
        self.assertEqual(cfg.task, Task.EXPLORATION)
        self.assertEqual(cfg.max_steps, config.EXPLORATION_STEPS)
        self.assertEqual(cfg.global_policy, "frontier")
        self.assertEqual(cfg.local_policy, "deterministic")
        self.assertTrue(cfg.noise)
        self.assertTrue(cfg.pose_correction)
        self.assertIsNone(cfg.goal)

    def test_create_pointgoal_config(self):
        """It should default PointGoal episodes to the fixed goal policy"""
        cfg = EpisodeConfig(task=Task.POINTGOAL, goal=(10, 20))
        self.assertEqual(cfg.max_steps, config.POINTGOAL_STEPS)
        self.assertEqual(cfg.global_policy, "fixed_goal")
        self.assertIn("pointgoal", repr(cfg))

    def test_pointgoal_needs_goal(self):
        """It should not create a PointGoal config without a goal"""
        self.assertRaises(DataValidationError, EpisodeConfig, task=Task.POINTGOAL)

    def test_exploration_rejects_goal(self):
        """It should not create an exploration config with a goal"""
        self.assertRaises(DataValidationError, EpisodeConfig, goal=(1, 2))
        self.assertRaises(DataValidationError, EpisodeConfig, global_policy="fixed_goal")

    def test_invalid_fields(self):
        """It should reject unknown policies, styles, step budgets and map sizes"""
        self.assertRaises(DataValidationError, EpisodeConfig, max_steps=0)
        self.assertRaises(DataValidationError, EpisodeConfig, local_policy="learned")
        self.assertRaises(DataValidationError, EpisodeConfig, global_policy="nearest")
        self.assertRaises(DataValidationError, EpisodeConfig, world_style="forest")
        self.assertRaises(DataValidationError, EpisodeConfig, map_size=100)
        self.assertRaises(DataValidationError, EpisodeConfig, map_size=301)

    def test_serialize_a_config(self):
        """It should serialize a config"""
        cfg = EpisodeConfigFactory()
        data = cfg.serialize()
        self.assertEqual(data["task"], "exploration")
        self.assertEqual(data["episode_id"], cfg.episode_id)
        self.assertEqual(data["world_seed"], cfg.world_seed)
        self.assertEqual(data["max_steps"], cfg.max_steps)
        self.assertEqual(data["noise"], cfg.noise)
        self.assertIsNone(data["goal"])

    def test_deserialize_a_config(self):
        """It should deserialize a config"""
        cfg = EpisodeConfigFactory()
        copy = EpisodeConfig().deserialize(cfg.serialize())
        self.assertEqual(copy, cfg)

    def test_deserialize_pointgoal(self):
        """It should deserialize a PointGoal config with start and goal lists"""
        data = {"task": "pointgoal", "goal": [12, 40], "start": [10, 10, 90], "noise": "off"}
        cfg = EpisodeConfig().deserialize(data)
        self.assertEqual(cfg.goal, (12, 40))
        self.assertEqual(cfg.start, (10, 10, 90.0))
        self.assertFalse(cfg.noise)
        self.assertEqual(cfg.global_policy, "fixed_goal")
        self.assertEqual(cfg.max_steps, config.POINTGOAL_STEPS)

    def test_deserialize_unknown_keys(self):
        """It should not deserialize unknown keys"""
        self.assertRaises(DataValidationError, EpisodeConfig().deserialize, {"speed": 3})

    def test_deserialize_bad_values(self):
        """It should not deserialize bad tasks, booleans or goals"""
        cfg = EpisodeConfig()
        self.assertRaises(DataValidationError, cfg.deserialize, {"task": "fly"})
        self.assertRaises(DataValidationError, cfg.deserialize, {"noise": "maybe"})
        self.assertRaises(DataValidationError, cfg.deserialize, {"noise": 3})
        self.assertRaises(DataValidationError, cfg.deserialize, {"task": "pointgoal", "goal": [1]})
        self.assertRaises(DataValidationError, cfg.deserialize, {"task": "pointgoal", "goal": 7})


######################################################################
#  M E T R I C S   A N D   E R R O R S
######################################################################
class TestEpisodeMetrics(unittest.TestCase):
    """Test Cases for EpisodeMetrics and the error types"""

    def test_serialize_metrics(self):
        """It should serialize metrics with enum values"""
        metrics = EpisodeMetrics(episode_id="e", task=Task.POINTGOAL, status=EpisodeStatus.STOPPED, steps=4)
        data = metrics.serialize()
        self.assertEqual(data["task"], "pointgoal")
        self.assertEqual(data["status"], "stopped")
        self.assertEqual(data["steps"], 4)
        self.assertEqual(data["cov_curve"], [])
        self.assertIn("stopped", repr(metrics))

    def test_scalars(self):
        """It should list only scalar metrics for aggregation"""
        metrics = EpisodeMetrics()
        for name in EpisodeMetrics.SCALARS:
            self.assertIsInstance(float(getattr(metrics, name)), float)
        self.assertNotIn("cov_curve", EpisodeMetrics.SCALARS)

    def test_parse_error_context(self):
        """It should carry line and field context in a parse error"""
        error = ParseError("not a number", line=7, field_name="odom_x")
        self.assertEqual(error.line, 7)
        self.assertEqual(error.field_name, "odom_x")
        self.assertEqual(str(error), "line 7, field 'odom_x': not a number")
        self.assertIsInstance(error, DataValidationError)
        self.assertEqual(str(ParseError("empty")), "empty")


######################################################################
#  R U N   C O N F I G   T E S T   C A S E S
######################################################################
class TestRunConfig(unittest.TestCase):
    """Test Cases for RunConfig"""

    def test_parse_seeds(self):
        """It should parse ranges, lists and single seeds"""
        self.assertEqual(parse_seeds("0..4"), [0, 1, 2, 3, 4])
        self.assertEqual(parse_seeds("0,3,7"), [0, 3, 7])
        self.assertEqual(parse_seeds(5), [5])
        self.assertEqual(parse_seeds([1, 2]), [1, 2])
        self.assertEqual(parse_seeds("9"), [9])
        self.assertRaises(DataValidationError, parse_seeds, "4..1")
        self.assertRaises(ValueError, parse_seeds, "a..b")

    def test_deserialize_run(self):
        """It should split run keys from episode keys"""
        data = {
            "seeds": "2..3",
            "workers": 2,
            "output_dir": "out",
            "render": True,
            "max_steps": 30,
            "noise": False,
        }
        run = RunConfig().deserialize(data)
        self.assertEqual(run.seeds, [2, 3])
        self.assertEqual(run.workers, 2)
        self.assertEqual(run.output_dir, "out")
        self.assertTrue(run.render)
        self.assertEqual(run.episode.max_steps, 30)
        self.assertFalse(run.episode.noise)

    def test_deserialize_bad_run(self):
        """It should reject bad workers, seeds and unknown keys"""
        self.assertRaises(DataValidationError, RunConfig().deserialize, {"workers": 0})
        self.assertRaises(DataValidationError, RunConfig().deserialize, {"workers": "lots"})
        self.assertRaises(DataValidationError, RunConfig().deserialize, {"seeds": "x,y"})
        self.assertRaises(DataValidationError, RunConfig().deserialize, {"episodes": 3})

    def test_episode_configs(self):
        """It should make one config per seed with matching world seeds"""
        run = RunConfig().deserialize({"seeds": [4, 9], "max_steps": 10})
        configs = run.episode_configs()
        self.assertEqual([cfg.seed for cfg in configs], [4, 9])
        self.assertEqual([cfg.world_seed for cfg in configs], [4, 9])
        self.assertEqual([cfg.episode_id for cfg in configs], ["exploration-0004", "exploration-0009"])
        self.assertTrue(all(cfg.max_steps == 10 for cfg in configs))

    def test_episode_configs_world_file(self):
        """It should keep the world seed when every episode shares a world file"""
        run = RunConfig().deserialize({"seeds": "0..1", "world_file": "room.answ", "world_seed": 3})
        self.assertEqual([cfg.world_seed for cfg in run.episode_configs()], [3, 3])
