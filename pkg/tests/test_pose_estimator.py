"""
Test cases for the Pose Estimator

"""
import logging
import math
from unittest import TestCase

import numpy as np

from navsim import app
from navsim.geometry import Pose, PoseDelta, between, compose
from navsim.mapping import empty_ego, project_ego
from navsim.models import InvalidArgumentError
from navsim.pose_estimator import (
    SearchBox,
    SlamState,
    alignment_score,
    candidate_offsets,
    score_candidates,
    estimate_delta,
    update,
)
from navsim.world import GridWorld, generate_world

PILLARS = ((48, 52), (52, 32), (32, 28), (28, 48), (40, 55), (55, 40), (40, 25), (25, 40))


def pillar_room():
    """An 81 x 81 room with eight one-cell pillars"""
    occupancy = np.ones((81, 81), dtype=bool)
    occupancy[1:-1, 1:-1] = False
    for row, col in PILLARS:
        occupancy[row, col] = True
    return GridWorld(occupancy, start=(40, 30, 0.0))


def ego_at(world, cell, heading=0.0):
    world.place_agent(Pose.from_cell(cell, heading))
    return project_ego(world.range_scan())


######################################################################
#  S E A R C H   B O X   T E S T   C A S E S
######################################################################
class TestSearchBox(TestCase):
    """Test Cases for the candidate search box"""

    @classmethod
    def setUpClass(cls):
        """This runs once before the entire test suite"""
        app.logger.setLevel(logging.CRITICAL)

    def test_default_box(self):
        """It should hold 9 x 9 x 11 offsets with zero first"""
        offsets = candidate_offsets(SearchBox())
        self.assertEqual(offsets.shape, (891, 3))
        self.assertTrue(np.all(offsets[0] == 0.0))
        self.assertAlmostEqual(np.abs(offsets[:, 0]).max(), 0.1)
        self.assertAlmostEqual(np.abs(offsets[:, 2]).max(), math.radians(5))

    def test_tie_order(self):
        """It should order offsets by step norm, then lexicographically"""
        box = SearchBox()
        offsets = candidate_offsets(box)
        steps = np.round(offsets / np.array([box.step_xy, box.step_xy, box.step_o])).astype(int)
        norms = (steps**2).sum(axis=1)
        self.assertTrue(np.all(np.diff(norms) >= 0))
        self.assertEqual(steps[1].tolist(), [-1, 0, 0])
        self.assertEqual(steps[4].tolist(), [0, 0, 1])
        self.assertEqual(steps[6].tolist(), [1, 0, 0])
        self.assertEqual(len({tuple(row) for row in steps.tolist()}), 891)

    def test_bad_box(self):
        """It should refuse non-positive steps"""
        self.assertRaises(InvalidArgumentError, SearchBox, 0.1, 0.1, 0.0, 0.01)
        self.assertRaises(InvalidArgumentError, SearchBox, -0.1, 0.1, 0.025, 0.01)

    def test_noise_free_box(self):
        """It should shrink the box to the zero offset for noise-free odometry"""
        self.assertEqual(SearchBox.for_noise(True), SearchBox())
        box = SearchBox.for_noise(False)
        self.assertEqual(box.counts, (0, 0))
        self.assertEqual(candidate_offsets(box).tolist(), [[0.0, 0.0, 0.0]])


######################################################################
#  E S T I M A T E   D E L T A   T E S T   C A S E S
######################################################################
class TestEstimateDelta(TestCase):
    """Test Cases for the alignment search"""

    @classmethod
    def setUpClass(cls):
        """This runs once before the entire test suite"""
        app.logger.setLevel(logging.CRITICAL)

    def setUp(self):
        self.world = pillar_room()

    def test_identical_observations(self):
        """It should keep a zero delta when nothing moved"""
        ego = ego_at(self.world, (40, 30))
        result = estimate_delta(ego, ego.copy(), PoseDelta())
        self.assertEqual(result.as_tuple(), (0.0, 0.0, 0.0))

    def test_recovers_forward_step(self):
        """It should recover a forward step from a corrupted sensed delta"""
        prev = ego_at(self.world, (40, 30))
        cur = ego_at(self.world, (40, 35))
        result = estimate_delta(prev, cur, PoseDelta(0.30, 0.0, 0.0))
        self.assertAlmostEqual(result.dx, 0.25, delta=0.025 + 1e-9)
        self.assertAlmostEqual(result.dy, 0.0, delta=0.025 + 1e-9)

    def test_empty_observations(self):
        """It should return the sensed delta for empty observations"""
        sensed = PoseDelta(0.2, 0.01, 0.05)
        self.assertIs(estimate_delta(empty_ego(), empty_ego(), sensed), sensed)
        ego = ego_at(self.world, (40, 30))
        self.assertIs(estimate_delta(ego, empty_ego(), sensed), sensed)

    def test_invalid_observation(self):
        """It should refuse malformed grids"""
        bad = empty_ego()
        bad[1, 0, 0] = 1.5
        self.assertRaises(InvalidArgumentError, estimate_delta, bad, empty_ego(), PoseDelta())

    def test_sparse_matches_dense(self):
        """It should score candidates exactly like the dense transform"""
        prev = ego_at(self.world, (40, 30))
        cur = ego_at(self.world, (41, 34), math.radians(3))
        sensed = PoseDelta(0.2, 0.04, 0.03)
        offsets, scores = score_candidates(prev, cur, sensed)
        for index in (0, 1, 17, 200, 500, 890):
            offset = offsets[index]
            delta = PoseDelta(sensed.dx + offset[0], sensed.dy + offset[1], sensed.do + offset[2])
            self.assertAlmostEqual(scores[index], alignment_score(prev, cur, delta), places=6)

    def test_dominance_and_bound(self):
        """It should never lose score against the sensed delta nor leave the box"""
        world = generate_world(4, size=160, style="rooms")
        cells = np.argwhere(world.footprint_mask())
        rng = np.random.default_rng(11)
        box = SearchBox()
        for _ in range(8):
            cell = tuple(cells[rng.integers(len(cells))])
            heading = rng.uniform(-math.pi, math.pi)
            prev = ego_at(world, cell, heading)
            start = world.agent_true
            world.place_agent(compose(start, PoseDelta(0.0, 0.0, math.radians(10))))
            cur = project_ego(world.range_scan())
            noise = rng.normal(0, [0.03, 0.03, 0.02])
            sensed = PoseDelta(noise[0], noise[1], math.radians(10) + noise[2])
            result = estimate_delta(prev, cur, sensed)
            self.assertGreaterEqual(
                alignment_score(prev, cur, result), alignment_score(prev, cur, sensed) - 1e-6
            )
            self.assertLessEqual(abs(result.dx - sensed.dx), box.r_xy + 1e-9)
            self.assertLessEqual(abs(result.dy - sensed.dy), box.r_xy + 1e-9)
            change = math.atan2(math.sin(result.do - sensed.do), math.cos(result.do - sensed.do))
            self.assertLessEqual(abs(change), box.r_o + 1e-9)

    def test_deterministic(self):
        """It should give the same answer twice"""
        prev = ego_at(self.world, (40, 30))
        cur = ego_at(self.world, (40, 35))
        sensed = PoseDelta(0.28, 0.02, 0.01)
        self.assertEqual(estimate_delta(prev, cur, sensed), estimate_delta(prev, cur, sensed))


######################################################################
#  U P D A T E   T E S T   C A S E S
######################################################################
class TestUpdate(TestCase):
    """Test Cases for the pose estimate update"""

    @classmethod
    def setUpClass(cls):
        """This runs once before the entire test suite"""
        app.logger.setLevel(logging.CRITICAL)

    def test_initial_state(self):
        """It should start at the centre of the map facing east"""
        state = SlamState.initial(None, Pose(1.0, 2.0, 0.3), map_size=200)
        self.assertEqual(state.pose_estimate.as_tuple(), (5.0, 5.0, 0.0))
        self.assertIsNone(state.prev_ego)

    def test_correction_off(self):
        """It should integrate raw odometry when correction is off"""
        world = pillar_room()
        first = Pose(1.5, 2.0, 0.0)
        state = SlamState.initial(ego_at(world, (40, 30)), first, map_size=200)
        sensor = first
        rng = np.random.default_rng(2)
        for _ in range(20):
            step = rng.normal([0.2, 0.0, 0.0], [0.02, 0.02, 0.1])
            sensor = compose(sensor, PoseDelta(*step))
            update(state, empty_ego(), sensor, correct=False)
        expected = compose(Pose(5.0, 5.0, 0.0), between(first, sensor))
        for got, want in zip(state.pose_estimate.as_tuple(), expected.as_tuple()):
            self.assertAlmostEqual(got, want, places=9)
        self.assertEqual(state.corrections, 0)
        self.assertIs(state.last_sensor_pose, sensor)

    def test_correction_reduces_drift(self):
        """It should track a biased odometry better with correction on"""
        world = pillar_room()
        bias = PoseDelta(0.04, 0.03, 0.0)
        states = {}
        for correct in (True, False):
            truth = Pose.from_cell((36, 10), 0.0)
            world.place_agent(truth)
            sensor = truth
            state = SlamState.initial(project_ego(world.range_scan()), sensor, map_size=200)
            origin = state.pose_estimate
            for _ in range(6):
                truth = compose(truth, PoseDelta(0.25, 0.0, 0.0))
                world.place_agent(truth)
                sensor = compose(sensor, PoseDelta(0.25, 0.0, 0.0) + bias)
                update(state, project_ego(world.range_scan()), sensor, correct=correct)
            expected = compose(origin, between(Pose.from_cell((36, 10), 0.0), truth))
            states[correct] = state.pose_estimate.distance_to(expected)
        self.assertLess(states[True], states[False])
        self.assertGreater(states[False], 0.2)

    def test_noise_free_corrected(self):
        """It should track exact odometry exactly with correction on"""
        world = pillar_room()
        actions = ((0.25, 0.0), (0.0, math.radians(10)), (0.0, -math.radians(10)))
        truth = Pose.from_cell((40, 30), 0.0)
        world.place_agent(truth)
        state = SlamState.initial(
            project_ego(world.range_scan()), truth, map_size=200, search=SearchBox.for_noise(False)
        )
        origin, start = state.pose_estimate, truth
        rng = np.random.default_rng(4)
        for _ in range(200):
            forward, turn = actions[rng.integers(len(actions))]
            moved = compose(truth, PoseDelta(forward, 0.0, turn))
            if world.is_free(moved.cell()) and world.footprint_clear(moved.x, moved.y):
                truth = moved
            world.place_agent(truth)
            update(state, project_ego(world.range_scan()), truth, correct=True)
            expected = compose(origin, between(start, truth))
            self.assertAlmostEqual(state.pose_estimate.x, expected.x, delta=1e-6)
            self.assertAlmostEqual(state.pose_estimate.y, expected.y, delta=1e-6)
            turn_error = math.remainder(state.pose_estimate.o - expected.o, math.tau)
            self.assertAlmostEqual(turn_error, 0.0, delta=1e-6)
        self.assertEqual(state.corrections, 0)
