# Copyright 2016, 2022 John J. Rofrano. All Rights Reserved.
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

# pylint: disable=too-few-public-methods

"""
Test Factory to make fake objects for testing
"""
import math
import factory
from factory.fuzzy import FuzzyChoice, FuzzyFloat, FuzzyInteger
from navsim.geometry import Pose, PoseDelta
from navsim.models import EpisodeConfig, Task, MOTION_ACTIONS, NoiseKind
from navsim.noise import GaussianMixture3D, NoiseModelSet


class PoseFactory(factory.Factory):
    """Creates fake poses for testing"""

    class Meta:
        """Maps factory to data model"""

        model = Pose

    x = FuzzyFloat(-10.0, 10.0)
    y = FuzzyFloat(-10.0, 10.0)
    o = FuzzyFloat(-math.pi, math.pi)


class PoseDeltaFactory(factory.Factory):
    """Creates fake pose changes of one action's size"""

    class Meta:
        """Maps factory to data model"""

        model = PoseDelta

    dx = FuzzyFloat(-0.3, 0.3)
    dy = FuzzyFloat(-0.1, 0.1)
    do = FuzzyFloat(-0.3, 0.3)


def _diagonal(sigma):
    return tuple(
        tuple(sigma[i] ** 2 if i == j else 0.0 for j in range(3)) for i in range(3)
    )


class GaussianMixture3DFactory(factory.Factory):
    """Creates fake single-component noise models"""

    class Meta:
        """Maps factory to data model"""

        model = GaussianMixture3D

    weights = (1.0,)
    means = factory.LazyFunction(
        lambda: ((FuzzyFloat(-0.02, 0.02).fuzz(), FuzzyFloat(-0.02, 0.02).fuzz(), 0.0),)
    )
    covariances = FuzzyChoice(
        choices=[
            (_diagonal((0.01, 0.01, 0.01)),),
            (_diagonal((0.02, 0.005, 0.03)),),
            (_diagonal((0.005, 0.005, 0.005)),),
        ]
    )


class EpisodeConfigFactory(factory.Factory):
    """Creates small exploration episode configurations"""

    class Meta:
        """Maps factory to data model"""

        model = EpisodeConfig

    task = Task.EXPLORATION
    episode_id = factory.Sequence(lambda n: f"exploration-{n:04d}")
    world_seed = FuzzyInteger(0, 1000)
    world_size = 160
    max_steps = FuzzyInteger(20, 60)
    noise = FuzzyChoice(choices=[True, False])
    map_size = 320
    seed = FuzzyInteger(0, 1000)


def point_mass_models(actuation=(0.0, 0.0, 0.0), sensor=(0.0, 0.0, 0.0)):
    """Noise models whose draws are (almost exactly) fixed offsets"""
    floor = tuple(tuple(1e-8 if i == j else 0.0 for j in range(3)) for i in range(3))
    act = GaussianMixture3D((1.0,), (tuple(actuation),), (floor,))
    sen = GaussianMixture3D((1.0,), (tuple(sensor),), (floor,))
    return NoiseModelSet(
        {
            (action, kind): act if kind == NoiseKind.ACTUATION else sen
            for action in MOTION_ACTIONS
            for kind in NoiseKind
        }
    )
