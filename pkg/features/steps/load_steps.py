######################################################################
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
######################################################################

# pylint: disable=function-redefined, missing-function-docstring
# flake8: noqa
"""
Load Steps

Steps that write the input files a scenario needs into its scratch directory
"""
import numpy as np
from behave import given

from navsim.noise import default_noise_models, generate_calibration, save_calibration
from navsim.world import GridWorld, save_world


def corridor(blocked_column=None):
    occupancy = np.ones((20, 120), dtype=bool)
    occupancy[1:-1, 1:-1] = False
    if blocked_column is not None:
        occupancy[:, blocked_column] = True
    return GridWorld(occupancy, start=(10, 10, 0.0))


@given('a corridor world "{name}"')
def step_impl(context, name):
    """ Write a 1 m by 6 m corridor with the agent at its west end """
    save_world(corridor(), name)


@given('a corridor world "{name}" blocked at column {column:d}')
def step_impl(context, name, column):
    save_world(corridor(column), name)


@given('a calibration file "{name}" with {count:d} trials per action')
def step_impl(context, name, count):
    save_calibration(generate_calibration(default_noise_models(), count, seed=0), name)


@given('a calibration file "{name}" without the "{column}" column')
def step_impl(context, name, column):
    header = ["action", "lidar_x", "lidar_y", "lidar_o", "odom_x", "odom_y", "odom_o"]
    header.remove(column)
    with open(name, "w", encoding="utf-8") as stream:
        stream.write(",".join(header) + "\n")
        stream.write(",".join(["forward"] + ["0.0"] * (len(header) - 1)) + "\n")
