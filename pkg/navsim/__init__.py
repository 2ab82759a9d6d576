######################################################################
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
######################################################################

"""
Package: navsim

Grid-world simulator for exploration and PointGoal navigation
This module creates and configures the Flask app whose click group
carries the command line tools, and sets up the logging
"""
from flask import Flask
from navsim import config
from navsim.common import log_handlers

# NOTE: Do not change the order of this code
# The Flask app must be created
# BEFORE you import modules that depend on it !!!

# Create the Flask app
app = Flask(__name__)  # pylint: disable=invalid-name

# Load Configurations
app.config.from_object(config)

# Dependencies require we import the commands AFTER the Flask app is created
# pylint: disable=wrong-import-position, wrong-import-order, cyclic-import
from navsim import models  # noqa: F401, E402
from navsim.common import error_handlers, cli_commands  # noqa: F401, E402

log_handlers.init_logging(app, config.LOGGING_LEVEL)

app.logger.debug(70 * "*")
app.logger.debug("  N A V S I M   R E A D Y  ".center(70, "*"))
app.logger.debug(70 * "*")
