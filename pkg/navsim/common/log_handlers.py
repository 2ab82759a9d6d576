######################################################################
# Copyright 2016, 2021 John J. Rofrano. All Rights Reserved.
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
Log Handlers

This module contains utility functions to set up logging
consistently for the CLI and for episode worker processes
"""
import logging

FORMAT_STRING = "[%(asctime)s] [%(levelname)s] [%(module)s] %(message)s"
DATE_FORMAT = "%Y-%m-%d %H:%M:%S %z"


def init_logging(app, level: int):
    """Set up logging for the command line tools"""
    app.logger.propagate = False
    if not app.logger.handlers:
        app.logger.addHandler(logging.StreamHandler())
    app.logger.setLevel(level)
    # Make all log formats consistent
    formatter = logging.Formatter(FORMAT_STRING, DATE_FORMAT)
    for handler in app.logger.handlers:
        handler.setFormatter(formatter)
    app.logger.debug("Logging handler established")


def init_worker_logging(level: int):
    """Gives a pool worker process the same log format as the parent"""
    logger = logging.getLogger("navsim")
    logger.propagate = False
    if not logger.handlers:
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter(FORMAT_STRING, DATE_FORMAT))
        logger.addHandler(handler)
    logger.setLevel(level)
