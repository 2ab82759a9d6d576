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
"""
Module: error_handlers

Turns the exceptions raised by a command into a logged message and
a process exit code
"""
import functools

import click

from navsim import app
from navsim.models import DataValidationError, EpisodeFailure
from . import status

HANDLERS = {}


def errorhandler(error_class):
    """Registers a handler for an exception class and its subclasses"""

    def register(handler):
        HANDLERS[error_class] = handler
        return handler

    return register


def handle_errors(command):
    """Wraps a command so that known errors end it with their exit code"""

    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except tuple(HANDLERS) as error:
            handler = next(HANDLERS[cls] for cls in type(error).__mro__ if cls in HANDLERS)
            raise click.exceptions.Exit(handler(error)) from error

    return wrapper


######################################################################
# Error Handlers
######################################################################
@errorhandler(DataValidationError)
def request_validation_error(error):
    """Handles Value Errors from bad data"""
    return usage_error(error)


@errorhandler(OSError)
def file_error(error):
    """Handles unreadable inputs and unwritable outputs with EXIT_2_USAGE"""
    return usage_error(f"{error.strerror or error}: {error.filename}" if error.filename else error)


def usage_error(error):
    """Reports a usage or validation problem"""
    message = str(error)
    app.logger.warning(message)
    click.echo(f"Error: {message}", err=True)
    return status.EXIT_2_USAGE


@errorhandler(EpisodeFailure)
def episode_failure(error):
    """Handles episode and generation failures with EXIT_3_EPISODE_FAILURE"""
    message = str(error)
    app.logger.error(message)
    click.echo(f"Episode failure: {message}", err=True)
    return status.EXIT_3_EPISODE_FAILURE
