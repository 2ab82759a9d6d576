"""
Environment for Behave Testing
"""
import logging
import os
import shutil
import tempfile
from os import getenv

from navsim import app

LOG_LEVEL = getenv("LOG_LEVEL", "CRITICAL").upper()


def before_all(context):
    """ Executed once before all tests """
    app.logger.setLevel(getattr(logging, LOG_LEVEL, logging.CRITICAL))
    context.runner = app.test_cli_runner()
    context.home = os.getcwd()
    context.config.setup_logging()


def before_scenario(context, scenario):
    """ Every scenario works in its own scratch directory """
    context.workdir = tempfile.mkdtemp(prefix="navsim-")
    os.chdir(context.workdir)


def after_scenario(context, scenario):
    """ Executed after each scenario """
    os.chdir(context.home)
    shutil.rmtree(context.workdir, ignore_errors=True)
