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

# pylint: disable=function-redefined, missing-function-docstring
# flake8: noqa
"""
CLI Steps

Steps file for running the flask commands and checking what they leave behind
"""
import filecmp
import os
import shlex
from behave import when, then

from navsim.episode import load_episode_set


@when('I run "{command_line}"')
def step_impl(context, command_line):
    """ Invoke a command on the app's click group """
    context.result = context.runner.invoke(args=shlex.split(command_line))

@then('the exit code should be {code:d}')
def step_impl(context, code):
    assert context.result.exit_code == code, context.result.output

@then('I should see "{message}"')
def step_impl(context, message):
    assert message in context.result.output, context.result.output

@then('the file "{name}" should exist')
def step_impl(context, name):
    assert os.path.exists(name), f"{name} is missing"

@then('the file "{name}" should not exist')
def step_impl(context, name):
    assert not os.path.exists(name), f"{name} was written"

@then('the files "{first}" and "{second}" should be identical')
def step_impl(context, first, second):
    assert filecmp.cmp(first, second, shallow=False)

@then('every episode in "{name}" should have a GED ratio of at least {ratio:g}')
def step_impl(context, name, ratio):
    records = load_episode_set(name)
    assert records
    for record in records:
        assert record.ged_ratio >= ratio, record
