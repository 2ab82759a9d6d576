# coding: utf8

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
Descriptive process exit codes, for improved code readability

Every CLI command ends with one of these codes
"""

# Success
EXIT_0_OK = 0

# The command ran but some of its checks did not pass
EXIT_1_CHECKS_FAILED = 1

# Usage, parse or validation failure (click uses 2 for usage errors too)
EXIT_2_USAGE = 2

# Runtime failure of an episode or of episode/world generation
EXIT_3_EPISODE_FAILURE = 3
