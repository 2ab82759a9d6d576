# Copyright 2016, 2023 John Rofrano. All Rights Reserved.
#
# Licensed under the Apache License, Version 2.0 (the 'License');
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
# https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an 'AS IS' BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""
Models for the Navigation Simulator

Shared enumerations, the exception hierarchy and the configuration /
result records exchanged between the episode runner and the CLI

Models
------
EpisodeConfig - everything needed to reproduce one episode
EpisodeMetrics - everything measured about one episode
RunConfig - a batch of episodes as requested on the command line

"""
import logging
from dataclasses import dataclass, field, fields, asdict
from enum import Enum
from typing import List, Optional, Tuple

from navsim import config

logger = logging.getLogger(__name__)


######################################################################
#  E X C E P T I O N S
######################################################################
class DataValidationError(Exception):
    """Used for an data validation errors when deserializing"""


class InvalidArgumentError(DataValidationError):
    """An argument is outside the domain of an operation"""


class InsufficientDataError(DataValidationError):
    """Not enough samples to fit a model"""


class DegenerateDataError(DataValidationError):
    """Samples carry no spread for the requested model"""


class SchemaError(DataValidationError):
    """A file parsed but does not have the expected structure"""


class InvalidActionError(DataValidationError):
    """The action is not legal in this context"""


class OutOfBoundsError(DataValidationError):
    """A pose or cell falls outside the grid"""


class ParseError(DataValidationError):
    """A file could not be parsed; carries line and field context"""

    def __init__(self, message: str, line: Optional[int] = None, field_name: Optional[str] = None):
        self.line = line
        self.field_name = field_name
        context = []
        if line is not None:
            context.append(f"line {line}")
        if field_name is not None:
            context.append(f"field '{field_name}'")
        if context:
            message = f"{', '.join(context)}: {message}"
        super().__init__(message)


class EpisodeFailure(Exception):
    """Used for runtime failures of an episode or episode generation"""


class GenerationFailureError(EpisodeFailure):
    """World or episode generation could not satisfy its parameters"""


######################################################################
#  E N U M E R A T I O N S
######################################################################
class Action(Enum):
    """Enumeration of navigational actions"""

    FORWARD = "forward"
    TURN_LEFT = "turn_left"
    TURN_RIGHT = "turn_right"
    STOP = "stop"


MOTION_ACTIONS = (Action.FORWARD, Action.TURN_LEFT, Action.TURN_RIGHT)


class NoiseKind(Enum):
    """Enumeration of the two noise sources per action"""

    ACTUATION = "actuation"
    SENSOR = "sensor"


class Task(Enum):
    """Enumeration of episode tasks"""

    EXPLORATION = "exploration"
    POINTGOAL = "pointgoal"


class EpisodeStatus(Enum):
    """How an episode ended"""

    DONE = "done"
    MAP_OVERFLOW = "map_overflow"
    STOPPED = "stopped"


GLOBAL_POLICIES = ("frontier", "random", "fixed_goal")
LOCAL_POLICIES = ("deterministic",)
WORLD_STYLES = ("rooms", "maze", "cave")


def _as_bool(value, name: str) -> bool:
    if isinstance(value, bool):
        return value
    if isinstance(value, str) and value.lower() in ("on", "true", "yes", "1", "off", "false", "no", "0"):
        return value.lower() in ("on", "true", "yes", "1")
    raise DataValidationError(f"Invalid type for boolean [{name}]: {type(value)}")


######################################################################
#  E P I S O D E   C O N F I G
######################################################################
@dataclass
class EpisodeConfig:  # pylint: disable=too-many-instance-attributes
    """
    Class that represents the configuration of one episode

    A world comes either from a generator seed or from a world file.
    PointGoal episodes carry a goal cell (row, col) in world coordinates
    and may override the start cell and heading.
    """

    task: Task = Task.EXPLORATION
    episode_id: str = ""
    world_seed: int = 0
    world_file: Optional[str] = None
    world_style: str = config.WORLD_STYLE
    world_size: int = config.WORLD_SIZE
    min_explorable_m2: float = config.MIN_EXPLORABLE_M2
    max_explorable_m2: float = config.MAX_EXPLORABLE_M2
    start: Optional[Tuple[int, int, float]] = None
    goal: Optional[Tuple[int, int]] = None
    max_steps: Optional[int] = None
    noise: bool = True
    pose_correction: bool = True
    local_policy: str = "deterministic"
    global_policy: Optional[str] = None
    noise_file: Optional[str] = None
    map_size: int = config.MAP_SIZE
    seed: int = 0

    def __post_init__(self):
        if self.max_steps is None:
            self.max_steps = (
                config.POINTGOAL_STEPS if self.task == Task.POINTGOAL else config.EXPLORATION_STEPS
            )
        if self.global_policy is None:
            self.global_policy = "fixed_goal" if self.task == Task.POINTGOAL else "frontier"
        self.validate()

    def __repr__(self):
        return f"<EpisodeConfig {self.task.value} id=[{self.episode_id}] seed=[{self.seed}]>"

    def validate(self):
        """Checks the cross-field rules of a configuration"""
        if int(self.max_steps) < 1:
            raise DataValidationError("max_steps must be at least 1")
        if self.local_policy not in LOCAL_POLICIES:
            raise DataValidationError(f"Unknown local policy: {self.local_policy}")
        if self.global_policy not in GLOBAL_POLICIES:
            raise DataValidationError(f"Unknown global policy: {self.global_policy}")
        if self.world_style not in WORLD_STYLES:
            raise DataValidationError(f"Unknown world style: {self.world_style}")
        if self.map_size < config.VISION_RANGE * 2 or self.map_size % 2:
            raise DataValidationError(f"map_size must be even and at least {config.VISION_RANGE * 2}")
        if self.task == Task.POINTGOAL:
            if self.goal is None:
                raise DataValidationError("PointGoal episodes require a goal")
            if self.global_policy != "fixed_goal":
                raise DataValidationError("PointGoal episodes use the fixed_goal global policy")
        else:
            if self.goal is not None:
                raise DataValidationError("Exploration episodes do not take a goal")
            if self.global_policy == "fixed_goal":
                raise DataValidationError("fixed_goal is only valid for PointGoal episodes")

    def serialize(self) -> dict:
        """Serializes an EpisodeConfig into a dictionary"""
        data = asdict(self)
        data["task"] = self.task.value
        data["start"] = list(self.start) if self.start is not None else None
        data["goal"] = list(self.goal) if self.goal is not None else None
        return data

    def deserialize(self, data: dict):
        """
        Deserializes an EpisodeConfig from a dictionary
        Args:
            data (dict): A dictionary containing the configuration
        """
        try:
            known = {f.name for f in fields(self)}
            unknown = sorted(set(data) - known)
            if unknown:
                raise DataValidationError(f"Invalid episode config: unknown keys {unknown}")
            values = dict(data)
            values["task"] = Task(values.get("task", self.task.value))
            if values.get("start") is not None:
                row, col, heading = values["start"]
                values["start"] = (int(row), int(col), float(heading))
            if values.get("goal") is not None:
                row, col = values["goal"]
                values["goal"] = (int(row), int(col))
            for name in ("noise", "pose_correction"):
                if name in values:
                    values[name] = _as_bool(values[name], name)
            if "max_steps" not in values or values["max_steps"] is None:
                values["max_steps"] = None
                if "global_policy" not in values:
                    values["global_policy"] = None
            elif "global_policy" not in values:
                values["global_policy"] = None
            for name, value in values.items():
                setattr(self, name, value)
            self.__post_init__()
        except ValueError as error:
            raise DataValidationError("Invalid episode config: " + str(error)) from error
        except TypeError as error:
            raise DataValidationError(
                "Invalid episode config: body contained bad or no data " + str(error)
            ) from error
        return self


######################################################################
#  E P I S O D E   M E T R I C S
######################################################################
@dataclass
class EpisodeMetrics:  # pylint: disable=too-many-instance-attributes
    """Class that represents what was measured during one episode"""

    episode_id: str = ""
    task: Task = Task.EXPLORATION
    seed: int = 0
    cov_m2: float = 0.0
    pct_cov: float = 0.0
    cov_curve: List[float] = field(default_factory=list)
    explorable_m2: float = 0.0
    success: bool = False
    spl: float = 0.0
    path_length_m: float = 0.0
    shortest_path_m: float = 0.0
    ged_ratio: float = 0.0
    final_pose_error_m: float = 0.0
    steps: int = 0
    status: EpisodeStatus = EpisodeStatus.DONE

    def __repr__(self):
        return f"<EpisodeMetrics id=[{self.episode_id}] status={self.status.value} steps={self.steps}>"

    def serialize(self) -> dict:
        """Serializes EpisodeMetrics into a dictionary"""
        data = asdict(self)
        data["task"] = self.task.value
        data["status"] = self.status.value
        return data

    SCALARS = (
        "cov_m2",
        "pct_cov",
        "explorable_m2",
        "success",
        "spl",
        "path_length_m",
        "shortest_path_m",
        "ged_ratio",
        "final_pose_error_m",
        "steps",
    )


######################################################################
#  R U N   C O N F I G
######################################################################
RUN_KEYS = ("seeds", "workers", "output_dir", "render")


@dataclass
class RunConfig:
    """
    Class that represents a batch of episodes requested from the CLI

    It mirrors EpisodeConfig (the ``episode`` template) and adds the
    seeds to run, the worker count, the output directory and rendering.
    """

    episode: EpisodeConfig = field(default_factory=EpisodeConfig)
    seeds: List[int] = field(default_factory=lambda: [0])
    workers: int = config.WORKERS
    output_dir: str = config.OUTPUT_DIR
    render: bool = False

    def deserialize(self, data: dict):
        """
        Deserializes a RunConfig from a flat dictionary: run keys plus
        EpisodeConfig keys. Unknown keys are rejected.
        """
        run_values = {key: data[key] for key in RUN_KEYS if key in data}
        episode_values = {key: value for key, value in data.items() if key not in RUN_KEYS}
        self.episode = EpisodeConfig().deserialize(episode_values)
        try:
            if "seeds" in run_values:
                self.seeds = parse_seeds(run_values["seeds"])
            if "workers" in run_values:
                self.workers = int(run_values["workers"])
            if "output_dir" in run_values:
                self.output_dir = str(run_values["output_dir"])
            if "render" in run_values:
                self.render = _as_bool(run_values["render"], "render")
        except (TypeError, ValueError) as error:
            raise DataValidationError("Invalid run config: " + str(error)) from error
        if self.workers < 1:
            raise DataValidationError("workers must be at least 1")
        return self

    def episode_configs(self) -> List[EpisodeConfig]:
        """One EpisodeConfig per seed; generated worlds follow the seed"""
        configs = []
        template = self.episode.serialize()
        for seed in self.seeds:
            values = dict(template)
            values["seed"] = seed
            values["episode_id"] = f"{self.episode.task.value}-{seed:04d}"
            if self.episode.world_file is None:
                values["world_seed"] = seed
            configs.append(EpisodeConfig().deserialize(values))
        return configs


def parse_seeds(value) -> List[int]:
    """Parses "0..4", "0,3,7", 5 or [1, 2] into a list of seeds"""
    if isinstance(value, int):
        return [value]
    if isinstance(value, (list, tuple)):
        return [int(seed) for seed in value]
    text = str(value).strip()
    if ".." in text:
        first, last = text.split("..", 1)
        first, last = int(first), int(last)
        if last < first:
            raise DataValidationError(f"Invalid seed range: {text}")
        return list(range(first, last + 1))
    return [int(seed) for seed in text.split(",") if seed.strip()]
