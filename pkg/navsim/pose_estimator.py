"""
Pose Estimator

Corrects the sensed pose change between two steps by aligning the
previous egocentric observation with the current one, and integrates the
corrected changes into the pose estimate used for mapping.

The alignment score of a candidate change d compares P = the previous
observation seen from the current frame under d with the current
observation C. With F = max(explored - obstacle, 0) the known-free part
of a grid:

    score(d) = sum(P_obs * C_obs) - w * sum(P_obs * F_C + F_P * C_obs)

Obstacles that line up are rewarded and obstacles landing on known free
space are penalized; w is the explored-channel weight.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from navsim import config
from navsim.geometry import (
    Pose,
    PoseDelta,
    between,
    compose,
    ego_agent_cell,
    ego_grid_transform,
    spatial_transform,
)
from navsim.mapping import OBSTACLE, EXPLORED, EgoMap, check_layers
from navsim.models import InvalidArgumentError

logger = logging.getLogger(__name__)

TIE_TOLERANCE = 1e-9


@dataclass(frozen=True)
class SearchBox:
    """Half-widths and steps of the discrete correction search"""

    r_xy: float = config.POSE_SEARCH_XY
    r_o: float = config.POSE_SEARCH_O
    step_xy: float = config.POSE_STEP_XY
    step_o: float = config.POSE_STEP_O

    def __post_init__(self):
        if not (self.step_xy > 0 and self.step_o > 0):
            raise InvalidArgumentError("search steps must be positive")
        if self.r_xy < 0 or self.r_o < 0:
            raise InvalidArgumentError("search radii must not be negative")

    @property
    def counts(self) -> Tuple[int, int]:
        """Steps on each side of zero for translation and rotation"""
        return int(round(self.r_xy / self.step_xy)), int(round(self.r_o / self.step_o))

    @classmethod
    def for_noise(cls, enabled: bool) -> "SearchBox":
        """
        The configured box when odometry is noisy; without noise the
        sensed change is exact, so the box shrinks to the zero offset
        """
        return cls() if enabled else cls(r_xy=0.0, r_o=0.0)


@dataclass
class SlamState:
    """What the estimator carries from one step to the next"""

    prev_ego: Optional[EgoMap]
    pose_estimate: Pose
    last_sensor_pose: Pose
    search: SearchBox = SearchBox()
    corrections: int = 0

    @classmethod
    def initial(
        cls,
        first_ego: Optional[EgoMap],
        sensor_pose: Pose,
        map_size: int = config.MAP_SIZE,
        resolution: float = config.RESOLUTION,
        search: Optional[SearchBox] = None,
    ) -> "SlamState":
        """Starts at the centre of the map facing east"""
        centre = map_size / 2 * resolution
        return cls(
            prev_ego=first_ego,
            pose_estimate=Pose(centre, centre, 0.0),
            last_sensor_pose=sensor_pose,
            search=search or SearchBox(),
        )


######################################################################
#  A L I G N M E N T   S C O R E
######################################################################
def _free(obstacle, explored):
    return np.clip(explored - obstacle, 0.0, None)


def _score(p_obs, p_exp, c_obs, c_free, weight: float, axis=None):
    conflict = p_obs * c_free + _free(p_obs, p_exp) * c_obs
    return np.sum(p_obs * c_obs, axis=axis) - weight * np.sum(conflict, axis=axis)


def alignment_score(
    prev_ego: EgoMap,
    cur_ego: EgoMap,
    delta: PoseDelta,
    resolution: float = config.RESOLUTION,
    weight: float = config.POSE_EXPLORED_WEIGHT,
) -> float:
    """Score of ``delta`` computed densely through the grid spatial transform"""
    prev_ego = np.asarray(prev_ego, dtype=np.float64)
    cur_ego = np.asarray(cur_ego, dtype=np.float64)
    seen = spatial_transform(prev_ego, ego_grid_transform(delta, prev_ego.shape[-1], resolution))
    return float(
        _score(
            seen[OBSTACLE],
            seen[EXPLORED],
            cur_ego[OBSTACLE],
            _free(cur_ego[OBSTACLE], cur_ego[EXPLORED]),
            weight,
        )
    )


def candidate_offsets(search: SearchBox) -> np.ndarray:
    """
    Offsets (dx, dy, do) of the search box in tie-break order:
    by the norm of the integer step, then lexicographically. The zero
    offset comes first.
    """
    n_xy, n_o = search.counts
    i, j, k = np.meshgrid(
        np.arange(-n_xy, n_xy + 1), np.arange(-n_xy, n_xy + 1), np.arange(-n_o, n_o + 1), indexing="ij"
    )
    i, j, k = i.ravel(), j.ravel(), k.ravel()
    order = np.lexsort((k, j, i, i * i + j * j + k * k))
    steps = np.stack([i[order], j[order], k[order]], axis=1).astype(np.float64)
    return steps * np.array([search.step_xy, search.step_xy, search.step_o])


def _bilinear(padded: np.ndarray, src_v: np.ndarray, src_u: np.ndarray) -> np.ndarray:
    """Samples (C, S + 2, S + 2) zero-padded layers at (src_v, src_u) in unpadded cells"""
    size = padded.shape[-1] - 2
    v0, u0 = np.floor(src_v), np.floor(src_u)
    fv, fu = src_v - v0, src_u - u0
    inside = (v0 >= -1) & (v0 <= size - 1) & (u0 >= -1) & (u0 <= size - 1)
    vi = np.where(inside, v0, -1).astype(np.intp) + 1
    ui = np.where(inside, u0, -1).astype(np.intp) + 1
    top = padded[:, vi, ui] * (1 - fu) + padded[:, vi, ui + 1] * fu
    bottom = padded[:, vi + 1, ui] * (1 - fu) + padded[:, vi + 1, ui + 1] * fu
    return (top * (1 - fv) + bottom * fv) * inside


def score_candidates(
    prev_ego: EgoMap,
    cur_ego: EgoMap,
    sensed: PoseDelta,
    search: Optional[SearchBox] = None,
    resolution: float = config.RESOLUTION,
    weight: float = config.POSE_EXPLORED_WEIGHT,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Scores sensed + offset for every offset of the search box

    Only cells the current observation knows about contribute to the
    score, so the previous observation is sampled there alone: a cell g
    of the current grid shows the previous grid at
    R(do) (g - b) + b + (dy, -dx) / res with b the agent cell.
    Returns the offsets (tie-break order) and their scores.
    """
    search = search or SearchBox()
    offsets = candidate_offsets(search)
    prev_ego = np.asarray(prev_ego, dtype=np.float64)
    cur_ego = np.asarray(cur_ego, dtype=np.float64)
    size = cur_ego.shape[-1]
    rows, cols = np.nonzero((cur_ego[OBSTACLE] > 0) | (cur_ego[EXPLORED] > 0))
    c_obs = cur_ego[OBSTACLE][rows, cols]
    c_free = _free(cur_ego[OBSTACLE], cur_ego[EXPLORED])[rows, cols]
    agent_row, agent_col = ego_agent_cell(size)
    du, dv = cols - float(agent_col), rows - float(agent_row)
    padded = np.pad(prev_ego, ((0, 0), (1, 1), (1, 1)))

    scores = np.empty(len(offsets))
    for rotation in np.unique(offsets[:, 2]):
        group = np.nonzero(offsets[:, 2] == rotation)[0]
        theta = sensed.do + rotation
        cos_t, sin_t = math.cos(theta), math.sin(theta)
        base_u = cos_t * du - sin_t * dv + agent_col
        base_v = sin_t * du + cos_t * dv + agent_row
        shift_u = (sensed.dy + offsets[group, 1]) / resolution
        shift_v = -(sensed.dx + offsets[group, 0]) / resolution
        src_v = base_v[np.newaxis, :] + shift_v[:, np.newaxis]
        src_u = base_u[np.newaxis, :] + shift_u[:, np.newaxis]
        seen = _bilinear(padded, src_v, src_u)
        scores[group] = _score(seen[OBSTACLE], seen[EXPLORED], c_obs, c_free, weight, axis=1)
    return offsets, scores


######################################################################
#  E S T I M A T I O N
######################################################################
def estimate_delta(
    prev_ego: EgoMap,
    cur_ego: EgoMap,
    sensed: PoseDelta,
    search: Optional[SearchBox] = None,
    resolution: float = config.RESOLUTION,
) -> PoseDelta:
    """
    Returns the pose change that best aligns two consecutive observations

    The sensed change comes back unchanged when no candidate beats it by
    more than the tie tolerance, or when either observation is empty.
    """
    prev_ego = np.asarray(prev_ego)
    cur_ego = np.asarray(cur_ego)
    check_layers(prev_ego, "Previous egocentric grid")
    check_layers(cur_ego, "Current egocentric grid")
    search = search or SearchBox()
    if search.counts == (0, 0):
        return sensed
    if not prev_ego.any() or not cur_ego.any():
        logger.debug("Empty observation, keeping the sensed delta")
        return sensed
    offsets, scores = score_candidates(prev_ego, cur_ego, sensed, search, resolution)
    best = int(np.argmax(scores))
    if scores[best] <= scores[0] + TIE_TOLERANCE:
        return sensed
    offset = offsets[best]
    return PoseDelta(sensed.dx + offset[0], sensed.dy + offset[1], sensed.do + offset[2])


def update(state: SlamState, cur_ego: EgoMap, sensor_pose: Pose, correct: bool = True) -> Pose:
    """
    Advances the pose estimate by one step

    With ``correct`` off the sensed change is integrated as is, so the
    estimate follows the raw odometry.
    """
    sensed = between(state.last_sensor_pose, sensor_pose)
    delta = sensed
    if correct and state.prev_ego is not None:
        delta = estimate_delta(state.prev_ego, cur_ego, sensed, state.search)
        if delta is not sensed:
            state.corrections += 1
            logger.debug("Corrected sensed delta %s to %s", sensed.as_tuple(), delta.as_tuple())
    state.pose_estimate = compose(state.pose_estimate, delta)
    state.prev_ego = cur_ego
    state.last_sensor_pose = sensor_pose
    return state.pose_estimate
