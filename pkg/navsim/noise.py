"""
Noise Models

Gaussian mixture models of actuation and sensor noise, one pair per motion
action. Models are fitted with EM from calibration trials, selected by
held-out likelihood, sampled during episodes and stored as JSON.

Calibration trials start at p0 = (0, 0, 0); each row records where the
agent really ended (lidar) and what odometry reported. Residuals are
taken component-wise with angle differences wrapped, in the frame of the
pre-action pose.
"""
from __future__ import annotations

import csv
import json
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import logsumexp
from scipy.stats import multivariate_normal
from sklearn.exceptions import ConvergenceWarning
from sklearn.mixture import GaussianMixture

from navsim import config
from navsim.common.file_utils import atomic_write
from navsim.geometry import Pose, PoseDelta
from navsim.models import (
    Action,
    MOTION_ACTIONS,
    NoiseKind,
    DataValidationError,
    InsufficientDataError,
    DegenerateDataError,
    InvalidArgumentError,
    ParseError,
    SchemaError,
)

logger = logging.getLogger(__name__)

COMMANDS = {
    Action.FORWARD: PoseDelta(config.FORWARD_STEP, 0.0, 0.0),
    Action.TURN_LEFT: PoseDelta(0.0, 0.0, config.TURN_ANGLE),
    Action.TURN_RIGHT: PoseDelta(0.0, 0.0, -config.TURN_ANGLE),
}

CSV_COLUMNS = ("action", "lidar_x", "lidar_y", "lidar_o", "odom_x", "odom_y", "odom_o")


def wrap_angles(values: np.ndarray) -> np.ndarray:
    """Vectorized angle wrapping into (-pi, pi]"""
    wrapped = np.arctan2(np.sin(values), np.cos(values))
    wrapped[wrapped <= -math.pi] = math.pi
    return wrapped


######################################################################
#  G A U S S I A N   M I X T U R E
######################################################################
@dataclass(frozen=True)
class GaussianMixture3D:
    """
    Class that represents a weighted mixture of 3-variate Gaussians over
    (x meters, y meters, o radians)
    """

    weights: Tuple[float, ...]
    means: Tuple[Tuple[float, float, float], ...]
    covariances: Tuple[Tuple[Tuple[float, float, float], ...], ...]
    held_out_loglik: Optional[float] = field(default=None, compare=False)
    n_fit: int = field(default=0, compare=False)
    n_validation: int = field(default=0, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        object.__setattr__(self, "means", tuple(tuple(float(v) for v in m) for m in self.means))
        object.__setattr__(
            self,
            "covariances",
            tuple(tuple(tuple(float(v) for v in row) for row in cov) for cov in self.covariances),
        )
        self.validate()

    def __repr__(self):
        return f"<GaussianMixture3D k={self.n_components}>"

    @property
    def n_components(self) -> int:
        return len(self.weights)

    @property
    def weight_array(self) -> np.ndarray:
        return np.array(self.weights)

    @property
    def mean_array(self) -> np.ndarray:
        return np.array(self.means).reshape(-1, 3)

    @property
    def covariance_array(self) -> np.ndarray:
        return np.array(self.covariances).reshape(-1, 3, 3)

    def validate(self):
        """Checks the mixture invariants"""
        k = len(self.weights)
        if k == 0:
            raise DataValidationError("A mixture needs at least one component")
        if len(self.means) != k or len(self.covariances) != k:
            raise DataValidationError("weights, means and covariances must have the same length")
        weights = np.array(self.weights)
        if not np.all(np.isfinite(weights)) or np.any(weights < 0):
            raise DataValidationError("Mixture weights must be finite and non-negative")
        if abs(weights.sum() - 1.0) > 1e-9:
            raise DataValidationError(f"Mixture weights must sum to 1, not {weights.sum():.12g}")
        for mean in self.means:
            if len(mean) != 3 or not all(math.isfinite(v) for v in mean):
                raise DataValidationError("Each mean must be a finite 3-vector")
        for cov in self.covariances:
            matrix = np.array(cov, dtype=float)
            if matrix.shape != (3, 3) or not np.all(np.isfinite(matrix)):
                raise DataValidationError("Each covariance must be a finite 3x3 matrix")
            if not np.allclose(matrix, matrix.T, rtol=0.0, atol=1e-12):
                raise DataValidationError("Covariances must be symmetric")
            if np.linalg.eigvalsh(matrix).min() < config.NOISE_COVARIANCE_FLOOR * (1.0 - 1e-6):
                raise DataValidationError(
                    f"Covariance eigenvalues must be at least {config.NOISE_COVARIANCE_FLOOR}"
                )

    def log_likelihood(self, samples) -> float:
        """Mean per-sample log density of the samples under the mixture"""
        samples = np.asarray(samples, dtype=float).reshape(-1, 3)
        per_component = np.stack(
            [
                math.log(weight) + multivariate_normal.logpdf(samples, mean=mean, cov=cov)
                if weight > 0
                else np.full(len(samples), -np.inf)
                for weight, mean, cov in zip(self.weights, self.mean_array, self.covariance_array)
            ]
        ).reshape(self.n_components, len(samples))
        return float(np.mean(logsumexp(per_component, axis=0)))

    def sample_array(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draws ``size`` raw samples as an (n, 3) array"""
        components = rng.choice(self.n_components, size=size, p=self.weight_array)
        means, covs = self.mean_array, self.covariance_array
        out = np.empty((size, 3))
        for component in range(self.n_components):
            chosen = components == component
            count = int(chosen.sum())
            if count:
                out[chosen] = rng.multivariate_normal(means[component], covs[component], size=count)
        return out

    def serialize(self) -> dict:
        return {
            "weights": list(self.weights),
            "means": [list(m) for m in self.means],
            "covariances": [[list(row) for row in cov] for cov in self.covariances],
        }

    @classmethod
    def from_sklearn(cls, mixture: GaussianMixture, **metadata) -> "GaussianMixture3D":
        weights = mixture.weights_ / mixture.weights_.sum()
        covariances = [(cov + cov.T) / 2.0 for cov in mixture.covariances_]
        return cls(tuple(weights), tuple(map(tuple, mixture.means_)), tuple(covariances), **metadata)


def sample(model: GaussianMixture3D, rng: np.random.Generator) -> PoseDelta:
    """Draws a component by weight and then a 3-variate Gaussian sample from it"""
    dx, dy, do = model.sample_array(rng, 1)[0]
    return PoseDelta(dx, dy, do)


######################################################################
#  F I T T I N G
######################################################################
def split_sizes(n_samples: int, split: float) -> Tuple[int, int]:
    """(fit, validation) sizes; both at least one sample"""
    n_validation = min(n_samples - 1, max(1, int(round(n_samples * split))))
    return n_samples - n_validation, n_validation


def fit_gmm(
    samples,
    k_candidates: Iterable[int] = range(config.NOISE_K_MIN, config.NOISE_K_MAX + 1),
    split: float = config.NOISE_SPLIT,
    seed: int = 0,
) -> GaussianMixture3D:
    """
    Fits a mixture for every candidate component count on the fit split and
    keeps the one with the best held-out mean log-likelihood (ties go to
    the smaller count)
    Args:
        samples: (n, 3) residuals
        k_candidates: component counts to try
        split: fraction of samples held out for selection
        seed: seeds the split and the EM initialisation
    """
    samples = np.asarray(samples, dtype=float).reshape(-1, 3)
    candidates = sorted(set(int(k) for k in k_candidates))
    if not candidates or candidates[0] < 1:
        raise InvalidArgumentError("Component counts must be positive")
    if not 0.0 < split < 1.0:
        raise InvalidArgumentError(f"split must lie in (0, 1), not {split}")
    if not np.all(np.isfinite(samples)):
        raise InvalidArgumentError("Samples must be finite")
    if len(samples) < max(candidates) + 1:
        raise InsufficientDataError(
            f"{len(samples)} samples cannot fit up to {max(candidates)} components"
        )
    if max(candidates) > 1 and np.all(samples == samples[0]):
        raise DegenerateDataError("All samples are identical; fit with k=1")

    rng = np.random.default_rng(seed)
    order = rng.permutation(len(samples))
    n_fit, n_validation = split_sizes(len(samples), split)
    validation, fitting = samples[order[:n_validation]], samples[order[n_validation:]]

    best, best_score = None, -np.inf
    for k in candidates:
        if k > n_fit:
            logger.debug("Skipping k=%d: only %d samples in the fit split", k, n_fit)
            continue
        mixture = GaussianMixture(
            n_components=k,
            covariance_type="full",
            reg_covar=config.NOISE_COVARIANCE_FLOOR,
            tol=config.NOISE_EM_TOLERANCE,
            max_iter=config.NOISE_EM_MAX_ITER,
            n_init=config.NOISE_EM_RESTARTS,
            init_params="k-means++",
            random_state=seed,
        )
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ConvergenceWarning)
            mixture.fit(fitting)
        score = float(mixture.score(validation))
        logger.debug("k=%d held-out log-likelihood %.6f", k, score)
        if score > best_score:
            best, best_score = (k, mixture), score

    if best is None:
        raise InsufficientDataError("No component count fits the available samples")
    k, mixture = best
    logger.debug("Selected k=%d with held-out log-likelihood %.6f", k, best_score)
    return GaussianMixture3D.from_sklearn(
        mixture, held_out_loglik=best_score, n_fit=n_fit, n_validation=n_validation
    )


######################################################################
#  N O I S E   M O D E L   S E T
######################################################################
@dataclass
class NoiseModelSet:
    """Actuation and sensor models for each motion action"""

    models: Dict[Tuple[Action, NoiseKind], GaussianMixture3D]

    def __post_init__(self):
        for action in MOTION_ACTIONS:
            for kind in NoiseKind:
                if (action, kind) not in self.models:
                    raise SchemaError(f"Missing noise model ({action.value}, {kind.value})")
        if len(self.models) != len(MOTION_ACTIONS) * len(NoiseKind):
            raise SchemaError("A noise model set holds exactly 6 models")

    def get(self, action: Action, kind: NoiseKind) -> GaussianMixture3D:
        return self.models[(action, kind)]

    def serialize(self) -> dict:
        return {
            action.value: {kind.value: self.get(action, kind).serialize() for kind in NoiseKind}
            for action in MOTION_ACTIONS
        }


@dataclass
class CalibrationDataset:
    """Per-action (lidar pose, odometry pose) pairs recorded from p0 = (0, 0, 0)"""

    samples: Dict[Action, List[Tuple[Pose, Pose]]] = field(default_factory=dict)

    def add(self, action: Action, lidar: Pose, odom: Pose):
        self.samples.setdefault(action, []).append((lidar, odom))

    def count(self, action: Action) -> int:
        return len(self.samples.get(action, []))


def residuals(
    pairs: Sequence[Tuple[Pose, Pose]], command: PoseDelta
) -> Tuple[np.ndarray, np.ndarray]:
    """Actuation (p1 - u) and sensor (p1' - p1) residuals, angles wrapped"""
    lidar = np.array([p.as_tuple() for p, _ in pairs], dtype=float).reshape(-1, 3)
    odom = np.array([q.as_tuple() for _, q in pairs], dtype=float).reshape(-1, 3)
    actuation = lidar - np.array(command.as_tuple())
    sensor = odom - lidar
    actuation[:, 2] = wrap_angles(actuation[:, 2])
    sensor[:, 2] = wrap_angles(sensor[:, 2])
    return actuation, sensor


def build_noise_models(
    data: CalibrationDataset,
    commands: Optional[Dict[Action, PoseDelta]] = None,
    k_candidates: Iterable[int] = range(config.NOISE_K_MIN, config.NOISE_K_MAX + 1),
    split: float = config.NOISE_SPLIT,
    seed: int = 0,
) -> NoiseModelSet:
    """
    Fits the six actuation/sensor models from a calibration dataset

    Residuals with no spread at all are refitted with a single component.
    """
    commands = commands or COMMANDS
    candidates = sorted(set(int(k) for k in k_candidates))
    models = {}
    for action in MOTION_ACTIONS:
        pairs = data.samples.get(action, [])
        if len(pairs) < 2:
            raise InsufficientDataError(
                f"Action {action.value} needs at least 2 samples, found {len(pairs)}"
            )
        usable = [k for k in candidates if k + 1 <= len(pairs)] or [1]
        actuation, sensor = residuals(pairs, commands[action])
        for kind, values in ((NoiseKind.ACTUATION, actuation), (NoiseKind.SENSOR, sensor)):
            try:
                model = fit_gmm(values, usable, split, seed)
            except DegenerateDataError:
                logger.warning(
                    "Degenerate %s %s residuals, refitting with k=1", action.value, kind.value
                )
                model = fit_gmm(values, [1], split, seed)
            logger.info(
                "Fitted %s/%s: k=%d held-out log-likelihood %.4f",
                action.value,
                kind.value,
                model.n_components,
                model.held_out_loglik,
            )
            models[(action, kind)] = model
    return NoiseModelSet(models)


def generate_calibration(
    models: NoiseModelSet,
    n_per_action: int,
    commands: Optional[Dict[Action, PoseDelta]] = None,
    seed: int = 0,
) -> CalibrationDataset:
    """Synthesizes calibration trials from a known model set"""
    commands = commands or COMMANDS
    rng = np.random.default_rng(seed)
    data = CalibrationDataset()
    for action in MOTION_ACTIONS:
        command = np.array(commands[action].as_tuple())
        actuation = models.get(action, NoiseKind.ACTUATION).sample_array(rng, n_per_action)
        sensor = models.get(action, NoiseKind.SENSOR).sample_array(rng, n_per_action)
        for act_noise, sen_noise in zip(actuation, sensor):
            lidar = command + act_noise
            odom = lidar + sen_noise
            data.add(action, Pose(*lidar), Pose(*odom))
    return data


def _diagonal(sx: float, sy: float, so_deg: float) -> Tuple[Tuple[float, ...], ...]:
    so = math.radians(so_deg)
    return ((sx * sx, 0.0, 0.0), (0.0, sy * sy, 0.0), (0.0, 0.0, so * so))


def default_noise_models() -> NoiseModelSet:
    """Hand-specified models at the scale of a small wheeled base"""
    forward_act = GaussianMixture3D(
        (0.7, 0.3),
        ((-0.005, 0.0, 0.0), (-0.02, 0.005, math.radians(0.5))),
        (_diagonal(0.01, 0.008, 1.0), _diagonal(0.02, 0.01, 1.5)),
    )
    forward_sen = GaussianMixture3D((1.0,), ((0.005, 0.0, 0.0),), (_diagonal(0.025, 0.015, 2.0),))
    turn_act = GaussianMixture3D((1.0,), ((0.0, 0.0, 0.0),), (_diagonal(0.005, 0.005, 1.5),))
    turn_sen = GaussianMixture3D((1.0,), ((0.0, 0.0, 0.0),), (_diagonal(0.01, 0.01, 2.0),))
    return NoiseModelSet(
        {
            (Action.FORWARD, NoiseKind.ACTUATION): forward_act,
            (Action.FORWARD, NoiseKind.SENSOR): forward_sen,
            (Action.TURN_LEFT, NoiseKind.ACTUATION): turn_act,
            (Action.TURN_LEFT, NoiseKind.SENSOR): turn_sen,
            (Action.TURN_RIGHT, NoiseKind.ACTUATION): turn_act,
            (Action.TURN_RIGHT, NoiseKind.SENSOR): turn_sen,
        }
    )


######################################################################
#  F I L E   F O R M A T S
######################################################################
def save_models(models: NoiseModelSet, path: str):
    """Writes a noise model file; floats keep their shortest exact repr"""
    with atomic_write(path) as stream:
        json.dump(models.serialize(), stream, indent=2)
        stream.write("\n")


def _mixture_from_dict(data, where: str) -> GaussianMixture3D:
    if not isinstance(data, dict):
        raise ParseError("expected an object", field_name=where)
    for key in ("weights", "means", "covariances"):
        if key not in data:
            raise ParseError("missing field", field_name=f"{where}.{key}")
    try:
        weights = [float(w) for w in data["weights"]]
        means = [tuple(float(v) for v in mean) for mean in data["means"]]
        covariances = [
            tuple(tuple(float(v) for v in row) for row in cov) for cov in data["covariances"]
        ]
    except (TypeError, ValueError) as error:
        raise ParseError(f"bad numeric data: {error}", field_name=where) from error
    try:
        return GaussianMixture3D(tuple(weights), tuple(means), tuple(covariances))
    except DataValidationError as error:
        raise DataValidationError(f"{where}: {error}") from error


def load_models(path: str) -> NoiseModelSet:
    """Reads a noise model file"""
    try:
        with open(path, encoding="utf-8") as stream:
            data = json.load(stream)
    except json.JSONDecodeError as error:
        raise ParseError(error.msg, line=error.lineno) from error
    if not isinstance(data, dict):
        raise SchemaError("A noise model file holds a JSON object")
    models = {}
    for action in MOTION_ACTIONS:
        for kind in NoiseKind:
            entry = data.get(action.value, {})
            if not isinstance(entry, dict) or kind.value not in entry:
                raise SchemaError(f"Missing noise model ({action.value}, {kind.value})")
            models[(action, kind)] = _mixture_from_dict(
                entry[kind.value], f"{action.value}.{kind.value}"
            )
    return NoiseModelSet(models)


def load_calibration(path: str) -> CalibrationDataset:
    """Reads a calibration CSV with one trial per row"""
    data = CalibrationDataset()
    with open(path, encoding="utf-8", newline="") as stream:
        reader = csv.DictReader(stream)
        header = reader.fieldnames or []
        for column in CSV_COLUMNS:
            if column not in header:
                raise ParseError(f"missing column '{column}'", line=1, field_name=column)
        for row in reader:
            line = reader.line_num
            try:
                action = Action(row["action"].strip())
            except (ValueError, AttributeError) as error:
                raise ParseError(
                    f"unknown action {row['action']!r}", line=line, field_name="action"
                ) from error
            if action == Action.STOP:
                raise ParseError("stop has no noise model", line=line, field_name="action")
            values = {}
            for column in CSV_COLUMNS[1:]:
                try:
                    values[column] = float(row[column])
                except (TypeError, ValueError) as error:
                    raise ParseError(
                        f"not a number: {row[column]!r}", line=line, field_name=column
                    ) from error
            data.add(
                action,
                Pose(values["lidar_x"], values["lidar_y"], values["lidar_o"]),
                Pose(values["odom_x"], values["odom_y"], values["odom_o"]),
            )
    return data


def save_calibration(data: CalibrationDataset, path: str):
    """Writes a calibration CSV"""
    with atomic_write(path, newline="") as stream:
        writer = csv.writer(stream)
        writer.writerow(CSV_COLUMNS)
        for action in MOTION_ACTIONS:
            for lidar, odom in data.samples.get(action, []):
                writer.writerow(
                    [action.value, *map(repr, lidar.as_tuple()), *map(repr, odom.as_tuple())]
                )
