"""
Benchmark

The fixed acceptance suite behind the ``bench`` command. Every check
returns a CheckResult (pass/fail, a one-line detail and its wall time);
``--quick`` shrinks the episode counts and step budgets.
"""
from __future__ import annotations

import logging
import math
import os
import tempfile
import time
from dataclasses import dataclass, replace
from typing import Callable, List, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra

from navsim.episode import (
    PRESETS,
    EpisodeFilters,
    ged_ratio,
    generate_episode_set,
    run_batch,
    write_metrics_csv,
)
from navsim.models import EpisodeConfig, MOTION_ACTIONS, NoiseKind
from navsim.noise import (
    COMMANDS,
    GaussianMixture3D,
    build_noise_models,
    default_noise_models,
    fit_gmm,
    generate_calibration,
    residuals,
)
from navsim.planner import fmm, geodesic_distance
from navsim.world import generate_world

logger = logging.getLogger(__name__)

RESOLUTION = 0.05
OPEN_GRID_TOLERANCE = 0.02
LOGLIK_TOLERANCE = 0.15
FBE_MIN_COVERAGE = 0.95
POINTGOAL_MIN_SPL = 0.80
NOISY_MIN_SUCCESS = 0.85


@dataclass
class CheckResult:
    """Outcome of one acceptance check"""

    name: str
    passed: bool
    detail: str
    seconds: float = 0.0


@dataclass(frozen=True)
class BenchSizes:
    """How much work each check does"""

    fmm_worlds: int = 50
    gmm_samples: int = 600
    gmm_k_max: int = 20
    k_recovery_seeds: int = 20
    k_recovery_needed: int = 18
    ablation_episodes: int = 20
    ablation_steps: int = 1000
    fbe_episodes: int = 10
    fbe_steps: int = 1000
    pointgoal_episodes: int = 100
    filter_episodes: int = 10
    determinism_steps: int = 300


FULL = BenchSizes()
QUICK = BenchSizes(
    fmm_worlds=5,
    gmm_samples=300,
    gmm_k_max=4,
    k_recovery_seeds=5,
    k_recovery_needed=4,
    ablation_episodes=2,
    ablation_steps=200,
    fbe_episodes=2,
    fbe_steps=1000,
    pointgoal_episodes=5,
    filter_episodes=3,
    determinism_steps=50,
)


######################################################################
#  H E L P E R S
######################################################################
def grid_dijkstra(free: np.ndarray, source) -> np.ndarray:
    """8-connected shortest paths in cells; diagonals may not cut blocked corners"""
    height, width = free.shape
    index = np.arange(height * width).reshape(height, width)
    rows, cols, weights = [], [], []
    for dr, dc in ((0, 1), (1, 0), (1, 1), (1, -1)):
        c0, c1 = max(0, -dc), width - max(0, dc)
        here = free[0 : height - dr, c0:c1]
        there = free[dr:height, c0 + dc : c1 + dc]
        ok = here & there
        if dr and dc:
            ok &= free[dr:height, c0:c1] & free[0 : height - dr, c0 + dc : c1 + dc]
        rows.append(index[0 : height - dr, c0:c1][ok])
        cols.append(index[dr:height, c0 + dc : c1 + dc][ok])
        weights.append(np.full(int(ok.sum()), math.sqrt(2.0) if dr and dc else 1.0))
    graph = coo_matrix(
        (np.concatenate(weights), (np.concatenate(rows), np.concatenate(cols))),
        shape=(height * width, height * width),
    ).tocsr()
    return dijkstra(graph, directed=False, indices=index[tuple(source)]).reshape(height, width)


def paired_gap(better: Sequence[float], worse: Sequence[float]):
    """Mean of worse - better and its standard error"""
    diffs = np.asarray(worse, dtype=float) - np.asarray(better, dtype=float)
    if len(diffs) < 2:
        return float(diffs.mean()), 0.0
    return float(diffs.mean()), float(diffs.std(ddof=1) / math.sqrt(len(diffs)))


######################################################################
#  C H E C K S
######################################################################
def check_fmm(sizes: BenchSizes, seed: int) -> CheckResult:
    """Euclidean <= T <= 8-connected Dijkstra on random worlds; T close to Euclidean in the open"""
    rng = np.random.default_rng(seed)
    violations = 0
    for _ in range(sizes.fmm_worlds):
        free = rng.random((100, 100)) > 0.1
        cells = np.argwhere(free)
        source = tuple(int(v) for v in cells[rng.integers(len(cells))])
        field = fmm((~free).astype(np.float32), source, dilation=0, resolution=RESOLUTION)
        oracle = grid_dijkstra(free, source) * RESOLUTION
        picks = cells[rng.choice(len(cells), size=min(20, len(cells)), replace=False)]
        for row, col in picks:
            if not np.isfinite(oracle[row, col]):
                continue
            value = field.value((int(row), int(col)))
            straight = math.hypot(row - source[0], col - source[1]) * RESOLUTION
            if not straight - 0.05 <= value <= oracle[row, col] + 1e-9:
                violations += 1

    open_field = fmm(np.zeros((201, 201), dtype=np.float32), (100, 100), resolution=RESOLUTION)
    rows, cols = np.mgrid[0:201, 0:201]
    straight = np.hypot(rows - 100, cols - 100) * RESOLUTION
    far = straight >= 2.5
    worst = float(np.max(np.abs(open_field.T[far] - straight[far]) / straight[far]))
    passed = violations == 0 and worst <= OPEN_GRID_TOLERANCE
    return CheckResult(
        "fmm", passed, f"{violations} sandwich violations, open-grid error {worst:.2%}"
    )


def check_gmm(sizes: BenchSizes, seed: int) -> CheckResult:
    """Closed-loop fit of the default models and recovery of k = 2"""
    truth = default_noise_models()
    candidates = range(1, sizes.gmm_k_max + 1)
    fitted = build_noise_models(
        generate_calibration(truth, sizes.gmm_samples, seed=seed), k_candidates=candidates, seed=seed
    )
    held_out = generate_calibration(truth, sizes.gmm_samples, seed=seed + 1)
    worst = 0.0
    for action in MOTION_ACTIONS:
        actuation, sensor = residuals(held_out.samples[action], COMMANDS[action])
        for kind, values in ((NoiseKind.ACTUATION, actuation), (NoiseKind.SENSOR, sensor)):
            gap = abs(
                fitted.get(action, kind).log_likelihood(values)
                - truth.get(action, kind).log_likelihood(values)
            )
            worst = max(worst, gap)

    separated = GaussianMixture3D(
        (0.5, 0.5),
        ((0.0, 0.0, 0.0), (0.3, 0.3, 0.3)),
        (np.eye(3) * 1e-4, np.eye(3) * 1e-4),
    )
    recovered = 0
    for index in range(sizes.k_recovery_seeds):
        draws = separated.sample_array(np.random.default_rng(seed + 100 + index), sizes.gmm_samples)
        model = fit_gmm(draws, range(1, 5), seed=seed + index)
        recovered += model.n_components == 2
    passed = worst <= LOGLIK_TOLERANCE and recovered >= sizes.k_recovery_needed
    return CheckResult(
        "gmm",
        passed,
        f"worst log-likelihood gap {worst:.3f} nats, k recovered {recovered}/{sizes.k_recovery_seeds}",
    )


def check_pose_correction(sizes: BenchSizes, seed: int, workers: int) -> CheckResult:
    """Noisy maze exploration with correction on beats correction off"""
    seeds = [seed + index for index in range(sizes.ablation_episodes)]
    base = [
        EpisodeConfig(
            episode_id=f"ablation-{s}",
            world_seed=s,
            world_style="maze",
            world_size=240,
            max_steps=sizes.ablation_steps,
            seed=s,
        )
        for s in seeds
    ]
    corrected = run_batch(base, workers)
    raw = run_batch([replace(cfg, pose_correction=False) for cfg in base], workers)
    error_on = [r.metrics.final_pose_error_m for r in corrected]
    error_off = [r.metrics.final_pose_error_m for r in raw]
    cov_on = [r.metrics.pct_cov for r in corrected]
    cov_off = [r.metrics.pct_cov for r in raw]
    error_gap, error_se = paired_gap(error_on, error_off)
    cov_gap, cov_se = paired_gap(cov_off, cov_on)
    passed = error_gap > error_se and cov_gap > cov_se
    return CheckResult(
        "pose-correction",
        passed,
        f"pose error {np.mean(error_on):.3f} vs {np.mean(error_off):.3f} m (gap {error_gap:.3f} "
        f"> se {error_se:.3f}), %Cov {np.mean(cov_on):.3f} vs {np.mean(cov_off):.3f} "
        f"(gap {cov_gap:.3f} > se {cov_se:.3f})",
    )


def check_exploration(sizes: BenchSizes, seed: int, workers: int) -> CheckResult:
    """Noise-free frontier exploration of small worlds"""
    configs = [
        EpisodeConfig(
            episode_id=f"fbe-{seed + index}",
            world_seed=seed + index,
            max_steps=sizes.fbe_steps,
            noise=False,
            seed=seed + index,
        )
        for index in range(sizes.fbe_episodes)
    ]
    results = run_batch(configs, workers)
    coverage = float(np.mean([r.metrics.pct_cov for r in results]))
    monotone = all(np.all(np.diff(r.metrics.cov_curve) >= 0.0) for r in results)
    return CheckResult(
        "frontier-exploration",
        coverage >= FBE_MIN_COVERAGE and monotone,
        f"mean %Cov {coverage:.3f}, curves monotone: {monotone}",
    )


def check_pointgoal(sizes: BenchSizes, seed: int, workers: int) -> CheckResult:
    """Fixed-goal PointGoal without noise, then with noise and correction"""
    records = generate_episode_set(sizes.pointgoal_episodes, seed=seed, noise=False)
    clean = run_batch([record.config for record in records], workers)
    noisy = run_batch([replace(record.config, noise=True) for record in records], workers)
    success = float(np.mean([r.metrics.success for r in clean]))
    mean_spl = float(np.mean([r.metrics.spl for r in clean]))
    noisy_success = float(np.mean([r.metrics.success for r in noisy]))
    short = sum(
        r.metrics.path_length_m < r.metrics.shortest_path_m - 0.05 for r in clean if r.metrics.success
    )
    passed = (
        success == 1.0 and mean_spl >= POINTGOAL_MIN_SPL and noisy_success >= NOISY_MIN_SUCCESS and not short
    )
    return CheckResult(
        "pointgoal",
        passed,
        f"success {success:.2f}, SPL {mean_spl:.3f}, noisy success {noisy_success:.2f}",
    )


def check_filters(sizes: BenchSizes, seed: int) -> CheckResult:
    """Every Hard-GEDR and Hard-Dist episode meets its filter on recomputation"""
    failures = 0
    emitted = 0
    for name in ("hard-gedr", "hard-dist"):
        filters: EpisodeFilters = PRESETS[name]
        records = generate_episode_set(sizes.filter_episodes, seed=seed, filters=filters, world_style="maze")
        for record in records:
            cfg = record.config
            world = generate_world(cfg.world_seed, size=cfg.world_size, style=cfg.world_style)
            start, goal = cfg.start[:2], cfg.goal
            geodesic = geodesic_distance(world.footprint_mask(), start, goal)
            straight = math.hypot(goal[0] - start[0], goal[1] - start[1]) * RESOLUTION
            ratio = ged_ratio(geodesic, straight)
            emitted += 1
            if geodesic != record.geodesic_m or not filters.accepts(geodesic, ratio):
                failures += 1
    return CheckResult("episode-filters", failures == 0, f"{failures} of {emitted} episodes off filter")


def check_determinism(sizes: BenchSizes, seed: int) -> CheckResult:
    """The same episode twice gives byte-identical metrics CSVs"""
    cfg = EpisodeConfig(
        episode_id="determinism", world_seed=seed, max_steps=sizes.determinism_steps, seed=seed
    )
    blobs = []
    with tempfile.TemporaryDirectory() as directory:
        for attempt in range(2):
            path = os.path.join(directory, f"metrics-{attempt}.csv")
            write_metrics_csv([run_batch([cfg])[0].metrics], path)
            with open(path, "rb") as stream:
                blobs.append(stream.read())
    same = blobs[0] == blobs[1]
    return CheckResult("determinism", same, "identical metrics CSV" if same else "metrics CSVs differ")


######################################################################
#  S U I T E
######################################################################
def _timed(name: str, check: Callable[[], CheckResult]) -> CheckResult:
    started = time.perf_counter()
    try:
        result = check()
    except Exception as error:  # pylint: disable=broad-except
        logger.exception("Check %s raised", name)
        result = CheckResult(name, False, f"{type(error).__name__}: {error}")
    result.seconds = time.perf_counter() - started
    logger.info("%s: %s (%.1f s)", result.name, "PASS" if result.passed else "FAIL", result.seconds)
    return result


def run_benchmark(quick: bool = False, seed: int = 0, workers: int = 1) -> List[CheckResult]:
    """Runs every acceptance check in a fixed order"""
    sizes = QUICK if quick else FULL
    checks = [
        ("fmm", lambda: check_fmm(sizes, seed)),
        ("gmm", lambda: check_gmm(sizes, seed)),
        ("pose-correction", lambda: check_pose_correction(sizes, seed, workers)),
        ("frontier-exploration", lambda: check_exploration(sizes, seed, workers)),
        ("pointgoal", lambda: check_pointgoal(sizes, seed, workers)),
        ("episode-filters", lambda: check_filters(sizes, seed)),
        ("determinism", lambda: check_determinism(sizes, seed)),
    ]
    return [_timed(name, check) for name, check in checks]


def format_table(results: Sequence[CheckResult]) -> str:
    """A fixed-width pass/fail table"""
    width = max(len(result.name) for result in results)
    lines = [f"{'check':<{width}}  status  seconds  detail"]
    for result in results:
        status = "PASS" if result.passed else "FAIL"
        lines.append(f"{result.name:<{width}}  {status:<6}  {result.seconds:7.1f}  {result.detail}")
    return "\n".join(lines)
