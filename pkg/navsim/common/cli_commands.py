"""
Flask CLI Command Extensions

Every command is registered on the app's click group, so with
FLASK_APP=navsim:app (see .flaskenv) they run as ``flask <command>``
"""
import dataclasses
import json
import os
from typing import List, Optional

import click

from navsim import app, config
from navsim.benchmark import format_table, run_benchmark
from navsim.common import status
from navsim.common.error_handlers import handle_errors
from navsim.episode import (
    PRESETS,
    EpisodeResult,
    generate_episode_set,
    load_episode_set,
    load_step_log,
    run_batch,
    save_episode_set,
    write_results,
)
from navsim.models import (
    GLOBAL_POLICIES,
    LOCAL_POLICIES,
    RUN_KEYS,
    WORLD_STYLES,
    DataValidationError,
    EpisodeConfig,
    InsufficientDataError,
    ParseError,
    RunConfig,
    SchemaError,
    Task,
)
from navsim.noise import build_noise_models, load_calibration, save_models
from navsim.world import generate_world, load_world, render_world, save_world

SWITCH = click.Choice(["on", "off"])
INPUT_FILE = click.Path(exists=True, dir_okay=False)

# flags that only make sense for PointGoal episodes
POINTGOAL_FLAGS = ("goal", "start", "episodes_file")

# episode settings a saved episode set may have overridden at run time
SET_OVERRIDES = ("noise", "pose_correction", "noise_file", "max_steps", "map_size", "local_policy")


######################################################################
#  H E L P E R S
######################################################################
def resolve_workers(flag: Optional[int]) -> int:
    """An explicit flag wins over ANS_WORKERS, which wins over the default"""
    if flag is not None:
        workers = flag
    elif os.getenv("ANS_WORKERS"):
        try:
            workers = int(os.environ["ANS_WORKERS"])
        except ValueError as error:
            raise DataValidationError(f"ANS_WORKERS is not a number: {os.environ['ANS_WORKERS']}") from error
    else:
        workers = config.WORKERS
    if workers < 1:
        raise DataValidationError("workers must be at least 1")
    return workers


def read_config_file(path: Optional[str]) -> dict:
    """The JSON run configuration, or nothing"""
    if not path:
        return {}
    with open(path, encoding="utf-8") as stream:
        try:
            data = json.load(stream)
        except json.JSONDecodeError as error:
            raise ParseError(error.msg, line=error.lineno) from error
    if not isinstance(data, dict):
        raise SchemaError("A run configuration is a JSON object")
    return data


def layer_settings(task: Task, config_file: Optional[str], flags: dict) -> dict:
    """
    Defaults come from navsim.config, the JSON file overrides them,
    ANS_WORKERS overrides the file and flags given on the command line
    override everything
    """
    data = read_config_file(config_file)
    if data.get("task", task.value) != task.value:
        raise DataValidationError(f"The configuration is for {data['task']}, not {task.value}")
    data["task"] = task.value
    if os.getenv("ANS_WORKERS"):
        data["workers"] = os.environ["ANS_WORKERS"]
    seed, seeds = flags.pop("seed"), flags.pop("seeds")
    if seed is not None and seeds is not None:
        raise click.UsageError("Use either --seed or --seeds")
    if seed is not None:
        data["seeds"] = [seed]
    elif seeds is not None:
        data["seeds"] = seeds
    data.update({key: value for key, value in flags.items() if value is not None and value is not False})
    return data


def episode_set_configs(episodes_file: str, data: dict) -> List[EpisodeConfig]:
    """The configs of a saved episode set with the run's overrides applied"""
    records = load_episode_set(episodes_file)
    if not records:
        raise InsufficientDataError(f"{episodes_file} holds no episodes")
    overrides = {key: data[key] for key in SET_OVERRIDES if key in data}
    return [EpisodeConfig().deserialize({**record.config.serialize(), **overrides}) for record in records]


def run_episodes(task: Task, config_file: Optional[str], flags: dict) -> List[EpisodeResult]:
    """Runs the requested batch and writes logs, metrics and renders"""
    episodes_file = flags.pop("episodes_file", None)
    data = layer_settings(task, config_file, flags)
    run_values = {key: data[key] for key in RUN_KEYS if key in data}
    if episodes_file:
        configs = episode_set_configs(episodes_file, data)
        run = RunConfig().deserialize({**configs[0].serialize(), **run_values})
    else:
        run = RunConfig().deserialize(data)
        configs = run.episode_configs()
    app.logger.info("Running %d %s episodes into %s", len(configs), task.value, run.output_dir)
    results = run_batch(configs, workers=run.workers, keep_maps=run.render)
    summary = write_results(results, run.output_dir, render=run.render)
    click.echo(f"Episodes: {summary.episodes}")
    click.echo(f"Mean Cov: {summary.means['cov_m2']:.3f} m2")
    click.echo(f"Mean %Cov: {summary.means['pct_cov']:.3f}")
    if task == Task.POINTGOAL:
        click.echo(f"Success: {summary.means['success']:.3f}")
        click.echo(f"SPL: {summary.means['spl']:.3f}")
    return results


def episode_options(command):
    """Flags shared by explore and pointgoal; flags left unset keep the file's value"""
    options = [
        click.option("--config", "config_file", type=INPUT_FILE, help="JSON run configuration"),
        click.option("--seed", type=int, help="Run a single seed"),
        click.option("--seeds", help="Seeds to run, as 0..4 or 0,3,7"),
        click.option("--noise", type=SWITCH, help="Actuation and sensor noise"),
        click.option("--pose-correction", type=SWITCH, help="Pose estimator correction"),
        click.option("--global", "global_policy", type=click.Choice(GLOBAL_POLICIES)),
        click.option("--local", "local_policy", type=click.Choice(LOCAL_POLICIES)),
        click.option("--world-file", type=INPUT_FILE),
        click.option("--world-style", type=click.Choice(WORLD_STYLES)),
        click.option("--world-size", type=int),
        click.option("--noise-file", type=INPUT_FILE, help="Noise models written by fit-noise"),
        click.option("--map-size", type=int),
        click.option("--max-steps", type=int),
        click.option("--goal", type=(int, int), help="PointGoal goal cell: ROW COL"),
        click.option("--start", type=(int, int, float), help="PointGoal start: ROW COL HEADING_DEG"),
        click.option("--episodes", "episodes_file", type=INPUT_FILE, help="Episode set from gen-episodes"),
        click.option("--workers", type=int, help="Worker processes (overrides ANS_WORKERS)"),
        click.option("--output-dir", help="Directory for logs, metrics and renders"),
        click.option("--render", is_flag=True, help="Write one map render per episode"),
    ]
    for option in reversed(options):
        command = option(command)
    return command


######################################################################
#  E X P L O R A T I O N   A N D   P O I N T G O A L
######################################################################
@app.cli.command("explore")
@episode_options
@handle_errors
def explore(config_file, **flags):
    """Runs Exploration episodes and prints the mean coverage"""
    given = [name for name in POINTGOAL_FLAGS if flags.get(name)]
    if given:
        raise click.UsageError(f"{', '.join(given)} only apply to the pointgoal command")
    run_episodes(Task.EXPLORATION, config_file, flags)


@app.cli.command("pointgoal")
@episode_options
@handle_errors
def pointgoal(config_file, **flags):
    """Runs PointGoal episodes from a goal or an episode set"""
    if flags.get("episodes_file"):
        fixed = ("goal", "start", "seed", "seeds", "world_file")
        mixed = [name for name in fixed if flags.get(name) is not None]
        if mixed:
            raise click.UsageError(f"{', '.join(mixed)} cannot be combined with --episodes")
    run_episodes(Task.POINTGOAL, config_file, flags)


######################################################################
#  N O I S E   M O D E L S
######################################################################
@app.cli.command("fit-noise")
@click.argument("data_csv", type=INPUT_FILE)
@click.argument("out_json", type=click.Path(dir_okay=False))
@click.option("--k-max", type=click.IntRange(min=1), default=config.NOISE_K_MAX, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@handle_errors
def fit_noise(data_csv, out_json, k_max, seed):
    """Fits the six noise models from a calibration CSV"""
    data = load_calibration(data_csv)
    models = build_noise_models(data, k_candidates=range(config.NOISE_K_MIN, k_max + 1), seed=seed)
    save_models(models, out_json)
    for (action, kind), model in models.models.items():
        click.echo(
            f"{action.value:<11} {kind.value:<9} k={model.n_components:<2} "
            f"held-out log-likelihood {model.held_out_loglik:.4f}"
        )


######################################################################
#  W O R L D S   A N D   E P I S O D E   S E T S
######################################################################
@app.cli.command("gen-world")
@click.argument("out_file", type=click.Path(dir_okay=False))
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--size", type=int, default=config.WORLD_SIZE, show_default=True)
@click.option("--style", type=click.Choice(WORLD_STYLES), default=config.WORLD_STYLE, show_default=True)
@click.option("--render", "render_file", type=click.Path(dir_okay=False), help="Also write a PNG")
@handle_errors
def gen_world(out_file, seed, size, style, render_file):
    """Generates a world file"""
    world = generate_world(seed, size=size, style=style)
    save_world(world, out_file)
    if render_file:
        render_world(world, render_file)
    area = world.explorable_area()
    click.echo(f"Wrote {out_file}: {world.height}x{world.width} cells, {area:.2f} m2 explorable")


@app.cli.command("gen-episodes")
@click.argument("out_file", type=click.Path(dir_okay=False))
@click.option("-n", "--count", type=int, default=10, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--preset", type=click.Choice(sorted(PRESETS)), default="default", show_default=True)
@click.option("--min-geodesic", type=float, help="Overrides the preset's minimum geodesic distance (m)")
@click.option("--min-ged-ratio", type=float, help="Overrides the preset's minimum GED ratio")
@click.option("--world-file", type=INPUT_FILE)
@click.option("--world-style", type=click.Choice(WORLD_STYLES), default=config.WORLD_STYLE, show_default=True)
@click.option("--world-size", type=int, default=config.WORLD_SIZE, show_default=True)
@click.option("--noise", type=SWITCH, default="on", show_default=True)
@click.option("--pose-correction", type=SWITCH, default="on", show_default=True)
@click.option("--attempts", type=click.IntRange(min=1), default=config.PAIR_ATTEMPTS, show_default=True)
@handle_errors
def gen_episodes(out_file, count, seed, preset, min_geodesic, min_ged_ratio, **options):
    """Generates a PointGoal episode set"""
    filters = PRESETS[preset]
    if min_geodesic is not None:
        filters = dataclasses.replace(filters, min_geodesic_m=min_geodesic)
    if min_ged_ratio is not None:
        filters = dataclasses.replace(filters, min_ged_ratio=min_ged_ratio)
    records = generate_episode_set(
        count,
        seed=seed,
        filters=filters,
        world_size=options["world_size"],
        world_style=options["world_style"],
        world_file=options["world_file"],
        noise=options["noise"] == "on",
        pose_correction=options["pose_correction"] == "on",
        attempts=options["attempts"],
    )
    save_episode_set(records, out_file)
    click.echo(f"Wrote {len(records)} episodes to {out_file}")
    for record in records:
        click.echo(
            f"{record.config.episode_id}: geodesic {record.geodesic_m:.2f} m, "
            f"GED ratio {record.ged_ratio:.2f}"
        )


######################################################################
#  B E N C H M A R K   A N D   R E N D E R I N G
######################################################################
@app.cli.command("bench")
@click.option("--quick", is_flag=True, help="Run the reduced suite")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--workers", type=int, help="Worker processes (overrides ANS_WORKERS)")
@handle_errors
def bench(quick, seed, workers):
    """Runs the acceptance suite and prints a pass/fail table"""
    results = run_benchmark(quick=quick, seed=seed, workers=resolve_workers(workers))
    click.echo(format_table(results))
    if not all(result.passed for result in results):
        raise click.exceptions.Exit(status.EXIT_1_CHECKS_FAILED)


@app.cli.command("render")
@click.argument("out_png", type=click.Path(dir_okay=False))
@click.option("--world-file", type=INPUT_FILE, help="World to draw; otherwise one is generated")
@click.option("--seed", type=int, default=0, show_default=True, help="Seed of the generated world")
@click.option("--world-style", type=click.Choice(WORLD_STYLES), default=config.WORLD_STYLE, show_default=True)
@click.option("--world-size", type=int, default=config.WORLD_SIZE, show_default=True)
@click.option("--log", "log_file", type=INPUT_FILE, help="Step log whose true poses are drawn")
@click.option("--goal", type=(int, int), help="Goal cell to mark: ROW COL")
@handle_errors
def render(out_png, world_file, seed, world_style, world_size, log_file, goal):
    """Draws a world with an optional episode trajectory"""
    world = load_world(world_file) if world_file else generate_world(seed, size=world_size, style=world_style)
    trajectory = None
    if log_file:
        records = load_step_log(log_file)
        try:
            poses = [record["true_pose"] for record in records]
            trajectory = [(float(pose[0]), float(pose[1])) for pose in poses]
        except (KeyError, IndexError, TypeError, ValueError) as error:
            raise SchemaError(f"{log_file} is not a step log: {error}") from error
    render_world(world, out_png, trajectory=trajectory, goal=goal)
    click.echo(f"Wrote {out_png}")
