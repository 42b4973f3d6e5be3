import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import click
import numpy as np
from rich.console import Console
from rich.table import Table
from scipy.spatial.transform import Rotation

from gpfield.config import get_settings
from gpfield.core.benchmark import run_benchmark, write_report_csv
from gpfield.core.distance_field import FieldVariant, build_field, default_field_config
from gpfield.core.inducing import select_pseudo_points
from gpfield.core.kernels import KernelFamily, KernelSpec
from gpfield.core.mesher import (
    GridSpec,
    extract_contour_2d,
    extract_isosurface_3d,
    write_mesh_ply,
    write_polylines,
)
from gpfield.core.odometry import (
    Pose,
    RegistrationOptions,
    read_trajectory,
    register_scan,
    write_trajectory,
)
from gpfield.core.planner import (
    PlanConfig,
    path_clearance,
    plan_path,
    write_cost_history,
    write_path,
)
from gpfield.core.submap_store import FusionWeighting, SubmapGrid
from gpfield.utils.logging import setup_logging
from gpfield.utils.pointcloud import format_float, load_point_cloud, write_xyz
from gpfield.utils.scenes import SCENES
from gpfield.utils.serialization import load_model, save_field, save_grid

settings = get_settings()
logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2

EXISTING_FILE = click.Path(exists=True, dir_okay=False)
OUTPUT_FILE = click.Path(dir_okay=False)


class ToolkitGroup(click.Group):
    """Command group mapping failures to exit codes: 1 usage/input, 2 numerical."""

    def main(self, args=None, prog_name=None, complete_var=None, standalone_mode=True, **extra):
        try:
            rv = super().main(
                args=args,
                prog_name=prog_name,
                complete_var=complete_var,
                standalone_mode=False,
                **extra,
            )
        except click.exceptions.Abort:
            click.echo("Aborted!", err=True)
            sys.exit(EXIT_USAGE)
        except click.ClickException as e:
            e.show()
            sys.exit(EXIT_USAGE)
        except np.linalg.LinAlgError as e:
            click.echo(f"Error: {e}", err=True)
            sys.exit(EXIT_NUMERICAL)
        except (ValueError, OSError) as e:
            click.echo(f"Error: {e}", err=True)
            sys.exit(EXIT_USAGE)
        except RuntimeError as e:
            click.echo(f"Error: {e}", err=True)
            sys.exit(EXIT_NUMERICAL)
        sys.exit(rv if isinstance(rv, int) else EXIT_OK)


def _floats(text: str, option: str, counts: Sequence[int]) -> List[float]:
    try:
        values = [float(t) for t in text.replace(",", " ").split()]
    except ValueError:
        raise click.BadParameter(f"expected numbers, got {text!r}", param_hint=option)
    if len(values) not in counts:
        expected = " or ".join(str(c) for c in counts)
        raise click.BadParameter(
            f"expected {expected} numbers, got {len(values)}", param_hint=option
        )
    if not all(np.isfinite(values)):
        raise click.BadParameter("values must be finite", param_hint=option)
    return values


def _grid_spec(bbox: str, cell: float, iso: Optional[float]) -> GridSpec:
    values = _floats(bbox, "--bbox", (4, 6))
    half = len(values) // 2
    return GridSpec(
        bbox_min=tuple(values[:half]), bbox_max=tuple(values[half:]), cell=cell, iso=iso
    )


def _parse_pose(text: Optional[str], dim: int) -> Optional[Pose]:
    if text is None:
        return None
    if dim == 2:
        x, y, theta = _floats(text, "--init", (3,))
        return Pose.from_xytheta(x, y, theta)
    values = _floats(text, "--init", (6,))
    return Pose(Rotation.from_rotvec(values[3:]).as_matrix(), np.array(values[:3]))


@click.group(cls=ToolkitGroup)
@click.option("--debug", is_flag=True, help="Enable debug logging")
@click.option(
    "--log-format",
    type=click.Choice(["json", "text"]),
    default=settings.log_format,
    show_default=True,
    help="Log output format",
)
@click.option("--seed", type=int, default=settings.seed, show_default=True, help="PRNG seed")
@click.pass_context
def main(ctx: click.Context, debug: bool, log_format: str, seed: int):
    """Gaussian-process distance field toolkit."""
    setup_logging(
        level="DEBUG" if debug else settings.log_level,
        format_type=log_format,
        command=ctx.invoked_subcommand,
        seed=seed,
    )
    ctx.ensure_object(dict)
    ctx.obj["seed"] = seed


@main.command()
def version():
    """Show version information."""
    from gpfield import __version__

    click.echo(f"gpfield v{__version__}")


@main.command()
@click.option("-i", "--input", "input_path", type=EXISTING_FILE, required=True)
@click.option("-o", "--output", type=OUTPUT_FILE, required=True)
@click.option(
    "--variant",
    type=click.Choice([v.value for v in FieldVariant]),
    default=settings.default_variant,
    show_default=True,
)
@click.option(
    "--kernel",
    type=click.Choice([k.value for k in KernelFamily]),
    default=None,
    help="Kernel family (default: se for reverting, matern12 for loggpis)",
)
@click.option("--lambda", "rate", type=float, default=None, help="Log-GPIS decay rate")
@click.option("--length-scale", type=float, default=None, help="Kernel length scale in meters")
@click.option("--noise", type=float, default=settings.noise_variance, show_default=True)
def build(
    input_path: str,
    output: str,
    variant: str,
    kernel: Optional[str],
    rate: Optional[float],
    length_scale: Optional[float],
    noise: float,
):
    """Fit a distance field to a point cloud."""
    cloud = load_point_cloud(input_path)
    variant_enum = FieldVariant(variant)
    if rate is not None and variant_enum != FieldVariant.LOG_GPIS:
        raise click.BadParameter("--lambda applies to the loggpis variant", param_hint="--lambda")

    config = default_field_config(
        cloud.points,
        variant=variant_enum,
        length_scale=length_scale,
        rate=rate,
        noise_variance=noise,
        length_scale_factor=settings.length_scale_factor,
        uncertainty_beta=settings.uncertainty_beta,
    )
    if kernel is not None and KernelFamily(kernel) != config.kernel.family:
        family = KernelFamily(kernel)
        if variant_enum == FieldVariant.LOG_GPIS:
            spec = KernelSpec.for_log_gpis(family, rate or 1.0 / config.kernel.length_scale)
        else:
            spec = KernelSpec(family=family, length_scale=config.kernel.length_scale)
        config = config.model_copy(update={"kernel": spec})

    field = build_field(cloud, config, chunk_size=settings.query_chunk_size)
    save_field(output, field)
    click.echo(
        f"Built {variant} field from {field.model.size} points "
        f"({config.kernel.family.value}, l={config.kernel.length_scale:.6g})"
    )


@main.command()
@click.option("-m", "--model", "model_path", type=EXISTING_FILE, required=True)
@click.option("-p", "--point", "points", multiple=True, required=True, help='Query point "x y [z]"')
def query(model_path: str, points: Tuple[str, ...]):
    """Print "d gx gy [gz] nx ny [nz] u" for each query point."""
    model = load_model(model_path)
    for text in points:
        q = np.array(_floats(text, "-p", (model.dim,)))
        sample = model.query(q)
        values = [sample.distance, *sample.gradient, *sample.normal, sample.uncertainty]
        click.echo(" ".join(format_float(v) for v in values))


@main.command()
@click.option("-m", "--model", "model_path", type=EXISTING_FILE, required=True)
@click.option("--bbox", required=True, help='"x0 y0 [z0] x1 y1 [z1]"')
@click.option("--cell", type=float, required=True, help="Grid spacing h")
@click.option("--iso", type=float, default=None, help="Iso level tau (default: cell)")
@click.option("-o", "--output", type=OUTPUT_FILE, required=True)
def mesh(model_path: str, bbox: str, cell: float, iso: Optional[float], output: str):
    """Extract the offset surface (3D PLY) or contour polylines (2D)."""
    model = load_model(model_path)
    grid = _grid_spec(bbox, cell, iso)
    if grid.dim == 3:
        result = extract_isosurface_3d(model, grid, max_cells=settings.max_grid_cells)
        write_mesh_ply(output, result)
        click.echo(f"Wrote {len(result.vertices)} vertices, {len(result.triangles)} triangles")
    else:
        lines = extract_contour_2d(model, grid, max_cells=settings.max_grid_cells)
        write_polylines(output, lines)
        click.echo(f"Wrote {len(lines)} polylines")


@main.command()
@click.option("-m", "--model", "model_path", type=EXISTING_FILE, required=True)
@click.option(
    "-s", "--scan", "scans", type=EXISTING_FILE, multiple=True, required=True
)
@click.option(
    "--init",
    "init_text",
    default=None,
    help='Initial pose "tx ty theta" (2D) or "tx ty tz rx ry rz" (3D)',
)
@click.option("--huber", type=float, default=0.1, show_default=True, help="Huber threshold")
@click.option("-o", "--output", type=OUTPUT_FILE, required=True)
def odom(
    model_path: str, scans: Tuple[str, ...], init_text: Optional[str], huber: float, output: str
):
    """Register scans against a field, each starting from the previous pose."""
    model = load_model(model_path)
    options = RegistrationOptions(huber_delta=huber)
    pose = _parse_pose(init_text, model.dim)
    stamped = []
    for index, scan_path in enumerate(scans):
        cloud = load_point_cloud(scan_path)
        report = register_scan(model, cloud.points, init=pose, options=options)
        pose = report.pose
        stamped.append((float(index), pose))
        logger.info(
            f"Scan {scan_path}: {report.iterations} iterations, cost={report.final_cost:.6g}"
        )
        click.echo(
            f"{scan_path}: rmse {report.initial_rmse:.6g} -> "
            f"{report.final_rmse:.6g}, converged={report.converged}"
        )
    write_trajectory(output, stamped)
    click.echo(f"Wrote {len(stamped)} poses")


@main.command()
@click.option("-m", "--model", "model_path", type=EXISTING_FILE, required=True)
@click.option("--start", required=True, help='Start point "x y [z]"')
@click.option("--goal", required=True, help='Goal point "x y [z]"')
@click.option("--margin", type=float, default=0.2, show_default=True, help="Safety margin")
@click.option("--waypoints", type=int, default=50, show_default=True)
@click.option("-o", "--output", type=OUTPUT_FILE, required=True)
@click.option("--costs", type=OUTPUT_FILE, default=None, help="Cost history CSV")
def plan(
    model_path: str,
    start: str,
    goal: str,
    margin: float,
    waypoints: int,
    output: str,
    costs: Optional[str],
):
    """Optimise a path that keeps a safety margin from the surface."""
    model = load_model(model_path)
    cfg = PlanConfig(num_waypoints=waypoints, safety_margin=margin)
    traj, history = plan_path(
        model,
        _floats(start, "--start", (model.dim,)),
        _floats(goal, "--goal", (model.dim,)),
        cfg,
    )
    write_path(output, traj)
    costs_path = costs or str(Path(output).with_suffix(".cost.csv"))
    write_cost_history(costs_path, history)
    click.echo(
        f"Planned {len(traj.waypoints)} waypoints, cost={format_float(history[-1])}, "
        f"clearance={path_clearance(model, traj):.4f}"
    )


@main.command()
@click.option("-m", "--model", "model_path", type=EXISTING_FILE, required=True)
@click.option("-i", "--input", "input_path", type=EXISTING_FILE, required=True)
@click.option("--bbox", required=True, help='"x0 y0 [z0] x1 y1 [z1]"')
@click.option("--cell", type=float, required=True)
@click.option("--band", required=True, help='Oracle distance band "a b"')
@click.option("-o", "--output", type=OUTPUT_FILE, required=True)
def bench(model_path: str, input_path: str, bbox: str, cell: float, band: str, output: str):
    """Compare a field against the brute-force oracle."""
    model = load_model(model_path)
    cloud = load_point_cloud(input_path)
    grid = _grid_spec(bbox, cell, None)
    report = run_benchmark(model, cloud, grid, _floats(band, "--band", (2,)))
    write_report_csv(output, report)

    table = Table(title="Benchmark")
    table.add_column("metric")
    table.add_column("value", justify="right")
    for name in ("rmse", "mae", "max", "count", "wall_time"):
        value = report.summary[name]
        table.add_row(name, str(int(value)) if name == "count" else f"{value:.6g}")
    Console().print(table)


@main.command("map")
@click.option(
    "-s", "--scan", "scans", type=EXISTING_FILE, multiple=True, required=True
)
@click.option("--poses", type=EXISTING_FILE, default=None, help="Trajectory file")
@click.option("-o", "--output", type=OUTPUT_FILE, required=True)
@click.option(
    "--variant",
    type=click.Choice([v.value for v in FieldVariant]),
    default=settings.default_variant,
    show_default=True,
)
@click.option("--length-scale", type=float, default=None)
@click.option("--block-size", type=float, default=None, help="Block side (default 8 l)")
@click.option("--halo", type=float, default=None, help="Halo margin (default 2 l)")
@click.option("--max-points", type=int, default=400, show_default=True)
@click.option("--resolution", type=float, default=None, help="Voxel size (default l/4)")
@click.option(
    "--fusion",
    type=click.Choice([w.value for w in FusionWeighting]),
    default=FusionWeighting.PRIOR_GAIN.value,
    show_default=True,
    help="Block weighting where submaps overlap",
)
def map_command(
    scans: Tuple[str, ...],
    poses: Optional[str],
    output: str,
    variant: str,
    length_scale: Optional[float],
    block_size: Optional[float],
    halo: Optional[float],
    max_points: int,
    resolution: Optional[float],
    fusion: str,
):
    """Insert scans into a submap grid."""
    clouds = [load_point_cloud(p) for p in scans]
    dim = clouds[0].dim
    trajectory = read_trajectory(poses, dim) if poses else [(0.0, None)] * len(clouds)
    if len(trajectory) != len(clouds):
        raise click.BadParameter(
            f"{len(trajectory)} poses for {len(clouds)} scans", param_hint="--poses"
        )
    config = default_field_config(
        clouds[0].points,
        variant=FieldVariant(variant),
        length_scale=length_scale,
        noise_variance=settings.noise_variance,
        length_scale_factor=settings.length_scale_factor,
        uncertainty_beta=settings.uncertainty_beta,
    )
    grid = SubmapGrid(
        config,
        dim=dim,
        block_size=block_size,
        halo_margin=halo,
        max_points_per_block=max_points,
        downsample_resolution=resolution,
        fusion=FusionWeighting(fusion),
    )
    for cloud, (_, pose) in zip(clouds, trajectory):
        grid.insert_points(cloud, pose)
    save_grid(output, grid)
    click.echo(f"Mapped {grid.point_count} points into {len(grid.blocks)} blocks")


@main.command()
@click.option("-m", "--model", "model_path", type=EXISTING_FILE, required=True)
@click.option("-i", "--input", "input_path", type=EXISTING_FILE, required=True)
@click.option("--spacing", type=float, required=True, help="Minimum pseudo point spacing")
@click.option("--budget", type=int, required=True, help="Maximum number of pseudo points")
@click.option("-o", "--output", type=OUTPUT_FILE, required=True)
def pseudo(model_path: str, input_path: str, spacing: float, budget: int, output: str):
    """Select surface-constrained pseudo points from candidates."""
    model = load_model(model_path)
    candidates = load_point_cloud(input_path)
    selected = select_pseudo_points(model, candidates.points, spacing, budget)
    write_xyz(output, selected.points)
    click.echo(f"Selected {len(selected)} pseudo points")


@main.command()
@click.option("--scene", type=click.Choice(sorted(SCENES)), required=True)
@click.option("-n", "--count", type=int, default=None, help="Number of samples")
@click.option("--noise", type=float, default=0.0, show_default=True, help="Gaussian noise std")
@click.option("-o", "--output", type=OUTPUT_FILE, required=True)
@click.pass_obj
def synth(obj: Dict[str, Any], scene: str, count: Optional[int], noise: float, output: str):
    """Generate a synthetic point cloud."""
    rng = np.random.default_rng(obj["seed"])
    kwargs: Dict[str, Any] = {"noise": noise, "rng": rng}
    if count is not None:
        kwargs["points_per_wall" if scene == "lshape" else "n"] = count
    points = SCENES[scene](**kwargs)
    write_xyz(output, points)
    click.echo(f"Wrote {len(points)} points")


if __name__ == "__main__":
    main()
