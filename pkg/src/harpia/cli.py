"""Command-line front end: run operators, benchmark, crop, and serve.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import os
import sys

import click
import numpy as np

from . import bench as bench_mod
from .chunking import DEFAULT_FRACTION, MemoryBudget, plan_chunks, profile_budget
from .errors import HarpiaError, ParameterError
from .ledger import LEDGER
from .registry import get_operator, run_operator, validate_params
from .volume import Volume, crop_z, load_volume, save_volume


def _parse_params(pairs) -> dict:
    params = {}
    for pair in pairs:
        key, sep, value = pair.partition("=")
        if not sep:
            raise click.UsageError(f"--param expects k=v, got {pair!r}")
        params[key] = value
    return params


def _budget(budget_bytes, fraction) -> MemoryBudget:
    if budget_bytes is not None:
        return MemoryBudget(budget_bytes, fraction)
    return profile_budget(fraction=fraction)


def _run_one(op_name, input_path, output_path, raw_params, budget_bytes, fraction, dump_plan, aux=None):
    try:
        op = get_operator(op_name)
        params = validate_params(op, raw_params)
    except ParameterError as exc:
        raise click.UsageError(str(exc))
    volume = load_volume(input_path)
    budget = _budget(budget_bytes, fraction)
    if dump_plan and op.kind == "map":
        plan = plan_chunks(volume.shape, volume.dtype, op.profile(params), budget)
        click.echo(plan.dump())
    try:
        result, report = run_operator(
            volume.data, op_name, params, budget, aux=aux, validate=False
        )
    except HarpiaError as exc:
        raise click.ClickException(str(exc))
    save_volume(Volume(result.astype(_storable(result.dtype)), spacing=volume.spacing), output_path)
    click.echo(
        f"{op_name}: {report.chunk_count} chunks, {report.wall_seconds:.3f}s, "
        f"peak {report.peak_bytes} B, residual {report.residual_bytes} B"
    )


def _storable(dtype) -> np.dtype:
    # label outputs are stored as uint16 when they fit, else float32 is rejected
    if dtype == np.dtype("uint32"):
        return np.dtype("uint16")
    return dtype


@click.group()
def main():
    """Out-of-core volumetric processing toolkit."""


@main.command()
@click.argument("op_name", metavar="OP")
@click.argument("input_path", type=click.Path(exists=True))
@click.argument("output_path")
@click.option("--param", "params", multiple=True, help="operator parameter k=v (repeatable)")
@click.option("--budget-bytes", type=int, default=None, help="memory budget cap in bytes")
@click.option("--fraction", type=float, default=DEFAULT_FRACTION, show_default=True)
@click.option("--plan", "dump_plan", is_flag=True, help="print the chunk plan before running")
def run(op_name, input_path, output_path, params, budget_bytes, fraction, dump_plan):
    """Run one operator through the chunk engine."""
    _run_one(op_name, input_path, output_path, _parse_params(params), budget_bytes, fraction, dump_plan)


@main.command("filter")
@click.argument("name")
@click.argument("input_path", type=click.Path(exists=True))
@click.argument("output_path")
@click.option("--param", "params", multiple=True)
@click.option("--budget-bytes", type=int, default=None)
@click.option("--fraction", type=float, default=DEFAULT_FRACTION)
def filter_cmd(name, input_path, output_path, params, budget_bytes, fraction):
    """Run a filtering operator (alias of `run` for the filter suite)."""
    _run_one(name, input_path, output_path, _parse_params(params), budget_bytes, fraction, False)


@main.command("threshold")
@click.argument("method", type=click.Choice(["otsu", "local"]))
@click.argument("input_path", type=click.Path(exists=True))
@click.argument("output_path")
@click.option("--kind", default="mean", help="local threshold kind")
@click.option("--window", type=int, default=3)
@click.option("--k", type=float, default=0.2)
@click.option("--R", "r_value", type=float, default=None)
@click.option("--c", type=float, default=0.0)
@click.option("--bins", type=int, default=256)
@click.option("--budget-bytes", type=int, default=None)
@click.option("--fraction", type=float, default=DEFAULT_FRACTION)
def threshold_cmd(method, input_path, output_path, kind, window, k, r_value, c, bins, budget_bytes, fraction):
    """Binarize globally (Otsu) or with a local adaptive threshold."""
    if method == "otsu":
        _run_one("otsu", input_path, output_path, {"bins": bins}, budget_bytes, fraction, False)
    else:
        params = {"kind": kind, "window": window, "k": k, "R": r_value, "c": c}
        _run_one("local_threshold", input_path, output_path, params, budget_bytes, fraction, False)


@main.command("morph")
@click.argument("op_name", type=click.Choice(["erode", "dilate", "open", "close"]))
@click.argument("input_path", type=click.Path(exists=True))
@click.argument("output_path")
@click.option("--se", default="ball:1", show_default=True, help="structuring element kind:radius")
@click.option("--iters", type=int, default=1, show_default=True)
@click.option("--budget-bytes", type=int, default=None)
@click.option("--fraction", type=float, default=DEFAULT_FRACTION)
def morph_cmd(op_name, input_path, output_path, se, iters, budget_bytes, fraction):
    """Morphological erosion/dilation/opening/closing."""
    params = {"se": se, "iterations": iters}
    _run_one(f"morph_{op_name}", input_path, output_path, params, budget_bytes, fraction, False)


@main.command("watershed")
@click.option("--landscape", required=True, type=click.Path(exists=True))
@click.option("--markers", required=True, type=click.Path(exists=True))
@click.option("--mask", type=click.Path(exists=True), default=None)
@click.option("--out", "output_path", required=True)
@click.option("--budget-bytes", type=int, default=None)
@click.option("--fraction", type=float, default=DEFAULT_FRACTION)
def watershed_cmd(landscape, markers, mask, output_path, budget_bytes, fraction):
    """Per-slice marker-based watershed."""
    aux = {"markers": load_volume(markers).data.astype(np.uint32)}
    if mask is not None:
        aux["mask"] = load_volume(mask).data
    _run_one("watershed", landscape, output_path, {}, budget_bytes, fraction, False, aux=aux)


@main.command("crop")
@click.argument("input_path", type=click.Path(exists=True))
@click.argument("output_path")
@click.option("--z", "z_range", required=True, help="Z interval start:stop (stop exclusive)")
def crop(input_path, output_path, z_range):
    """Write a Z-subvolume with updated metadata."""
    start, sep, stop = z_range.partition(":")
    if not sep:
        raise click.UsageError("--z expects start:stop")
    try:
        z0, z1 = int(start), int(stop)
    except ValueError:
        raise click.UsageError(f"bad --z range {z_range!r}")
    volume = load_volume(input_path)
    try:
        save_volume(crop_z(volume, z0, z1), output_path)
    except (HarpiaError, OSError) as exc:
        raise click.ClickException(str(exc))
    click.echo(f"wrote slices [{z0},{z1}) to {output_path}")


@main.command("bench")
@click.option("--op", "op_name", required=True)
@click.option("--param", "params", multiple=True)
@click.option("--ladder", default="64,128,192,256", show_default=True, help="Z-slice counts")
@click.option("--base-yx", type=int, default=64, show_default=True)
@click.option("--repeats", type=int, default=bench_mod.DEFAULT_REPEATS, show_default=True)
@click.option("--budget-bytes", type=int, default=256 * 1024 * 1024, show_default=True)
@click.option("--dtype", default="uint8", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--input", "input_path", type=click.Path(exists=True), default=None,
              help="crop ladder sizes from a real volume instead of synthesizing")
@click.option("--out", "output_csv", required=True)
@click.option("--warm", is_flag=True, help="reuse the input buffer across repeats")
@click.option("--include-io", is_flag=True, help="time the full call, not just the chunk loop")
def bench(op_name, params, ladder, base_yx, repeats, budget_bytes, dtype, seed, input_path, output_csv, warm, include_io):
    """Timed repeats over a size ladder; emits a CSV report."""
    try:
        op = get_operator(op_name)
        op_params = validate_params(op, _parse_params(params))
        ladder_sizes = tuple(int(v) for v in ladder.split(","))
        scenario = bench_mod.BenchScenario(
            op=op_name,
            params=op_params,
            ladder=ladder_sizes,
            base_yx=base_yx,
            repeats=repeats,
            budget_bytes=budget_bytes,
            dtype=dtype,
            seed=seed,
            warm=warm,
            include_io=include_io,
            input_path=input_path,
        )
    except (ParameterError, ValueError) as exc:
        raise click.UsageError(str(exc))
    try:
        rows = bench_mod.run_bench(scenario)
    except HarpiaError as exc:
        raise click.ClickException(str(exc))
    bench_mod.write_csv(rows, output_csv)
    for row in rows:
        click.echo(
            f"{row.size_bytes} B: {row.mean_s:.4f}s +/- {row.std_s:.4f}, "
            f"peak {row.peak_bytes} B, residual {row.residual_bytes} B"
        )


@main.command("serve")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=None, help="defaults to $HARPIA_PORT or 8000")
@click.option("--fraction", type=float, default=None, help="defaults to $HARPIA_BUDGET_FRACTION or 0.8")
@click.option("--workers", type=int, default=None, help="defaults to $HARPIA_WORKERS or 1")
def serve(host, port, fraction, workers):
    """Start the REST job service."""
    import uvicorn

    from .service import create_app

    port = port if port is not None else int(os.environ.get("HARPIA_PORT", "8000"))
    fraction = fraction if fraction is not None else float(
        os.environ.get("HARPIA_BUDGET_FRACTION", str(DEFAULT_FRACTION))
    )
    workers = workers if workers is not None else int(os.environ.get("HARPIA_WORKERS", "1"))
    app = create_app(budget_fraction=fraction, workers=workers)
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
