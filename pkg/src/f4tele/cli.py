"""Command-line client for the simulation/analysis service.

Exit codes: 0 success, 1 I/O failure, 2 configuration violation,
3 analyze found unstable sweep points, 4 validate tolerance breach.
"""

import os
import sys
from pathlib import Path

import click

from .client import ServiceClient, ServiceError

MODES = ("f4tele", "f4tele+", "benchmark")


def _client(ctx):
    return ServiceClient(base_url=ctx.obj.get("server"))


def _read_text(path):
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        click.echo(f"error: cannot read {path}: {exc}", err=True)
        sys.exit(1)


def _write_text(directory, name, text):
    try:
        directory.mkdir(parents=True, exist_ok=True)
        (directory / name).write_text(text, encoding="utf-8")
    except OSError as exc:
        click.echo(f"error: cannot write {directory / name}: {exc}", err=True)
        sys.exit(1)


def _config_failure(exc):
    click.echo(f"error: {exc.detail}", err=True)
    for v in exc.violations:
        click.echo(f"  violation: {v}", err=True)
    sys.exit(2 if exc.status_code == 400 else 1)


out_dir_option = click.option(
    "--out-dir", type=click.Path(path_type=Path),
    default=lambda: os.environ.get("F4TELE_OUT_DIR", "."),
    help="Output directory (default: $F4TELE_OUT_DIR or '.').")


@click.group()
@click.option("--server", default=lambda: os.environ.get("F4TELE_SERVER"),
              help="Base URL of a running service; default runs it "
                   "in-process.")
@click.pass_context
def main(ctx, server):
    """Time-shared FSO telemetry network: simulate, analyze, validate,
    sweep."""
    ctx.ensure_object(dict)
    ctx.obj["server"] = server


@main.command()
@click.option("--config", "config_path", required=True,
              type=click.Path(path_type=Path))
@click.option("--mode", type=click.Choice(MODES), default="f4tele")
@click.option("--seed", type=int, default=1)
@click.option("--duration", type=float, required=True,
              help="Simulated seconds.")
@click.option("--speed-factor", type=float, default=1.0,
              help="Link speed multiplier (0.5 = half-speed links).")
@out_dir_option
@click.pass_context
def simulate(ctx, config_path, mode, seed, duration, speed_factor, out_dir):
    """Run one simulation and write report.csv / flows.csv / summary.txt."""
    text = _read_text(config_path)
    try:
        with _client(ctx) as client:
            res = client.simulate(text, mode, seed, duration, speed_factor)
    except ServiceError as exc:
        _config_failure(exc)
    _write_text(out_dir, "report.csv", res["sets_csv"])
    if res["per_flow"]:
        _write_text(out_dir, "flows.csv", res["flows_csv"])
    _write_text(out_dir, "summary.txt", res["summary"])
    for w in res.get("warnings", []):
        click.echo(f"warning: {w}", err=True)
    click.echo(res["summary"], nl=False)


@main.command()
@click.option("--config", "config_path", required=True,
              type=click.Path(path_type=Path))
@click.option("--loads", default=None,
              help="Comma-separated effective-load sweep, e.g. "
                   "'0.1,0.2,...'; default analyses the config as given.")
@out_dir_option
@click.pass_context
def analyze(ctx, config_path, loads, out_dir):
    """Emit analytic waiting-time rows (CSV) for the configuration."""
    text = _read_text(config_path)
    load_list = None
    if loads:
        try:
            load_list = [float(x) for x in loads.split(",") if x.strip()]
        except ValueError:
            click.echo(f"error: invalid --loads value {loads!r}", err=True)
            sys.exit(2)
    try:
        with _client(ctx) as client:
            res = client.analyze(text, load_list)
    except ServiceError as exc:
        _config_failure(exc)
    _write_text(out_dir, "analyze.csv", res["csv"])
    click.echo(res["csv"], nl=False)
    if res["any_unstable"]:
        click.echo("warning: unstable sweep points flagged", err=True)
        sys.exit(3)


@main.command()
@click.option("--config", "config_path", required=True,
              type=click.Path(path_type=Path))
@click.option("--mode", type=click.Choice(MODES), default="f4tele")
@click.option("--seed", type=int, default=1)
@click.option("--duration", type=float, required=True)
@click.option("--tolerance", type=float, default=0.05,
              help="Allowed |sim - model| / model per set.")
@click.pass_context
def validate(ctx, config_path, mode, seed, duration, tolerance):
    """Cross-check simulated waits against the analytic predictions."""
    text = _read_text(config_path)
    try:
        with _client(ctx) as client:
            res = client.validate(text, mode, seed, duration, tolerance)
    except ServiceError as exc:
        _config_failure(exc)
    click.echo("set_id,klass,simulated_wait,predicted_wait,relative_error,ok")
    for row in res["per_set"]:
        click.echo(f"{row['set_id']},{row['klass']},"
                   f"{row['simulated_wait']:.9g},{row['predicted_wait']:.9g},"
                   f"{row['relative_error']:.6g},{row['within_tolerance']}")
    if not res["within_tolerance"]:
        click.echo(
            f"error: tolerance {tolerance:g} breached; worst set "
            f"{res['worst_set_id']} at relative error "
            f"{res['worst_relative_error']:.6g}", err=True)
        sys.exit(4)
    click.echo(f"all sets within tolerance {tolerance:g}")


@main.command()
@click.option("--plan", "plan_path", required=True,
              type=click.Path(path_type=Path))
@out_dir_option
@click.pass_context
def sweep(ctx, plan_path, out_dir):
    """Run the figure-family sweeps and write one CSV per family."""
    text = _read_text(plan_path)
    try:
        with _client(ctx) as client:
            res = client.sweep(text)
    except ServiceError as exc:
        _config_failure(exc)
    for family, csv_text in res["families"].items():
        _write_text(out_dir, f"{family}.csv", csv_text)
        click.echo(f"wrote {out_dir / (family + '.csv')}")


@main.command()
@click.option("--config", "config_path", required=True,
              type=click.Path(path_type=Path))
@out_dir_option
@click.pass_context
def schedule(ctx, config_path, out_dir):
    """Export the rotation cycle as CSV (slot_index, set_id, offset)."""
    text = _read_text(config_path)
    try:
        with _client(ctx) as client:
            res = client.schedule_export(text)
    except ServiceError as exc:
        _config_failure(exc)
    _write_text(out_dir, "schedule.csv", res["csv"])
    click.echo(res["csv"], nl=False)
    click.echo(f"tau={res['tau']:g}s tau_hot={res['tau_hot']:g}s "
               f"tau_max={res['tau_max']:g}s stable={res['stable']}")


@main.command()
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8000)
def serve(host, port):
    """Run the HTTP service."""
    import uvicorn

    from .service import create_app
    uvicorn.run(create_app(), host=host, port=port)


if __name__ == "__main__":
    main()
