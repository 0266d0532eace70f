"""CLI entry point using Click."""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click

from . import __version__
from .measure import MeasureConfig, MeasurementError, count_spikes, delay, gain
from .model import ModelError, Trace
from .netlist import ParseError, parse, serialize
from .reproduce import Target, reproduce
from .transient import Method, SimConfig, SimulationDivergedError, simulate
from .utils import DEFAULT_VDD, ExitCode, format_float


def _configure_logging(verbose: bool, quiet: bool) -> None:
    if verbose and not quiet:
        logging.basicConfig(level=logging.DEBUG, stream=sys.stderr)
    elif quiet:
        logging.basicConfig(level=logging.ERROR, stream=sys.stderr)


def _read_text(path: Path) -> str:
    if not path.is_file():
        click.echo(f"Error: file not found: {path}", err=True)
        sys.exit(ExitCode.INPUT_ERROR)
    try:
        return path.read_text(encoding="utf-8")
    except UnicodeDecodeError as e:
        click.echo(f"Error: {path} is not UTF-8 text ({e.reason} at byte {e.start})", err=True)
        sys.exit(ExitCode.INPUT_ERROR)


def _rest(trace: Trace, channel: str) -> float:
    """Rest level of a channel: its first sample (0 V when absent; the measurement reports it)."""
    return float(trace[channel][0]) if channel in trace else 0.0


@click.group()
@click.version_option(version=__version__, prog_name="dendritesim")
def cli() -> None:
    """Simulate and analyse active dendrite circuits."""


@cli.command("simulate")
@click.argument("netlist", type=click.Path(path_type=Path))
@click.option("--duration", type=float, default=None, help="Simulated time in seconds.")
@click.option("--dt", type=float, default=None, help="Time step in seconds.")
@click.option(
    "--method",
    type=click.Choice([m.value for m in Method]),
    default=None,
    help="Integration method (backward Euler or trapezoidal).",
)
@click.option("--stride", type=int, default=None, help="Record every Nth step.")
@click.option("-o", "--out", type=click.Path(path_type=Path), help="Output CSV path.")
@click.option("--quiet", is_flag=True, help="Suppress warnings.")
@click.option("--verbose", is_flag=True, help="Show detailed progress.")
@click.option("--json", "json_output", is_flag=True, help="Machine-readable JSON summary.")
def simulate_cmd(
    netlist: Path,
    duration: float | None,
    dt: float | None,
    method: str | None,
    stride: int | None,
    out: Path | None,
    quiet: bool,
    verbose: bool,
    json_output: bool,
) -> None:
    """Simulate a netlist and write the listed channels as CSV."""
    _configure_logging(verbose, quiet)
    source = _read_text(netlist)
    try:
        doc = parse(source)
        flags = {"dt": dt, "duration": duration, "method": method, "record_stride": stride}
        cfg = SimConfig.merged(flags, doc.sim)
    except ParseError as e:
        click.echo(f"{netlist}:{e}", err=True)
        sys.exit(ExitCode.INPUT_ERROR)
    except ModelError as e:
        click.echo(f"Error: {e}", err=True)
        sys.exit(ExitCode.INPUT_ERROR)

    if verbose and not quiet:
        click.echo(
            f"Simulating: {netlist} ({len(doc.network.segments)} segments, "
            f"{cfg.n_steps} steps of {cfg.dt:g} s, {cfg.method.value})",
            err=True,
        )
    try:
        trace = simulate(doc.network, doc.stimuli, cfg)
    except SimulationDivergedError as e:
        click.echo(f"Error: {e}", err=True)
        sys.exit(ExitCode.SIMULATION_FAILED)
    if doc.probes:
        trace = trace.select(doc.probes)

    text = trace.to_csv()
    if out is None:
        click.echo(text, nl=False)
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text, encoding="utf-8", newline="")
        if json_output:
            click.echo(
                json.dumps(
                    {
                        "source": str(netlist),
                        "output": str(out),
                        "exit_code": ExitCode.SUCCESS.value,
                        "channels": list(trace.channels),
                        "samples": trace.n_samples,
                    }
                )
            )
        elif not quiet:
            click.echo(f"Simulated: {netlist} -> {out}", err=True)
    sys.exit(ExitCode.SUCCESS)


@cli.command("reproduce")
@click.argument("target", type=click.Choice([t.value for t in Target]))
@click.option(
    "--out", "out_dir", type=click.Path(path_type=Path), required=True, help="Output directory."
)
@click.option("--workers", type=int, default=4, help="Threads for parameter sweeps.")
@click.option("--quiet", is_flag=True, help="Suppress warnings.")
@click.option("--verbose", is_flag=True, help="Show detailed progress.")
@click.option("--json", "json_output", is_flag=True, help="Machine-readable JSON output.")
def reproduce_cmd(
    target: str,
    out_dir: Path,
    workers: int,
    quiet: bool,
    verbose: bool,
    json_output: bool,
) -> None:
    """Reproduce one figure's study as CSV files plus a manifest."""
    _configure_logging(verbose, quiet)
    if verbose and not quiet:
        click.echo(f"Reproducing: {target}", err=True)

    result = reproduce(target, out_dir, workers=workers)

    if json_output:
        click.echo(
            json.dumps(
                {
                    "target": result.target,
                    "out_dir": result.out_dir,
                    "files": result.files,
                    "exit_code": result.exit_code.value,
                    "warnings": result.warnings,
                }
            )
        )
        sys.exit(result.exit_code)

    if not quiet:
        for w in result.warnings:
            click.echo(f"Warning: {w}", err=True)
        for name in result.files:
            click.echo(f"  -> {out_dir / name}")
    sys.exit(result.exit_code)


@cli.command()
@click.argument("trace_csv", type=click.Path(path_type=Path))
@click.option("--in-channel", default=None, help="Input channel (delay and gain).")
@click.option("--out-channel", required=True, help="Output channel.")
@click.option(
    "--metric",
    type=click.Choice(["delay", "gain", "spikes"]),
    default="delay",
    show_default=True,
)
@click.option("--vdd", type=float, default=DEFAULT_VDD, show_default=True, help="Supply voltage.")
@click.option(
    "--threshold-fraction",
    type=float,
    default=MeasureConfig.threshold_fraction,
    show_default=True,
    help="Spike threshold as a fraction of VDD.",
)
@click.option(
    "--refractory",
    type=float,
    default=MeasureConfig.refractory,
    show_default=True,
    help="Minimum sub-threshold gap between spikes, seconds.",
)
@click.option("--json", "json_output", is_flag=True, help="Machine-readable JSON output.")
def analyze(
    trace_csv: Path,
    in_channel: str | None,
    out_channel: str,
    metric: str,
    vdd: float,
    threshold_fraction: float,
    refractory: float,
    json_output: bool,
) -> None:
    """Measure delay, gain or spike count on a simulated trace.

    Rest levels are taken from the first sample of each channel.
    """
    text = _read_text(trace_csv)
    try:
        trace = Trace.from_csv(text)
        value: float | int | None
        if metric == "spikes":
            rest = _rest(trace, out_channel)
            value = count_spikes(trace, out_channel, rest, threshold_fraction, refractory, vdd=vdd)
        else:
            if in_channel is None:
                click.echo(f"Error: --in-channel is required for {metric}", err=True)
                sys.exit(ExitCode.INPUT_ERROR)
            rests = (_rest(trace, in_channel), _rest(trace, out_channel))
            if metric == "delay":
                value = delay(trace, in_channel, out_channel, rests, MeasureConfig(vdd=vdd))
            else:
                value = gain(trace, in_channel, out_channel, rests)
    except (MeasurementError, ValueError) as e:
        click.echo(f"Error: {e}", err=True)
        sys.exit(ExitCode.INPUT_ERROR)

    if json_output:
        click.echo(json.dumps({"metric": metric, "value": value}))
    elif value is None:
        click.echo("undefined")
    elif isinstance(value, int):
        click.echo(str(value))
    else:
        click.echo(format_float(value))
    sys.exit(ExitCode.SUCCESS)


@cli.command("parse")
@click.argument("netlist", type=click.Path(path_type=Path))
def parse_cmd(netlist: Path) -> None:
    """Validate a netlist and print its canonical form."""
    try:
        doc = parse(_read_text(netlist))
    except ParseError as e:
        click.echo(f"{netlist}:{e}", err=True)
        sys.exit(ExitCode.INPUT_ERROR)
    click.echo(serialize(doc.network, doc.stimuli, doc.probes, doc.sim), nl=False)
    sys.exit(ExitCode.SUCCESS)


@cli.command()
@click.option("--host", default="127.0.0.1", help="Host to bind to.")
@click.option("--port", default=8000, type=int, help="Port to listen on.")
def serve(host: str, port: int) -> None:
    """Start the web UI for uploading netlists."""
    try:
        import uvicorn
    except ImportError:
        click.echo(
            "Web dependencies not installed. Run: pip install dendritesim[web]",
            err=True,
        )
        sys.exit(ExitCode.INPUT_ERROR)

    from .web import app

    click.echo(f"Starting dendritesim web UI at http://{host}:{port}")
    uvicorn.run(app, host=host, port=port)
