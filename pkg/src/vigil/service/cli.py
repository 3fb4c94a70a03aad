"""Command line entry points: serve, simulate, replay, export."""

from __future__ import annotations

import asyncio
import contextlib
import dataclasses
import signal
import sys
from pathlib import Path

import click

from .config import ServiceConfig, load_config
from .protocol import Message, serialize_message
from .report import export_csv, render_figures
from .server import (
    CorruptLog,
    build_pipeline,
    read_event_log,
    replay_into,
    run_pipe,
    run_server,
)
from .simulate import generate_events, load_script


def _config(path: str | None) -> ServiceConfig:
    return load_config(path) if path else ServiceConfig()


@click.group()
def main() -> None:
    """Security-event fusion service."""


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="YAML config file; defaults apply when omitted.")
@click.option("--stdin", "pipe_mode", is_flag=True,
              help="Read a message stream from stdin, write alerts and the final "
                   "board to stdout, then save snapshots and exit.")
def serve(config_path: str | None, pipe_mode: bool) -> None:
    """Run the fusion service (or process a piped stream with --stdin)."""
    config = _config(config_path)
    if pipe_mode:
        run_pipe(config, sys.stdin)
        return

    async def _serve() -> None:
        pipeline = build_pipeline(config)
        task = asyncio.ensure_future(run_server(config, pipeline))
        loop = asyncio.get_running_loop()
        for sig in (signal.SIGINT, signal.SIGTERM):
            loop.add_signal_handler(sig, task.cancel)
        click.echo(
            f"listening: sensors {config.host}:{config.sensor_port}, "
            f"consoles {config.host}:{config.console_port}, "
            f"ws {config.host}:{config.console_ws_port}",
            err=True,
        )
        with contextlib.suppress(asyncio.CancelledError):
            await task

    asyncio.run(_serve())


@main.command()
@click.option("--script", "script_path", type=click.Path(exists=True, dir_okay=False),
              required=True, help="Scenario script (YAML).")
@click.option("--seed", type=int, default=None, help="Override the script's seed.")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None,
              help="Write the event stream to a file instead of stdout.")
@click.option("--connect", default=None, metavar="HOST:PORT",
              help="Stream events to a running service instead of writing them out.")
def simulate(script_path: str, seed: int | None, out_path: str | None,
             connect: str | None) -> None:
    """Generate a deterministic scenario event stream."""
    if out_path and connect:
        raise click.UsageError("--out and --connect are mutually exclusive")
    script = load_script(script_path)
    if seed is not None:
        script = dataclasses.replace(script, seed=seed)
    events = generate_events(script)
    lines = [
        serialize_message(Message("sensor_event", i, {
            "event_id": e.event_id,
            "camera_id": e.camera_id,
            "timestamp": e.timestamp,
            "concept": e.concept,
            "confidence": e.confidence,
            "source": e.source,
        }))
        for i, e in enumerate(events, start=1)
    ]
    if connect:
        host, _, port = connect.rpartition(":")
        if not host or not port.isdigit():
            raise click.UsageError(f"--connect needs HOST:PORT, got {connect!r}")
        asyncio.run(_stream_to(host, int(port), lines))
        click.echo(f"streamed {len(lines)} events to {connect}", err=True)
        return
    text = "\n".join(lines) + ("\n" if lines else "")
    if out_path:
        Path(out_path).write_text(text, encoding="utf-8")
        click.echo(f"wrote {len(lines)} events to {out_path}", err=True)
    else:
        sys.stdout.write(text)


async def _stream_to(host: str, port: int, lines: list[str]) -> None:
    reader, writer = await asyncio.open_connection(host, port)

    async def drain_replies() -> None:
        with contextlib.suppress(Exception):
            while await reader.readline():
                pass

    drainer = asyncio.ensure_future(drain_replies())
    for line in lines:
        writer.write(line.encode("utf-8") + b"\n")
        await writer.drain()
    writer.close()
    with contextlib.suppress(Exception):
        await writer.wait_closed()
    drainer.cancel()
    with contextlib.suppress(asyncio.CancelledError):
        await drainer


@main.command()
@click.option("--log", "log_path", type=click.Path(exists=True, dir_okay=False),
              required=True, help="Stored segment or captured wire stream.")
@click.option("--speed", type=float, default=0.0,
              help="Pacing: 0 = as fast as possible, N = N times real time.")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              default=None)
def replay(log_path: str, speed: float, config_path: str | None) -> None:
    """Feed a stored event log through a fresh pipeline run."""
    config = _config(config_path)
    try:
        events, truncated = read_event_log(log_path)
    except CorruptLog as exc:
        raise click.ClickException(str(exc)) from exc
    if truncated:
        click.echo("warning: dropped a torn final record", err=True)
    pipeline = build_pipeline(config)
    try:
        count = replay_into(pipeline, events, speed)
        recommendation = pipeline.compute_board()
        from .server import board_payload

        sys.stdout.write(
            serialize_message(Message("board_update", 1, board_payload(recommendation))) + "\n"
        )
        pipeline.snapshot_models()
    finally:
        pipeline.close()
    click.echo(f"replayed {count} events", err=True)


@main.command()
@click.option("--from", "time_from", type=int, required=True,
              help="Window start, ms UTC (inclusive).")
@click.option("--to", "time_to", type=int, required=True,
              help="Window end, ms UTC (exclusive).")
@click.option("--camera", default=None, help="Only this camera.")
@click.option("--concept", default=None,
              help="Only this concept and its descendants.")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None,
              help="CSV output path; stdout when omitted.")
@click.option("--figures", is_flag=True,
              help="Render summary figures next to the CSV (requires --out).")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              default=None)
def export(time_from: int, time_to: int, camera: str | None, concept: str | None,
           out_path: str | None, figures: bool, config_path: str | None) -> None:
    """Export stored events as CSV, optionally with summary figures."""
    if figures and not out_path:
        raise click.UsageError("--figures requires --out")
    config = _config(config_path)
    pipeline = build_pipeline(config)
    try:
        events = pipeline.store.query(time_from, time_to, camera_id=camera,
                                      concept=concept)
        if out_path:
            with open(out_path, "w", encoding="utf-8", newline="") as fh:
                count = export_csv(events, pipeline.ontology, fh)
            click.echo(f"exported {count} events to {out_path}", err=True)
            if figures:
                out_file = Path(out_path)
                paths = render_figures(events, out_file.parent, prefix=out_file.stem)
                for p in paths:
                    click.echo(f"figure: {p}", err=True)
        else:
            export_csv(events, pipeline.ontology, sys.stdout)
    finally:
        pipeline.close()


if __name__ == "__main__":
    main()
