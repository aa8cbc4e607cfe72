"""Command-line entry point: ``edgetrigger run | train-ae | report | dump-frames``.

Exit codes: 0 success, 1 configuration error, 2 runtime error.
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click
import numpy as np

from .config import ConfigError, SimConfig, load_config, parse_config_text
from .detectors import DETECTOR_NAMES
from .detectors.base import DetectorNotReady
from .detectors.tinyml import (
    calibrate_threshold,
    noise_only_frames,
    save_weights,
    train_and_calibrate,
    train_autoencoder,
)
from .report import bar_chart_svg, node_grid_svg, summary_table
from .signal import NodeSignal, read_frame_dump, schedule_events, write_frame_dump
from .sim import load_tinyml_model, run_simulation, write_trigger_log

OUT_ENV = "EDGETRIGGER_OUT"
DESK_NODES = 20
DESK_HOURS = 2.0
FULL_NODES = 200
FULL_HOURS = 24.0
# node-hours at or above which --full-scale must be given explicitly
FULL_SCALE_GUARD = FULL_NODES * FULL_HOURS
WEIGHTS_NAME = "autoencoder.bin"


class RuntimeFailure(Exception):
    pass


def default_out() -> Path:
    return Path(os.environ.get(OUT_ENV, "edgetrigger-out"))


def build_config(config_path, seed, nodes, hours, settings, full_scale) -> SimConfig:
    """Desk-scale defaults, then the config file, then ``--full-scale``, then flags."""
    base = SimConfig(node_count=DESK_NODES, duration_s=DESK_HOURS * 3600.0)
    cfg = load_config(config_path, base) if config_path else base
    if full_scale:
        cfg = cfg.replace(node_count=FULL_NODES, duration_s=FULL_HOURS * 3600.0)
    changes: dict = {}
    if seed is not None:
        changes["seed"] = seed
    if nodes is not None:
        changes["node_count"] = nodes
    if hours is not None:
        if hours <= 0:
            raise ConfigError("--hours must be > 0")
        changes["duration_s"] = hours * 3600.0
    if changes:
        cfg = cfg.replace(**changes)
    if settings:
        cfg = parse_config_text("\n".join(settings), cfg)
    if cfg.node_count * cfg.duration_h >= FULL_SCALE_GUARD and not full_scale:
        raise ConfigError(f"{cfg.node_count} nodes x {cfg.duration_h:g} h needs --full-scale")
    return cfg


def parse_detectors(text: str | None) -> tuple[str, ...]:
    if not text or text == "all":
        return DETECTOR_NAMES
    names = [n.strip().lower() for n in text.split(",") if n.strip()]
    unknown = [n for n in names if n not in DETECTOR_NAMES]
    if unknown:
        raise ConfigError(f"unknown detectors {unknown}; choose from {', '.join(DETECTOR_NAMES)}")
    return tuple(d for d in DETECTOR_NAMES if d in names)


def resolve_weights(cfg: SimConfig, weights: str | None, out: Path) -> Path | None:
    for cand in (weights, cfg.tinyml.weights_path or None, out / WEIGHTS_NAME):
        if cand and Path(cand).is_file():
            return Path(cand)
    return None


def _guard(fn):
    """Map domain errors to exit codes so every subcommand reports the same way."""

    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ConfigError as exc:
            click.echo(f"config error: {exc}", err=True)
            sys.exit(1)
        except (DetectorNotReady, RuntimeFailure, OSError, ValueError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(2)

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


config_options = [
    click.option("--config", "config_path", type=click.Path(dir_okay=False), help="key = value config file."),
    click.option("--seed", type=int, help="Simulation seed override."),
    click.option("--nodes", type=int, help="Node count override."),
    click.option("--hours", type=float, help="Simulated duration in hours."),
    click.option("--set", "settings", multiple=True, metavar="KEY=VALUE",
                 help="Any config key, e.g. --set events.rate_per_node_hour=0 (repeatable)."),
    click.option("--full-scale", is_flag=True, help="Run 200 nodes x 24 h (required for runs that large)."),
]


def with_config_options(fn):
    for opt in reversed(config_options):
        fn = opt(fn)
    return fn


@click.group()
@click.version_option(package_name="artifact")
def main():
    """Event-trigger detector comparison under drifting sensor noise."""


@main.command()
@with_config_options
@click.option("--detectors", default="all", help="Comma-separated subset of: " + ", ".join(DETECTOR_NAMES))
@click.option("--out", type=click.Path(file_okay=False), help=f"Output directory (default ${OUT_ENV} or ./edgetrigger-out).")
@click.option("--workers", type=int, default=1, show_default=True, help="Worker processes.")
@click.option("--weights", type=click.Path(dir_okay=False), help="Trained autoencoder file for tinyml.")
@click.option("--node-grid", is_flag=True, help="Also write a per-node dot grid SVG.")
@_guard
def run(config_path, seed, nodes, hours, settings, full_scale, detectors, out, workers, weights, node_grid):
    """Simulate every node and score the selected detectors."""
    cfg = build_config(config_path, seed, nodes, hours, settings, full_scale)
    names = parse_detectors(detectors)
    if workers < 1:
        raise ConfigError("--workers must be >= 1")
    out = Path(out) if out else default_out()
    model = None
    if "tinyml" in names:
        path = resolve_weights(cfg, weights, out)
        if path is None:
            raise DetectorNotReady("tinyml selected but no trained weights found; run `edgetrigger train-ae` first "
                                   "or pass --weights")
        model = load_tinyml_model(path)
    out.mkdir(parents=True, exist_ok=True)
    report, results = run_simulation(cfg, names, model, workers)
    doc = json.loads(report.to_json())
    (out / "report.json").write_text(report.to_json())
    write_trigger_log(out / "triggers.csv", cfg, results)
    table = summary_table(doc)
    (out / "summary.txt").write_text(table)
    (out / "chart.svg").write_text(bar_chart_svg(doc))
    if node_grid:
        (out / "nodes.svg").write_text(node_grid_svg(doc))
    click.echo(table, nl=False)
    click.echo(f"outputs written to {out}")


@main.command("train-ae")
@with_config_options
@click.option("--train-seed", type=int, help="Training seed (defaults to tinyml.train_seed).")
@click.option("--frames", "frames_path", type=click.Path(dir_okay=False),
              help="Train on a frame dump instead of generated noise.")
@click.option("--optimizer", type=click.Choice(["adam", "gd"]), default="adam", show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), help=f"Weights file (default <out dir>/{WEIGHTS_NAME}).")
@_guard
def train_ae(config_path, seed, nodes, hours, settings, full_scale, train_seed, frames_path, optimizer, out):
    """Train the autoencoder on noise-only frames at P0 and calibrate its threshold."""
    cfg = build_config(config_path, seed, nodes, hours, settings, full_scale)
    if train_seed is not None:
        cfg = cfg.replace(**{"tinyml.train_seed": train_seed})
    p = cfg.tinyml
    if frames_path:
        data, _ = read_frame_dump(frames_path)
        result = train_autoencoder(data, seed=p.train_seed, max_epochs=p.max_epochs, batch_size=p.batch_size,
                                   learning_rate=p.learning_rate, tol=p.tol, optimizer=optimizer)
        val = data if data.shape[0] >= 100 else np.repeat(data, -(-100 // data.shape[0]), axis=0)
        theta = calibrate_threshold(result.weights, val, p.percentile)
        energy = float(np.mean(data**2))
    else:
        result, theta = train_and_calibrate(cfg, optimizer)
        energy = float(np.mean(noise_only_frames(cfg, min(p.n_train, 1000)) ** 2))
    path = Path(out) if out else default_out() / WEIGHTS_NAME
    path.parent.mkdir(parents=True, exist_ok=True)
    save_weights(path, result.weights, theta, optimizer=optimizer, epochs=len(result.losses) - 1,
                 final_loss=repr(result.final_loss))
    click.echo(f"epochs: {len(result.losses) - 1}")
    click.echo(f"final training loss: {result.final_loss:.6g}")
    click.echo(f"final loss / mean frame energy: {result.final_loss / energy if energy > 0 else 0.0:.6g}")
    click.echo(f"theta_ml: {theta:.6g}")
    click.echo(f"weights written to {path}")


@main.command()
@click.argument("report_json", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(file_okay=False), help="Where to write summary.txt and chart.svg.")
@click.option("--node-grid", is_flag=True)
@_guard
def report(report_json, out, node_grid):
    """Re-render the summary table and charts from a saved report.json."""
    doc = json.loads(Path(report_json).read_text())
    if doc.get("format") != "edgetrigger-report-v1":
        raise RuntimeFailure(f"{report_json}: not an edgetrigger report")
    table = summary_table(doc)
    if out:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "summary.txt").write_text(table)
        (out / "chart.svg").write_text(bar_chart_svg(doc))
        if node_grid:
            (out / "nodes.svg").write_text(node_grid_svg(doc))
    click.echo(table, nl=False)


@main.command("dump-frames")
@with_config_options
@click.option("--node", type=int, default=0, show_default=True)
@click.option("--start", type=int, default=0, show_default=True, help="First frame index.")
@click.option("--count", type=int, default=128, show_default=True, help="Number of frames.")
@click.option("--out", type=click.Path(dir_okay=False), required=True, help="Binary output path (.hdr sidecar added).")
@_guard
def dump_frames(config_path, seed, nodes, hours, settings, full_scale, node, start, count, out):
    """Write raw frames of one node as little-endian float64 records."""
    cfg = build_config(config_path, seed, nodes, hours, settings, full_scale)
    if not 0 <= node < cfg.node_count:
        raise ConfigError(f"--node must lie in [0, {cfg.node_count})")
    if start < 0 or count < 1:
        raise ConfigError("--start must be >= 0 and --count >= 1")
    windows = schedule_events(cfg).for_node(node)
    frames = NodeSignal(cfg, node, windows).frames(start, start + count)
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    write_frame_dump(out, frames, cfg, node)
    click.echo(f"{count} frames of node {node} written to {out}")


if __name__ == "__main__":
    main()
