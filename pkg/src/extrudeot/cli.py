"""Command line entry point: ``simulate``, ``track``, ``eval`` and ``all``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .config import ConfigError, RunConfig, dump_config, load_config
from .filter import TrackerError, track
from .metrics import frame_metrics, summarize
from .scenario import generate_truth, sample_frame

log = logging.getLogger("extrudeot")

TIME_TOL = 1e-6


class CommandError(RuntimeError):
    pass


def _out(cfg: RunConfig) -> Path:
    out = Path(cfg.run.output)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CommandError(f"cannot create output directory {out}: {exc.strerror}") from exc
    return out


def cmd_simulate(cfg: RunConfig) -> Path:
    """Write ``frames/frame_<index>.txt``, ``truth.csv`` and ``config.txt``."""
    out = _out(cfg)
    vehicle = cfg.vehicle
    truth = generate_truth(cfg.trajectory(), vehicle)
    sensors = cfg.sensors()
    frames_dir = out / "frames"
    frames_dir.mkdir(exist_ok=True)
    for old in frames_dir.glob("frame_*.txt"):
        old.unlink()
    frames = (
        sample_frame(truth.pose(k), vehicle, sensors, [cfg.run.seed, k], truth.t[k])
        for k in range(len(truth))
    )
    count = io.write_frames(frames_dir, frames)
    io.write_truth(out / "truth.csv", truth)
    (out / "config.txt").write_text(dump_config(cfg))
    log.info("wrote %d frames to %s", count, frames_dir)
    return out


def cmd_track(cfg: RunConfig) -> Path:
    """Write ``track.csv`` and ``geometry.jsonl`` for the configured frames."""
    out = _out(cfg)
    src = Path(cfg.scenario.input) if cfg.scenario.input else out / "frames"
    frames = io.read_frames(src)
    if not frames:
        raise CommandError(f"no frame files in {src}")
    dt = np.diff([f.t for f in frames])
    tracker = cfg.tracker_config(float(np.median(dt)) if dt.size else None)
    states = list(track(frames, tracker))
    io.write_track(out / "track.csv", states)
    io.write_geometry(out / "geometry.jsonl", states, cfg.metrics.samples)
    log.info("tracked %d of %d frames", len(states), len(frames))
    return out


def cmd_eval(cfg: RunConfig, track_path=None, truth_path=None) -> dict:
    """Write ``metrics.csv`` and ``summary.json``; returns the summary."""
    out = _out(cfg)
    states = io.read_track(track_path or out / "track.csv", cfg.tracker.degree)
    truth = io.read_truth(truth_path or out / "truth.csv")
    if not states:
        raise CommandError("track file has no rows")
    vehicle = cfg.vehicle
    series = []
    for st in states:
        k = int(np.argmin(np.abs(truth.t - st.t)))
        if abs(truth.t[k] - st.t) > TIME_TOL:
            raise CommandError(f"no truth row for t={io.fmt(st.t)}")
        series.append(frame_metrics(
            st, truth.pose(k), vehicle, cfg.metrics.samples, cfg.metrics.yaw_mod_pi,
            cfg.metrics.reference, t=st.t,
        ))
    io.write_metrics(out / "metrics.csv", series)
    summary = {"all": summarize(series).as_dict()}
    if any(m.t >= cfg.metrics.t_from for m in series):
        summary["post_warmup"] = summarize(series, cfg.metrics.t_from).as_dict()
    summary["iou_degenerate_frames"] = sum(m.iou_degenerate for m in series)
    io.write_json(out / "summary.json", summary)
    return summary


def cmd_all(cfg: RunConfig) -> dict:
    cmd_simulate(cfg)
    cmd_track(cfg)
    return cmd_eval(cfg)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="extrudeot", description="Extruded B-spline extended object tracking.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)
    for name, text in [
        ("simulate", "sample a scenario into frame files and a truth file"),
        ("track", "run the tracker over frame files"),
        ("eval", "score a track file against a truth file"),
        ("all", "simulate, track and eval in one go"),
    ]:
        s = sub.add_parser(name, help=text)
        s.add_argument("-c", "--config", help="key=value config file")
        s.add_argument("-s", "--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override one config key (repeatable)")
        s.add_argument("-o", "--output", help="output directory (run.output)")
        s.add_argument("--seed", type=int, help="random seed (run.seed)")
        if name == "track":
            s.add_argument("-i", "--input", help="frame directory (scenario.input)")
        if name == "eval":
            s.add_argument("--track", help="track file (default <output>/track.csv)")
            s.add_argument("--truth", help="truth file (default <output>/truth.csv)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = list(args.set)
    if args.output:
        overrides.append(f"run.output={args.output}")
    if args.seed is not None:
        overrides.append(f"run.seed={args.seed}")
    if getattr(args, "input", None):
        overrides.append(f"scenario.input={args.input}")
    try:
        cfg = load_config(args.config, overrides)
        if args.command == "simulate":
            cmd_simulate(cfg)
        elif args.command == "track":
            cmd_track(cfg)
        elif args.command == "eval":
            cmd_eval(cfg, args.track, args.truth)
        else:
            cmd_all(cfg)
    except (ConfigError, CommandError, TrackerError, io.FormatError, OSError, ValueError) as exc:
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f"extrudeot {args.command}: error: {msg}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
