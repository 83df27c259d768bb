"""Plain-text readers and writers for frames, truth, tracks and metrics.

All floats are written with 9 significant digits so that repeated runs
produce byte-identical files.
"""

from __future__ import annotations

import csv
import json
import re
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .filter import Frame, TrackState
from .scenario import ScenarioTruth
from .shape import side_profile_polygon

FMT = "%.9g"
FRAME_RE = re.compile(r"frame_(\d+)\.txt$")
TRUTH_COLUMNS = ("t", "x", "y", "z", "yaw", "v_xy", "omega")
KIN_COLUMNS = ("t", "x_x", "x_y", "x_z", "v_xy", "psi", "omega", "v_z", "q")
METRIC_COLUMNS = ("t", "err_xy", "err_z", "err_yaw", "iou")


class FormatError(ValueError):
    pass


def fmt(v: float) -> str:
    return FMT % float(v)


def track_columns(n: int) -> list[str]:
    cols = list(KIN_COLUMNS)
    for i in range(1, n + 1):
        cols += [f"c{i}_x", f"c{i}_z"]
    return cols


def frame_path(directory, index: int) -> Path:
    return Path(directory) / f"frame_{index:05d}.txt"


def write_frame(path, frame: Frame) -> None:
    lines = [f"# t={fmt(frame.t)}"]
    lines += [" ".join(fmt(v) for v in row) for row in np.asarray(frame.points).reshape(-1, 3)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_frame(path) -> Frame:
    path = Path(path)
    with path.open() as fh:
        head = fh.readline().strip()
        if not head.startswith("# t="):
            raise FormatError(f"{path}: missing '# t=' header")
        t = float(head[4:])
        rows = [line.split() for line in fh if line.strip() and not line.startswith("#")]
    try:
        pts = np.array(rows, dtype=float).reshape(-1, 3)
    except ValueError as exc:
        raise FormatError(f"{path}: expected 'x y z' rows") from exc
    return Frame(t, pts)


def write_frames(directory, frames: Iterable[Frame]) -> int:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    count = 0
    for k, frame in enumerate(frames):
        write_frame(frame_path(directory, k), frame)
        count += 1
    return count


def read_frames(directory) -> list[Frame]:
    """All ``frame_<index>.txt`` files in index order; times must increase."""
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"frame directory not found: {directory}")
    found = []
    for p in directory.iterdir():
        m = FRAME_RE.match(p.name)
        if m:
            found.append((int(m.group(1)), p))
    frames = [read_frame(p) for _, p in sorted(found)]
    for a, b in zip(frames, frames[1:]):
        if not b.t > a.t:
            raise FormatError(f"frame times not increasing at t={fmt(b.t)}")
    return frames


def _write_csv(path, header: Sequence[str], rows: Iterable[Sequence[float]]) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def _read_csv(path, expect: Sequence[str] | None = None):
    with Path(path).open(newline="") as fh:
        r = csv.reader(fh)
        header = next(r, None)
        if header is None:
            raise FormatError(f"{path}: empty file")
        if expect is not None and list(header) != list(expect):
            raise FormatError(f"{path}: unexpected header {','.join(header)}")
        try:
            data = [[float(v) for v in row] for row in r if row]
            return header, np.array(data, dtype=float).reshape(-1, len(header))
        except ValueError as exc:
            raise FormatError(f"{path}: bad row ({exc})") from exc


def write_truth(path, truth: ScenarioTruth) -> None:
    cols = np.column_stack([truth.t, truth.x, truth.y, truth.z, truth.yaw, truth.v, truth.omega])
    _write_csv(path, TRUTH_COLUMNS, cols)


def read_truth(path) -> ScenarioTruth:
    _, a = _read_csv(path, TRUTH_COLUMNS)
    return ScenarioTruth(*a.T.copy())


def track_row(state: TrackState) -> list[float]:
    x = state.x
    # file order: x_x, x_y, x_z, v_xy, psi, omega, v_z
    kin = [x[0], x[1], x[5], x[2], x[3], x[4], x[6]]
    return [state.t, *kin, *x[7:]]


def write_track(path, states: Sequence[TrackState]) -> None:
    n = states[0].n if states else 0
    _write_csv(path, track_columns(n), (track_row(s) for s in states))


def state_from_row(row, degree: int = 3) -> TrackState:
    """Rebuild a state (zero covariance) from one track row."""
    t, xx, xy, xz, v, psi, w, vz = row[:8]
    x = np.concatenate([[xx, xy, v, psi, w, xz, vz], row[8:]])
    return TrackState(x, np.zeros((x.size, x.size)), degree, float(t))


def read_track(path, degree: int = 3) -> list[TrackState]:
    header, a = _read_csv(path)
    n = (len(header) - len(KIN_COLUMNS)) // 2
    if header != track_columns(n):
        raise FormatError(f"{path}: unexpected header")
    return [state_from_row(row, degree) for row in a]


def geometry_record(state: TrackState, M: int = 200) -> dict:
    pose = state.pose
    ring = side_profile_polygon(state.curve, M).ring[:-1]
    return {
        "t": float(fmt(state.t)),
        "pose": {k: float(fmt(getattr(pose, k))) for k in ("x", "y", "z", "yaw")},
        "width": float(fmt(state.x[7])),
        "profile": [[float(fmt(a)), float(fmt(b))] for a, b in ring],
    }


def write_geometry(path, states: Sequence[TrackState], M: int = 200) -> None:
    """One JSON object per line: ``t``, ``pose``, ``width``, ``profile``.

    ``profile`` is the closed side profile in the body xz-plane with ``M``
    points (the closing segment back to the first point is implicit).
    """
    with Path(path).open("w") as fh:
        for s in states:
            fh.write(json.dumps(geometry_record(s, M)) + "\n")


def write_metrics(path, series) -> None:
    _write_csv(path, METRIC_COLUMNS, ((m.t, m.err_xy, m.err_z, m.err_yaw, m.iou) for m in series))


def read_metrics(path) -> np.ndarray:
    return _read_csv(path, METRIC_COLUMNS)[1]


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")

