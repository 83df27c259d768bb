"""Per-frame errors against ground truth and their summaries."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .shape import GeometryError, Pose, polygon_iou, side_profile_polygon, to_body_frame, to_global_frame, wrap_angle


@dataclass(frozen=True)
class FrameMetrics:
    t: float
    err_xy: float
    err_z: float
    err_yaw: float
    iou: float
    iou_degenerate: bool = False


def yaw_error(estimate: float, truth: float, mod_pi: bool = False) -> float:
    e = abs(wrap_angle(estimate - truth))
    if mod_pi:
        e = min(e, np.pi - e)
    return float(e)


def estimated_profile_in_truth_frame(estimate, truth_pose: Pose, M: int = 200):
    """Side-profile ring of the estimate expressed in the truth body frame."""
    poly = side_profile_polygon(estimate.curve, M)
    ring = poly.ring
    body = np.column_stack([ring[:, 0], np.zeros(len(ring)), ring[:, 1]])
    world = to_global_frame(body, estimate.pose)
    local = to_body_frame(world, truth_pose)
    return poly, local[:, [0, 2]]


def side_view_iou(estimate, truth_pose: Pose, vehicle, M: int = 200) -> tuple[float, bool]:
    """IoU of the side profiles after placing the estimate at its own pose.

    Returns ``(iou, degenerate)``; a degenerate or self-intersecting
    estimated profile scores 0.
    """
    poly, ring = estimated_profile_in_truth_frame(estimate, truth_pose, M)
    if poly.degenerate or not poly.simple:
        return 0.0, True
    try:
        return polygon_iou(ring, vehicle.ring), False
    except GeometryError:
        return 0.0, True


def estimated_reference(estimate, M: int = 200, reference: str = "bbox") -> np.ndarray:
    """Global reference point of an estimate.

    ``"bbox"`` is the centre of the bounding box of the closed estimated
    profile; ``"position"`` is the state position itself.
    """
    if reference == "position":
        return estimate.pose.position
    if reference != "bbox":
        raise ValueError(f"unknown reference {reference!r}")
    pts = side_profile_polygon(estimate.curve, M).ring
    cx, cz = 0.5 * (pts.min(axis=0) + pts.max(axis=0))
    return to_global_frame(np.array([[cx, 0.0, cz]]), estimate.pose)[0]


def frame_metrics(
    estimate,
    truth_pose: Pose,
    vehicle,
    M: int = 200,
    yaw_mod_pi: bool = False,
    reference: str = "bbox",
    reference_offset=None,
    t: float | None = None,
) -> FrameMetrics:
    """Errors of one estimate; ``estimate`` needs ``pose`` and ``curve``.

    The truth reference point is the bounding-box centre of the vehicle
    (plus ``reference_offset`` in the truth body frame, if given); the
    estimate's is chosen by ``reference`` (see :func:`estimated_reference`).
    """
    offset = vehicle.bbox_center if reference_offset is None else vehicle.bbox_center + np.asarray(reference_offset)
    ref = to_global_frame(offset[None, :], truth_pose)[0]
    est = estimate.pose
    est_ref = estimated_reference(estimate, M, reference)
    err_xy = float(np.hypot(est_ref[0] - ref[0], est_ref[1] - ref[1]))
    err_z = float(abs(est_ref[2] - ref[2]))
    err_yaw = yaw_error(est.yaw, truth_pose.yaw, yaw_mod_pi)
    iou, degenerate = side_view_iou(estimate, truth_pose, vehicle, M)
    if t is None:
        t = float(getattr(estimate, "t", 0.0))
    return FrameMetrics(float(t), err_xy, err_z, err_yaw, iou, degenerate)


CHANNELS = ("err_xy", "err_z", "err_yaw")


@dataclass(frozen=True)
class Summary:
    frames: int
    t_from: float | None
    rmse: dict
    max: dict
    iou_mean: float
    iou_min: float
    iou_final: float

    def as_dict(self) -> dict:
        return {
            "frames": self.frames,
            "t_from": self.t_from,
            "rmse": dict(self.rmse),
            "max": dict(self.max),
            "iou_mean": self.iou_mean,
            "iou_min": self.iou_min,
            "iou_final": self.iou_final,
        }


def summarize(series: Sequence[FrameMetrics], t_from: float | None = None) -> Summary:
    """RMSE and maximum per error channel plus IoU statistics.

    With ``t_from`` only frames with ``t >= t_from`` are included.
    """
    rows = [m for m in series if t_from is None or m.t >= t_from]
    if not rows:
        raise ValueError("no frames in the summary window")
    rmse, mx = {}, {}
    for ch in CHANNELS:
        v = np.array([getattr(m, ch) for m in rows])
        rmse[ch] = float(np.sqrt(np.mean(v**2)))
        mx[ch] = float(np.max(v))
    iou = np.array([m.iou for m in rows])
    return Summary(len(rows), t_from, rmse, mx, float(iou.mean()), float(iou.min()), float(iou[-1]))
