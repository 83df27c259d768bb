"""Extended Kalman filter over kinematics and the extruded B-spline profile.

Measurements enter as zero-valued pseudo-measurements: every extrusion
point contributes the x/z residual between its body-frame position and the
profile at its associated curve parameter, every cap point the residual
between its body-frame y and the cap plane. Updates are sequential, one
measurement point at a time, with a Joseph-form covariance update.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Iterator

import numpy as np

from .bspline import BSplineCurve, _basis_batch
from .dynamics import (
    IOMEGA, IQ, IV, IVZ, IX, IY, IYAW, IZ, N_KIN,
    ExtentState, KinematicState, ProcessNoiseConfig,
    assemble_Q, predict_state, process_jacobian,
)
from .shape import ExtrudedShape, Label, Pose, partition_measurements, to_body_frame, wrap_angle

log = logging.getLogger(__name__)

MIN_POINTS = 3


class TrackerError(RuntimeError):
    pass


@dataclass(frozen=True)
class MeasurementNoiseConfig:
    sigma_m: float = 0.5
    sigma_closure: float = 0.05

    def __post_init__(self):
        if not (self.sigma_m > 0 and self.sigma_closure > 0):
            raise ValueError("measurement noise standard deviations must be positive")


@dataclass(frozen=True)
class InitConfig:
    """Initial arc profile and prior standard deviations."""

    radius: float = 2.0
    sigma_pos: float = 1.0
    sigma_v: float = 5.0
    sigma_yaw: float = 0.3
    sigma_omega: float = 0.3
    sigma_z: float = 0.5
    sigma_vz: float = 0.2
    sigma_q: float = 0.0
    sigma_c: float = 0.5


@dataclass(frozen=True)
class TrackerConfig:
    n_control_points: int = 10
    degree: int = 3
    width: float = 1.8
    cap_lambda: float = 0.8
    omega_threshold: float = 1e-4
    use_alpha: bool = False
    alpha: float = 1.5
    samples_per_span: int = 32
    measurement: MeasurementNoiseConfig = field(default_factory=MeasurementNoiseConfig)
    init: InitConfig = field(default_factory=InitConfig)
    # None scales the default noise levels with each frame interval
    process: ProcessNoiseConfig | None = None
    extent_sigma: float = 0.1
    forgetting_factor: float = 1.0

    def __post_init__(self):
        if self.n_control_points < self.degree + 1:
            raise ValueError("n_control_points must be >= degree + 1")
        if not self.width > 0:
            raise ValueError("width must be positive")

    def process_noise(self, dt: float) -> ProcessNoiseConfig:
        if self.process is not None:
            return self.process
        return ProcessNoiseConfig.for_timestep(
            dt, extent_sigma=self.extent_sigma, forgetting_factor=self.forgetting_factor
        )


@dataclass(eq=False)
class TrackState:
    x: np.ndarray
    P: np.ndarray
    degree: int = 3
    t: float = 0.0

    @property
    def n(self) -> int:
        return (self.x.size - 8) // 2

    @property
    def kinematic(self) -> KinematicState:
        return KinematicState.from_array(self.x)

    @property
    def extent(self) -> ExtentState:
        return ExtentState.from_array(self.x[IQ:])

    @property
    def pose(self) -> Pose:
        return Pose(self.x[IX], self.x[IY], self.x[IZ], self.x[IYAW])

    @property
    def control_points(self) -> np.ndarray:
        return self.x[IQ + 1 :].reshape(-1, 2)

    @property
    def curve(self) -> BSplineCurve:
        return BSplineCurve(self.degree, self.control_points)

    @property
    def shape(self) -> ExtrudedShape:
        return ExtrudedShape(self.curve, float(self.x[IQ]))

    def copy(self) -> "TrackState":
        return TrackState(self.x.copy(), self.P.copy(), self.degree, self.t)


def cx_index(i: int) -> int:
    return IQ + 1 + 2 * i


def cz_index(i: int) -> int:
    return IQ + 2 + 2 * i


def arc_control_points(n: int, radius: float, baseline: float | None = None) -> np.ndarray:
    """``n`` points on the upper half circle above ``z = baseline``.

    The first point is the rear end at ``x = -radius``; the first and last
    points share the baseline, which defaults to ``-radius / 2`` so that the
    arc is vertically centred on the origin.
    """
    base = -0.5 * radius if baseline is None else float(baseline)
    theta = np.linspace(np.pi, 0.0, n)
    cp = np.column_stack([radius * np.cos(theta), radius * np.sin(theta) + base])
    cp[0, 1] = cp[-1, 1] = base
    return cp


def principal_yaw(points) -> float:
    xy = np.asarray(points, dtype=float)[:, :2]
    cov = np.cov(xy.T) if len(xy) > 1 else np.zeros((2, 2))
    w, V = np.linalg.eigh(cov)
    v = V[:, int(np.argmax(w))]
    if v[0] < 0 or (v[0] == 0 and v[1] < 0):
        v = -v
    return float(np.arctan2(v[1], v[0]))


def initialize(points, config: TrackerConfig, t: float = 0.0) -> TrackState:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[0] < MIN_POINTS:
        raise TrackerError(f"cannot initialize from {pts.shape[0]} points (need {MIN_POINTS})")
    n, ic = config.n_control_points, config.init
    centroid = pts.mean(axis=0)
    x = np.zeros(8 + 2 * n)
    x[IX], x[IY], x[IZ] = centroid
    x[IYAW] = principal_yaw(pts)
    x[IQ] = config.width
    # the underside is never observed, so rest the arc on the lowest return
    x[IQ + 1 :] = arc_control_points(n, ic.radius, pts[:, 2].min() - centroid[2]).ravel()
    sig = np.empty_like(x)
    sig[:N_KIN] = [ic.sigma_pos, ic.sigma_pos, ic.sigma_v, ic.sigma_yaw, ic.sigma_omega, ic.sigma_z, ic.sigma_vz]
    sig[IQ] = ic.sigma_q
    sig[IQ + 1 :] = ic.sigma_c
    return TrackState(x, np.diag(sig**2), config.degree, t)


def h_extrusion(state: TrackState, y, tau: float) -> np.ndarray:
    x = state.x
    c, s = np.cos(x[IYAW]), np.sin(x[IYAW])
    mu, B = _basis_batch(state.curve, np.array([float(tau)]))
    cp = state.control_points[mu[0] - state.degree : mu[0] + 1]
    sx, sz = B[0] @ cp
    return np.array([
        c * y[0] + s * y[1] - c * x[IX] - s * x[IY] - sx,
        y[2] - x[IZ] - sz,
    ])


def h_cap(state: TrackState, y, side: int) -> float:
    """Cap residual; ``side`` is +1 for the left cap, -1 for the right."""
    x = state.x
    c, s = np.cos(x[IYAW]), np.sin(x[IYAW])
    return float(-s * y[0] + c * y[1] + s * x[IX] - c * x[IY] - side * x[IQ] / 2.0)


def _extrusion_rows(x, y, mu, B, degree) -> tuple[np.ndarray, np.ndarray]:
    c, s = np.cos(x[IYAW]), np.sin(x[IYAW])
    first = mu - degree
    cp = x[IQ + 1 :].reshape(-1, 2)[first : mu + 1]
    sx, sz = B @ cp
    h = np.array([
        c * y[0] + s * y[1] - c * x[IX] - s * x[IY] - sx,
        y[2] - x[IZ] - sz,
    ])
    H = np.zeros((2, x.size))
    H[0, IX] = -c
    H[0, IY] = -s
    H[0, IYAW] = -s * y[0] + c * y[1] + s * x[IX] - c * x[IY]
    H[1, IZ] = -1.0
    cols = cx_index(first) + 2 * np.arange(degree + 1)
    H[0, cols] = -B
    H[1, cols + 1] = -B
    return h, H


def _cap_row(x, y, side) -> tuple[np.ndarray, np.ndarray]:
    c, s = np.cos(x[IYAW]), np.sin(x[IYAW])
    h = np.array([-s * y[0] + c * y[1] + s * x[IX] - c * x[IY] - side * x[IQ] / 2.0])
    H = np.zeros((1, x.size))
    H[0, IX] = s
    H[0, IY] = -c
    H[0, IYAW] = -c * y[0] - s * y[1] + c * x[IX] + s * x[IY]
    H[0, IQ] = -side / 2.0
    return h, H


def jacobian_h(state: TrackState, y, tau: float | None = None, kind: Label = Label.EXTRUSION) -> np.ndarray:
    """Rows of the pseudo-measurement Jacobian over the full state.

    The curve parameter is held fixed. Extrusion points give two rows
    (x, z); cap points give one.
    """
    y = np.asarray(y, dtype=float)
    if kind == Label.EXTRUSION:
        mu, B = _basis_batch(state.curve, np.array([float(tau)]))
        return _extrusion_rows(state.x, y, int(mu[0]), B[0], state.degree)[1]
    if kind in (Label.CAP_POS, Label.CAP_NEG):
        return _cap_row(state.x, y, 1 if kind == Label.CAP_POS else -1)[1]
    raise ValueError(f"no measurement model for label {kind!r}")


def _ekf_update(x, P, h, H, R):
    """Update toward the zero pseudo-measurement, Joseph form."""
    PHt = P @ H.T
    S = H @ PHt + R
    K = np.linalg.solve(S, PHt.T).T
    x = x - K @ h
    A = np.eye(x.size) - K @ H
    P = A @ P @ A.T + K @ R @ K.T
    return x, P


def closure_update(state: TrackState, sigma_closure: float) -> TrackState:
    x, P = state.x, state.P
    n = state.n
    H = np.zeros((1, x.size))
    H[0, cz_index(0)] = 1.0
    H[0, cz_index(n - 1)] = -1.0
    h = np.array([x[cz_index(0)] - x[cz_index(n - 1)]])
    if h[0] == 0.0:
        return state.copy()
    x, P = _ekf_update(x, P, h, H, np.array([[sigma_closure**2]]))
    return TrackState(x, _symmetrize(P), state.degree, state.t)


def _symmetrize(P):
    return 0.5 * (P + P.T)


def predict(state: TrackState, dt: float, config: TrackerConfig) -> TrackState:
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    noise = config.process_noise(dt)
    F = process_jacobian(state.x, dt, config.omega_threshold)
    x = predict_state(state.x, dt, config.omega_threshold)
    P = F @ state.P @ F.T
    if noise.forgetting_factor != 1.0:
        P[IQ:, IQ:] *= noise.forgetting_factor
    P = P + assemble_Q(noise, state.n)
    return TrackState(x, _symmetrize(P), state.degree, state.t + dt)


def update_frame(state: TrackState, points, config: TrackerConfig) -> TrackState:
    """Fold one frame of global measurements into the (predicted) state."""
    if state is None:
        raise TrackerError("state is not initialized")
    pts = np.atleast_2d(np.asarray(points, dtype=float)).reshape(-1, 3)
    if pts.shape[0] < MIN_POINTS:
        return state

    body = to_body_frame(pts, state.pose)
    part = partition_measurements(
        body, state.shape, config.cap_lambda, config.use_alpha, config.alpha, config.samples_per_span
    )
    x, P = state.x.copy(), state.P.copy()
    var = config.measurement.sigma_m**2

    ext = part.extrusion
    if ext.size:
        mu, B = _basis_batch(state.curve, part.tau[ext])
        R2 = np.eye(2) * var
        for k, j in enumerate(ext):
            h, H = _extrusion_rows(x, pts[j], int(mu[k]), B[k], state.degree)
            x, P = _ekf_update(x, P, h, H, R2)
            x[IYAW] = wrap_angle(x[IYAW])

    R1 = np.array([[var]])
    for j in part.caps:
        side = 1 if part.labels[j] == Label.CAP_POS else -1
        h, H = _cap_row(x, pts[j], side)
        x, P = _ekf_update(x, P, h, H, R1)
        x[IYAW] = wrap_angle(x[IYAW])

    out = TrackState(x, _symmetrize(P), state.degree, state.t)
    return closure_update(out, config.measurement.sigma_closure)


@dataclass(frozen=True)
class Frame:
    t: float
    points: np.ndarray


def track(
    frames: Iterable[Frame],
    config: TrackerConfig,
    on_step: Callable[[str, TrackState], None] | None = None,
) -> Iterator[TrackState]:
    """Run the filter over time-ordered frames.

    Nothing is yielded before the first frame with enough points; that frame
    initializes the track and is also used for its first update. ``on_step``
    is called with ``("predict" | "update", state)`` after every step.
    """
    state: TrackState | None = None
    for frame in frames:
        if state is None:
            if len(frame.points) < MIN_POINTS:
                log.debug("t=%.3f: %d points, waiting to initialize", frame.t, len(frame.points))
                continue
            state = initialize(frame.points, config, frame.t)
        else:
            dt = frame.t - state.t
            state = predict(state, dt, config)
            state = replace(state, t=frame.t)
            if on_step:
                on_step("predict", state)
        state = update_frame(state, frame.points, config)
        if on_step:
            on_step("update", state)
        yield state
    if state is None:
        raise TrackerError("no frame with at least 3 points; track was never initialized")
