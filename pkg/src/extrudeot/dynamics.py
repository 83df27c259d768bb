"""Process model: CTRV in the ground plane, constant velocity in z, and a
random-walk extent.

Full state layout (length ``8 + 2n``)::

    0 x_x   1 x_y   2 v_xy   3 yaw   4 omega   5 x_z   6 v_z
    7 q     8 + 2i  control point i, x      9 + 2i  control point i, z
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .shape import wrap_angle

IX, IY, IV, IYAW, IOMEGA, IZ, IVZ, IQ = range(8)
N_KIN = 7


@dataclass(frozen=True)
class KinematicState:
    x: float
    y: float
    v_xy: float
    yaw: float
    omega: float
    z: float
    v_z: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.v_xy, self.yaw, self.omega, self.z, self.v_z])

    @classmethod
    def from_array(cls, a) -> "KinematicState":
        return cls(*(float(v) for v in np.asarray(a)[:N_KIN]))


@dataclass(frozen=True, eq=False)
class ExtentState:
    width: float
    control_points: np.ndarray

    def as_array(self) -> np.ndarray:
        return np.concatenate([[self.width], np.asarray(self.control_points, dtype=float).ravel()])

    @classmethod
    def from_array(cls, a) -> "ExtentState":
        a = np.asarray(a, dtype=float)
        return cls(float(a[0]), a[1:].reshape(-1, 2).copy())


@dataclass(frozen=True)
class ProcessNoiseConfig:
    """Per-step process noise standard deviations (SI units)."""

    sigma_x: float = 0.044
    sigma_y: float = 0.044
    sigma_v: float = 0.88
    sigma_yaw: float = 0.01
    sigma_omega: float = 0.1
    sigma_z: float = 0.01
    sigma_vz: float = 0.001
    sigma_q: float = 0.0
    sigma_cx: float = 0.1
    sigma_cz: float = 0.1
    forgetting_factor: float = 1.0

    def __post_init__(self):
        for k, v in asdict(self).items():
            if k == "forgetting_factor":
                if not v >= 1.0:
                    raise ValueError(f"forgetting_factor must be >= 1, got {v}")
            elif not v >= 0.0:
                raise ValueError(f"{k} must be nonnegative, got {v}")

    @classmethod
    def for_timestep(cls, dt: float, extent_sigma: float = 0.1, **overrides) -> "ProcessNoiseConfig":
        """Noise levels scaled to the frame interval ``dt``."""
        values = dict(
            sigma_x=0.5 * 8.8 * dt**2,
            sigma_y=0.5 * 8.8 * dt**2,
            sigma_v=8.8 * dt,
            sigma_yaw=0.1 * dt,
            sigma_omega=dt,
            sigma_z=0.1 * dt,
            sigma_vz=0.01 * dt,
            sigma_q=0.0,
            sigma_cx=extent_sigma,
            sigma_cz=extent_sigma,
        )
        values.update(overrides)
        return cls(**values)


def _ctrv(xm: np.ndarray, dt: float, omega_threshold: float) -> np.ndarray:
    x, y, v, yaw, w, z, vz = xm[:N_KIN]
    out = np.array(xm[:N_KIN], dtype=float)
    if abs(w) > omega_threshold:
        # v/w (sin(yaw + w dt) - sin yaw) and v/w (cos yaw - cos(yaw + w dt)),
        # rewritten with half-angle products to avoid cancellation at small w
        half = 0.5 * dt * w
        chord = v * dt * np.sin(half) / half
        out[0] = x + chord * np.cos(yaw + half)
        out[1] = y + chord * np.sin(yaw + half)
    else:
        out[0] = x + dt * v * np.cos(yaw)
        out[1] = y + dt * v * np.sin(yaw)
    out[3] = wrap_angle(yaw + dt * w)
    out[5] = z + dt * vz
    return out


def predict_kinematic(state: KinematicState, dt: float, omega_threshold: float = 1e-4) -> KinematicState:
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    return KinematicState.from_array(_ctrv(state.as_array(), dt, omega_threshold))


def predict_extent(extent: ExtentState) -> ExtentState:
    return ExtentState(extent.width, np.array(extent.control_points, dtype=float))


def kinematic_jacobian(xm: np.ndarray, dt: float, omega_threshold: float = 1e-4) -> np.ndarray:
    _, _, v, yaw, w, _, _ = xm[:N_KIN]
    F = np.eye(N_KIN)
    if abs(w) > omega_threshold:
        yaw1 = yaw + dt * w
        s0, c0, s1, c1 = np.sin(yaw), np.cos(yaw), np.sin(yaw1), np.cos(yaw1)
        F[0, 2] = (s1 - s0) / w
        F[0, 3] = v / w * (c1 - c0)
        F[0, 4] = v * dt * c1 / w - v / w**2 * (s1 - s0)
        F[1, 2] = (c0 - c1) / w
        F[1, 3] = v / w * (s1 - s0)
        F[1, 4] = v * dt * s1 / w - v / w**2 * (c0 - c1)
    else:
        s0, c0 = np.sin(yaw), np.cos(yaw)
        F[0, 2] = dt * c0
        F[0, 3] = -dt * v * s0
        F[1, 2] = dt * s0
        F[1, 3] = dt * v * c0
    F[3, 4] = dt
    F[5, 6] = dt
    return F


def process_jacobian(x: np.ndarray, dt: float, omega_threshold: float = 1e-4) -> np.ndarray:
    """Jacobian over the full state: CTRV block plus identity for the extent."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    x = np.asarray(x, dtype=float)
    F = np.eye(x.size)
    F[:N_KIN, :N_KIN] = kinematic_jacobian(x, dt, omega_threshold)
    return F


def assemble_Q(config: ProcessNoiseConfig, n: int) -> np.ndarray:
    kin = [config.sigma_x, config.sigma_y, config.sigma_v, config.sigma_yaw,
           config.sigma_omega, config.sigma_z, config.sigma_vz]
    ext = [config.sigma_q] + [config.sigma_cx, config.sigma_cz] * n
    return np.diag(np.square(kin + ext))


def predict_state(x: np.ndarray, dt: float, omega_threshold: float = 1e-4) -> np.ndarray:
    """Mean prediction for the full state vector."""
    x = np.asarray(x, dtype=float)
    out = x.copy()
    out[:N_KIN] = _ctrv(x, dt, omega_threshold)
    return out
