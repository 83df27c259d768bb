"""Synthetic ground truth and a surface point sampler.

Vehicles are extruded side profiles given as counterclockwise ``(x, z)``
polygons centred on their bounding box. Sensors draw points uniformly from
the whole surface and keep those whose outward normal faces them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import shapely

from .filter import Frame
from .shape import Pose, polygon_area, to_body_frame, to_global_frame, wrap_angle


def _centered(profile: np.ndarray) -> np.ndarray:
    lo, hi = profile.min(axis=0), profile.max(axis=0)
    return profile - 0.5 * (lo + hi)


def _bus_profile(length: float = 12.0, height: float = 3.1, corner: float = 0.4, crown: float = 0.06) -> np.ndarray:
    """Long box with rounded upper corners and a slightly crowned roof."""
    half = length / 2.0
    top = height - crown
    arc = np.linspace(0.0, np.pi / 2.0, 6)
    front = np.column_stack([half - corner + corner * np.cos(arc), top - corner + corner * np.sin(arc)])
    xs = np.linspace(half - corner, -(half - corner), 15)[1:-1]
    roof = np.column_stack([xs, top + crown * (1.0 - (xs / (half - corner)) ** 2)])
    rear = np.column_stack([-(half - corner) - corner * np.sin(arc), top - corner + corner * np.cos(arc)])
    pts = np.vstack([[(-half, 0.0), (half, 0.0)], front, roof, rear])
    return _centered(pts)


@dataclass(frozen=True, eq=False)
class VehiclePreset:
    name: str
    profile: np.ndarray
    width: float

    def __post_init__(self):
        p = np.asarray(self.profile, dtype=float)
        if polygon_area(p) < 0:
            p = p[::-1]
        if not shapely.LinearRing(p).is_simple:
            raise ValueError(f"profile of {self.name!r} is not a simple polygon")
        if not self.width > 0:
            raise ValueError("width must be positive")
        p.setflags(write=False)
        object.__setattr__(self, "profile", p)

    @property
    def ring(self) -> np.ndarray:
        return np.vstack([self.profile, self.profile[:1]])

    @property
    def bbox_center(self) -> np.ndarray:
        """Body-frame ``(x, y, z)`` of the bounding-box centre."""
        lo, hi = self.profile.min(axis=0), self.profile.max(axis=0)
        cx, cz = 0.5 * (lo + hi)
        return np.array([cx, 0.0, cz])

    @property
    def height(self) -> float:
        return float(np.ptp(self.profile[:, 1]))


PRESETS: dict[str, VehiclePreset] = {
    "compact_car": VehiclePreset(
        "compact_car",
        np.array([
            (-2.2, -0.75), (2.2, -0.75), (2.2, -0.25), (2.05, -0.05), (1.1, 0.08),
            (0.7, 0.35), (0.3, 0.62), (-0.2, 0.75), (-0.8, 0.75), (-1.3, 0.68),
            (-1.75, 0.45), (-2.1, 0.15), (-2.2, -0.1),
        ]),
        1.8,
    ),
    "van": VehiclePreset(
        "van",
        np.array([
            (-2.5, -1.0), (2.5, -1.0), (2.5, -0.2), (2.35, 0.25), (1.9, 0.8),
            (1.5, 1.0), (-2.3, 1.0), (-2.5, 0.8),
        ]),
        2.0,
    ),
    "bus": VehiclePreset("bus", _bus_profile(), 2.5),
}

# initial arc radius used for each preset
INIT_RADIUS = {"compact_car": 2.0, "van": 2.0, "bus": 4.0}


@dataclass(frozen=True)
class Straight:
    length: float
    speed: float

    @property
    def duration(self) -> float:
        return self.length / self.speed


@dataclass(frozen=True)
class Arc:
    """Circular arc; positive ``angle`` turns left."""

    radius: float
    angle: float
    speed: float

    @property
    def duration(self) -> float:
        return self.radius * abs(self.angle) / self.speed


@dataclass(frozen=True)
class Stop:
    """Constant deceleration from the current speed to rest."""

    duration: float


@dataclass(frozen=True)
class Hold:
    duration: float


Segment = Straight | Arc | Stop | Hold


@dataclass(frozen=True)
class TrajectorySpec:
    segments: tuple
    frame_rate: float = 10.0
    start: Pose = Pose(0.0, 0.0, 0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        if not self.frame_rate > 0:
            raise ValueError("frame_rate must be positive")
        for seg in self.segments:
            if isinstance(seg, Straight):
                ok = seg.length > 0 and seg.speed > 0
            elif isinstance(seg, Arc):
                ok = seg.radius > 0 and seg.speed > 0 and seg.angle != 0
            elif isinstance(seg, (Stop, Hold)):
                ok = seg.duration > 0
            else:
                ok = False
            if not ok:
                raise ValueError(f"invalid trajectory segment {seg!r}")

    @property
    def duration(self) -> float:
        return float(sum(s.duration for s in self.segments))


@dataclass(frozen=True, eq=False)
class ScenarioTruth:
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    yaw: np.ndarray
    v: np.ndarray
    omega: np.ndarray
    vehicle: VehiclePreset | None = None

    def __len__(self) -> int:
        return len(self.t)

    def pose(self, k: int) -> Pose:
        return Pose(self.x[k], self.y[k], self.z[k], self.yaw[k])


def _segment_state(seg, p0: Pose, v0: float, tau: float):
    """Position, heading, speed and turn rate ``tau`` seconds into ``seg``."""
    c, s = math.cos(p0.yaw), math.sin(p0.yaw)
    if isinstance(seg, Straight):
        d = seg.speed * tau
        return p0.x + d * c, p0.y + d * s, p0.yaw, seg.speed, 0.0
    if isinstance(seg, Arc):
        w = math.copysign(seg.speed / seg.radius, seg.angle)
        yaw = p0.yaw + w * tau
        r = seg.speed / w
        return (
            p0.x + r * (math.sin(yaw) - s),
            p0.y + r * (c - math.cos(yaw)),
            yaw, seg.speed, w,
        )
    if isinstance(seg, Stop):
        T = seg.duration
        v = v0 * (1.0 - tau / T)
        d = v0 * tau - 0.5 * v0 / T * tau**2
        return p0.x + d * c, p0.y + d * s, p0.yaw, v, 0.0
    return p0.x, p0.y, p0.yaw, 0.0, 0.0


def generate_truth(traj: TrajectorySpec, vehicle: VehiclePreset | None = None) -> ScenarioTruth:
    """Sample the trajectory at the frame rate, starting at ``t = 0``."""
    n_frames = int(math.floor(traj.duration * traj.frame_rate + 1e-9))
    rows = []
    p0, v0, t0 = traj.start, 0.0, 0.0
    seg_iter = iter(traj.segments)
    seg = next(seg_iter, None)
    for k in range(n_frames):
        t = k / traj.frame_rate
        while seg is not None and t >= t0 + seg.duration:
            x, y, yaw, v, _ = _segment_state(seg, p0, v0, seg.duration)
            p0, v0, t0 = Pose(x, y, p0.z, yaw), v, t0 + seg.duration
            seg = next(seg_iter, None)
        if seg is None:
            x, y, yaw, v, w = p0.x, p0.y, p0.yaw, 0.0, 0.0
        else:
            x, y, yaw, v, w = _segment_state(seg, p0, v0, t - t0)
        rows.append((t, x, y, p0.z, wrap_angle(yaw), v, w))
    cols = np.array(rows, dtype=float).reshape(-1, 7).T
    return ScenarioTruth(*cols, vehicle=vehicle)


@dataclass(frozen=True)
class SensorSpec:
    position: tuple[float, float, float]
    max_range: float = 200.0
    budget: int = 500
    noise: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if self.budget < 0 or not self.max_range > 0:
            raise ValueError("sensor budget must be >= 0 and range > 0")
        object.__setattr__(self, "position", tuple(float(v) for v in self.position))
        noise = self.noise
        if np.ndim(noise) == 0:
            noise = (noise, noise, noise)
        object.__setattr__(self, "noise", tuple(float(v) for v in noise))


def _faces(vehicle: VehiclePreset):
    p = vehicle.profile
    q = np.roll(p, -1, axis=0)
    d = q - p
    length = np.hypot(d[:, 0], d[:, 1])
    normals = np.column_stack([d[:, 1], -d[:, 0]]) / length[:, None]
    cap_area = polygon_area(p)
    areas = np.concatenate([length * vehicle.width, [cap_area, cap_area]])
    return p, d, normals, areas


def sample_surface(vehicle: VehiclePreset, count: int, rng: np.random.Generator):
    """Uniform surface samples in the body frame with outward unit normals."""
    p, d, normals, areas = _faces(vehicle)
    n_edges = len(p)
    face = rng.choice(len(areas), size=count, p=areas / areas.sum())
    pts = np.zeros((count, 3))
    nrm = np.zeros((count, 3))
    half = vehicle.width / 2.0

    on_edge = face < n_edges
    k = face[on_edge]
    u = rng.random(k.size)
    pts[on_edge, 0] = p[k, 0] + u * d[k, 0]
    pts[on_edge, 2] = p[k, 1] + u * d[k, 1]
    pts[on_edge, 1] = rng.uniform(-half, half, k.size)
    nrm[on_edge, 0] = normals[k, 0]
    nrm[on_edge, 2] = normals[k, 1]

    cap_idx = np.nonzero(~on_edge)[0]
    if cap_idx.size:
        poly = shapely.Polygon(vehicle.profile)
        lo, hi = vehicle.profile.min(axis=0), vehicle.profile.max(axis=0)
        got: list[np.ndarray] = []
        need = cap_idx.size
        while need > 0:
            cand = rng.uniform(lo, hi, size=(2 * need + 8, 2))
            inside = cand[shapely.contains_xy(poly, cand[:, 0], cand[:, 1])]
            got.append(inside[:need])
            need -= len(got[-1])
        xz = np.vstack(got)
        side = np.where(face[cap_idx] == n_edges, 1.0, -1.0)
        pts[cap_idx, 0] = xz[:, 0]
        pts[cap_idx, 2] = xz[:, 1]
        pts[cap_idx, 1] = side * half
        nrm[cap_idx, 1] = side
    return pts, nrm


def sample_frame(
    pose: Pose,
    vehicle: VehiclePreset,
    sensors: SensorSpec | Sequence[SensorSpec],
    seed=None,
    t: float = 0.0,
) -> Frame:
    """Merged point cloud of all sensors at one instant.

    ``seed`` may be anything accepted by ``numpy.random.default_rng``.
    """
    if isinstance(sensors, SensorSpec):
        sensors = [sensors]
    rng = np.random.default_rng(seed)
    c, s = math.cos(pose.yaw), math.sin(pose.yaw)
    rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    out = []
    for sensor in sensors:
        body, nrm = sample_surface(vehicle, sensor.budget, rng)
        world = to_global_frame(body, pose)
        normal = nrm @ rot.T
        to_sensor = np.asarray(sensor.position) - world
        visible = (np.einsum("ij,ij->i", to_sensor, normal) > 0.0) & (
            np.linalg.norm(to_sensor, axis=1) <= sensor.max_range
        )
        pts = world[visible]
        if any(sensor.noise):
            pts = pts + rng.normal(size=pts.shape) * np.asarray(sensor.noise)
        out.append(pts)
    points = np.vstack(out) if out else np.zeros((0, 3))
    return Frame(float(t), points)


def surface_residual(points, pose: Pose, vehicle: VehiclePreset) -> np.ndarray:
    """Distance from each global point to the surface of the posed vehicle."""
    body = to_body_frame(points, pose)
    half = vehicle.width / 2.0
    poly = shapely.Polygon(vehicle.profile)
    boundary = poly.exterior
    xz = shapely.points(body[:, 0], body[:, 2])
    d_edge = shapely.distance(boundary, xz)
    excess_y = np.maximum(np.abs(body[:, 1]) - half, 0.0)
    to_extrusion = np.hypot(d_edge, excess_y)
    inside = shapely.contains_xy(poly, body[:, 0], body[:, 2])
    cap_plane = np.abs(np.abs(body[:, 1]) - half)
    to_cap = np.where(inside, cap_plane, np.hypot(cap_plane, d_edge))
    return np.minimum(to_extrusion, to_cap)


def road_sensors(budget: int = 500, noise: float = 0.0, height: float = 5.0) -> list[SensorSpec]:
    """Four roadside poles along the straight-then-left-turn route."""
    spots = [(-10.0, -8.0), (45.0, -10.0), (100.0, 10.0), (70.0, 120.0)]
    return [SensorSpec((x, y, height), budget=budget, noise=(noise,) * 3) for x, y in spots]


def ring_sensors(budget: int = 500, noise: float = 0.0, height: float = 6.0, spread=(15.0, 12.0)) -> list[SensorSpec]:
    """Four poles around the origin, one per quadrant."""
    ax, ay = spread
    spots = [(-ax, -ay), (ax, -ay), (ax, ay), (-ax, ay)]
    return [SensorSpec((x, y, height), budget=budget, noise=(noise,) * 3) for x, y in spots]


def straight_left_turn(speed: float = 6.0, duration: float = 30.0) -> tuple:
    """Straight for 10 s, a 90 degree left turn of radius 25 m, then straight."""
    first = Straight(10.0 * speed, speed)
    turn = Arc(25.0, math.pi / 2.0, speed)
    rest = duration - first.duration - turn.duration
    return (first, turn, Straight(rest * speed, speed))


def static(duration: float) -> tuple:
    return (Hold(duration),)
