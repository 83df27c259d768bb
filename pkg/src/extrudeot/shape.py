"""Extruded side-profile shape model and the planar geometry it needs.

The body frame has x along the heading, y to the left and z up. The side
profile lives in the xz-plane and is extruded over ``y in [-q/2, q/2]``;
the two planar faces at ``y = +-q/2`` are the caps.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
import shapely
from scipy.spatial import Delaunay, QhullError

from .bspline import BSplineCurve, evaluate, project_points, sample_polyline


class GeometryError(ValueError):
    pass


def wrap_angle(a):
    """Wrap to ``(-pi, pi]``."""
    w = np.mod(np.asarray(a, dtype=float) + np.pi, 2.0 * np.pi) - np.pi
    w = np.where(w == -np.pi, np.pi, w)
    return float(w) if np.ndim(w) == 0 else w


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    z: float
    yaw: float

    def __post_init__(self):
        object.__setattr__(self, "yaw", wrap_angle(self.yaw))

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])


@dataclass(frozen=True, eq=False)
class ExtrudedShape:
    profile: BSplineCurve
    width: float

    def __post_init__(self):
        if not self.width > 0:
            raise GeometryError(f"width must be positive, got {self.width}")


def to_body_frame(points, pose: Pose) -> np.ndarray:
    p = np.atleast_2d(np.asarray(points, dtype=float)) - pose.position
    c, s = np.cos(pose.yaw), np.sin(pose.yaw)
    out = np.empty_like(p)
    out[:, 0] = c * p[:, 0] + s * p[:, 1]
    out[:, 1] = -s * p[:, 0] + c * p[:, 1]
    out[:, 2] = p[:, 2]
    return out


def to_global_frame(points, pose: Pose) -> np.ndarray:
    p = np.atleast_2d(np.asarray(points, dtype=float))
    c, s = np.cos(pose.yaw), np.sin(pose.yaw)
    out = np.empty_like(p)
    out[:, 0] = c * p[:, 0] - s * p[:, 1] + pose.x
    out[:, 1] = s * p[:, 0] + c * p[:, 1] + pose.y
    out[:, 2] = p[:, 2] + pose.z
    return out


@dataclass(frozen=True)
class Boundary:
    """Boundary polygon (counterclockwise) and the input indices of its vertices."""

    vertices: np.ndarray
    indices: np.ndarray
    degenerate: bool
    # vertices of every boundary loop (outer ring and holes)
    all_indices: np.ndarray | None = None

    @property
    def boundary_indices(self) -> np.ndarray:
        return self.indices if self.all_indices is None else self.all_indices


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def convex_hull_2d(points) -> Boundary:
    """Andrew's monotone chain; collinear boundary points are dropped."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    m = pts.shape[0]
    if m == 0:
        return Boundary(np.zeros((0, 2)), np.zeros(0, dtype=int), True)
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    # collapse exact duplicates onto their first occurrence
    uniq = [order[0]]
    for k in order[1:]:
        if not np.array_equal(pts[k], pts[uniq[-1]]):
            uniq.append(k)
    if len(uniq) < 3:
        idx = np.array(uniq, dtype=int)
        return Boundary(pts[idx], idx, True)

    def chain(seq):
        out: list[int] = []
        for k in seq:
            while len(out) >= 2 and _cross(pts[out[-2]], pts[out[-1]], pts[k]) <= 0.0:
                out.pop()
            out.append(k)
        return out

    lower = chain(uniq)
    upper = chain(uniq[::-1])
    hull = lower[:-1] + upper[:-1]
    idx = np.array(hull, dtype=int)
    if len(hull) < 3:
        return Boundary(pts[idx], idx, True)
    return Boundary(pts[idx], idx, False)


def polygon_area(poly) -> float:
    """Signed shoelace area; positive for counterclockwise rings."""
    p = np.asarray(poly, dtype=float)
    if len(p) > 1 and np.array_equal(p[0], p[-1]):
        p = p[:-1]
    if len(p) < 3:
        return 0.0
    x, y = p[:, 0], p[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def _drop_collinear(loop: list[int], pts: np.ndarray) -> list[int]:
    changed = True
    while changed and len(loop) > 3:
        changed = False
        for k in range(len(loop)):
            a, b, c = loop[k - 1], loop[k], loop[(k + 1) % len(loop)]
            pa, pb, pc = pts[a], pts[b], pts[c]
            scale = max(np.ptp(pts[[a, b, c]], axis=0).max(), 1e-300)
            if abs(_cross(pa, pb, pc)) <= 1e-12 * scale * scale:
                del loop[k]
                changed = True
                break
    return loop


def alpha_shape_2d(points, alpha: float) -> Boundary:
    """Concave boundary from Delaunay triangles with circumradius <= ``alpha``.

    ``vertices``/``indices`` hold the largest boundary loop of the kept
    triangles and ``all_indices`` the vertices of every loop, holes included.
    As ``alpha`` grows the result becomes the convex hull.
    """
    if not alpha > 0:
        raise GeometryError(f"alpha must be positive, got {alpha}")
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    hull = convex_hull_2d(pts)
    if hull.degenerate:
        return hull
    try:
        tri = Delaunay(pts)
    except QhullError:
        return Boundary(hull.vertices, hull.indices, True)
    simp = tri.simplices
    a, b, c = pts[simp[:, 0]], pts[simp[:, 1]], pts[simp[:, 2]]
    la = np.linalg.norm(b - c, axis=1)
    lb = np.linalg.norm(a - c, axis=1)
    lc = np.linalg.norm(a - b, axis=1)
    area2 = np.abs((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0]))
    with np.errstate(divide="ignore", invalid="ignore"):
        radius = np.where(area2 > 0, la * lb * lc / (2.0 * area2), np.inf)
    keep = simp[radius <= alpha]
    if len(keep) == 0:
        return Boundary(hull.vertices, hull.indices, True)

    count: dict[tuple[int, int], int] = {}
    directed: dict[tuple[int, int], tuple[int, int]] = {}
    for t in keep:
        i, j, k = (int(v) for v in t)
        if _cross(pts[i], pts[j], pts[k]) < 0:
            j, k = k, j
        for e in ((i, j), (j, k), (k, i)):
            key = (min(e), max(e))
            count[key] = count.get(key, 0) + 1
            directed[key] = e
    nxt: dict[int, list[int]] = {}
    for key, cnt in count.items():
        if cnt == 1:
            u, v = directed[key]
            nxt.setdefault(u, []).append(v)

    loops = []
    unused = {u: list(vs) for u, vs in nxt.items()}
    for start in sorted(unused):
        while unused.get(start):
            loop = [start]
            cur = unused[start].pop()
            while cur != start and unused.get(cur):
                loop.append(cur)
                cur = unused[cur].pop()
            loops.append(loop)
    loops = [_drop_collinear(list(lp), pts) for lp in loops]
    loop = max(loops, key=lambda lp: abs(polygon_area(pts[lp])))
    idx = np.array(loop, dtype=int)
    every = np.unique(np.concatenate([np.array(lp, dtype=int) for lp in loops]))
    return Boundary(pts[idx], idx, len(idx) < 3, every)


class Label(enum.IntEnum):
    UNUSED = 0
    EXTRUSION = 1
    CAP_POS = 2
    CAP_NEG = 3


@dataclass(frozen=True)
class PartitionedFrame:
    body_points: np.ndarray
    labels: np.ndarray
    tau: np.ndarray
    degenerate: bool = False

    @property
    def extrusion(self) -> np.ndarray:
        return np.nonzero(self.labels == Label.EXTRUSION)[0]

    @property
    def caps(self) -> np.ndarray:
        return np.nonzero((self.labels == Label.CAP_POS) | (self.labels == Label.CAP_NEG))[0]


def partition_measurements(
    body_points,
    shape: ExtrudedShape,
    cap_lambda: float = 0.8,
    use_alpha: bool = False,
    alpha: float = 1.5,
    samples_per_span: int = 32,
) -> PartitionedFrame:
    """Label body-frame points as cap, extrusion or unused.

    The cap test runs first; the remaining points are projected onto the
    xz-plane and only the vertices of their boundary (convex hull, or alpha
    shape when ``use_alpha``) become extrusion points, each with the
    parameter of its closest point on the profile.
    """
    pts = np.atleast_2d(np.asarray(body_points, dtype=float))
    if pts.shape[0] == 0:
        raise GeometryError("cannot partition an empty frame")
    m = pts.shape[0]
    labels = np.full(m, Label.UNUSED, dtype=int)
    tau = np.full(m, np.nan)
    limit = cap_lambda * shape.width / 2.0
    labels[pts[:, 1] > limit] = Label.CAP_POS
    labels[pts[:, 1] < -limit] = Label.CAP_NEG

    rest = np.nonzero(labels == Label.UNUSED)[0]
    degenerate = True
    if rest.size:
        xz = pts[rest][:, [0, 2]]
        bnd = alpha_shape_2d(xz, alpha) if (use_alpha and rest.size >= 3) else convex_hull_2d(xz)
        degenerate = bnd.degenerate
        chosen = rest[bnd.boundary_indices]
        labels[chosen] = Label.EXTRUSION
        tau[chosen] = project_points(shape.profile, pts[chosen][:, [0, 2]], samples_per_span)
    return PartitionedFrame(pts, labels, tau, degenerate)


@dataclass(frozen=True)
class ProfilePolygon:
    """Closed ring (last vertex repeats the first) and its quality flags."""

    ring: np.ndarray
    degenerate: bool
    simple: bool

    @property
    def area(self) -> float:
        return abs(polygon_area(self.ring))


def _is_simple(ring: np.ndarray) -> bool:
    return bool(shapely.LinearRing(ring).is_simple)


def side_profile_polygon(shape: ExtrudedShape | BSplineCurve, M: int = 200) -> ProfilePolygon:
    curve = shape.profile if isinstance(shape, ExtrudedShape) else shape
    pts = sample_polyline(curve, M)
    ring = np.vstack([pts, pts[:1]])
    degenerate = abs(polygon_area(ring)) <= 1e-12
    simple = (not degenerate) and _is_simple(ring)
    return ProfilePolygon(ring, degenerate, simple)


def _as_polygon(poly) -> shapely.Polygon:
    if isinstance(poly, ProfilePolygon):
        poly = poly.ring
    p = np.asarray(poly, dtype=float)
    if len(p) < 3:
        raise GeometryError("polygon needs at least 3 vertices")
    ring = shapely.LinearRing(p)
    if not ring.is_simple:
        raise GeometryError("polygon is self-intersecting")
    return shapely.Polygon(ring)


def polygon_iou(a, b) -> float:
    """Intersection over union of two simple polygons."""
    pa, pb = _as_polygon(a), _as_polygon(b)
    inter = pa.intersection(pb).area
    union = pa.area + pb.area - inter
    if union <= 1e-12:
        return 0.0
    if abs(union - inter) <= 1e-12:
        return 1.0
    return float(min(max(inter / union, 0.0), 1.0))


def point_in_profile(shape: ExtrudedShape, xz, M: int = 200) -> np.ndarray:
    """Boolean cap-membership test against the closed side profile."""
    ring = side_profile_polygon(shape, M).ring
    xz = np.atleast_2d(np.asarray(xz, dtype=float))
    return shapely.contains_xy(shapely.Polygon(ring), xz[:, 0], xz[:, 1])


def surface_point(shape: ExtrudedShape, tau: float, y: float) -> np.ndarray:
    half = shape.width / 2.0
    if abs(y) > half:
        raise GeometryError(f"|y|={abs(y)} exceeds half width {half}")
    sx, sz = evaluate(shape.profile, tau)
    return np.array([sx, y, sz])
