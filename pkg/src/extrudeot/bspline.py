"""Clamped B-spline curves in the plane.

Basis values are computed with the banded matrix product
``U_1(t) U_2(t) ... U_d(t)``; the classic Cox-de Boor recursion is kept
alongside as :func:`cox_de_boor` so the two routes can be checked against
each other.

Knot indices are zero based throughout: the span index ``mu`` returned by
:func:`find_span` satisfies ``knots[mu] <= t < knots[mu + 1]`` and
``degree <= mu <= n - 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class BSplineError(ValueError):
    """Invalid curve configuration or parameter outside the curve domain."""


def clamped_knot_vector(n: int, d: int) -> np.ndarray:
    """Return ``[0]*(d+1) + [1, ..., n-d-1] + [n-d]*(d+1)``."""
    if d < 0:
        raise BSplineError(f"degree must be nonnegative, got {d}")
    if n < d + 1:
        raise BSplineError(f"need at least degree+1={d + 1} control points, got {n}")
    interior = np.arange(1, n - d, dtype=float)
    return np.concatenate([np.zeros(d + 1), interior, np.full(d + 1, float(n - d))])


@dataclass(frozen=True)
class BasisRow:
    span: int
    weights: np.ndarray

    @property
    def first(self) -> int:
        """Index of the control point multiplied by ``weights[0]``."""
        return self.span - (len(self.weights) - 1)


@dataclass(frozen=True, eq=False)
class BSplineCurve:
    """Planar B-spline with a clamped, uniform-integer knot vector.

    ``control_points`` is an ``(n, 2)`` array of ``(x, z)`` pairs.
    """

    degree: int
    control_points: np.ndarray
    knots: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        cp = np.array(self.control_points, dtype=float)
        if cp.ndim != 2 or cp.shape[1] != 2:
            raise BSplineError(f"control points must have shape (n, 2), got {cp.shape}")
        n, d = cp.shape[0], int(self.degree)
        expected = clamped_knot_vector(n, d)
        if self.knots is None:
            knots = expected
        else:
            knots = np.array(self.knots, dtype=float)
            if knots.shape != expected.shape or not np.array_equal(knots, expected):
                raise BSplineError("knot vector must be the clamped uniform-integer vector")
        cp.setflags(write=False)
        knots.setflags(write=False)
        object.__setattr__(self, "degree", d)
        object.__setattr__(self, "control_points", cp)
        object.__setattr__(self, "knots", knots)

    @property
    def n(self) -> int:
        return self.control_points.shape[0]

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.knots[self.degree]), float(self.knots[self.n])

    @property
    def n_spans(self) -> int:
        return self.n - self.degree

    def with_control_points(self, control_points) -> "BSplineCurve":
        return BSplineCurve(self.degree, control_points)

    def derivative_curve(self) -> "BSplineCurve":
        """The derivative as a degree ``d-1`` spline on the inner knots."""
        d = self.degree
        if d < 1:
            raise BSplineError("cannot differentiate a degree-0 spline")
        t = self.knots
        c = self.control_points
        denom = (t[d + 1 : self.n + d] - t[1 : self.n])[:, None]
        diff = d * (c[1:] - c[:-1]) / denom
        return BSplineCurve(d - 1, diff)


def _check_domain(curve: BSplineCurve, tau) -> np.ndarray:
    tau = np.asarray(tau, dtype=float)
    lo, hi = curve.domain
    if np.any(~np.isfinite(tau)) or np.any(tau < lo) or np.any(tau > hi):
        raise BSplineError(f"parameter outside domain [{lo}, {hi}]")
    return tau


def find_span(curve: BSplineCurve, tau: float) -> int:
    tau = float(_check_domain(curve, tau))
    return int(_spans(curve, np.array([tau]))[0])


def _spans(curve: BSplineCurve, tau: np.ndarray) -> np.ndarray:
    d, n = curve.degree, curve.n
    # interior knots are consecutive integers, so the span is floor(tau) + d
    mu = np.floor(tau).astype(int) + d
    return np.clip(mu, d, n - 1)


def basis_matrix(curve: BSplineCurve, p: int, tau: float, span: int | None = None) -> np.ndarray:
    """The ``p x (p+1)`` banded matrix ``U_p`` on the span containing ``tau``."""
    d = curve.degree
    if not 0 < p <= d:
        raise BSplineError(f"order p must satisfy 0 < p <= {d}, got {p}")
    mu = find_span(curve, tau) if span is None else span
    t = curve.knots
    U = np.zeros((p, p + 1))
    for r in range(p):
        right = t[mu + r + 1]
        left = t[mu + r + 1 - p]
        den = right - left
        if den == 0.0:
            continue
        U[r, r] = (right - tau) / den
        U[r, r + 1] = (tau - left) / den
    return U


def _basis_batch(curve: BSplineCurve, tau: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized matrix-form basis: returns ``(spans, weights[N, d+1])``."""
    d = curve.degree
    t = curve.knots
    mu = _spans(curve, tau)
    B = np.ones((tau.shape[0], 1))
    for p in range(1, d + 1):
        r = np.arange(p)
        right = t[mu[:, None] + r + 1]
        left = t[mu[:, None] + r + 1 - p]
        den = right - left
        safe = np.where(den == 0.0, 1.0, den)
        a = np.where(den == 0.0, 0.0, (right - tau[:, None]) / safe)
        b = np.where(den == 0.0, 0.0, (tau[:, None] - left) / safe)
        nxt = np.zeros((tau.shape[0], p + 1))
        nxt[:, :p] += B * a
        nxt[:, 1:] += B * b
        B = nxt
    return mu, B


def basis_functions(curve: BSplineCurve, tau: float) -> BasisRow:
    tau = float(_check_domain(curve, tau))
    mu = int(_spans(curve, np.array([tau]))[0])
    B = np.ones((1, 1))
    for p in range(1, curve.degree + 1):
        B = B @ basis_matrix(curve, p, tau, span=mu)
    return BasisRow(mu, B[0])


def cox_de_boor(knots, d: int, i: int, tau: float) -> float:
    """Value of the ``i``-th degree-``d`` basis function by direct recursion.

    Zero denominators contribute zero. At the right end of the domain the
    last nonempty span is treated as closed.
    """
    t = np.asarray(knots, dtype=float)
    if d == 0:
        if t[i] <= tau < t[i + 1]:
            return 1.0
        end = t[-1]
        if tau == end and t[i] < t[i + 1] == end:
            return 1.0
        return 0.0
    out = 0.0
    den = t[i + d] - t[i]
    if den != 0.0:
        out += (tau - t[i]) / den * cox_de_boor(t, d - 1, i, tau)
    den = t[i + d + 1] - t[i + 1]
    if den != 0.0:
        out += (t[i + d + 1] - tau) / den * cox_de_boor(t, d - 1, i + 1, tau)
    return out


def evaluate(curve: BSplineCurve, tau: float) -> np.ndarray:
    row = basis_functions(curve, tau)
    return row.weights @ curve.control_points[row.first : row.span + 1]


def evaluate_many(curve: BSplineCurve, tau) -> np.ndarray:
    """Evaluate at an array of parameters; returns ``(N, 2)``."""
    tau = np.atleast_1d(_check_domain(curve, tau))
    mu, B = _basis_batch(curve, tau)
    idx = mu[:, None] - curve.degree + np.arange(curve.degree + 1)
    return np.einsum("nk,nkj->nj", B, curve.control_points[idx])


def derivative(curve: BSplineCurve, tau: float) -> np.ndarray:
    _check_domain(curve, tau)
    return evaluate(curve.derivative_curve(), tau)


def sample_polyline(curve: BSplineCurve, M: int) -> np.ndarray:
    if M < 2:
        raise BSplineError(f"need at least 2 samples, got {M}")
    lo, hi = curve.domain
    return evaluate_many(curve, np.linspace(lo, hi, M))


def _dist2_derivs(curve, d1, d2, tau, pts):
    """Return g = (s - p) . s' and g' = s'.s' + (s - p) . s'' per row."""
    s = evaluate_many(curve, tau)
    s1 = evaluate_many(d1, tau)
    if d2 is None:
        s2 = np.zeros_like(s1)
    else:
        s2 = evaluate_many(d2, tau)
    r = s - pts
    return np.einsum("ij,ij->i", r, s1), np.einsum("ij,ij->i", s1, s1) + np.einsum("ij,ij->i", r, s2)


_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def project_points(curve: BSplineCurve, points, samples_per_span: int = 32) -> np.ndarray:
    """Closest-point parameters for each row of ``points`` (shape ``(m, 2)``).

    Every discrete local minimum of a dense per-span sampling is refined by
    Newton iteration on the derivative of the squared distance, with a
    golden-section search on the seed bracket when Newton misbehaves.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    m = pts.shape[0]
    lo, hi = curve.domain
    if m == 0:
        return np.zeros(0)
    seeds = np.linspace(lo, hi, curve.n_spans * samples_per_span + 1)
    S = evaluate_many(curve, seeds)
    D = ((pts[:, None, :] - S[None, :, :]) ** 2).sum(axis=2)

    # discrete local minima, including the domain ends
    left = np.concatenate([np.full((m, 1), np.inf), D[:, :-1]], axis=1)
    right = np.concatenate([D[:, 1:], np.full((m, 1), np.inf)], axis=1)
    pi, si = np.nonzero((D <= left) & (D <= right))

    a = seeds[np.maximum(si - 1, 0)]
    b = seeds[np.minimum(si + 1, seeds.size - 1)]
    x = seeds[si].copy()
    P = pts[pi]

    if curve.degree >= 1:
        d1 = curve.derivative_curve()
        d2 = d1.derivative_curve() if d1.degree >= 1 else None
        ok = np.ones(x.size, dtype=bool)
        active = np.ones(x.size, dtype=bool)
        for _ in range(30):
            idx = np.nonzero(active)[0]
            if idx.size == 0:
                break
            g, gp = _dist2_derivs(curve, d1, d2, x[idx], P[idx])
            bad = gp <= 0.0
            step = np.where(bad, 0.0, g / np.where(bad, 1.0, gp))
            xn = x[idx] - step
            out = bad | (xn < a[idx]) | (xn > b[idx])
            ok[idx[out]] = False
            active[idx[out]] = False
            good = idx[~out]
            x[good] = xn[~out]
            active[good[np.abs(step[~out]) < 1e-15]] = False

        fb = np.nonzero(~ok)[0]
        if fb.size:
            x[fb] = _golden(curve, P[fb], a[fb], b[fb])
    else:
        x = _golden(curve, P, a, b)

    # keep the better of the refined value and the raw seed
    f_ref = ((evaluate_many(curve, x) - P) ** 2).sum(axis=1)
    f_seed = D[pi, si]
    x = np.where(f_seed <= f_ref, seeds[si], x)
    f = np.minimum(f_ref, f_seed)

    best = np.full(m, np.inf)
    tau = np.full(m, hi)
    for k in np.lexsort((x, pi)):
        j = pi[k]
        if f[k] < best[j]:
            best[j] = f[k]
            tau[j] = x[k]
    return tau


def _golden(curve, P, a, b, iters: int = 80):
    a = a.copy()
    b = b.copy()
    for _ in range(iters):
        c = b - _GOLDEN * (b - a)
        d = a + _GOLDEN * (b - a)
        fc = ((evaluate_many(curve, c) - P) ** 2).sum(axis=1)
        fd = ((evaluate_many(curve, d) - P) ** 2).sum(axis=1)
        left = fc <= fd
        b = np.where(left, d, b)
        a = np.where(left, a, c)
    return np.clip(0.5 * (a + b), curve.domain[0], curve.domain[1])


def project_point(curve: BSplineCurve, point, samples_per_span: int = 32) -> float:
    return float(project_points(curve, np.asarray(point, dtype=float)[None, :], samples_per_span)[0])
