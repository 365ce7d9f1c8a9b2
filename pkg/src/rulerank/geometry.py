"""Geometric and kinematic kernels shared by the rule proxies.

Every kernel has a scalar entry point matching its documented contract and a
batched form (suffix ``_batch`` or array-valued arguments) that the proxy
evaluator uses to stay vectorized over candidates, timesteps and agents.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
import shapely

from .scenario import DT, Trajectory

TTC_CAP = 1e6


class GeometryError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Kinematics


@dataclass(frozen=True, eq=False)
class KinematicProfile:
    accel: np.ndarray
    lat_accel: np.ndarray
    jerk: np.ndarray
    yaw_rate: np.ndarray
    yaw_accel: np.ndarray
    decel: np.ndarray


@lru_cache(maxsize=64)
def _window_bounds(n: int, half: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    idx = np.arange(n)
    lo = np.maximum(idx - half, 0)
    hi = np.minimum(idx + half + 1, n)
    return lo, hi, (hi - lo).astype(float)


def moving_average(x: np.ndarray, window: int) -> np.ndarray:
    """Centered moving average along the last axis, truncated at the ends."""
    if window <= 1:
        return np.array(x, dtype=float, copy=True)
    n = x.shape[-1]
    if window == 3 and n >= 2:
        out = np.empty(x.shape)
        out[..., 1:-1] = (x[..., :-2] + x[..., 1:-1] + x[..., 2:]) / 3.0
        out[..., 0] = 0.5 * (x[..., 0] + x[..., 1])
        out[..., -1] = 0.5 * (x[..., -2] + x[..., -1])
        return out
    lo, hi, count = _window_bounds(n, window // 2)
    csum = np.zeros(x.shape[:-1] + (n + 1,))
    np.cumsum(x, axis=-1, out=csum[..., 1:])
    return (csum[..., hi] - csum[..., lo]) / count


def derivative(x: np.ndarray, dt: float) -> np.ndarray:
    """First derivative along the last axis: central inside, one-sided at the ends."""
    out = np.empty(x.shape)
    out[..., 1:-1] = (x[..., 2:] - x[..., :-2]) / (2.0 * dt)
    out[..., 0] = (x[..., 1] - x[..., 0]) / dt
    out[..., -1] = (x[..., -1] - x[..., -2]) / dt
    return out


def unwrap_heading(heading: np.ndarray) -> np.ndarray:
    """Cumulative heading with every step increment wrapped to (-pi, pi]."""
    inc = np.diff(heading, axis=-1)
    inc = -np.remainder(-inc + np.pi, 2.0 * np.pi) + np.pi
    first = heading[..., :1]
    return np.concatenate([first, first + np.cumsum(inc, axis=-1)], axis=-1)


def kinematics_arrays(speed: np.ndarray, heading: np.ndarray, window: int = 3, dt: float = DT):
    """Batched kinematics over the last axis; returns the profile fields as arrays."""
    if speed.shape[-1] < 3:
        raise GeometryError("insufficient frames: kinematics needs at least 3 steps")
    if window < 1 or window % 2 == 0:
        raise GeometryError("window must be a positive odd integer")
    accel = moving_average(derivative(speed, dt), window)
    jerk = moving_average(derivative(accel, dt), window)
    yaw_rate = moving_average(derivative(unwrap_heading(heading), dt), window)
    yaw_accel = moving_average(derivative(yaw_rate, dt), window)
    lat_accel = speed * yaw_rate
    decel = np.maximum(0.0, -accel)
    return accel, lat_accel, jerk, yaw_rate, yaw_accel, decel


def kinematics(traj: Trajectory | np.ndarray, window: int = 3) -> KinematicProfile:
    """Smoothed finite-difference derivatives of a trajectory."""
    arr = traj.array if isinstance(traj, Trajectory) else np.asarray(traj, dtype=float)
    return KinematicProfile(*kinematics_arrays(arr[:, 3], arr[:, 2], window))


# ---------------------------------------------------------------------------
# Oriented boxes


@dataclass(frozen=True)
class OrientedBox:
    cx: float
    cy: float
    heading: float
    length: float
    width: float

    def __post_init__(self):
        if not (self.length > 0 and self.width > 0):
            raise GeometryError("box length and width must be > 0")

    @property
    def center(self) -> tuple[float, float]:
        return (self.cx, self.cy)

    def corners(self) -> np.ndarray:
        return box_corners(self.cx, self.cy, self.heading, self.length, self.width)

    @property
    def area(self) -> float:
        return self.length * self.width


def box_corners(cx, cy, heading, length, width) -> np.ndarray:
    """Corners ``(..., 4, 2)`` in counter-clockwise order starting front-left."""
    cx, cy, heading, length, width = np.broadcast_arrays(
        *(np.asarray(v, dtype=float) for v in (cx, cy, heading, length, width))
    )
    c, s = np.cos(heading), np.sin(heading)
    hl, hw = length / 2.0, width / 2.0
    sign_l = np.array([1.0, -1.0, -1.0, 1.0])
    sign_w = np.array([1.0, 1.0, -1.0, -1.0])
    dl = hl[..., None] * sign_l
    dw = hw[..., None] * sign_w
    x = cx[..., None] + dl * c[..., None] - dw * s[..., None]
    y = cy[..., None] + dl * s[..., None] + dw * c[..., None]
    return np.stack([x, y], axis=-1)


def sat_batch(ca: np.ndarray, ha: np.ndarray, cb: np.ndarray, hb: np.ndarray):
    """SAT on corner arrays; returns (overlapping, p_long, p_lat) along box a's axes.

    Touching boxes (zero overlap on some axis) count as separated.
    """
    ca = np.asarray(ca, dtype=float)
    cb = np.asarray(cb, dtype=float)
    ha = np.asarray(ha, dtype=float)
    hb = np.asarray(hb, dtype=float)
    lead = np.broadcast_shapes(ca.shape[:-2], cb.shape[:-2], ha.shape, hb.shape)
    ha = np.broadcast_to(ha, lead)
    hb = np.broadcast_to(hb, lead)
    cos_a, sin_a, cos_b, sin_b = np.cos(ha), np.sin(ha), np.cos(hb), np.sin(hb)
    # rows: a's long and lateral axes, then b's; shape (..., 2, 4)
    axes = np.stack([np.stack([cos_a, -sin_a, cos_b, -sin_b], -1),
                     np.stack([sin_a, cos_a, sin_b, cos_b], -1)], -2)
    pa = ca @ axes  # (..., 4 corners, 4 axes)
    pb = cb @ axes
    overlap = np.minimum(pa.max(-2), pb.max(-2)) - np.maximum(pa.min(-2), pb.min(-2))
    overlapping = np.all(overlap > 0, axis=-1)
    p_long = np.where(overlapping, overlap[..., 0], 0.0)
    p_lat = np.where(overlapping, overlap[..., 1], 0.0)
    return overlapping, p_long, p_lat


def _local_corners(cx, cy, c, s, hl, hw, ox, oy, oc, os):
    """Corners of one set of boxes expressed in the frames of another, each (..., 4)."""
    sign_l = np.array([1.0, -1.0, -1.0, 1.0])
    sign_w = np.array([1.0, 1.0, -1.0, -1.0])
    dl = hl[..., None] * sign_l
    dw = hw[..., None] * sign_w
    x = (cx - ox)[..., None] + dl * c[..., None] - dw * s[..., None]
    y = (cy - oy)[..., None] + dl * s[..., None] + dw * c[..., None]
    return x * oc[..., None] + y * os[..., None], -x * os[..., None] + y * oc[..., None]


def box_pair_contact(a, b):
    """SAT overlap and boundary distance for rectangle pairs.

    ``a`` and ``b`` are ``(cx, cy, heading, length, width)`` tuples of
    broadcastable arrays. Returns ``(overlapping, p_long, p_lat, edge)`` with
    penetration measured along a's axes and ``edge`` zero for overlapping
    pairs; matches ``sat_batch`` plus ``edge_distance_batch`` on the corners.
    """
    ax, ay, ah, al, aw = (np.asarray(v, dtype=float) for v in a)
    bx, by, bh, bl, bw = (np.asarray(v, dtype=float) for v in b)
    ca, sa, cb, sb = np.cos(ah), np.sin(ah), np.cos(bh), np.sin(bh)
    ahl, ahw, bhl, bhw = 0.5 * al, 0.5 * aw, 0.5 * bl, 0.5 * bw
    bu, bv = _local_corners(bx, by, cb, sb, bhl, bhw, ax, ay, ca, sa)  # b in a's frame
    au, av = _local_corners(ax, ay, ca, sa, ahl, ahw, bx, by, cb, sb)  # a in b's frame
    o1 = np.minimum(ahl, bu.max(-1)) - np.maximum(-ahl, bu.min(-1))
    o2 = np.minimum(ahw, bv.max(-1)) - np.maximum(-ahw, bv.min(-1))
    o3 = np.minimum(bhl, au.max(-1)) - np.maximum(-bhl, au.min(-1))
    o4 = np.minimum(bhw, av.max(-1)) - np.maximum(-bhw, av.min(-1))
    overlapping = (o1 > 0) & (o2 > 0) & (o3 > 0) & (o4 > 0)
    # separated convex boxes: nearest points include a corner of one box
    d_b = np.hypot(np.maximum(np.abs(bu) - ahl[..., None], 0.0), np.maximum(np.abs(bv) - ahw[..., None], 0.0))
    d_a = np.hypot(np.maximum(np.abs(au) - bhl[..., None], 0.0), np.maximum(np.abs(av) - bhw[..., None], 0.0))
    edge = np.where(overlapping, 0.0, np.minimum(d_b.min(-1), d_a.min(-1)))
    return overlapping, np.where(overlapping, o1, 0.0), np.where(overlapping, o2, 0.0), edge


def obb_penetration(a: OrientedBox, b: OrientedBox) -> tuple[float, float]:
    """Penetration depths ``(p_long, p_lat)`` along box a's axes; ``(0, 0)`` when separated."""
    _, pl, pt = sat_batch(a.corners(), a.heading, b.corners(), b.heading)
    return float(pl), float(pt)


def point_segment_distance(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distance from points to segments with broadcasting over leading axes."""
    p, a, b = (np.asarray(x, dtype=float) for x in (p, a, b))
    abx, aby = b[..., 0] - a[..., 0], b[..., 1] - a[..., 1]
    apx, apy = p[..., 0] - a[..., 0], p[..., 1] - a[..., 1]
    denom = abx * abx + aby * aby
    safe = np.where(denom > 0, denom, 1.0)
    t = np.clip(np.where(denom > 0, (apx * abx + apy * aby) / safe, 0.0), 0.0, 1.0)
    return np.hypot(apx - t * abx, apy - t * aby)


def edge_distance_batch(ca: np.ndarray, cb: np.ndarray, overlapping: np.ndarray) -> np.ndarray:
    """Boundary-to-boundary distance of convex quads given corner arrays ``(..., 4, 2)``."""
    ca, cb = np.broadcast_arrays(np.asarray(ca, dtype=float), np.asarray(cb, dtype=float))
    # corners of a against edges of b, and corners of b against edges of a
    pts = np.stack([ca, cb], axis=-3)
    seg_a = np.stack([cb, ca], axis=-3)
    seg_b = np.roll(seg_a, -1, axis=-2)
    d = point_segment_distance(pts[..., :, None, :], seg_a[..., None, :, :], seg_b[..., None, :, :])
    d = d.reshape(d.shape[:-3] + (-1,)).min(axis=-1)
    return np.where(overlapping, 0.0, d)


def edge_distance(a: OrientedBox, b: OrientedBox) -> float:
    """Minimum distance between box boundaries; 0 when the boxes overlap."""
    ca, cb = a.corners(), b.corners()
    overlapping, _, _ = sat_batch(ca, a.heading, cb, b.heading)
    return float(edge_distance_batch(ca, cb, overlapping))


# ---------------------------------------------------------------------------
# Polygons


def polygon_area(poly: np.ndarray) -> float:
    """Signed shoelace area; positive for counter-clockwise vertex order."""
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _as_polygon(poly) -> np.ndarray:
    arr = np.asarray(poly, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 3:
        raise GeometryError("degenerate polygon: need at least 3 vertices")
    return arr


def is_convex(poly: np.ndarray) -> bool:
    d1 = np.roll(poly, -1, axis=0) - poly
    d2 = np.roll(d1, -1, axis=0)
    cross = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    return bool(np.all(cross >= -1e-12) or np.all(cross <= 1e-12))


def _point_in_triangle(p, a, b, c) -> bool:
    def cross(o, u, v):
        return (u[0] - o[0]) * (v[1] - o[1]) - (u[1] - o[1]) * (v[0] - o[0])

    return cross(a, b, p) >= 0 and cross(b, c, p) >= 0 and cross(c, a, p) >= 0


def triangulate(poly) -> list[np.ndarray]:
    """Ear-clipping triangulation of a simple polygon into CCW triangles."""
    pts = _as_polygon(poly)
    if polygon_area(pts) < 0:
        pts = pts[::-1]
    verts = [tuple(p) for p in pts]
    tris = []
    guard = 0
    while len(verts) > 3 and guard < 10 * len(pts) ** 2:
        guard += 1
        n = len(verts)
        clipped = False
        for i in range(n):
            a, b, c = verts[i - 1], verts[i], verts[(i + 1) % n]
            turn = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
            if abs(turn) <= 1e-12:
                # collinear vertex adds nothing
                verts.pop(i)
                clipped = True
                break
            if turn < 0:
                continue
            if any(_point_in_triangle(p, a, b, c) for p in verts if p not in (a, b, c)):
                continue
            tris.append(np.array([a, b, c]))
            verts.pop(i)
            clipped = True
            break
        if not clipped:
            break
    if len(verts) == 3:
        tri = np.array(verts)
        if abs(polygon_area(tri)) > 0:
            tris.append(tri)
    return tris


def convex_pieces(poly) -> list[np.ndarray]:
    pts = _as_polygon(poly)
    if is_convex(pts):
        return [pts if polygon_area(pts) >= 0 else pts[::-1]]
    return triangulate(pts)


def clip_convex(subject: list, clip: np.ndarray) -> list:
    """Sutherland-Hodgman clip of ``subject`` against convex CCW polygon ``clip``."""
    out = subject
    m = len(clip)
    for i in range(m):
        if not out:
            break
        ax, ay = clip[i]
        bx, by = clip[(i + 1) % m]
        ex, ey = bx - ax, by - ay
        inp = out
        out = []
        n = len(inp)
        for j in range(n):
            px, py = inp[j - 1]
            qx, qy = inp[j]
            sp = ex * (py - ay) - ey * (px - ax)
            sq = ex * (qy - ay) - ey * (qx - ax)
            if sq >= 0:
                if sp < 0:
                    t = sp / (sp - sq)
                    out.append((px + t * (qx - px), py + t * (qy - py)))
                out.append((qx, qy))
            elif sp >= 0:
                t = sp / (sp - sq)
                out.append((px + t * (qx - px), py + t * (qy - py)))
    return out


def _list_area(pts: list) -> float:
    s = 0.0
    n = len(pts)
    for i in range(n):
        x1, y1 = pts[i - 1]
        x2, y2 = pts[i]
        s += x1 * y2 - x2 * y1
    return 0.5 * s


def overlap_area_pieces(corners: np.ndarray, pieces: Sequence[np.ndarray]) -> float:
    """Overlap area of a CCW convex quad with a union of disjoint convex pieces."""
    bmin = corners.min(axis=0)
    bmax = corners.max(axis=0)
    quad = corners.tolist()
    total = 0.0
    for piece in pieces:
        if np.any(piece.max(axis=0) < bmin) or np.any(piece.min(axis=0) > bmax):
            continue
        clipped = clip_convex(quad, piece)
        if len(clipped) >= 3:
            total += abs(_list_area(clipped))
    return total


def _edge_normals(poly: np.ndarray) -> np.ndarray:
    e = np.roll(poly, -1, axis=-2) - poly
    return np.stack([-e[..., 1], e[..., 0]], axis=-1)


def _clipped_boundary_term(seg_a: np.ndarray, seg_b: np.ndarray, poly: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Shoelace contribution of segments ``seg_a -> seg_b`` restricted to convex CCW ``poly``.

    Shapes: segments (P, S, 2), polygons (P, V, 2). Also returns a flag for
    segments lying exactly on a polygon edge line, where the split is ambiguous.
    """
    e = np.roll(poly, -1, axis=1) - poly  # (P, V, 2)
    d = seg_b - seg_a  # (P, S, 2)
    rel = seg_a[:, :, None, :] - poly[:, None, :, :]  # (P, S, V, 2)
    n = e[:, None, :, 0] * rel[..., 1] - e[:, None, :, 1] * rel[..., 0]
    dd = e[:, None, :, 0] * d[:, :, None, 1] - e[:, None, :, 1] * d[:, :, None, 0]
    par = dd == 0
    safe = np.where(par, 1.0, dd)
    t = -n / safe
    lo = np.max(np.where(dd > 0, t, -np.inf), axis=-1, initial=0.0)
    hi = np.min(np.where(dd < 0, t, np.inf), axis=-1, initial=1.0)
    outside = np.any(par & (n < 0), axis=-1)
    ambiguous = np.any(par & (n == 0), axis=(1, 2))
    keep = (~outside) & (lo < hi)
    q0 = seg_a + lo[..., None] * d
    q1 = seg_a + hi[..., None] * d
    term = np.where(keep, q0[..., 0] * q1[..., 1] - q1[..., 0] * q0[..., 1], 0.0)
    return term.sum(axis=1), ambiguous


def overlap_area_batch(corners: np.ndarray, pieces: Sequence[np.ndarray]) -> np.ndarray:
    """Vectorized ``overlap_area_pieces`` over ``(P, 4, 2)`` quads.

    Uses the boundary form of the area integral: the intersection of two
    convex CCW polygons is bounded by each polygon's edges clipped to the
    other. Exactly collinear edges fall back to polygon clipping.
    """
    q = np.asarray(corners, dtype=float).reshape(-1, 4, 2)
    out = np.zeros(q.shape[0])
    if q.shape[0] == 0:
        return out
    origin = q.mean(axis=1, keepdims=True)
    ql = q - origin
    bmin, bmax = q.min(axis=1), q.max(axis=1)
    for piece in pieces:
        near = ~(np.any(piece.max(axis=0) < bmin, axis=1) | np.any(piece.min(axis=0) > bmax, axis=1))
        if not np.any(near):
            continue
        idx = np.nonzero(near)[0]
        a = ql[idx]
        pl = piece[None, :, :] - origin[idx]
        t1, amb1 = _clipped_boundary_term(a, np.roll(a, -1, axis=1), pl)
        t2, amb2 = _clipped_boundary_term(pl, np.roll(pl, -1, axis=1), a)
        area = np.maximum(0.0, 0.5 * (t1 + t2))
        amb = amb1 | amb2
        for j in np.nonzero(amb)[0]:
            clipped = clip_convex(q[idx[j]].tolist(), piece)
            area[j] = abs(_list_area(clipped)) if len(clipped) >= 3 else 0.0
        out[idx] += area
    return out


def polygon_overlap_area(box: OrientedBox, poly) -> float:
    """Area of intersection between an oriented box and a simple polygon."""
    return overlap_area_pieces(box.corners(), convex_pieces(poly))


# ---------------------------------------------------------------------------
# Regions and polylines


class Region:
    """Union of polygons supporting vectorized signed-distance queries."""

    def __init__(self, polygons: Sequence):
        if len(polygons) == 0:
            raise GeometryError("signed distance needs at least one polygon")
        geoms = [shapely.Polygon(_as_polygon(p)) for p in polygons]
        self.union = shapely.unary_union(geoms)
        self.boundary = self.union.boundary
        shapely.prepare(self.union)
        shapely.prepare(self.boundary)

    def signed_distance(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        flat = pts.reshape(-1, 2)
        dist = shapely.distance(self.boundary, shapely.points(flat))
        inside = shapely.contains_xy(self.union, flat[:, 0], flat[:, 1])
        return np.where(inside, dist, -dist).reshape(pts.shape[:-1])

    def distance(self, points) -> np.ndarray:
        """Unsigned distance to the region; zero inside."""
        pts = np.asarray(points, dtype=float)
        flat = pts.reshape(-1, 2)
        out = np.zeros(len(flat))
        outside = ~shapely.contains_xy(self.union, flat[:, 0], flat[:, 1])
        if outside.any():
            out[outside] = shapely.distance(self.boundary, shapely.points(flat[outside]))
        return out.reshape(pts.shape[:-1])


def signed_distance_to_region(point, polygons: Sequence) -> float:
    """Positive inside the union of polygons, negative outside."""
    return float(Region(polygons).signed_distance(np.asarray(point, dtype=float)))


@dataclass(frozen=True, eq=False)
class Polyline:
    """Preprocessed polyline with zero-length segments removed."""

    start: np.ndarray
    vec: np.ndarray
    length: np.ndarray
    cum: np.ndarray
    heading: np.ndarray

    @classmethod
    def from_points(cls, points) -> "Polyline":
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 2 or pts.shape[0] < 2:
            raise GeometryError("polyline needs at least 2 vertices")
        vec = np.diff(pts, axis=0)
        length = np.hypot(vec[:, 0], vec[:, 1])
        keep = length > 1e-12
        if not np.any(keep):
            raise GeometryError("polyline is fully degenerate")
        start = pts[:-1][keep]
        vec = vec[keep]
        length = length[keep]
        cum = np.concatenate([[0.0], np.cumsum(length)[:-1]])
        return cls(start, vec, length, cum, np.arctan2(vec[:, 1], vec[:, 0]))

    def project(self, points) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Return (signed lateral offset, arc length, tangent heading, distance) per point."""
        p = np.asarray(points, dtype=float)
        rel = p[..., None, :] - self.start
        t = np.clip(np.sum(rel * self.vec, axis=-1) / (self.length**2), 0.0, 1.0)
        diff = rel - t[..., None] * self.vec
        dist = np.hypot(diff[..., 0], diff[..., 1])
        seg = np.argmin(dist, axis=-1)
        vec = self.vec[seg]
        r = np.take_along_axis(rel, seg[..., None, None], axis=-2)[..., 0, :]
        cross = vec[..., 0] * r[..., 1] - vec[..., 1] * r[..., 0]
        d = np.take_along_axis(dist, seg[..., None], axis=-1)[..., 0]
        d_lat = np.where(cross >= 0, d, -d)
        ts = np.take_along_axis(t, seg[..., None], axis=-1)[..., 0]
        s = self.cum[seg] + ts * self.length[seg]
        return d_lat, s, self.heading[seg], d


class LaneSet:
    """Several polylines padded to a common segment count for one-pass projection."""

    def __init__(self, lines: list[Polyline]):
        self.n = len(lines)
        m = max((len(l.length) for l in lines), default=1)
        L = max(self.n, 1)
        self.start = np.zeros((L, m, 2))
        self.vec = np.tile(np.array([1.0, 0.0]), (L, m, 1))
        self.length = np.ones((L, m))
        self.cum = np.zeros((L, m))
        self.heading = np.zeros((L, m))
        self.pad = np.ones((L, m), dtype=bool)
        for i, l in enumerate(lines):
            c = len(l.length)
            self.start[i, :c] = l.start
            self.vec[i, :c] = l.vec
            self.length[i, :c] = l.length
            self.cum[i, :c] = l.cum
            self.heading[i, :c] = l.heading
            self.pad[i, :c] = False
        self.m = m
        self._vx = self.vec[:, None, :, 0]
        self._vy = self.vec[:, None, :, 1]
        self._inv_len2 = (1.0 / self.length**2)[:, None, :]
        self._pad_inf = np.where(self.pad, np.inf, 0.0)[:, None, :]

    def project(self, points):
        """Same outputs as ``Polyline.project`` stacked lane-first: each (L, *points.shape[:-1])."""
        p = np.asarray(points, dtype=float)
        lead = p.shape[:-1]
        q = p.reshape(-1, 2)
        P = q.shape[0]
        rx = q[None, :, None, 0] - self.start[:, None, :, 0]  # (L, P, M)
        ry = q[None, :, None, 1] - self.start[:, None, :, 1]
        vx, vy = self._vx, self._vy
        t = (rx * vx + ry * vy) * self._inv_len2
        np.clip(t, 0.0, 1.0, out=t)
        ex = rx - t * vx
        ey = ry - t * vy
        dist = np.hypot(ex, ey)
        dist += self._pad_inf
        seg = np.argmin(dist, axis=-1)  # (L, P)
        flat = (np.arange(self.n * P).reshape(self.n, P) * dist.shape[-1]) + seg
        d = dist.ravel()[flat]
        lane_seg = np.arange(self.n)[:, None] * self.m + seg
        cross = self.vec[..., 0].ravel()[lane_seg] * ry.ravel()[flat] - self.vec[..., 1].ravel()[lane_seg] * rx.ravel()[flat]
        d_lat = np.where(cross >= 0, d, -d)
        s = self.cum.ravel()[lane_seg] + t.ravel()[flat] * self.length.ravel()[lane_seg]
        shape = (self.n,) + lead
        return d_lat.reshape(shape), s.reshape(shape), self.heading.ravel()[lane_seg].reshape(shape), d.reshape(shape)


def lateral_offset(point, centerline) -> tuple[float, float]:
    """Signed lateral offset (left positive) and tangent heading of the nearest segment."""
    d_lat, _, heading, _ = Polyline.from_points(centerline).project(np.asarray(point, dtype=float))
    return float(d_lat), float(heading)


# ---------------------------------------------------------------------------
# Time to collision


def time_to_collision(ego_pos, ego_vel, other_pos, other_vel) -> np.ndarray | float:
    """Range over closing speed under constant velocities, capped at ``TTC_CAP``.

    Inputs broadcast over leading axes; trailing axis is (x, y).
    """
    dp = np.asarray(other_pos, dtype=float) - np.asarray(ego_pos, dtype=float)
    dv = np.asarray(other_vel, dtype=float) - np.asarray(ego_vel, dtype=float)
    r2 = np.sum(dp * dp, axis=-1)
    rate = -np.sum(dp * dv, axis=-1)
    closing = rate > 0
    ttc = np.where(closing, r2 / np.where(closing, rate, 1.0), TTC_CAP)
    ttc = np.minimum(ttc, TTC_CAP)
    return float(ttc) if np.ndim(ttc) == 0 else ttc


def velocity(heading, speed) -> np.ndarray:
    heading = np.asarray(heading, dtype=float)
    speed = np.asarray(speed, dtype=float)
    return np.stack([speed * np.cos(heading), speed * np.sin(heading)], axis=-1)


def wrap_angle(a):
    """Wrap to (-pi, pi]."""
    return -np.remainder(-np.asarray(a, dtype=float) + np.pi, 2.0 * np.pi) + np.pi
