"""Rule proxies: activation, raw severity, normalization and tier aggregation.

Evaluation is vectorized over the K candidates of a scenario.  Scenario-only
quantities live in :class:`ScenarioContext`; per-candidate quantities shared
by several rules (kinematics, lane assignment, agent distances) are computed
lazily on :class:`CandidateBatch`.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Mapping, Sequence

import numpy as np

from . import geometry as geo
from .catalog import Rulebook, RuleSpec, Tier, builtin_catalog
from .scenario import (
    DT,
    AgentType,
    CandidateSet,
    Scenario,
    SignalPhase,
    StopControl,
    Trajectory,
)

VEHICLE, PEDESTRIAN, CYCLIST = 0, 1, 2
_TYPE_CODE = {AgentType.VEHICLE: VEHICLE, AgentType.PEDESTRIAN: PEDESTRIAN, AgentType.CYCLIST: CYCLIST}
MOVING_SPEED = 0.5
MIN_TIME_GAP_SPEED = 0.1
TTC_FLOOR = 1e-3
STOP_LINE_LATERAL_SLACK = 2.0
STOP_LINE_ALIGNMENT = 0.5
NO_LANE_CORRIDOR = 1.75
CROSSING_MIN_DEG = 30.0
CROSSING_MAX_DEG = 150.0


class EvaluationError(ValueError):
    pass


class RuleNotActiveError(EvaluationError):
    pass


# ---------------------------------------------------------------------------
# Normalization


class Normalization(str, enum.Enum):
    EXPONENTIAL = "exponential"
    LINEAR = "linear"


def normalize(raw, rule: RuleSpec | None = None, mode: str | Normalization = "exponential", *,
              kappa=None, alpha=None):
    """Map raw severities to [0, 1].

    exponential: ``1 - exp(-kappa * max(0, raw))``; linear: ``min(1, raw / alpha)``.
    """
    mode = Normalization(mode)
    r = np.maximum(0.0, np.asarray(raw, dtype=float))
    if mode is Normalization.EXPONENTIAL:
        k = rule.kappa if kappa is None else kappa
        out = -np.expm1(-np.asarray(k, dtype=float) * r)
    else:
        a = rule.alpha if alpha is None else alpha
        out = np.minimum(1.0, r / np.asarray(a, dtype=float))
    out = np.clip(out, 0.0, 1.0)
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# Applicability


class MaskSource(str, enum.Enum):
    ORACLE = "oracle"
    ALWAYS_ON = "always_on"
    HYBRID = "hybrid"
    THRESHOLDED = "thresholded"
    ACTIVATION_DERIVED = "activation_derived"


TIER_THRESHOLDS = (0.05, 0.15, 0.30, 0.50)


@dataclass(frozen=True, eq=False)
class ApplicabilityMask:
    binary: np.ndarray
    source: MaskSource
    scores: np.ndarray | None = None

    def __post_init__(self):
        b = np.array(self.binary, dtype=bool)
        b.setflags(write=False)
        object.__setattr__(self, "binary", b)
        object.__setattr__(self, "source", MaskSource(self.source))
        if self.scores is not None:
            s = np.array(self.scores, dtype=float)
            s.setflags(write=False)
            object.__setattr__(self, "scores", s)


def _vector(values, n: int, name: str, *, unit: bool = False) -> np.ndarray:
    if values is None:
        raise EvaluationError(f"policy requires {name}")
    arr = np.asarray(values, dtype=float)
    if arr.shape != (n,):
        raise EvaluationError(f"{name} must have {n} entries, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise EvaluationError(f"{name} must be finite")
    if unit and (np.any(arr < 0) or np.any(arr > 1)):
        raise EvaluationError(f"{name} must lie in [0, 1]")
    return arr


def applicability(policy: str | MaskSource, rulebook: Rulebook | None = None, *, labels=None, scores=None,
                  thresholds: Sequence[float] = TIER_THRESHOLDS, scenario: Scenario | None = None,
                  candidates: CandidateSet | None = None) -> ApplicabilityMask:
    """Build an applicability mask for the requested policy.

    ``hybrid`` forces Safety and Legal on and thresholds the supplied scores
    for Road and Comfort; ``thresholded`` applies the strict per-tier
    thresholds to every rule; ``activation_derived`` marks a rule applicable
    when it activates for at least one candidate.
    """
    book = rulebook or builtin_catalog()
    policy = MaskSource(policy)
    n = len(book)
    tiers = book.tiers
    if policy is MaskSource.ORACLE:
        lab = _vector(labels, n, "labels")
        return ApplicabilityMask(lab > 0.5, policy)
    if policy is MaskSource.ALWAYS_ON:
        return ApplicabilityMask(np.ones(n, dtype=bool), policy)
    if policy is MaskSource.ACTIVATION_DERIVED:
        if scenario is None:
            raise EvaluationError("policy requires a scenario")
        cands = candidates if candidates is not None else scenario.candidates
        if cands is None:
            raise EvaluationError("policy requires candidates")
        result = evaluate(cands, scenario, ApplicabilityMask(np.ones(n, dtype=bool), MaskSource.ALWAYS_ON), book)
        return ApplicabilityMask(result.violations.activation.any(axis=0), policy)
    sc = _vector(scores, n, "scores", unit=True)
    thr = np.asarray(thresholds, dtype=float)[tiers]
    above = sc > thr
    if policy is MaskSource.THRESHOLDED:
        return ApplicabilityMask(above, policy, sc)
    binary = np.where(tiers <= int(Tier.LEGAL), True, above)
    return ApplicabilityMask(binary, policy, sc)


# ---------------------------------------------------------------------------
# Scenario context


@dataclass
class StopLineInfo:
    mid: np.ndarray
    tangent: np.ndarray
    normal: np.ndarray
    half_length: float
    a: np.ndarray
    b: np.ndarray
    control: StopControl
    red: np.ndarray | None
    yellow: np.ndarray | None


class ScenarioContext:
    """Scenario-level precomputation reused across candidates and rules."""

    def __init__(self, scenario: Scenario, horizon: int):
        self.scenario = scenario
        self.T = horizon
        agents = scenario.agents
        n = len(agents)
        self.N = n
        states = np.zeros((n, horizon, 4))
        valid = np.zeros((n, horizon), dtype=bool)
        for i, a in enumerate(agents):
            m = min(horizon, a.states.shape[0])
            states[i, :m] = a.states[:m]
            valid[i, :m] = a.valid[:m]
        self.states = states
        self.valid = valid
        self.types = np.array([_TYPE_CODE[a.agent_type] for a in agents], dtype=int)
        self.lengths = np.array([a.length for a in agents], dtype=float)
        self.widths = np.array([a.width for a in agents], dtype=float)
        self.xy = states[..., :2]
        self.heading = states[..., 2]
        self.speed = states[..., 3]
        self.vel = geo.velocity(self.heading, self.speed)
        self.half_diag = 0.5 * np.hypot(self.lengths, self.widths)
        self.ego_length = scenario.ego_length
        self.ego_width = scenario.ego_width
        self.ego_half_diag = 0.5 * float(np.hypot(self.ego_length, self.ego_width))
        last = scenario.ego_history.array[-1]
        self.ego_last = last
        self.ego_last_front = last[:2] + 0.5 * self.ego_length * np.array([np.cos(last[2]), np.sin(last[2])])

        m = scenario.map
        self.lanes: list[geo.Polyline] = []
        hw, limits = [], []
        for lane in m.lanes:
            try:
                self.lanes.append(geo.Polyline.from_points(lane.centerline))
            except geo.GeometryError:
                continue
            hw.append(lane.half_width)
            limits.append(np.nan if lane.speed_limit is None else lane.speed_limit)
        self.lane_half_width = np.array(hw, dtype=float)
        self.lane_limit = np.array(limits, dtype=float)
        self.lane_set = geo.LaneSet(self.lanes)
        self.drivable = geo.Region(m.drivable_area) if m.drivable_area else None
        self.crosswalks = list(m.crosswalks)
        self.stop_lines = [self._stop_line(sl) for sl in m.stop_lines]

    @property
    def has_lanes(self) -> bool:
        return len(self.lanes) > 0

    def _stop_line(self, sl) -> StopLineInfo:
        a, b = sl.points[0], sl.points[1]
        mid = 0.5 * (a + b)
        d = b - a
        length = float(np.hypot(*d))
        tangent = d / length if length > 0 else np.array([1.0, 0.0])
        normal = np.array([-tangent[1], tangent[0]])
        if self.lanes:
            _, _, lane_h, dist = self.lane_projection(mid[None, :])
            k = int(np.argmin(dist[:, 0]))
            ref = np.array([np.cos(lane_h[k, 0]), np.sin(lane_h[k, 0])])
            if float(normal @ ref) < 0:
                normal = -normal
        elif float((self.ego_last[:2] - mid) @ normal) > 0:
            # no lane direction: the ego approaches from the negative side
            normal = -normal
        red = yellow = None
        if sl.signal_timeline is not None:
            phases = list(sl.signal_timeline[: self.T])
            phases += [SignalPhase.UNKNOWN] * (self.T - len(phases))
            red = np.array([1.0 if p is SignalPhase.RED else 0.5 if p is SignalPhase.FLASHING_RED else 0.0
                            for p in phases])
            yellow = np.array([1.0 if p is SignalPhase.YELLOW else 0.0 for p in phases])
        return StopLineInfo(mid, tangent, normal, 0.5 * length, a, b, sl.control, red, yellow)

    def lane_projection(self, points: np.ndarray):
        """Project points onto every lane; arrays are stacked lane-first."""
        return self.lane_set.project(points)

    @cached_property
    def agent_lane(self):
        """(d_lat, s) of every agent on every lane, shape (n_lanes, N, T)."""
        if not self.lanes or self.N == 0:
            return None
        d, s, _, _ = self.lane_projection(self.xy)
        return d, s

    @cached_property
    def intersections(self) -> tuple[np.ndarray, np.ndarray]:
        regions = self.scenario.map.intersections
        if regions is not None:
            centers = np.array([r.center for r in regions], dtype=float).reshape(-1, 2)
            radii = np.array([r.radius for r in regions], dtype=float)
            return centers, radii
        return _lane_crossings(self.scenario), None

    @cached_property
    def crosswalk_regions(self) -> list[geo.Region]:
        return [geo.Region([cw]) for cw in self.crosswalks]

    @cached_property
    def crosswalk_pieces(self) -> list[list[np.ndarray]]:
        return [geo.convex_pieces(cw) for cw in self.crosswalks]

    def crosswalk_ped_distance(self) -> np.ndarray:
        """Distance of every pedestrian to every crosswalk, shape (C, N, T); inf where invalid."""
        out = np.full((len(self.crosswalks), self.N, self.T), np.inf)
        ped = (self.types == PEDESTRIAN)[:, None] & self.valid
        if not np.any(ped):
            return out
        idx = np.nonzero(ped)
        pts = self.xy[idx]
        for c, region in enumerate(self.crosswalk_regions):
            out[c][idx] = region.distance(pts)
        return out

    @cached_property
    def _cw_dist(self) -> np.ndarray:
        return self.crosswalk_ped_distance()

    def live_crosswalks(self, ped_speed: float, buffer: float) -> np.ndarray:
        """(C, T) crosswalks with a pedestrian moving at ``ped_speed`` or faster within ``buffer``."""
        if not self.crosswalks:
            return np.zeros((0, self.T), dtype=bool)
        moving = (self.speed >= ped_speed) & self.valid
        near = self._cw_dist <= buffer
        return np.any(near & moving[None], axis=1)

    def peds_in_crosswalk(self, margin: float) -> np.ndarray:
        """(N, T) pedestrians inside or within ``margin`` of a crosswalk."""
        if not self.crosswalks:
            return np.zeros((self.N, self.T), dtype=bool)
        return np.any(self._cw_dist <= margin, axis=0)


def _lane_crossings(scenario: Scenario) -> np.ndarray:
    """Points where two lane centerlines cross at an angle within the crossing band."""
    starts, vecs, owner = [], [], []
    for i, lane in enumerate(scenario.map.lanes):
        c = lane.centerline
        v = np.diff(c, axis=0)
        keep = np.hypot(v[:, 0], v[:, 1]) > 1e-12
        starts.append(c[:-1][keep])
        vecs.append(v[keep])
        owner.append(np.full(int(keep.sum()), i))
    if len(starts) < 2:
        return np.zeros((0, 2))
    p = np.concatenate(starts)
    r = np.concatenate(vecs)
    lane = np.concatenate(owner)
    i, j = np.nonzero(lane[:, None] < lane[None, :])
    if i.size == 0:
        return np.zeros((0, 2))
    rxs = r[i, 0] * r[j, 1] - r[i, 1] * r[j, 0]
    qp = p[j] - p[i]
    ok = np.abs(rxs) > 1e-12
    den = np.where(ok, rxs, 1.0)
    t = (qp[:, 0] * r[j, 1] - qp[:, 1] * r[j, 0]) / den
    u = (qp[:, 0] * r[i, 1] - qp[:, 1] * r[i, 0]) / den
    hit = ok & (t >= 0) & (t <= 1) & (u >= 0) & (u <= 1)
    hi = np.arctan2(r[i, 1], r[i, 0])
    hj = np.arctan2(r[j, 1], r[j, 0])
    diff = np.abs(geo.wrap_angle(hi - hj))
    band = (diff >= np.deg2rad(CROSSING_MIN_DEG)) & (diff <= np.deg2rad(CROSSING_MAX_DEG))
    sel = hit & band
    pts = p[i[sel]] + t[sel, None] * r[i[sel]]
    if pts.shape[0] > 1:
        # a crossing exactly on a shared vertex is found once per adjacent segment
        pts = np.unique(np.round(pts, 9), axis=0)
    return pts.reshape(-1, 2)


# ---------------------------------------------------------------------------
# Candidate batch


class CandidateBatch:
    """Per-candidate quantities shared across rules, computed on demand."""

    def __init__(self, ctx: ScenarioContext, states: np.ndarray, edge_margin: float = 3.0):
        self.ctx = ctx
        self.states = states
        self.K, self.T = states.shape[:2]
        self.xy = states[..., :2]
        self.h = states[..., 2]
        self.v = states[..., 3]
        self.edge_margin = edge_margin
        self.dir = np.stack([np.cos(self.h), np.sin(self.h)], axis=-1)
        self.vel = self.dir * self.v[..., None]
        self.front = self.xy + 0.5 * ctx.ego_length * self.dir

    @cached_property
    def kin(self):
        if self.T < 3:
            return None
        return geo.kinematics_arrays(self.v, self.h)

    @cached_property
    def corners(self) -> np.ndarray:
        return geo.box_corners(self.xy[..., 0], self.xy[..., 1], self.h, self.ctx.ego_length, self.ctx.ego_width)

    @cached_property
    def lane_proj(self):
        """Projection of every ego position onto every lane, each (L, K, T)."""
        return self.ctx.lane_projection(self.xy)

    @cached_property
    def lane(self):
        """Assigned lane per step: (index, d_lat, s, heading); None without lanes.

        Among lanes whose corridor contains the ego centre the best-aligned one
        wins; otherwise the nearest lane.
        """
        ctx = self.ctx
        if not ctx.has_lanes:
            return None
        d, s, hd, dist = self.lane_proj
        mismatch = np.abs(geo.wrap_angle(self.h[None] - hd))
        inside = dist <= ctx.lane_half_width[:, None, None]
        cost = np.where(inside, mismatch, 10.0 + dist)
        idx = np.argmin(cost, axis=0)
        take = lambda a: np.take_along_axis(a, idx[None], axis=0)[0]
        return idx, take(d), take(s), take(hd)

    @cached_property
    def rel(self):
        """Agent positions relative to the ego: (dx, dy, center distance), each (K, T, N)."""
        dx = self.ctx.xy[None, :, :, 0].transpose(0, 2, 1) - self.xy[..., 0:1]
        dy = self.ctx.xy[None, :, :, 1].transpose(0, 2, 1) - self.xy[..., 1:2]
        return dx, dy, np.hypot(dx, dy)

    @property
    def agent_valid(self) -> np.ndarray:
        return np.broadcast_to(self.ctx.valid.T[None], (self.K, self.T, self.ctx.N))

    @cached_property
    def contact(self):
        """Edge distance and SAT penetration for ego/agent pairs, each (K, T, N).

        Pairs farther apart than the edge margin keep a lower bound on the edge
        distance and zero penetration; no proxy threshold reaches that far.
        """
        ctx = self.ctx
        K, T, N = self.K, self.T, ctx.N
        _, _, dist = self.rel
        reach = ctx.ego_half_diag + ctx.half_diag[None, None, :]
        lower = np.maximum(0.0, dist - reach)
        edge = lower.copy()
        p_long = np.zeros((K, T, N))
        p_lat = np.zeros((K, T, N))
        close = (lower < self.edge_margin) & self.agent_valid
        if np.any(close):
            k, t, j = np.nonzero(close)
            xy, axy = self.xy[k, t], ctx.xy[j, t]
            _, pl, pt, edge[k, t, j] = geo.box_pair_contact(
                (xy[:, 0], xy[:, 1], self.h[k, t], ctx.ego_length, ctx.ego_width),
                (axy[:, 0], axy[:, 1], ctx.heading[j, t], ctx.lengths[j], ctx.widths[j]),
            )
            p_long[k, t, j] = pl
            p_lat[k, t, j] = pt
        return edge, p_long, p_lat

    def ttc(self, mask: np.ndarray) -> np.ndarray:
        """TTC to each agent (K, T, N); the cap where ``mask`` is false."""
        ctx = self.ctx
        out = np.full(mask.shape, geo.TTC_CAP)
        if np.any(mask):
            k, t, j = np.nonzero(mask)
            out[k, t, j] = geo.time_to_collision(self.xy[k, t], self.vel[k, t], ctx.xy[j, t], ctx.vel[j, t])
        return out

    @cached_property
    def heading_diff(self) -> np.ndarray:
        """Absolute heading difference to each agent, (K, T, N)."""
        return np.abs(geo.wrap_angle(self.ctx.heading.T[None] - self.h[..., None]))

    @cached_property
    def agents_on_lane(self):
        """Agent (d_lat, s) on the ego's assigned lane per step, each (K, T, N); None without lanes."""
        if self.lane is None or self.ctx.N == 0:
            return None
        idx = self.lane[0]
        d_ag, s_ag = self.ctx.agent_lane
        t_idx = np.arange(self.T)[None, :]
        return d_ag.transpose(0, 2, 1)[idx, t_idx], s_ag.transpose(0, 2, 1)[idx, t_idx]

    @cached_property
    def lead(self):
        """Nearest same-lane vehicle ahead: (has_lead, bumper-to-bumper-front distance), (K, T)."""
        ctx = self.ctx
        K, T = self.K, self.T
        if ctx.N == 0:
            return np.zeros((K, T), dtype=bool), np.full((K, T), np.inf)
        vehicle = (ctx.types == VEHICLE)[None, None, :] & self.agent_valid
        half_len = 0.5 * ctx.lengths[None, None, :]
        if self.lane is not None:
            idx, _, s_e, _ = self.lane
            d_j, s_j = self.agents_on_lane
            hw = ctx.lane_half_width[idx][..., None]
            same = np.abs(d_j) <= hw
            ahead = s_j > s_e[..., None]
            gap = (s_j + half_len) - (s_e[..., None] + 0.5 * ctx.ego_length)
        else:
            dx, dy, _ = self.rel
            c, s = np.cos(self.h)[..., None], np.sin(self.h)[..., None]
            lon = dx * c + dy * s
            lat = -dx * s + dy * c
            same = np.abs(lat) <= NO_LANE_CORRIDOR
            ahead = lon > 0
            gap = lon + half_len - 0.5 * ctx.ego_length
        cand = vehicle & same & ahead
        gap = np.where(cand, gap, np.inf)
        d_long = gap.min(axis=-1)
        return np.isfinite(d_long), d_long

    def stop_line_geometry(self, info: StopLineInfo):
        """Front-bumper progress past the line, distance to it and relevance mask, each (K, T)."""
        rel = self.front - info.mid
        progress = rel @ info.normal
        along = rel @ info.tangent
        aligned = self.dir @ info.normal > STOP_LINE_ALIGNMENT
        relevant = aligned & (np.abs(along) <= info.half_length + STOP_LINE_LATERAL_SLACK)
        dist = geo.point_segment_distance(self.front, info.a, info.b)
        return progress, dist, relevant


# ---------------------------------------------------------------------------
# Rule proxies

RuleOutput = tuple  # (active (K,), raw (K,), reason)


def _inactive(K: int, reason: str) -> RuleOutput:
    return np.zeros(K, dtype=bool), np.zeros(K), reason


def _finish(active: np.ndarray, raw: np.ndarray, reason_on: str, reason_off: str) -> RuleOutput:
    active = np.asarray(active, dtype=bool)
    raw = np.where(active, np.maximum(raw, 0.0), 0.0)
    if active.all():
        reason = reason_on
    elif not active.any():
        reason = reason_off
    else:
        reason = f"{reason_on} for some candidates; {reason_off} for others"
    return active, raw, reason


def l0_r0(rule: RuleSpec, b: CandidateBatch) -> RuleOutput:
    p = rule.params
    has_lead, d_long = b.lead
    gate = has_lead & (b.v >= p["min_speed"])
    per_step = np.where(gate, np.maximum(0.0, b.v * p["time_gap"] - np.where(gate, d_long, 0.0)), 0.0)
    return _finish(gate.any(axis=1), per_step.sum(axis=1), "lead vehicle detected", "no lead vehicle while moving")


def _clearance_by_type(p: Mapping, ctx: ScenarioContext, prefix: str) -> np.ndarray:
    table = {
        VEHICLE: p.get(f"{prefix}vehicle", 0.0),
        PEDESTRIAN: p.get(f"{prefix}pedestrian", 0.0),
        CYCLIST: p.get(f"{prefix}cyclist", 0.0),
    }
    return np.array([table[t] for t in ctx.types], dtype=float)


def l0_r1(rule: RuleSpec, b: CandidateBatch) -> RuleOutput:
    ctx, p = b.ctx, rule.params
    if ctx.N == 0:
        return _inactive(b.K, "no agents")
    _, _, dist = b.rel
    near = b.agent_valid & (dist <= p["range"])
    edge, _, _ = b.contact
    c_min = _clearance_by_type(p, ctx, "clearance_")
    hinge = np.where(near, np.maximum(0.0, c_min - edge), 0.0)
    raw = hinge.max(axis=-1).sum(axis=-1)
    return _finish(near.any(axis=(1, 2)), raw, "agents within range", "no agents within range")


def l0_r2(rule: RuleSpec, b: CandidateBatch) -> RuleOutput:
    ctx, p = b.ctx, rule.params
    if not ctx.crosswalks:
        return _inactive(b.K, "no crosswalk in map")
    live = ctx.live_crosswalks(p["ped_speed"], p["buffer"])
    if not np.any(live):
        return _inactive(b.K, "no moving pedestrian near a crosswalk")
    raw = np.zeros(b.K)
    reach = ctx.ego_half_diag
    for c, pieces in enumerate(ctx.crosswalk_pieces):
        steps = np.nonzero(live[c])[0]
        if steps.size == 0:
            continue
        region = ctx.crosswalk_regions[c]
        dist = region.distance(b.xy[:, steps])
        k, i = np.nonzero(dist < reach)
        if k.size:
            area = geo.overlap_area_batch(b.corners[k, steps[i]], pieces)
            np.add.at(raw, k, area)
    return np.ones(b.K, dtype=bool), raw, "crosswalk with moving pedestrian"


def l0_r3(rule: RuleSpec, b: CandidateBatch) -> RuleOutput:
    ctx, p = b.ctx, rule.params
    if ctx.N == 0:
        return _inactive(b.K, "no agents")
    _, _, dist = b.rel
    near = b.agent_valid & (dist <= p["range"])
    _, p_long, p_lat = b.contact
    depth = np.minimum(p_long, p_lat)
    depth = np.where(near & (depth >= p["min_penetration"]), depth, 0.0)
    return _finish(near.any(axis=(1, 2)), depth.sum(axis=(1, 2)), "agents within range", "no agents within range")


def l0_r4(rule: RuleSpec, b: CandidateBatch) -> RuleOutput:
    ctx, p = b.ctx, rule.params
    vru = np.isin(ctx.types, (PEDESTRIAN, CYCLIST))
    if not np.any(vru[:, None] & ctx.valid):
        return _inactive(b.K, "no vulnerable road users")
    edge, _, _ = b.contact
    r = _clearance_by_type(p, ctx, "clearance_")
    moving = b.v >= p["min_speed"]
    gate = b.agent_valid & vru[None, None, :] & moving[..., None]
    hinge = np.where(gate, np.maximum(0.0, r - edge), 0.0)
    raw = hinge.max(axis=-1).sum(axis=-1)
    return _finish(moving.any(axis=1), raw, "VRU present while moving", "ego below speed floor")


def _signal_lines(ctx: ScenarioContext):
    return [s for s in ctx.stop_lines if s.red is not None]


def l1_r0(rule: RuleSpec, b: CandidateBatch) -> RuleOutput:
    p = rule.params
    lines = _signal_lines(b.ctx)
    if not lines:
        return _inactive(b.K, "no signalized stop line")
    accel = b.kin[0] if b.kin is not None else np.zeros_like(b.v)
    best = np.zeros((b.K, b.T))
    active = np.zeros(b.K, dtype=bool)
    for info in lines:
        _, dist, relevant = b.stop_line_geometry(info)
        red = info.red[None, :]
        yellow = info.yellow[None, :]
        term = (red * (dist < p["red_distance"]) * np.minimum(1.0, b.v / p["speed_scale"])
                + p["yellow_factor"] * yellow * (dist < p["yellow_distance"])
                * np.clip(accel / p["accel_scale"], 0.0, 1.0))
        best = np.maximum(best, np.where(relevant, term, 0.0))
        active |= relevant.any(axis=1)
    return _finish(active, best.sum(axis=1), "signalized stop line ahead", "no relevant signalized stop line")


def speed_limit_series(b: CandidateBatch, default_limit) -> np.ndarray:
    lim = np.full((b.K, b.T), np.nan)
    if b.lane is not None:
        lim = b.ctx.lane_limit[b.lane[0]]
    if default_limit is not None:
        lim = np.where(np.isnan(lim), float(default_limit), lim)
    return lim


def l1_r2(rule: RuleSpec, b: CandidateBatch) -> RuleOutput:
    p = rule.params
    lim = speed_limit_series(b, p["default_limit"])
    known = ~np.isnan(lim)
    excess = np.where(known, np.maximum(0.0, b.v - np.where(known, lim, 0.0) - p["tolerance"]), 0.0)
    return _finish(known.any(axis=1), excess.sum(axis=1), "speed limit known", "no speed-limit data")


def soft_step(x, alpha: float):
    """Zero-centred logistic step ``max(0, 2*sigmoid(alpha*x) - 1)``."""
    return np.maximum(0.0, np.tanh(0.5 * alpha * np.asarray(x, dtype=float)))


def l1_r3(rule: RuleSpec, b: CandidateBatch) -> RuleOutput:
    p = rule.params
    lines = [s for s in _signal_lines(b.ctx) if np.any(s.red > 0)]
    if not lines:
        return _inactive(b.K, "no red signal phase")
    raw = np.zeros(b.K)
    active = np.zeros(b.K, dtype=bool)
    L = b.ctx.ego_length
    for info in lines:
        progress, _, relevant = b.stop_line_geometry(info)
        before = float((b.ctx.ego_last_front - info.mid) @ info.normal)
        cross = np.clip(progress, 0.0, L)
        prev = np.concatenate([np.full((b.K, 1), np.clip(before, 0.0, L)), cross[:, :-1]], axis=1)
        step = soft_step(cross - prev, p["alpha"])
        raw += np.sum(np.where(relevant, info.red[None, :] * step, 0.0), axis=1)
        active |= relevant.any(axis=1)
    return _finish(active, raw, "red phase at a relevant stop line", "no relevant red-phase stop line")


def l1_r4(rule: RuleSpec, b: CandidateBatch) -> RuleOutput:
    p = rule.params
    lines = [s for s in b.ctx.stop_lines if s.control is StopControl.STOP_SIGN]
    if not lines:
        return _inactive(b.K, "no stop sign")
    raw = np.zeros(b.K)
    active = np.zeros(b.K, dtype=bool)
    for info in lines:
        progress, _, relevant = b.stop_line_geometry(info)
        zone = relevant & (np.abs(progress) <= p["window"])
        hit = zone.any(axis=1)
        v_stop = np.where(zone, b.v, np.inf).min(axis=1)
        depth = np.maximum(0.0, np.where(relevant, progress, -np.inf).max(axis=1))
        sev = np.where(hit, v_stop * (1.0 + depth / p["depth_scale"]), 0.0)
        raw = np.maximum(raw, sev)
        active |= hit
    return _finish(active, raw, "stop zone reached", "stop zone not reached")


def crosswalk_yield_severity(ttc_min: float, speed: float, proximity: float,
                             ttc_safe: float = 3.0, d_cw: float = 15.0) -> float:
    """Three capped terms of the crosswalk-yield proxy (each clipped at zero)."""
    return (min(5.0, max(0.0, (ttc_safe - ttc_min) * 2.0))
            + min(3.0, max(0.0, speed / 10.0))
            + min(2.0, max(0.0, (d_cw - proximity) / 7.5)))


def l1_r5(rule: RuleSpec, b: CandidateBatch) -> RuleOutput:
    ctx, p = b.ctx, rule.params
    if not ctx.crosswalks:
        return _inactive(b.K, "no crosswalk in map")
    in_cw = ctx.peds_in_crosswalk(p["crosswalk_margin"])
    if not np.any(in_cw):
        return _inactive(b.K, "no pedestrian in a crosswalk")
    moving = b.v.max(axis=1) >= MOVING_SPEED
    mask = np.broadcast_to(in_cw.T[None], (b.K, b.T, ctx.N))
    ttc = b.ttc(mask)
    flat = ttc.reshape(b.K, -1)
    arg = flat.argmin(axis=1)
    ttc_min = flat[np.arange(b.K), arg]
    t_at = arg // ctx.N
    speed = b.v[np.arange(b.K), t_at]
    prox = np.min(np.stack([r.distance(b.front) for r in ctx.crosswalk_regions]), axis=0).min(axis=1)
    raw = np.array([
        crosswalk_yield_severity(ttc_min[k], speed[k], prox[k], p["ttc_safe"], p["proximity"])
        if ttc_min[k] < p["ttc_safe"] else 0.0
        for k in range(b.K)
    ])
    return _finish(moving, raw, "pedestrian in crosswalk while moving", "ego not moving")


def wrong_way_severity(phi_max_deg: float, duration_s: float, speed: float) -> float:
    """Weighted heading / duration / speed composition of the wrong-way proxy."""
    return phi_max_deg / 90.0 * 0.4 + min(1.0, duration_s / 2.0) * 0.4 + min(1.0, speed / 10.0) * 0.2


def _longest_run(mask: np.ndarray) -> np.ndarray:
    """Longest run of consecutive True values per row."""
    out = np.zeros(mask.shape[0], dtype=int)
    run = np.zeros(mask.shape[0], dtype=int)
    for t in range(mask.shape[1]):
        run = np.where(mask[:, t], run + 1, 0)
        out = np.maximum(out, run)
    return out


def l1_r6(rule: RuleSpec, b: CandidateBatch) -> RuleOutput:
    p = rule.params
    if b.lane is None:
        return _inactive(b.K, "no lane centerline")
    moving = b.v >= p["min_speed"]
    phi = np.abs(geo.wrap_angle(b.h - b.lane[3]))
    viol = moving & (phi > p["mismatch"])
    raw = np.zeros(b.K)
    for k in np.nonzero(viol.any(axis=1))[0]:
        run = _longest_run(viol[k : k + 1])[0]
        raw[k] = wrong_way_severity(
            float(np.rad2deg(phi[k][viol[k]].max())), run * DT, float(b.v[k][viol[k]].max())
        )
    return _finish(moving.any(axis=1), raw, "lane available while moving", "ego below speed floor")


def l2_r0(rule: RuleSpec, b: CandidateBatch) -> RuleOutput:
    p = rule.params
    region = b.ctx.drivable
    if region is None:
        return _inactive(b.K, "no drivable area")
    raw = np.maximum(0.0, region.distance(b.xy) - p["buffer"]).sum(axis=1)
    return _finish(b.v.max(axis=1) >= p["min_speed"], raw, "drivable area known while moving", "ego not moving")


def l2_r1(rule: RuleSpec, b: CandidateBatch) -> RuleOutput:
    p = rule.params
    if b.lane is None:
        return _inactive(b.K, "no lane centerline")
    d_lat = b.lane[1]
    raw = np.maximum(0.0, np.abs(d_lat) - p["half_width"] - p["margin"]).sum(axis=1)
    return np.ones(b.K, dtype=bool), raw, "lane centerline available"


def _need_kin(b: CandidateBatch):
    return b.kin is None


def l3_r0(rule: RuleSpec, b: CandidateBatch) -> RuleOutput:
    p = rule.params
    if _need_kin(b):
        return _inactive(b.K, "fewer than 3 frames")
    accel, _, jerk, _, _, _ = b.kin
    gate = b.v >= p["min_speed"]
    per = np.maximum(0.0, np.abs(accel) - p["accel_limit"]) + np.maximum(0.0, np.abs(jerk) - p["jerk_limit"])
    return _finish(gate.any(axis=1), np.where(gate, per, 0.0).sum(axis=1), "moving", "ego below speed floor")


def l3_r1(rule: RuleSpec, b: CandidateBatch) -> RuleOutput:
    p = rule.params
    if _need_kin(b):
        return _inactive(b.K, "fewer than 3 frames")
    decel = b.kin[5]
    gate = b.v >= p["min_speed"]
    per = np.maximum(0.0, decel - p["comfort_decel"]) * DT
    return _finish(gate.any(axis=1), np.where(gate, per, 0.0).sum(axis=1), "moving", "ego below speed floor")


def l3_r2(rule: RuleSpec, b: CandidateBatch) -> RuleOutput:
    p = rule.params
    if _need_kin(b):
        return _inactive(b.K, "fewer than 3 frames")
    _, _, _, yaw_rate, yaw_accel, _ = b.kin
    gate = (np.abs(yaw_rate) > p["turning_rate"]) & (b.v >= p["min_speed"])
    lim = p["rate_limit_deg"]
    per = (np.maximum(0.0, np.rad2deg(np.abs(yaw_rate)) - lim)
           + np.maximum(0.0, np.rad2deg(np.abs(yaw_accel)) - lim))
    return _finish(gate.any(axis=1), np.where(gate, per, 0.0).sum(axis=1), "turning", "not turning")


def count_sign_changes(x: np.ndarray, deadband: float) -> np.ndarray:
    """Sign changes per row, ignoring entries with magnitude within the deadband."""
    sign = np.where(np.abs(x) > deadband, np.sign(x), 0.0)
    n = sign.shape[-1]
    idx = np.where(sign != 0, np.arange(n), -1)
    idx = np.maximum.accumulate(idx, axis=-1)
    filled = np.where(idx >= 0, np.take_along_axis(sign, np.maximum(idx, 0), axis=-1), 0.0)
    changes = (filled[..., 1:] != filled[..., :-1]) & (filled[..., :-1] != 0) & (filled[..., 1:] != 0)
    return changes.sum(axis=-1)


def sliding_std(x: np.ndarray, window: int) -> np.ndarray:
    """Population std of every length-``window`` slice along the last axis."""
    x = x - x.mean(axis=-1, keepdims=True)
    c1 = np.cumsum(x, axis=-1)
    c2 = np.cumsum(x * x, axis=-1)
    pad = np.zeros(x.shape[:-1] + (1,))
    c1 = np.concatenate([pad, c1], axis=-1)
    c2 = np.concatenate([pad, c2], axis=-1)
    mean = (c1[..., window:] - c1[..., :-window]) / window
    var = (c2[..., window:] - c2[..., :-window]) / window - mean * mean
    return np.sqrt(np.maximum(var, 0.0))


def l3_r3(rule: RuleSpec, b: CandidateBatch) -> RuleOutput:
    p = rule.params
    W = int(p["window_steps"])
    if b.T < W or _need_kin(b):
        return _inactive(b.K, "fewer frames than the window")
    std = sliding_std(b.v, W)
    raw = np.maximum(0.0, std - p["std_limit"]).sum(axis=1)
    osc = count_sign_changes(b.kin[0], p["deadband"]) > p["sign_changes"]
    raw = raw + p["osc_weight"] * osc
    return _finish(b.v.max(axis=1) >= p["min_speed"], raw, "moving", "ego below speed floor")


def lateral_velocity(b: CandidateBatch) -> np.ndarray:
    ref = b.lane[3] if b.lane is not None else b.ctx.ego_last[2]
    return b.v * np.sin(b.h - ref)


def l3_r4(rule: RuleSpec, b: CandidateBatch) -> RuleOutput:
    p = rule.params
    if _need_kin(b):
        return _inactive(b.K, "fewer than 3 frames")
    lat_accel = b.kin[1]
    active = (np.abs(lateral_velocity(b)) >= p["lat_speed"]).any(axis=1)
    raw = np.maximum(0.0, np.abs(lat_accel) - p["lat_accel_limit"]).sum(axis=1)
    return _finish(active, raw, "lateral motion", "no lateral motion")


def l3_r5(rule: RuleSpec, b: CandidateBatch) -> RuleOutput:
    ctx, p = b.ctx, rule.params
    if _need_kin(b):
        return _inactive(b.K, "fewer than 3 frames")
    if ctx.N == 0:
        return _inactive(b.K, "no agents")
    yaw_rate = b.kin[3]
    unwrapped = geo.unwrap_heading(b.h)
    left_turn = (unwrapped[:, -1] - unwrapped[:, 0]) >= np.deg2rad(p["turn_deg"])
    if not left_turn.any():
        return _finish(left_turn, np.zeros(b.K), "", "no left turn against traffic")
    _, _, dist = b.rel
    oncoming = (b.agent_valid & (ctx.types == VEHICLE)[None, None, :] & (dist <= p["range"])
                & (b.heading_diff > np.deg2rad(p["oncoming_deg"])))
    active = left_turn & oncoming.any(axis=(1, 2))
    turning = (yaw_rate > p["turning_rate"])[..., None]
    mask = oncoming & turning & active[:, None, None]
    ttc = np.maximum(b.ttc(mask), TTC_FLOOR)
    per = np.where(mask, np.maximum(0.0, 1.0 / ttc - 1.0 / p["ttc_safe"]), 0.0)
    return _finish(active, per.sum(axis=(1, 2)), "left turn with oncoming traffic", "no left turn against traffic")


def l3_r9(rule: RuleSpec, b: CandidateBatch) -> RuleOutput:
    ctx, p = b.ctx, rule.params
    if _need_kin(b):
        return _inactive(b.K, "fewer than 3 frames")
    if b.lane is not None:
        start_lane = b.lane[0][:, 0]
        d_all = b.lane_proj[0]
        d0 = d_all[start_lane, np.arange(b.K)]
        disp = np.abs(d0 - d0[:, :1]).max(axis=1)
    else:
        h0 = ctx.ego_last[2]
        rel = b.xy - b.xy[:, :1]
        disp = np.abs(-rel[..., 0] * np.sin(h0) + rel[..., 1] * np.cos(h0)).max(axis=1)
    active = disp >= p["displacement"]
    gap_hits = np.zeros((b.K, b.T), dtype=bool)
    if ctx.N and b.lane is not None and np.any(active):
        idx, _, s_e, _ = b.lane
        d_j, s_j = b.agents_on_lane
        same = (np.abs(d_j) <= ctx.lane_half_width[idx][..., None]) & b.agent_valid
        same &= (ctx.types == VEHICLE)[None, None, :]
        ds = s_j - s_e[..., None]
        gap = np.abs(ds) - 0.5 * (ctx.lengths[None, None, :] + ctx.ego_length)
        follower_speed = np.where(ds > 0, b.v[..., None], ctx.speed.T[None])
        g = gap / np.maximum(follower_speed, MIN_TIME_GAP_SPEED)
        gap_hits = np.any(same & (g < p["time_gap"]), axis=-1)
    lat_hits = np.abs(b.kin[1]) > p["lat_accel"]
    raw = p["gap_weight"] * gap_hits.sum(axis=1) + p["accel_weight"] * lat_hits.sum(axis=1)
    return _finish(active, raw, "lane change detected", "no lane change")


def l3_r10(rule: RuleSpec, b: CandidateBatch) -> RuleOutput:
    p = rule.params
    has_lead, d_long = b.lead
    gate = has_lead & (b.v >= p["min_speed"])
    g = np.where(gate, d_long, 0.0) / np.maximum(b.v, MIN_TIME_GAP_SPEED)
    per = np.where(gate, np.maximum(0.0, 1.0 - g / p["time_gap"]), 0.0)
    return _finish(gate.any(axis=1), per.sum(axis=1), "lead vehicle detected", "no lead vehicle while moving")


def l3_r11(rule: RuleSpec, b: CandidateBatch) -> RuleOutput:
    ctx, p = b.ctx, rule.params
    present = int(np.sum(ctx.valid.any(axis=1)))
    if present < p["min_agents"]:
        return _inactive(b.K, "fewer than the required agents")
    centers, radii = ctx.intersections
    if centers.shape[0] == 0:
        return _inactive(b.K, "no intersection region")
    if radii is None:
        radii = np.full(centers.shape[0], float(p["radius"]))
    def inside(xy):
        d = np.linalg.norm(xy[..., None, :] - centers, axis=-1)
        return np.any(d <= radii, axis=-1)
    ego_in = inside(b.xy)
    active = ego_in.sum(axis=1) >= p["min_steps"]
    agent_in = inside(ctx.xy) & ctx.valid & (ctx.types == VEHICLE)[:, None]
    diff = b.heading_diff
    crossing = ((diff >= np.deg2rad(CROSSING_MIN_DEG)) & (diff <= np.deg2rad(CROSSING_MAX_DEG))
                & agent_in.T[None] & ego_in[..., None] & active[:, None, None])
    ttc = b.ttc(crossing)
    gap_hits = np.any(crossing & (ttc < p["ttc"]), axis=-1)
    fast = ego_in & (b.v > p["speed"])
    raw = p["gap_weight"] * gap_hits.sum(axis=1) + p["speed_weight"] * fast.sum(axis=1)
    return _finish(active, raw, "sustained intersection presence", "no sustained intersection presence")


def _vru_interaction(rule: RuleSpec, b: CandidateBatch, code: int, label: str) -> RuleOutput:
    ctx, p = b.ctx, rule.params
    if not np.any(ctx.types == code):
        return _inactive(b.K, f"no {label}s")
    _, _, dist = b.rel
    near = b.agent_valid & (ctx.types == code)[None, None, :] & (dist <= p["range"])
    edge, _, _ = b.contact
    per = np.maximum(0.0, p["clearance"] - edge) + (edge < p["near"]) * np.maximum(0.0, b.v[..., None] - p["speed"])
    raw = np.where(near, per, 0.0).sum(axis=(1, 2))
    return _finish(near.any(axis=(1, 2)), raw, f"{label} within range", f"no {label} within range")


def l3_r12(rule: RuleSpec, b: CandidateBatch) -> RuleOutput:
    return _vru_interaction(rule, b, PEDESTRIAN, "pedestrian")


def l3_r13(rule: RuleSpec, b: CandidateBatch) -> RuleOutput:
    return _vru_interaction(rule, b, CYCLIST, "cyclist")


PROXIES: dict[str, Callable[[RuleSpec, CandidateBatch], RuleOutput]] = {
    "l0_r0": l0_r0, "l0_r1": l0_r1, "l0_r2": l0_r2, "l0_r3": l0_r3, "l0_r4": l0_r4,
    "l1_r0": l1_r0, "l1_r2": l1_r2, "l1_r3": l1_r3, "l1_r4": l1_r4, "l1_r5": l1_r5, "l1_r6": l1_r6,
    "l2_r0": l2_r0, "l2_r1": l2_r1,
    "l3_r0": l3_r0, "l3_r1": l3_r1, "l3_r2": l3_r2, "l3_r3": l3_r3, "l3_r4": l3_r4, "l3_r5": l3_r5,
    "l3_r9": l3_r9, "l3_r10": l3_r10, "l3_r11": l3_r11, "l3_r12": l3_r12, "l3_r13": l3_r13,
}


# ---------------------------------------------------------------------------
# Evaluation


@dataclass(frozen=True, eq=False)
class ViolationMatrix:
    """Per (candidate, rule) severities.

    ``activation`` is the geometric precondition per candidate; ``active`` is
    activation AND applicability; ``raw`` and ``normalized`` are zero where
    ``active`` is false and for audit-only rules.
    """

    rule_ids: tuple[str, ...]
    raw: np.ndarray
    normalized: np.ndarray
    active: np.ndarray
    activation: np.ndarray
    applicable: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.raw.shape


@dataclass(frozen=True, eq=False)
class EvaluationResult:
    violations: ViolationMatrix
    tier_scores: np.ndarray
    trace: dict = field(default_factory=dict)


def edge_margin_for(rulebook: Rulebook) -> float:
    """Largest clearance any enabled proxy compares an edge distance against."""
    cached = rulebook.__dict__.get("_edge_margin")
    if cached is not None:
        return cached
    keys = ("clearance_vehicle", "clearance_cyclist", "clearance_pedestrian", "clearance", "near")
    vals = [3.0]
    for r in rulebook:
        for k in keys:
            v = r.params.get(k)
            if v is not None:
                vals.append(float(v))
    margin = max(vals) + 1e-6
    rulebook.__dict__["_edge_margin"] = margin
    return margin


def compute_raw(rulebook: Rulebook, batch: CandidateBatch, only: np.ndarray | None = None):
    """Raw severities (K, R), activation (K, R) and per-rule reasons."""
    R = len(rulebook)
    raw = np.zeros((batch.K, R))
    act = np.zeros((batch.K, R), dtype=bool)
    reasons = []
    for i, rule in enumerate(rulebook):
        if not rule.has_proxy:
            reasons.append("audit-only rule without a proxy")
            continue
        if only is not None and not only[i]:
            reasons.append("not applicable")
            continue
        fn = PROXIES.get(rule.activation_id)
        if fn is None:
            raise EvaluationError(f"no proxy registered for activation id {rule.activation_id!r}")
        a, v, reason = fn(rule, batch)
        act[:, i] = a
        raw[:, i] = v
        reasons.append(reason)
    return raw, act, reasons


def _states_of(candidates) -> np.ndarray:
    if isinstance(candidates, CandidateSet):
        return candidates.stacked()
    if isinstance(candidates, Trajectory):
        return candidates.array[None]
    arr = np.asarray(candidates, dtype=float)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3 or arr.shape[-1] != 4:
        raise EvaluationError(f"candidate states must be (K, T, 4), got {arr.shape}")
    return arr


def make_batch(scenario: Scenario, candidates, rulebook: Rulebook | None = None) -> CandidateBatch:
    states = _states_of(candidates)
    ctx = ScenarioContext(scenario, states.shape[1])
    return CandidateBatch(ctx, states, edge_margin_for(rulebook or builtin_catalog()))


def tier_scores_from(normalized: np.ndarray, rulebook: Rulebook) -> np.ndarray:
    """Aggregate normalized severities (already masked) into (K, 4) tier scores."""
    s = normalized @ rulebook.weight_matrix()
    return np.clip(s, 0.0, 1.0)


def evaluate(candidates, scenario: Scenario, mask: ApplicabilityMask | None = None,
             rulebook: Rulebook | None = None, normalization: str = "exponential") -> EvaluationResult:
    """Evaluate every rule on every candidate and aggregate tier scores."""
    book = rulebook or builtin_catalog()
    states = _states_of(candidates)
    R = len(book)
    if mask is None:
        mask = ApplicabilityMask(np.ones(R, dtype=bool), MaskSource.ALWAYS_ON)
    if mask.binary.shape != (R,):
        raise EvaluationError(f"mask has {mask.binary.shape[0]} entries, rulebook has {R} rules")
    batch = CandidateBatch(ScenarioContext(scenario, states.shape[1]), states, edge_margin_for(book))
    raw, act, reasons = compute_raw(book, batch)
    applicable = mask.binary & book.proxied
    active = act & applicable[None, :]
    raw = np.where(active, raw, 0.0)
    norm = normalize(raw, mode=normalization, kappa=book.kappas[None, :], alpha=book.alphas[None, :])
    norm = np.where(active, norm, 0.0)
    violations = ViolationMatrix(tuple(book.ids), raw, norm, active, act, applicable)
    trace = {
        rid: {
            "reason": reasons[i],
            "applicable": bool(mask.binary[i]),
            "activation": act[:, i].tolist(),
        }
        for i, rid in enumerate(book.ids)
    }
    return EvaluationResult(violations, tier_scores_from(norm, book), trace)


# ---------------------------------------------------------------------------
# Single-rule entry points


def _single(rule: RuleSpec, scenario: Scenario, candidate, rulebook: Rulebook | None):
    if not rule.has_proxy:
        return np.zeros(1, dtype=bool), np.zeros(1), "audit-only rule without a proxy"
    batch = make_batch(scenario, candidate, rulebook)
    return PROXIES[rule.activation_id](rule, batch)


def activation(rule: RuleSpec, scenario: Scenario, candidate) -> bool:
    """Whether the rule's geometric/kinematic precondition holds for one candidate."""
    active, _, _ = _single(rule, scenario, candidate, None)
    return bool(active[0])


def _severity(tier: Tier, rule_id: str, candidate, scenario: Scenario, rulebook: Rulebook | None) -> float:
    book = rulebook or builtin_catalog()
    rule = book.lookup(rule_id)
    if rule.tier != tier:
        raise EvaluationError(f"{rule_id} is not a {tier.name.lower()} rule")
    if not rule.has_proxy:
        raise RuleNotActiveError(f"{rule_id}: rule not active (audit-only)")
    active, raw, reason = _single(rule, scenario, candidate, book)
    if not active[0]:
        raise RuleNotActiveError(f"{rule_id}: rule not active ({reason})")
    return float(raw[0])


def safety_severity(rule_id: str, candidate, scenario: Scenario, rulebook: Rulebook | None = None) -> float:
    return _severity(Tier.SAFETY, rule_id, candidate, scenario, rulebook)


def legal_severity(rule_id: str, candidate, scenario: Scenario, rulebook: Rulebook | None = None) -> float:
    return _severity(Tier.LEGAL, rule_id, candidate, scenario, rulebook)


def road_severity(rule_id: str, candidate, scenario: Scenario, rulebook: Rulebook | None = None) -> float:
    return _severity(Tier.ROAD, rule_id, candidate, scenario, rulebook)


def comfort_severity(rule_id: str, candidate, scenario: Scenario, rulebook: Rulebook | None = None) -> float:
    return _severity(Tier.COMFORT, rule_id, candidate, scenario, rulebook)


def severity(rule_id: str, candidate, scenario: Scenario, rulebook: Rulebook | None = None) -> float:
    """Raw severity of any proxied rule; errors when the rule is not active."""
    book = rulebook or builtin_catalog()
    return _severity(book.lookup(rule_id).tier, rule_id, candidate, scenario, book)
