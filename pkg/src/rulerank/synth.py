"""Seeded synthetic scenarios and candidate sets, adversarial injection and perturbations.

Templates are built in a local frame (ego at the origin heading east) and
then moved by a random rigid transform so nothing downstream can rely on
axis alignment.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .scenario import (
    DT,
    HISTORY_STEPS,
    HORIZON_STEPS,
    AgentTrack,
    AgentType,
    CandidateSet,
    IntersectionRegion,
    Lane,
    MapContext,
    Scenario,
    SignalPhase,
    StopControl,
    StopLine,
    Trajectory,
)

TEMPLATES = ("straight_follow", "intersection_signal", "crosswalk", "lane_change", "stop_sign")
FAMILIES = ("lane_follow", "brake", "accelerate", "swerve_left", "swerve_right",
            "red_light_runner", "tailgater", "off_road")

VEHICLE_DIMS = (4.6, 1.9)
PED_DIMS = (0.6, 0.6)
CYCLIST_DIMS = (1.8, 0.6)
LANE_WIDTH = 3.5
HALF = LANE_WIDTH / 2.0


class SynthError(ValueError):
    pass


class CorruptionError(SynthError):
    pass


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    count: int = 10
    template_weights: dict = field(default_factory=lambda: {t: 1.0 for t in TEMPLATES})
    k: int = 6
    family_weights: dict = field(default_factory=lambda: {f: 1.0 for f in FAMILIES})
    transform: bool = True

    def __post_init__(self):
        for name, weights, allowed in (("template", self.template_weights, TEMPLATES),
                                       ("family", self.family_weights, FAMILIES)):
            unknown = set(weights) - set(allowed)
            if unknown:
                raise SynthError(f"unknown {name} names {sorted(unknown)}")
            vals = np.array([float(v) for v in weights.values()])
            if np.any(vals < 0) or not np.any(vals > 0):
                raise SynthError(f"{name} weights must be >= 0 and not all zero")
        if self.k < 2:
            raise SynthError("K must be >= 2")
        if self.count < 0:
            raise SynthError("count must be >= 0")


# ---------------------------------------------------------------------------
# Path construction helpers


def quintic(p0, v0, p1, v1, duration: float, t: np.ndarray) -> np.ndarray:
    """Quintic Hermite with zero end accelerations, evaluated at times ``t`` (clamped)."""
    p0, v0, p1, v1 = (np.asarray(x, dtype=float) for x in (p0, v0, p1, v1))
    T = float(duration)
    s = np.clip(t, 0.0, T)[:, None]
    c0, c1 = p0, v0
    # solve remaining coefficients from end conditions
    a = np.array([[T**3, T**4, T**5], [3 * T**2, 4 * T**3, 5 * T**4], [6 * T, 12 * T**2, 20 * T**3]])
    rhs = np.stack([p1 - p0 - v0 * T, v1 - v0, np.zeros_like(p0)])
    c3, c4, c5 = np.linalg.solve(a, rhs)
    out = c0 + c1 * s + c3 * s**3 + c4 * s**4 + c5 * s**5
    beyond = t > T
    if np.any(beyond):
        out[beyond] = p1 + v1 * (t[beyond] - T)[:, None]
    return out


def states_from_positions(pos: np.ndarray, start: np.ndarray) -> np.ndarray:
    """Heading and speed from finite differences of positions; ``start`` is the t=0 state."""
    full = np.vstack([start[None, :2], pos])
    vel = np.gradient(full, DT, axis=0)
    speed = np.hypot(vel[:, 0], vel[:, 1])
    heading = np.arctan2(vel[:, 1], vel[:, 0])
    prev = float(start[2])
    for i in range(len(heading)):
        if speed[i] < 1e-3:
            heading[i] = prev
        prev = heading[i]
    return np.column_stack([full, heading, speed])[1:]


def speed_profile(v0: float, accel: float, t: np.ndarray, v_max: float = 40.0, v_min: float = 0.0,
                  duration: float | None = None) -> np.ndarray:
    """Arc length under constant acceleration for ``duration`` then constant speed."""
    tau = t if duration is None else np.minimum(t, duration)
    v = np.clip(v0 + accel * tau, v_min, v_max)
    dt = np.diff(np.concatenate([[0.0], t]))
    return np.cumsum(v * dt)


def _stop_profile(v0: float, distance: float, t: np.ndarray) -> np.ndarray:
    """Arc length for a uniform stop after ``distance`` metres."""
    if distance <= 0.5 or v0 <= 0:
        a = 6.0
    else:
        a = min(6.0, v0**2 / (2.0 * distance))
    t_stop = v0 / a if a > 0 else np.inf
    tt = np.minimum(t, t_stop)
    return v0 * tt - 0.5 * a * tt**2


# ---------------------------------------------------------------------------
# Templates (local frame)


@dataclass
class _Layout:
    lanes: list
    crosswalks: list
    stop_lines: list
    drivable: list
    agents: list
    lead: tuple | None = None  # (x0, speed)
    stop_x: float | None = None
    intersections: list | None = None


def _straight_lanes(limit: float, x0=-60.0, x1=220.0) -> list:
    return [
        Lane(np.array([[x0, 0.0], [x1, 0.0]]), HALF, speed_limit=limit, id="ego"),
        Lane(np.array([[x0, -LANE_WIDTH], [x1, -LANE_WIDTH]]), HALF, speed_limit=limit, id="right"),
        Lane(np.array([[x1, LANE_WIDTH], [x0, LANE_WIDTH]]), HALF, speed_limit=limit, id="oncoming"),
    ]


def _rect(x0, y0, x1, y1) -> np.ndarray:
    return np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]], dtype=float)


def _track(agent_id: str, kind: AgentType, pos: np.ndarray, start_heading: float = 0.0) -> AgentTrack:
    start = np.array([pos[0, 0], pos[0, 1], start_heading, 0.0])
    # prepend a virtual previous point so the first heading is well defined
    states = states_from_positions(pos[1:], np.array([*pos[0], start_heading, 0.0]))
    first = states[0].copy()
    first[:2] = pos[0]
    states = np.vstack([first, states])
    del start
    dims = {AgentType.VEHICLE: VEHICLE_DIMS, AgentType.PEDESTRIAN: PED_DIMS, AgentType.CYCLIST: CYCLIST_DIMS}[kind]
    return AgentTrack(agent_id, kind, states, np.ones(len(states), dtype=bool), *dims)


def _line_motion(p0, velocity, t: np.ndarray) -> np.ndarray:
    return np.asarray(p0, dtype=float)[None, :] + t[:, None] * np.asarray(velocity, dtype=float)[None, :]


def _future_times() -> np.ndarray:
    return DT * np.arange(1, HORIZON_STEPS + 1)


def _layout(template: str, rng: np.random.Generator, v0: float) -> _Layout:
    t = _future_times()
    limit = float(rng.choice([11.2, 13.4, 15.6]))
    if template in ("straight_follow", "lane_change"):
        lanes = _straight_lanes(limit)
        drivable = [_rect(-60.0, -LANE_WIDTH - HALF, 220.0, LANE_WIDTH + HALF)]
        agents = []
        if template == "straight_follow":
            lead_x = float(rng.uniform(22.0, 45.0))
            lead_v = float(np.clip(v0 + rng.uniform(-3.0, 1.0), 2.0, None))
        else:
            lead_x = float(rng.uniform(18.0, 30.0))
            lead_v = float(np.clip(v0 - rng.uniform(3.0, 5.0), 1.0, None))
        agents.append(_track("lead", AgentType.VEHICLE, _line_motion([lead_x, 0.0], [lead_v, 0.0], t)))
        on_x = float(rng.uniform(50.0, 120.0))
        agents.append(_track("oncoming", AgentType.VEHICLE,
                             _line_motion([on_x, LANE_WIDTH], [-float(rng.uniform(8.0, 14.0)), 0.0], t), np.pi))
        side_x = float(rng.uniform(-20.0, 15.0))
        agents.append(_track("right", AgentType.VEHICLE,
                             _line_motion([side_x, -LANE_WIDTH], [v0 + float(rng.uniform(-1.0, 2.0)), 0.0], t)))
        if rng.random() < 0.5:
            agents.append(_track("cyclist", AgentType.CYCLIST,
                                 _line_motion([float(rng.uniform(10.0, 40.0)), -LANE_WIDTH - 1.2],
                                              [float(rng.uniform(3.0, 5.0)), 0.0], t)))
        return _Layout(lanes, [], [], drivable, agents, lead=(lead_x, lead_v))

    if template == "crosswalk":
        lanes = _straight_lanes(limit)
        drivable = [_rect(-60.0, -LANE_WIDTH - HALF, 220.0, LANE_WIDTH + HALF)]
        cx = float(rng.uniform(18.0, 35.0))
        cw = _rect(cx, -LANE_WIDTH - HALF - 1.0, cx + 4.0, LANE_WIDTH + HALF + 1.0)
        ped_speed = float(rng.uniform(1.0, 1.6))
        ped = _track("ped", AgentType.PEDESTRIAN,
                     _line_motion([cx + 2.0, -LANE_WIDTH - HALF - float(rng.uniform(0.0, 2.0))], [0.0, ped_speed], t),
                     np.pi / 2)
        agents = [ped]
        if rng.random() < 0.5:
            agents.append(_track("waiting", AgentType.PEDESTRIAN,
                                 _line_motion([cx + 1.0, LANE_WIDTH + HALF + 0.8], [0.0, 0.0], t), -np.pi / 2))
        on_x = float(rng.uniform(50.0, 120.0))
        agents.append(_track("oncoming", AgentType.VEHICLE,
                             _line_motion([on_x, LANE_WIDTH], [-float(rng.uniform(8.0, 14.0)), 0.0], t), np.pi))
        return _Layout(lanes, [cw], [], drivable, agents, stop_x=cx)

    # intersection templates
    xc = float(rng.uniform(24.0, 36.0))
    stop_x = xc - LANE_WIDTH - 1.0
    lanes = [
        Lane(np.array([[-60.0, 0.0], [xc, 0.0], [120.0, 0.0]]), HALF, speed_limit=limit, id="ego"),
        Lane(np.array([[120.0, LANE_WIDTH], [-60.0, LANE_WIDTH]]), HALF, speed_limit=limit, id="oncoming"),
        Lane(np.array([[xc - HALF, -60.0], [xc - HALF, 60.0]]), HALF, speed_limit=limit, id="north"),
        Lane(np.array([[xc + HALF, 60.0], [xc + HALF, -60.0]]), HALF, speed_limit=limit, id="south"),
    ]
    drivable = [
        _rect(-60.0, -HALF, 120.0, LANE_WIDTH + HALF),
        _rect(xc - LANE_WIDTH, -60.0, xc + LANE_WIDTH, 60.0),
    ]
    agents = []
    cross_v = float(rng.uniform(6.0, 10.0))
    t_center = float(rng.uniform(1.5, 3.0))
    y0 = 1.75 - cross_v * t_center
    agents.append(_track("cross", AgentType.VEHICLE, _line_motion([xc - HALF, y0], [0.0, cross_v], t), np.pi / 2))
    on_x = float(rng.uniform(xc + 10.0, xc + 60.0))
    agents.append(_track("oncoming", AgentType.VEHICLE,
                         _line_motion([on_x, LANE_WIDTH], [-float(rng.uniform(6.0, 12.0)), 0.0], t), np.pi))
    if template == "intersection_signal":
        # red at least until the accelerating runner has crossed
        x_front0 = 2.4
        runner = speed_profile(v0, 1.0, t)
        crossing = int(np.searchsorted(runner + x_front0, stop_x)) + 1
        red_steps = int(min(HORIZON_STEPS, max(40, crossing + 10)))
        timeline = [SignalPhase.RED] * red_steps + [SignalPhase.GREEN] * (HORIZON_STEPS - red_steps)
        stop = StopLine(np.array([[stop_x, -HALF], [stop_x, HALF]]), StopControl.SIGNAL, tuple(timeline))
    else:
        stop = StopLine(np.array([[stop_x, -HALF], [stop_x, HALF]]), StopControl.STOP_SIGN)
    intersections = None
    if rng.random() < 0.5:
        intersections = [IntersectionRegion((xc, HALF), 20.0)]
    return _Layout(lanes, [], [stop], drivable, agents, stop_x=stop_x, intersections=intersections)


# ---------------------------------------------------------------------------
# Candidate families (local frame)


def family_path(family: str, v0: float, layout: _Layout, ego_length: float) -> np.ndarray:
    """Positions (T, 2) of a candidate family in the local frame."""
    t = _future_times()
    y = np.zeros_like(t)
    if family == "lane_follow":
        if layout.lead is not None and layout.lead[1] < v0:
            dur = (v0 - layout.lead[1]) / 1.0
            s = speed_profile(v0, -1.0, t, duration=dur)
        else:
            s = v0 * t
    elif family == "brake":
        if layout.stop_x is not None:
            s = _stop_profile(v0, layout.stop_x - 1.5 - 0.5 * ego_length, t)
        else:
            s = _stop_profile(v0, v0**2 / (2 * 3.0), t)
    elif family == "accelerate":
        s = speed_profile(v0, 1.5, t, duration=3.0)
    elif family in ("swerve_left", "swerve_right", "off_road"):
        s = v0 * t
        target = {"swerve_left": LANE_WIDTH, "swerve_right": -LANE_WIDTH, "off_road": -2.0 * LANE_WIDTH - 1.0}[family]
        y = quintic([0.0], [0.0], [target], [0.0], 3.0, t - 0.5)[:, 0]
        y = np.where(t < 0.5, 0.0, y)
    elif family == "red_light_runner":
        s = speed_profile(v0, 1.0, t)
    elif family == "tailgater":
        s = speed_profile(v0, 2.0, t, duration=2.5)
    else:
        raise SynthError(f"unknown family {family!r}")
    return np.column_stack([s, y])


# ---------------------------------------------------------------------------
# Rigid transforms


def _rot(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def _tf_points(p: np.ndarray, rot: np.ndarray, shift: np.ndarray) -> np.ndarray:
    return p @ rot.T + shift


def _tf_states(st: np.ndarray, theta: float, rot: np.ndarray, shift: np.ndarray) -> np.ndarray:
    out = np.array(st, dtype=float, copy=True)
    out[..., :2] = _tf_points(out[..., :2], rot, shift)
    out[..., 2] = np.arctan2(np.sin(out[..., 2] + theta), np.cos(out[..., 2] + theta))
    return out


def transform_scenario(s: Scenario, theta: float, shift) -> Scenario:
    """Apply the rigid motion ``x -> R(theta) x + shift`` to every geometric field."""
    rot = _rot(theta)
    shift = np.asarray(shift, dtype=float)
    m = s.map
    lanes = tuple(
        Lane(_tf_points(l.centerline, rot, shift), l.half_width,
             np.arctan2(np.sin(l.headings + theta), np.cos(l.headings + theta)), l.speed_limit, l.id)
        for l in m.lanes
    )
    stops = tuple(StopLine(_tf_points(sl.points, rot, shift), sl.control, sl.signal_timeline) for sl in m.stop_lines)
    inter = None
    if m.intersections is not None:
        inter = tuple(IntersectionRegion(tuple(_tf_points(np.array(r.center), rot, shift)), r.radius)
                      for r in m.intersections)
    new_map = MapContext(lanes, tuple(_tf_points(c, rot, shift) for c in m.crosswalks), stops,
                         tuple(_tf_points(d, rot, shift) for d in m.drivable_area), inter)
    agents = tuple(AgentTrack(a.id, a.agent_type, _tf_states(a.states, theta, rot, shift), a.valid, a.length, a.width)
                   for a in s.agents)
    cands = None
    if s.candidates is not None:
        cands = CandidateSet(tuple(Trajectory(_tf_states(c.array, theta, rot, shift)) for c in s.candidates.trajectories),
                             s.candidates.confidences)
    gt = None if s.ground_truth is None else Trajectory(_tf_states(s.ground_truth.array, theta, rot, shift))
    return s.replace(ego_history=Trajectory(_tf_states(s.ego_history.array, theta, rot, shift)), agents=agents,
                     map=new_map, candidates=cands, ground_truth=gt)


# ---------------------------------------------------------------------------
# Synthesis


def _weighted_choice(rng: np.random.Generator, weights: dict, names: Sequence[str]) -> str:
    w = np.array([float(weights.get(n, 0.0)) for n in names])
    return names[int(rng.choice(len(names), p=w / w.sum()))]


def _pick_families(rng: np.random.Generator, cfg: SynthConfig) -> list[str]:
    others = [f for f in FAMILIES if f != "lane_follow" and cfg.family_weights.get(f, 0.0) > 0]
    fams = ["lane_follow"]
    need = cfg.k - 1
    if others:
        w = np.array([float(cfg.family_weights[f]) for f in others])
        replace = need > len(others)
        idx = rng.choice(len(others), size=need, replace=replace, p=w / w.sum())
        fams += [others[i] for i in idx]
    else:
        fams += ["lane_follow"] * need
    order = rng.permutation(len(fams))
    return [fams[i] for i in order]


def synthesize_one(rng: np.random.Generator, cfg: SynthConfig, index: int, template: str | None = None) -> Scenario:
    template = template or _weighted_choice(rng, cfg.template_weights, TEMPLATES)
    v0 = float(rng.uniform(6.0, 14.0))
    ego_length, ego_width = 4.8, 2.0
    layout = _layout(template, rng, v0)
    hist_t = DT * np.arange(-(HISTORY_STEPS - 1), 1)
    history = np.column_stack([v0 * hist_t, np.zeros_like(hist_t), np.zeros_like(hist_t), np.full_like(hist_t, v0)])
    start = history[-1]
    fams = _pick_families(rng, cfg)
    trajs = [Trajectory(states_from_positions(family_path(f, v0, layout, ego_length), start)) for f in fams]
    conf = rng.dirichlet(np.ones(cfg.k))
    conf = conf / conf.sum()
    lf = family_path("lane_follow", v0, layout, ego_length)
    noise = np.cumsum(rng.normal(0.0, 0.03, size=lf.shape), axis=0)
    gt = Trajectory(states_from_positions(lf + noise, start))
    scenario = Scenario(
        id=f"{template}-{index:05d}",
        ego_history=Trajectory(history),
        agents=tuple(layout.agents),
        map=MapContext(tuple(layout.lanes), tuple(layout.crosswalks), tuple(layout.stop_lines),
                       tuple(layout.drivable), None if layout.intersections is None else tuple(layout.intersections)),
        ego_length=ego_length,
        ego_width=ego_width,
        candidates=CandidateSet(tuple(trajs), conf),
        ground_truth=gt,
    )
    scenario = _with_families(scenario, fams)
    if cfg.transform:
        theta = float(rng.uniform(-np.pi, np.pi))
        shift = rng.uniform(-500.0, 500.0, size=2)
        scenario = _with_families(transform_scenario(scenario, theta, shift), fams)
    return scenario


def _with_families(s: Scenario, fams: Sequence[str]) -> Scenario:
    object.__setattr__(s, "_families", tuple(fams))
    return s


def families_of(s: Scenario) -> tuple[str, ...] | None:
    """Candidate family names recorded by the generator, if any."""
    return getattr(s, "_families", None)


def synthesize(cfg: SynthConfig) -> list[Scenario]:
    """Deterministic list of scenarios (with candidates and ground truth) for ``cfg``."""
    root = np.random.SeedSequence(cfg.seed)
    children = root.spawn(cfg.count)
    return [synthesize_one(np.random.default_rng(c), cfg, i) for i, c in enumerate(children)]


# ---------------------------------------------------------------------------
# Adversarial injection


class CorruptionFamily(str, enum.Enum):
    COLLISION_PRONE = "collision_prone"
    OFF_ROAD = "off_road"
    SIGNAL_VIOLATING = "signal_violating"


@dataclass(frozen=True)
class CorruptionSpec:
    family: CorruptionFamily
    confidence_margin: float = 0.01
    replace_least_confident: bool = False

    def __post_init__(self):
        object.__setattr__(self, "family", CorruptionFamily(self.family))
        if not self.confidence_margin > 0:
            raise CorruptionError("confidence margin must be > 0")


def _collision_targets(scenario: Scenario, start: np.ndarray, horizon: int):
    """Candidate (agent index, step) pairs ranked by how natural the intercept is."""
    v0 = max(float(start[3]), 1.0)
    options = []
    for j, a in enumerate(scenario.agents):
        for t in range(9, min(horizon, a.states.shape[0])):
            if not a.valid[t]:
                continue
            tc = DT * (t + 1)
            dist = float(np.hypot(*(a.states[t, :2] - start[:2])))
            need = dist / tc
            options.append((abs(need - v0), j, t))
    options.sort()
    return options


def _intercept_path(start: np.ndarray, agent: AgentTrack, t_hit: int, horizon: int) -> np.ndarray:
    """Positions meeting ``agent`` at step ``t_hit`` and riding on it afterwards."""
    t = _future_times()[:horizon]
    tc = DT * (t_hit + 1)
    v_start = start[3] * np.array([np.cos(start[2]), np.sin(start[2])])
    target = agent.states[t_hit]
    v_end = target[3] * np.array([np.cos(target[2]), np.sin(target[2])])
    pos = quintic(start[:2], v_start, target[:2], v_end, tc, t)
    m = min(horizon, agent.states.shape[0])
    after = np.arange(horizon) > t_hit
    follow = after & (np.arange(horizon) < m)
    pos[follow] = agent.states[np.nonzero(follow)[0], :2]
    return pos


def _off_road_tail(pos: np.ndarray, t_hit: int, scenario: Scenario) -> np.ndarray:
    """Drift away laterally after the hit until well outside the drivable area."""
    out = pos.copy()
    n = len(pos)
    if t_hit + 1 >= n:
        return out
    d = pos[min(t_hit + 1, n - 1)] - pos[max(t_hit - 1, 0)]
    norm = float(np.hypot(*d)) or 1.0
    right = np.array([d[1], -d[0]]) / norm
    steps = np.arange(n) - t_hit
    ramp = np.clip(steps / 20.0, 0.0, 1.0)
    shift = 10.0 * (ramp**3 * (10 - 15 * ramp + 6 * ramp**2))
    return out + shift[:, None] * right[None, :]


def _signal_targets(scenario: Scenario, options):
    lines = [sl for sl in scenario.map.stop_lines if sl.signal_timeline is not None
             and any(p in (SignalPhase.RED, SignalPhase.FLASHING_RED) for p in sl.signal_timeline)]
    if not lines:
        raise CorruptionError("signal_violating injection needs a signalized stop line with a red phase")
    last = scenario.ego_history.array[-1]
    heading = np.array([np.cos(last[2]), np.sin(last[2])])
    keep = []
    for opt in options:
        _, j, t = opt
        p = scenario.agents[j].states[t, :2]
        for sl in lines:
            mid = sl.points.mean(axis=0)
            tangent = sl.points[1] - sl.points[0]
            normal = np.array([-tangent[1], tangent[0]])
            if normal @ heading < 0:
                normal = -normal
            past = (p - mid) @ normal > 0 and (last[:2] - mid) @ normal < 0
            red = sl.signal_timeline[t] in (SignalPhase.RED, SignalPhase.FLASHING_RED)
            if past and red:
                keep.append(opt)
                break
    if not keep:
        raise CorruptionError("no agent beyond the stop line during a red phase to route through")
    return keep


def inject_adversarial(scenario: Scenario, candidates: CandidateSet | None, spec: CorruptionSpec) -> CandidateSet:
    """Append a Safety-violating mode of the requested family with the highest confidence.

    Every family routes the ego into an agent (the injected mode is collision
    prone by construction); off_road then leaves the drivable area and
    signal_violating picks an intercept beyond a stop line during red.
    """
    cands = candidates if candidates is not None else scenario.candidates
    if cands is None or len(cands) < 1:
        raise CorruptionError("need at least one existing candidate")
    if not scenario.agents:
        raise CorruptionError(f"{spec.family.value} injection needs at least one agent to violate safety against")
    horizon = cands.horizon
    start = scenario.ego_history.array[-1]
    options = _collision_targets(scenario, start, horizon)
    if spec.family is CorruptionFamily.SIGNAL_VIOLATING:
        options = _signal_targets(scenario, options)
    if not options:
        raise CorruptionError("no valid agent state to route the injected mode through")
    _, j, t_hit = options[0]
    pos = _intercept_path(start, scenario.agents[j], t_hit, horizon)
    if spec.family is CorruptionFamily.OFF_ROAD:
        pos = _off_road_tail(pos, t_hit, scenario)
    injected = Trajectory(states_from_positions(pos, start))
    p = np.array(cands.confidences, dtype=float)
    trajs = list(cands.trajectories)
    if spec.replace_least_confident:
        drop = int(np.argmin(p))
        del trajs[drop]
        p = np.delete(p, drop)
    c = (1.0 + spec.confidence_margin) * float(p.max()) if p.size else 1.0
    new_p = np.append(p, c)
    new_p = new_p / new_p.sum()
    return CandidateSet(tuple(trajs) + (injected,), new_p)


# ---------------------------------------------------------------------------
# Perturbations


class PerturbKind(str, enum.Enum):
    POSITION = "position"
    VELOCITY = "velocity"
    HEADING = "heading"
    MAP = "map"


NOISE_LEVELS = {
    PerturbKind.POSITION: (0.1, 0.3, 0.5),
    PerturbKind.VELOCITY: (0.1, 0.3, 0.5),
    PerturbKind.HEADING: tuple(np.deg2rad([1.0, 3.0, 5.0])),
}
MAP_ERRORS = ("lane_shift", "drop_crosswalk", "flip_signal", "drop_stop_line")
LANE_SHIFT = 0.5


def _map_error(s: Scenario, error: str, rng: np.random.Generator) -> Scenario:
    m = s.map
    if error == "lane_shift":
        shift = LANE_SHIFT * (1.0 if rng.random() < 0.5 else -1.0)
        lanes = []
        for lane in m.lanes:
            normal = np.column_stack([-np.sin(lane.headings), np.cos(lane.headings)])
            lanes.append(Lane(lane.centerline + shift * normal, lane.half_width, lane.headings,
                              lane.speed_limit, lane.id))
        m = MapContext(tuple(lanes), m.crosswalks, m.stop_lines, m.drivable_area, m.intersections)
    elif error == "drop_crosswalk":
        if m.crosswalks:
            i = int(rng.integers(len(m.crosswalks)))
            m = MapContext(m.lanes, m.crosswalks[:i] + m.crosswalks[i + 1:], m.stop_lines, m.drivable_area,
                           m.intersections)
    elif error == "flip_signal":
        flip = {SignalPhase.RED: SignalPhase.GREEN, SignalPhase.GREEN: SignalPhase.RED}
        stops = tuple(
            StopLine(sl.points, sl.control,
                     None if sl.signal_timeline is None else tuple(flip.get(p, p) for p in sl.signal_timeline))
            for sl in m.stop_lines
        )
        m = MapContext(m.lanes, m.crosswalks, stops, m.drivable_area, m.intersections)
    elif error == "drop_stop_line":
        if m.stop_lines:
            i = int(rng.integers(len(m.stop_lines)))
            m = MapContext(m.lanes, m.crosswalks, m.stop_lines[:i] + m.stop_lines[i + 1:], m.drivable_area,
                           m.intersections)
    else:
        raise SynthError(f"unknown map error {error!r}")
    return s.replace(map=m)


def perturb(scenario: Scenario, kind: str | PerturbKind, level: int, repetitions: int = 10,
            seed: int = 0) -> list[Scenario]:
    """Seeded noisy copies of ``scenario``; candidates and ego history are left untouched."""
    kind = PerturbKind(kind)
    n_levels = len(MAP_ERRORS) if kind is PerturbKind.MAP else 3
    if not 0 <= level < n_levels:
        raise SynthError(f"level must be in 0..{n_levels - 1} for {kind.value}")
    if repetitions < 1:
        raise SynthError("repetitions must be >= 1")
    children = np.random.SeedSequence([seed, list(PerturbKind).index(kind), level]).spawn(repetitions)
    out = []
    for child in children:
        rng = np.random.default_rng(child)
        if kind is PerturbKind.MAP:
            out.append(_map_error(scenario, MAP_ERRORS[level], rng))
            continue
        sigma = NOISE_LEVELS[kind][level]
        agents = []
        for a in scenario.agents:
            st = np.array(a.states, dtype=float, copy=True)
            if kind is PerturbKind.POSITION:
                st[:, :2] += rng.normal(0.0, sigma, size=st[:, :2].shape)
            elif kind is PerturbKind.VELOCITY:
                st[:, 3] = np.maximum(0.0, st[:, 3] + rng.normal(0.0, sigma, size=st.shape[0]))
            else:
                h = st[:, 2] + rng.normal(0.0, sigma, size=st.shape[0])
                st[:, 2] = np.arctan2(np.sin(h), np.cos(h))
            agents.append(AgentTrack(a.id, a.agent_type, st, a.valid, a.length, a.width))
        out.append(scenario.replace(agents=tuple(agents)))
    return out


# ---------------------------------------------------------------------------
# Degenerate inputs


DEGENERATE_CATEGORIES = (
    "stationary_ego", "zero_length_segments", "missing_map", "single_step_validity",
    "coincident_agent", "single_candidate", "unknown_signals", "extreme_motion",
)


def _stationary(T: int, x=0.0, y=0.0, h=0.0) -> np.ndarray:
    return np.tile(np.array([x, y, h, 0.0]), (T, 1))


def degenerate_case(category: str, rng: np.random.Generator, index: int = 0) -> Scenario:
    """One degenerate scenario of the named category, built on a random template."""
    base = synthesize_one(rng, SynthConfig(k=6, transform=bool(rng.random() < 0.5)), index)
    T = base.candidates.horizon
    if category == "stationary_ego":
        last = base.ego_history.array[-1]
        hist = _stationary(HISTORY_STEPS, *last[:3])
        trajs = tuple(Trajectory(_stationary(T, *last[:3])) for _ in range(len(base.candidates)))
        return base.replace(ego_history=Trajectory(hist),
                            candidates=CandidateSet(trajs, base.candidates.confidences))
    if category == "zero_length_segments":
        lanes = []
        for lane in base.map.lanes:
            c = lane.centerline
            dup = np.repeat(c, 2, axis=0)
            lanes.append(Lane(dup, lane.half_width, None, lane.speed_limit, lane.id))
        c0 = base.map.lanes[0].centerline[0]
        lanes.append(Lane(np.array([c0, c0, c0]), HALF, None, None, "collapsed"))
        return base.replace(map=MapContext(tuple(lanes), base.map.crosswalks, base.map.stop_lines,
                                           base.map.drivable_area, base.map.intersections))
    if category == "missing_map":
        return base.replace(map=MapContext())
    if category == "single_step_validity":
        agents = []
        for a in base.agents:
            valid = np.zeros(a.valid.shape, dtype=bool)
            valid[int(rng.integers(len(valid)))] = True
            agents.append(AgentTrack(a.id, a.agent_type, a.states, valid, a.length, a.width))
        return base.replace(agents=tuple(agents))
    if category == "coincident_agent":
        cand = base.candidates.trajectories[0].array
        ghost = AgentTrack("ghost", AgentType.VEHICLE, cand.copy(), np.ones(T, dtype=bool), 4.8, 2.0)
        still = AgentTrack("still", AgentType.PEDESTRIAN, _stationary(T, *cand[T // 2, :2]),
                           np.ones(T, dtype=bool), 0.6, 0.6)
        return base.replace(agents=base.agents + (ghost, still))
    if category == "single_candidate":
        k = int(rng.integers(len(base.candidates)))
        return base.replace(candidates=CandidateSet((base.candidates.trajectories[k],), np.array([1.0])))
    if category == "unknown_signals":
        stops = tuple(StopLine(sl.points, StopControl.SIGNAL, (SignalPhase.UNKNOWN,) * T) for sl in base.map.stop_lines)
        if not stops:
            last = base.ego_history.array[-1]
            p = last[:2] + 20.0 * np.array([np.cos(last[2]), np.sin(last[2])])
            n = np.array([-np.sin(last[2]), np.cos(last[2])])
            stops = (StopLine(np.array([p - 2 * n, p + 2 * n]), StopControl.SIGNAL,
                              (SignalPhase.FLASHING_RED,) * T),)
        return base.replace(map=MapContext(base.map.lanes, base.map.crosswalks, stops, base.map.drivable_area,
                                           base.map.intersections))
    if category == "extreme_motion":
        trajs = []
        for c in base.candidates.trajectories:
            st = np.array(c.array, copy=True)
            st[:, 3] = np.where(np.arange(T) % 2 == 0, 60.0, 0.0)
            st[:, 2] = st[:, 2] + np.where(np.arange(T) % 3 == 0, np.pi, 0.0)
            st[:, 2] = np.arctan2(np.sin(st[:, 2]), np.cos(st[:, 2]))
            trajs.append(Trajectory(st))
        return base.replace(candidates=CandidateSet(tuple(trajs), base.candidates.confidences))
    raise SynthError(f"unknown degenerate category {category!r}")


def degenerate_instance(seed: int, index: int) -> tuple[str, Scenario]:
    """The ``index``-th degenerate case for ``seed``; categories cycle with the index."""
    cat = DEGENERATE_CATEGORIES[index % len(DEGENERATE_CATEGORIES)]
    return cat, degenerate_case(cat, np.random.default_rng([seed, 0xDE6, index]), index)


def degenerate_corpus(seed: int = 0, count: int = 320) -> list[tuple[str, Scenario]]:
    """Degenerate scenarios cycling through every category."""
    return [degenerate_instance(seed, i) for i in range(count)]
