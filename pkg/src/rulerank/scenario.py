"""Immutable scenario data model and its canonical JSON document format.

All coordinates are world-frame metres, headings radians, speeds m/s, and the
time grid is fixed at 10 Hz.  Arrays held by the model are made read-only at
construction so instances can be shared freely.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from typing import Any, Iterator, Mapping, Sequence

import numpy as np

DT = 0.1
HISTORY_STEPS = 11
HORIZON_STEPS = 50
SIMPLEX_TOL = 1e-9

DEFAULT_EGO_LENGTH = 4.8
DEFAULT_EGO_WIDTH = 2.0


class ScenarioError(ValueError):
    """Base class for scenario document problems."""


class ScenarioParseError(ScenarioError):
    """The document is not well-formed JSON or has the wrong shape."""


class ScenarioValidationError(ScenarioError):
    """A model invariant is violated; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


class AgentType(str, enum.Enum):
    VEHICLE = "vehicle"
    PEDESTRIAN = "pedestrian"
    CYCLIST = "cyclist"


class StopControl(str, enum.Enum):
    SIGNAL = "signal"
    STOP_SIGN = "stop_sign"
    NONE = "none"


class SignalPhase(str, enum.Enum):
    RED = "red"
    YELLOW = "yellow"
    GREEN = "green"
    FLASHING_RED = "flashing_red"
    UNKNOWN = "unknown"


def _frozen(values, path: str, *, ndim: int | None = None, last: int | None = None) -> np.ndarray:
    try:
        arr = np.array(values, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ScenarioValidationError(path, f"not numeric ({exc})") from None
    if ndim is not None and arr.ndim != ndim:
        raise ScenarioValidationError(path, f"expected {ndim}-d array, got shape {arr.shape}")
    if last is not None and (arr.ndim == 0 or arr.shape[-1] != last):
        raise ScenarioValidationError(path, f"expected trailing dimension {last}, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ScenarioValidationError(path, "non-finite value")
    arr.setflags(write=False)
    return arr


def _finite_scalar(value, path: str, *, positive: bool = False) -> float:
    try:
        out = float(value)
    except (TypeError, ValueError):
        raise ScenarioValidationError(path, "not a number") from None
    if not math.isfinite(out):
        raise ScenarioValidationError(path, "non-finite value")
    if positive and out <= 0:
        raise ScenarioValidationError(path, "must be > 0")
    return out


@dataclass(frozen=True)
class TrajectoryState:
    x: float
    y: float
    heading: float
    speed: float

    def __post_init__(self):
        for name in ("x", "y", "heading", "speed"):
            _finite_scalar(getattr(self, name), name)
        if self.speed < 0:
            raise ScenarioValidationError("speed", "must be >= 0")


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Sequence of ``[x, y, heading, speed]`` rows on the 0.1 s grid."""

    array: np.ndarray
    dt: float = DT

    def __post_init__(self):
        arr = _frozen(self.array, "states", ndim=2, last=4)
        if arr.shape[0] < 1:
            raise ScenarioValidationError("states", "empty trajectory")
        if np.any(arr[:, 3] < 0):
            raise ScenarioValidationError("states", "speed must be >= 0")
        if self.dt != DT:
            raise ScenarioValidationError("dt", f"must be exactly {DT}")
        object.__setattr__(self, "array", arr)

    @classmethod
    def from_states(cls, states: Sequence[TrajectoryState]) -> "Trajectory":
        return cls(np.array([[s.x, s.y, s.heading, s.speed] for s in states], dtype=float))

    def __len__(self) -> int:
        return self.array.shape[0]

    def __getitem__(self, t: int) -> TrajectoryState:
        return TrajectoryState(*map(float, self.array[t]))

    def __iter__(self) -> Iterator[TrajectoryState]:
        return (self[t] for t in range(len(self)))

    def __eq__(self, other):
        return isinstance(other, Trajectory) and np.array_equal(self.array, other.array)

    __hash__ = None

    @property
    def states(self) -> list[TrajectoryState]:
        return list(self)

    @property
    def xy(self) -> np.ndarray:
        return self.array[:, :2]


@dataclass(frozen=True, eq=False)
class AgentTrack:
    id: str
    agent_type: AgentType
    states: np.ndarray
    valid: np.ndarray
    length: float
    width: float

    def __post_init__(self):
        object.__setattr__(self, "id", str(self.id))
        try:
            object.__setattr__(self, "agent_type", AgentType(self.agent_type))
        except ValueError:
            raise ScenarioValidationError("type", f"unknown agent type {self.agent_type!r}") from None
        states = _frozen(self.states, "states", ndim=2, last=4)
        if np.any(states[:, 3] < 0):
            raise ScenarioValidationError("states", "speed must be >= 0")
        valid = np.array(self.valid, dtype=bool)
        if valid.shape != (states.shape[0],):
            raise ScenarioValidationError("valid", "mask length must equal states length")
        valid.setflags(write=False)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "valid", valid)
        object.__setattr__(self, "length", _finite_scalar(self.length, "length", positive=True))
        object.__setattr__(self, "width", _finite_scalar(self.width, "width", positive=True))

    def __eq__(self, other):
        return (
            isinstance(other, AgentTrack)
            and self.id == other.id
            and self.agent_type == other.agent_type
            and np.array_equal(self.states, other.states)
            and np.array_equal(self.valid, other.valid)
            and self.length == other.length
            and self.width == other.width
        )

    __hash__ = None


def _segments_cross(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1, d2 = orient(q1, q2, p1), orient(q1, q2, p2)
    d3, d4 = orient(p1, p2, q1), orient(p1, p2, q2)
    return (d1 * d2 < 0) and (d3 * d4 < 0)


def check_simple_polygon(points: np.ndarray, path: str) -> None:
    """Raise unless ``points`` is a simple polygon with at least 3 vertices."""
    if points.ndim != 2 or points.shape[0] < 3:
        raise ScenarioValidationError(path, "polygon needs at least 3 vertices")
    n = points.shape[0]
    for i in range(n):
        a1, a2 = points[i], points[(i + 1) % n]
        for j in range(i + 2, n):
            if i == 0 and j == n - 1:
                continue
            if _segments_cross(a1, a2, points[j], points[(j + 1) % n]):
                raise ScenarioValidationError(path, "polygon is self-intersecting")
    twice_area = np.sum(points[:, 0] * np.roll(points[:, 1], -1) - np.roll(points[:, 0], -1) * points[:, 1])
    if abs(twice_area) <= 1e-12:
        raise ScenarioValidationError(path, "polygon has zero area")


@dataclass(frozen=True, eq=False)
class Lane:
    centerline: np.ndarray
    half_width: float = 1.75
    headings: np.ndarray | None = None
    speed_limit: float | None = None
    id: str = ""

    def __post_init__(self):
        line = _frozen(self.centerline, "centerline", ndim=2, last=2)
        if line.shape[0] < 2:
            raise ScenarioValidationError("centerline", "needs at least 2 vertices")
        object.__setattr__(self, "centerline", line)
        object.__setattr__(self, "half_width", _finite_scalar(self.half_width, "half_width", positive=True))
        if self.headings is None:
            d = np.diff(line, axis=0)
            seg = np.arctan2(d[:, 1], d[:, 0])
            headings = np.append(seg, seg[-1])
            headings.setflags(write=False)
        else:
            headings = _frozen(self.headings, "headings", ndim=1)
            if headings.shape[0] != line.shape[0]:
                raise ScenarioValidationError("headings", "one heading per centerline vertex required")
        object.__setattr__(self, "headings", headings)
        if self.speed_limit is not None:
            object.__setattr__(self, "speed_limit", _finite_scalar(self.speed_limit, "speed_limit", positive=True))
        object.__setattr__(self, "id", str(self.id))

    def __eq__(self, other):
        return (
            isinstance(other, Lane)
            and np.array_equal(self.centerline, other.centerline)
            and self.half_width == other.half_width
            and np.array_equal(self.headings, other.headings)
            and self.speed_limit == other.speed_limit
            and self.id == other.id
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class StopLine:
    points: np.ndarray
    control: StopControl = StopControl.NONE
    signal_timeline: tuple[SignalPhase, ...] | None = None

    def __post_init__(self):
        pts = _frozen(self.points, "points", ndim=2, last=2)
        if pts.shape[0] != 2:
            raise ScenarioValidationError("points", "stop line needs exactly 2 endpoints")
        object.__setattr__(self, "points", pts)
        try:
            object.__setattr__(self, "control", StopControl(self.control))
        except ValueError:
            raise ScenarioValidationError("control", f"unknown control {self.control!r}") from None
        if self.signal_timeline is not None:
            try:
                phases = tuple(SignalPhase(p) for p in self.signal_timeline)
            except ValueError as exc:
                raise ScenarioValidationError("signal_timeline", str(exc)) from None
            object.__setattr__(self, "signal_timeline", phases)

    def __eq__(self, other):
        return (
            isinstance(other, StopLine)
            and np.array_equal(self.points, other.points)
            and self.control == other.control
            and self.signal_timeline == other.signal_timeline
        )

    __hash__ = None


@dataclass(frozen=True)
class IntersectionRegion:
    center: tuple[float, float]
    radius: float

    def __post_init__(self):
        c = tuple(_finite_scalar(v, "center") for v in self.center)
        if len(c) != 2:
            raise ScenarioValidationError("center", "expected [x, y]")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "radius", _finite_scalar(self.radius, "radius", positive=True))


@dataclass(frozen=True, eq=False)
class MapContext:
    lanes: tuple[Lane, ...] = ()
    crosswalks: tuple[np.ndarray, ...] = ()
    stop_lines: tuple[StopLine, ...] = ()
    drivable_area: tuple[np.ndarray, ...] = ()
    intersections: tuple[IntersectionRegion, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "lanes", tuple(self.lanes))
        object.__setattr__(self, "stop_lines", tuple(self.stop_lines))
        for name in ("crosswalks", "drivable_area"):
            polys = []
            for i, poly in enumerate(getattr(self, name)):
                arr = _frozen(poly, f"{name}[{i}]", ndim=2, last=2)
                check_simple_polygon(arr, f"{name}[{i}]")
                polys.append(arr)
            object.__setattr__(self, name, tuple(polys))
        if self.intersections is not None:
            object.__setattr__(self, "intersections", tuple(self.intersections))

    def __eq__(self, other):
        if not isinstance(other, MapContext):
            return False
        return (
            self.lanes == other.lanes
            and self.stop_lines == other.stop_lines
            and len(self.crosswalks) == len(other.crosswalks)
            and all(np.array_equal(a, b) for a, b in zip(self.crosswalks, other.crosswalks))
            and len(self.drivable_area) == len(other.drivable_area)
            and all(np.array_equal(a, b) for a, b in zip(self.drivable_area, other.drivable_area))
            and self.intersections == other.intersections
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class CandidateSet:
    """K future trajectories plus their confidence simplex."""

    trajectories: tuple[Trajectory, ...]
    confidences: np.ndarray

    def __post_init__(self):
        trajs = tuple(t if isinstance(t, Trajectory) else Trajectory(np.asarray(t, dtype=float)) for t in self.trajectories)
        if len(trajs) < 1:
            raise ScenarioValidationError("candidates.trajectories", "need K >= 1")
        lengths = {len(t) for t in trajs}
        if len(lengths) != 1:
            raise ScenarioValidationError("candidates.trajectories", "all trajectories must share length T")
        conf = _frozen(self.confidences, "candidates.confidences", ndim=1)
        if conf.shape[0] != len(trajs):
            raise ScenarioValidationError("candidates.confidences", "one confidence per trajectory required")
        if np.any(conf < 0) or np.any(conf > 1):
            raise ScenarioValidationError("candidates.confidences", "values must lie in [0, 1]")
        if abs(float(np.sum(conf)) - 1.0) > SIMPLEX_TOL:
            raise ScenarioValidationError("candidates.confidences", "must sum to 1 within 1e-9")
        object.__setattr__(self, "trajectories", trajs)
        object.__setattr__(self, "confidences", conf)

    def __len__(self) -> int:
        return len(self.trajectories)

    @property
    def horizon(self) -> int:
        return len(self.trajectories[0])

    def stacked(self) -> np.ndarray:
        """Candidate states as a ``(K, T, 4)`` array."""
        return np.stack([t.array for t in self.trajectories])

    def __eq__(self, other):
        return (
            isinstance(other, CandidateSet)
            and self.trajectories == other.trajectories
            and np.array_equal(self.confidences, other.confidences)
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class Scenario:
    id: str
    ego_history: Trajectory
    agents: tuple[AgentTrack, ...] = ()
    map: MapContext = field(default_factory=MapContext)
    ego_length: float = DEFAULT_EGO_LENGTH
    ego_width: float = DEFAULT_EGO_WIDTH
    candidates: CandidateSet | None = None
    ground_truth: Trajectory | None = None

    def __post_init__(self):
        object.__setattr__(self, "id", str(self.id))
        if len(self.ego_history) != HISTORY_STEPS:
            raise ScenarioValidationError(
                "ego.history", f"ego_history length must be {HISTORY_STEPS}, got {len(self.ego_history)}"
            )
        object.__setattr__(self, "agents", tuple(self.agents))
        object.__setattr__(self, "ego_length", _finite_scalar(self.ego_length, "ego.length", positive=True))
        object.__setattr__(self, "ego_width", _finite_scalar(self.ego_width, "ego.width", positive=True))
        if self.map.stop_lines:
            horizon = self.candidates.horizon if self.candidates is not None else HORIZON_STEPS
            for i, sl in enumerate(self.map.stop_lines):
                if sl.signal_timeline is not None and len(sl.signal_timeline) < horizon:
                    raise ScenarioValidationError(
                        f"map.stop_lines[{i}].signal_timeline", f"must cover the {horizon}-step horizon"
                    )

    def replace(self, **changes) -> "Scenario":
        fields = dict(
            id=self.id,
            ego_history=self.ego_history,
            agents=self.agents,
            map=self.map,
            ego_length=self.ego_length,
            ego_width=self.ego_width,
            candidates=self.candidates,
            ground_truth=self.ground_truth,
        )
        fields.update(changes)
        return Scenario(**fields)

    def __eq__(self, other):
        return (
            isinstance(other, Scenario)
            and self.id == other.id
            and self.ego_history == other.ego_history
            and self.agents == other.agents
            and self.map == other.map
            and self.ego_length == other.ego_length
            and self.ego_width == other.ego_width
            and self.candidates == other.candidates
            and self.ground_truth == other.ground_truth
        )

    __hash__ = None


# ---------------------------------------------------------------------------
# Serialization


def _rows(arr: np.ndarray) -> list:
    return arr.tolist()


def scenario_to_dict(s: Scenario) -> dict:
    ego: dict[str, Any] = {
        "history": _rows(s.ego_history.array),
        "length": s.ego_length,
        "width": s.ego_width,
    }
    if s.ground_truth is not None:
        ego["future"] = _rows(s.ground_truth.array)
    m = s.map
    map_doc: dict[str, Any] = {
        "lanes": [
            {
                "id": lane.id,
                "centerline": _rows(lane.centerline),
                "half_width": lane.half_width,
                "headings": _rows(lane.headings),
                "speed_limit": lane.speed_limit,
            }
            for lane in m.lanes
        ],
        "crosswalks": [_rows(p) for p in m.crosswalks],
        "stop_lines": [
            {
                "points": _rows(sl.points),
                "control": sl.control.value,
                "signal_timeline": None if sl.signal_timeline is None else [p.value for p in sl.signal_timeline],
            }
            for sl in m.stop_lines
        ],
        "drivable_area": [_rows(p) for p in m.drivable_area],
    }
    if m.intersections is not None:
        map_doc["intersections"] = [{"center": list(r.center), "radius": r.radius} for r in m.intersections]
    doc: dict[str, Any] = {
        "id": s.id,
        "ego": ego,
        "agents": [
            {
                "id": a.id,
                "type": a.agent_type.value,
                "states": _rows(a.states),
                "valid": a.valid.tolist(),
                "length": a.length,
                "width": a.width,
            }
            for a in s.agents
        ],
        "map": map_doc,
    }
    if s.candidates is not None:
        doc["candidates"] = {
            "trajectories": [_rows(t.array) for t in s.candidates.trajectories],
            "confidences": s.candidates.confidences.tolist(),
        }
    return doc


def save_scenario(s: Scenario) -> bytes:
    """Canonical UTF-8 JSON for ``s``; identical scenarios give identical bytes."""
    return dump_json(scenario_to_dict(s))


def dump_json(obj: Any) -> bytes:
    # float repr is the shortest round-tripping form, so output is exact
    return (json.dumps(obj, ensure_ascii=False, allow_nan=False, separators=(",", ":")) + "\n").encode("utf-8")


def _get(d: Mapping, key: str, path: str, default=...):
    if not isinstance(d, Mapping):
        raise ScenarioParseError(f"{path}: expected an object")
    if key not in d:
        if default is ...:
            raise ScenarioValidationError(f"{path}.{key}" if path else key, "missing required field")
        return default
    return d[key]


def _wrap(path: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except ScenarioValidationError as exc:
        raise ScenarioValidationError(f"{path}.{exc.path}", str(exc).split(": ", 1)[-1]) from None


def scenario_from_dict(doc: Mapping) -> Scenario:
    if not isinstance(doc, Mapping):
        raise ScenarioParseError("top-level document must be a JSON object")
    ego = _get(doc, "ego", "")
    history = _wrap("ego.history", Trajectory, np.asarray(_get(ego, "history", "ego"), dtype=object).tolist())
    future = _get(ego, "future", "ego", None)
    ground_truth = None if future is None else _wrap("ego.future", Trajectory, future)

    agents = []
    for i, a in enumerate(_get(doc, "agents", "", [])):
        p = f"agents[{i}]"
        agents.append(
            _wrap(
                p,
                AgentTrack,
                id=_get(a, "id", p),
                agent_type=_get(a, "type", p),
                states=_get(a, "states", p),
                valid=_get(a, "valid", p),
                length=_get(a, "length", p),
                width=_get(a, "width", p),
            )
        )

    m = _get(doc, "map", "")
    lanes = []
    for i, lane in enumerate(_get(m, "lanes", "map", [])):
        p = f"map.lanes[{i}]"
        lanes.append(
            _wrap(
                p,
                Lane,
                centerline=_get(lane, "centerline", p),
                half_width=_get(lane, "half_width", p, 1.75),
                headings=_get(lane, "headings", p, None),
                speed_limit=_get(lane, "speed_limit", p, None),
                id=_get(lane, "id", p, str(i)),
            )
        )
    stop_lines = []
    for i, sl in enumerate(_get(m, "stop_lines", "map", [])):
        p = f"map.stop_lines[{i}]"
        stop_lines.append(
            _wrap(
                p,
                StopLine,
                points=_get(sl, "points", p),
                control=_get(sl, "control", p, "none"),
                signal_timeline=_get(sl, "signal_timeline", p, None),
            )
        )
    inter = _get(m, "intersections", "map", None)
    intersections = None
    if inter is not None:
        intersections = tuple(
            _wrap(f"map.intersections[{i}]", IntersectionRegion, tuple(_get(r, "center", "")), _get(r, "radius", ""))
            for i, r in enumerate(inter)
        )
    map_ctx = _wrap(
        "map",
        MapContext,
        lanes=tuple(lanes),
        crosswalks=tuple(_get(m, "crosswalks", "map", [])),
        stop_lines=tuple(stop_lines),
        drivable_area=tuple(_get(m, "drivable_area", "map", [])),
        intersections=intersections,
    )

    candidates = None
    cand = _get(doc, "candidates", "", None)
    if cand is not None:
        trajs = _get(cand, "trajectories", "candidates")
        trajs = tuple(_wrap(f"candidates.trajectories[{k}]", Trajectory, t) for k, t in enumerate(trajs))
        candidates = CandidateSet(trajs, _get(cand, "confidences", "candidates"))

    return Scenario(
        id=_get(doc, "id", ""),
        ego_history=history,
        agents=tuple(agents),
        map=map_ctx,
        ego_length=_get(ego, "length", "ego", DEFAULT_EGO_LENGTH),
        ego_width=_get(ego, "width", "ego", DEFAULT_EGO_WIDTH),
        candidates=candidates,
        ground_truth=ground_truth,
    )


def load_scenario(data: bytes | str) -> Scenario:
    """Parse and validate a scenario document.

    Raises ScenarioParseError for malformed JSON and ScenarioValidationError
    (carrying the field path) when a model invariant fails.
    """
    try:
        doc = json.loads(data)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ScenarioParseError(f"malformed document: {exc}") from None
    try:
        return scenario_from_dict(doc)
    except ScenarioError:
        raise
    except (TypeError, KeyError, AttributeError) as exc:
        raise ScenarioParseError(f"unexpected document structure: {exc}") from None
