"""Scenario builders for hand-computed fixtures."""

from __future__ import annotations

import numpy as np

from rulerank.scenario import (
    AgentTrack,
    AgentType,
    CandidateSet,
    Lane,
    MapContext,
    Scenario,
    Trajectory,
)

DT = 0.1
T = 50


def straight_states(x0: float, y: float, speed: float, steps: int = T, heading: float = 0.0) -> np.ndarray:
    """Constant-speed motion along +x starting one step after ``x0``."""
    x = x0 + speed * DT * np.arange(1, steps + 1)
    return np.column_stack([x, np.full(steps, y), np.full(steps, heading), np.full(steps, speed)])


def history(speed: float, y: float = 0.0) -> Trajectory:
    t = DT * np.arange(-10, 1)
    return Trajectory(np.column_stack([speed * t, np.full(11, y), np.zeros(11), np.full(11, speed)]))


def east_lane(y: float = 0.0, limit: float | None = None, x0: float = -50.0, x1: float = 300.0) -> Lane:
    return Lane(np.array([[x0, y], [x1, y]]), 1.75, None, limit, f"lane{y:+.1f}")


def make_scenario(candidates, agents=(), lanes=(), speed: float = 10.0, **map_kw) -> Scenario:
    trajs = [np.asarray(c, dtype=float) for c in candidates]
    k = len(trajs)
    return Scenario(
        id="fixture",
        ego_history=history(speed),
        agents=tuple(agents),
        map=MapContext(lanes=tuple(lanes), **map_kw),
        candidates=CandidateSet(tuple(Trajectory(t) for t in trajs), np.full(k, 1.0 / k)),
    )


def agent(agent_id: str, kind: AgentType, states: np.ndarray, length: float, width: float,
          valid=None) -> AgentTrack:
    valid = np.ones(states.shape[0], dtype=bool) if valid is None else valid
    return AgentTrack(agent_id, kind, states, valid, length, width)


