"""The 28-rule, four-tier rule catalog and its override mechanism."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field, replace
from functools import cached_property, lru_cache
from types import MappingProxyType
from typing import Any, Iterator, Mapping

import numpy as np


class CatalogError(ValueError):
    pass


class Tier(enum.IntEnum):
    SAFETY = 0
    LEGAL = 1
    ROAD = 2
    COMFORT = 3


NUM_TIERS = 4


@dataclass(frozen=True)
class RuleSpec:
    paper_id: str
    registry_id: str
    tier: Tier
    description: str
    kappa: float
    threshold: float | None
    unit: str
    has_proxy: bool
    activation_id: str
    weight: float = 0.0
    params: Mapping[str, Any] = field(default_factory=dict)
    table_threshold: float | None = None
    primary_param: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "params", MappingProxyType(dict(self.params)))
        if not self.kappa > 0:
            raise CatalogError(f"{self.paper_id}: kappa must be > 0")
        if self.weight < 0:
            raise CatalogError(f"{self.paper_id}: weight must be >= 0")

    @property
    def id(self) -> str:
        return self.paper_id

    @property
    def alpha(self) -> float:
        """Scale for the linear clamp: the catalog threshold when positive, else 1."""
        t = self.table_threshold
        return float(t) if t is not None and t > 0 else 1.0

    def param(self, name: str):
        return self.params[name]


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Rulebook:
    rules: tuple[RuleSpec, ...]

    def __post_init__(self):
        ids = [r.paper_id for r in self.rules]
        if len(set(ids)) != len(ids):
            raise CatalogError("rule ids must be unique")
        for tier in Tier:
            proxied = [r for r in self.rules if r.tier == tier and r.has_proxy]
            if proxied:
                total = sum(r.weight for r in proxied)
                if abs(total - 1.0) > 1e-9:
                    raise CatalogError(f"tier {tier.name} proxied weights sum to {total}, expected 1")
            if any(r.weight != 0 for r in self.rules if r.tier == tier and not r.has_proxy):
                raise CatalogError(f"tier {tier.name}: audit-only rules must have zero weight")

    def __len__(self) -> int:
        return len(self.rules)

    def __iter__(self) -> Iterator[RuleSpec]:
        return iter(self.rules)

    @property
    def ids(self) -> list[str]:
        return [r.paper_id for r in self.rules]

    def index(self, rule_id: str) -> int:
        for i, r in enumerate(self.rules):
            if r.paper_id == rule_id:
                return i
        raise CatalogError(f"unknown rule id {rule_id!r}")

    def by_registry_id(self, registry_id: str) -> RuleSpec:
        # registry ids overlap paper ids textually, so they get their own lookup
        for r in self.rules:
            if r.registry_id == registry_id:
                return r
        raise CatalogError(f"unknown registry id {registry_id!r}")

    def lookup(self, rule_id: str) -> RuleSpec:
        return self.rules[self.index(rule_id)]

    def tier_index(self) -> dict[Tier, list[str]]:
        return {t: [r.paper_id for r in self.rules if r.tier == t] for t in Tier}

    @cached_property
    def tiers(self) -> np.ndarray:
        return _frozen(np.array([int(r.tier) for r in self.rules]))

    @cached_property
    def weights(self) -> np.ndarray:
        return _frozen(np.array([r.weight for r in self.rules]))

    @cached_property
    def kappas(self) -> np.ndarray:
        return _frozen(np.array([r.kappa for r in self.rules]))

    @cached_property
    def alphas(self) -> np.ndarray:
        return _frozen(np.array([r.alpha for r in self.rules]))

    @cached_property
    def proxied(self) -> np.ndarray:
        return _frozen(np.array([r.has_proxy for r in self.rules]))

    def weight_matrix(self) -> np.ndarray:
        """``(R, 4)`` matrix mapping per-rule contributions to tier scores."""
        return self._weight_matrix

    @cached_property
    def _weight_matrix(self) -> np.ndarray:
        w = np.zeros((len(self.rules), NUM_TIERS))
        w[np.arange(len(self.rules)), self.tiers] = self.weights
        return _frozen(w)


def _rule(paper_id, registry_id, tier, description, unit, kappa=2.0, has_proxy=True,
          params=None, primary=None, table=None) -> RuleSpec:
    params = dict(params or {})
    return RuleSpec(
        paper_id=paper_id,
        registry_id=registry_id,
        tier=tier,
        description=description,
        kappa=kappa,
        threshold=params.get(primary) if primary else None,
        unit=unit,
        has_proxy=has_proxy,
        activation_id=paper_id.replace(".", "_").lower() if has_proxy else "audit_only",
        params=params,
        table_threshold=table,
        primary_param=primary,
    )


S, L, R, C = Tier.SAFETY, Tier.LEGAL, Tier.ROAD, Tier.COMFORT


def _builtin_rules() -> list[RuleSpec]:
    return [
        _rule("L0.R0", "L0.R2", S, "Safe longitudinal distance", "m",
              params={"time_gap": 2.0, "min_speed": 0.3}, primary="time_gap", table=2.0),
        _rule("L0.R1", "L0.R3", S, "Safe lateral clearance", "m",
              params={"clearance_vehicle": 0.5, "clearance_cyclist": 1.0, "clearance_pedestrian": 1.5,
                      "range": 50.0}, primary="clearance_vehicle", table=0.5),
        _rule("L0.R2", "L0.R4", S, "Crosswalk occupancy", "m^2", kappa=3.0,
              params={"ped_speed": 0.3, "buffer": 5.0}, primary="buffer", table=2.0),
        _rule("L0.R3", "L10.R1", S, "Collision avoidance (overlap)", "m",
              params={"range": 50.0, "min_penetration": 0.01}, primary="min_penetration", table=0.0),
        _rule("L0.R4", "L10.R2", S, "VRU clearance buffer", "m",
              params={"clearance_pedestrian": 2.0, "clearance_cyclist": 1.5, "min_speed": 1.0},
              primary="clearance_pedestrian", table=1.0),
        _rule("L1.R0", "L5.R1", L, "Traffic signal compliance", "-", kappa=3.0,
              params={"red_distance": 5.0, "yellow_distance": 30.0, "yellow_factor": 0.3,
                      "flashing_red_factor": 0.5, "speed_scale": 10.0, "accel_scale": 2.0},
              primary="red_distance", table=2.0),
        _rule("L1.R1", "L5.R2", L, "Priority / right-of-way", "-", has_proxy=False),
        _rule("L1.R2", "L7.R4", L, "Speed limit adherence", "m/s",
              params={"tolerance": 1.0, "default_limit": None}, primary="tolerance", table=None),
        _rule("L1.R3", "L8.R1", L, "Red-light stop compliance", "-", kappa=3.0,
              params={"alpha": 10.0, "flashing_red_factor": 0.5}, primary="alpha", table=2.0),
        _rule("L1.R4", "L8.R2", L, "Stop-sign compliance", "m/s", kappa=3.0,
              params={"window": 5.0, "depth_scale": 5.0}, primary="window", table=0.5),
        _rule("L1.R5", "L8.R3", L, "Crosswalk yield to pedestrians", "-", kappa=3.0,
              params={"ttc_safe": 3.0, "proximity": 15.0, "crosswalk_margin": 1.0},
              primary="ttc_safe", table=5.0),
        _rule("L1.R6", "L8.R5", L, "Wrong-way driving prevention", "-",
              params={"mismatch": float(np.deg2rad(135.0)), "min_speed": 0.5},
              primary="mismatch", table=2.356),
        _rule("L2.R0", "L3.R3", R, "Drivable surface constraint", "m",
              params={"buffer": 0.5, "min_speed": 0.5}, primary="buffer", table=1.0),
        _rule("L2.R1", "L7.R3", R, "Lane departure prevention", "m",
              params={"half_width": 1.75, "margin": 0.05}, primary="half_width", table=1.8),
        _rule("L3.R0", "L1.R1", C, "Smooth longitudinal acceleration", "m/s^2",
              params={"accel_limit": 2.0, "jerk_limit": 2.0, "min_speed": 0.5},
              primary="accel_limit", table=3.0),
        _rule("L3.R1", "L1.R2", C, "Smooth braking deceleration", "m/s^2",
              params={"comfort_decel": 1.5, "min_speed": 1.0}, primary="comfort_decel", table=4.0),
        _rule("L3.R2", "L1.R3", C, "Smooth lateral steering", "deg/s",
              params={"rate_limit_deg": 15.0, "turning_rate": 0.01, "min_speed": 0.5},
              primary="rate_limit_deg", table=0.5),
        _rule("L3.R3", "L1.R4", C, "Speed consistency", "m/s",
              params={"window_steps": 20, "std_limit": 2.0, "osc_weight": 1.0, "sign_changes": 6,
                      "deadband": 0.05, "min_speed": 0.5}, primary="std_limit", table=2.0),
        _rule("L3.R4", "L1.R5", C, "Jerk / lane-change smoothness", "m/s^2",
              params={"lat_accel_limit": 1.5, "lat_speed": 0.1}, primary="lat_accel_limit", table=2.0),
        _rule("L3.R5", "L4.R3", C, "Left-turn gap acceptance", "1/s",
              params={"ttc_safe": 4.0, "turn_deg": 15.0, "range": 50.0, "oncoming_deg": 135.0,
                      "turning_rate": 0.01}, primary="ttc_safe", table=4.0),
        _rule("L3.R6", "L5.R3", C, "Parking-zone violation", "-", has_proxy=False),
        _rule("L3.R7", "L5.R4", C, "School-zone speed compliance", "-", has_proxy=False),
        _rule("L3.R8", "L5.R5", C, "Construction-zone compliance", "-", has_proxy=False),
        _rule("L3.R9", "L6.R1", C, "Cooperative lane change", "-",
              params={"displacement": 2.5, "time_gap": 2.0, "lat_accel": 0.5,
                      "gap_weight": 0.5, "accel_weight": 0.2}, primary="time_gap", table=3.0),
        _rule("L3.R10", "L6.R2", C, "Safe following distance", "-",
              params={"time_gap": 2.0, "min_speed": 0.3}, primary="time_gap", table=2.0),
        _rule("L3.R11", "L6.R3", C, "Intersection negotiation", "-",
              params={"radius": 20.0, "ttc": 3.0, "speed": 8.0, "min_agents": 2, "min_steps": 10,
                      "gap_weight": 0.5, "speed_weight": 0.2}, primary="ttc", table=3.0),
        _rule("L3.R12", "L6.R4", C, "Pedestrian interaction", "-",
              params={"clearance": 1.5, "near": 3.0, "speed": 6.7, "range": 10.0},
              primary="clearance", table=3.0),
        _rule("L3.R13", "L6.R5", C, "Cyclist interaction", "-",
              params={"clearance": 1.5, "near": 3.0, "speed": 8.9, "range": 10.0},
              primary="clearance", table=3.0),
    ]


def _uniform_weights(rules: list[RuleSpec]) -> list[RuleSpec]:
    out = []
    for r in rules:
        if r.has_proxy:
            n = sum(1 for q in rules if q.tier == r.tier and q.has_proxy)
            out.append(replace(r, weight=1.0 / n))
        else:
            out.append(replace(r, weight=0.0))
    return out


@lru_cache(maxsize=1)
def builtin_catalog() -> Rulebook:
    """The full 28-rule catalog with uniform static intra-tier weights (shared, immutable)."""
    return Rulebook(tuple(_uniform_weights(_builtin_rules())))


# Values from the catalog table where it disagrees with the proxy definitions.
TABLE_OVERRIDES: dict[str, dict[str, Any]] = {
    "L1.R2": {"params": {"tolerance": 2.2352}},
    "L0.R4": {"params": {"clearance_pedestrian": 1.0, "clearance_cyclist": 1.0}},
    "L3.R0": {"params": {"accel_limit": 3.0}},
    "L3.R1": {"params": {"comfort_decel": 4.0}},
}

_OVERRIDE_KEYS = {"kappa", "threshold", "weight", "params"}


def with_overrides(base: Rulebook, overrides: Mapping[str, Mapping[str, Any]]) -> Rulebook:
    """Return a new rulebook with per-rule constants substituted.

    ``threshold`` replaces the rule's primary constant; ``params`` replaces
    named constants.  When any weight is overridden, proxied weights in the
    affected tier are renormalized to sum to one.
    """
    rules = list(base.rules)
    touched_tiers = set()
    for rule_id, change in overrides.items():
        idx = base.index(rule_id)
        rule = rules[idx]
        unknown = set(change) - _OVERRIDE_KEYS
        if unknown:
            raise CatalogError(f"{rule_id}: unknown override fields {sorted(unknown)}")
        updates: dict[str, Any] = {}
        params = dict(rule.params)
        if "kappa" in change:
            updates["kappa"] = float(change["kappa"])
        if "threshold" in change:
            if rule.primary_param is None:
                raise CatalogError(f"{rule_id}: rule has no primary threshold")
            params[rule.primary_param] = change["threshold"]
        for k, v in dict(change.get("params", {})).items():
            if k not in params:
                raise CatalogError(f"{rule_id}: unknown parameter {k!r}")
            params[k] = v
        updates["params"] = params
        if rule.primary_param is not None:
            updates["threshold"] = params[rule.primary_param]
        if "weight" in change:
            if not rule.has_proxy:
                raise CatalogError(f"{rule_id}: audit-only rules carry no weight")
            w = float(change["weight"])
            if not np.isfinite(w) or w < 0:
                raise CatalogError(f"{rule_id}: weight must be finite and >= 0")
            updates["weight"] = w
            touched_tiers.add(rule.tier)
        try:
            rules[idx] = replace(rule, **updates)
        except CatalogError as exc:
            raise CatalogError(f"{rule_id}: {exc}") from None
    for tier in touched_tiers:
        members = [i for i, r in enumerate(rules) if r.tier == tier and r.has_proxy]
        total = sum(rules[i].weight for i in members)
        if not total > 0:
            raise CatalogError(f"tier {tier.name}: weights sum to zero and cannot be renormalized")
        for i in members:
            rules[i] = replace(rules[i], weight=rules[i].weight / total)
    return Rulebook(tuple(rules))


def load_overrides(path) -> dict:
    with open(path, "rb") as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise CatalogError("override file must hold a JSON object")
    return doc
