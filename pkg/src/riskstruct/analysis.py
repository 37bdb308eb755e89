"""Reachability, risk regions, mishap-reach probability, and risk priority.

Probability semantics are pessimistic single-attempt: the chance of reaching
a mishap is the maximum over paths of the product of transition
probabilities, which (all probabilities being at most one) is attained on a
simple path and computed by a best-first search.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterable, Optional, Union

from .core import (
    ActionClass,
    PhaseKind,
    RiskModelError,
    RiskState,
    RiskStructure,
    Severity,
    is_mishap,
)
from .order import (
    Band,
    feature_profile,
    in_loop_features,
    sv_min,
    sv_scale,
)


class Region(Enum):
    SAFE = "safe"
    HAZARDOUS = "hazardous"
    MISHAP = "mishap"


RegionAssignment = dict[RiskState, Region]

#: Transition classes admitted by the mitigation-only reachability filter:
#: everything except endangerments and mishap actions.
DELTA_M = frozenset({ActionClass.MITIGATION, ActionClass.ORDINARY})


@dataclass(frozen=True)
class BandThresholds:
    """Maps a probability to the low/medium/high band.

    Probabilities below ``l_below`` are low, probabilities at or above
    ``h_at_least`` are high, everything between is medium; so band(0) is low
    and band(1) is high.
    """

    l_below: float = 0.01
    h_at_least: float = 0.1

    def __post_init__(self) -> None:
        if not 0.0 < self.l_below <= self.h_at_least <= 1.0:
            raise ValueError("band thresholds must satisfy 0 < l <= h <= 1")

    @classmethod
    def from_model(cls, model: RiskStructure) -> "BandThresholds":
        return cls(model.options.band_l_below, model.options.band_h_at_least)

    def band(self, probability: float) -> Band:
        if probability < self.l_below:
            return Band.LOW
        if probability >= self.h_at_least:
            return Band.HIGH
        return Band.MEDIUM


def reach(
    model: RiskStructure,
    state: RiskState,
    classes: Optional[frozenset[ActionClass]] = None,
) -> frozenset[RiskState]:
    """States reachable from ``state``, itself included.

    ``classes`` restricts the transitions followed; pass :data:`DELTA_M` for
    the mitigation-only closure.
    """
    model.require_state(state)
    adjacency = model.outgoing()
    seen = {state}
    frontier = [state]
    while frontier:
        s = frontier.pop()
        for t in adjacency[s]:
            if classes is not None and t.action.kind not in classes:
                continue
            if t.target not in seen:
                seen.add(t.target)
                frontier.append(t.target)
    return frozenset(seen)


def _no_active_safe(state: RiskState, model: RiskStructure) -> bool:
    return all(p.kind is not PhaseKind.ACTIVE for _, p in state.entries)


def _handover_safe(state: RiskState, model: RiskStructure) -> bool:
    """Safe when nothing is active and control is either nominal or handed
    over to a declared fallback feature (e.g. the driver)."""
    if any(p.kind is PhaseKind.ACTIVE for _, p in state.entries):
        return False
    if all(p.kind is PhaseKind.INACTIVE for _, p in state.entries):
        return True
    if model.features is None:
        raise RiskModelError("'handover' region policy needs a feature model")
    fallback = model.features.fallback_features()
    if not fallback:
        raise RiskModelError("'handover' region policy needs a fallback feature")
    profile = feature_profile(state, model.features)
    return bool(fallback & in_loop_features(profile))


REGION_POLICIES: dict[str, Callable[[RiskState, RiskStructure], bool]] = {
    "no_active": _no_active_safe,
    "handover": _handover_safe,
}

PolicyLike = Union[str, Callable[[RiskState, RiskStructure], bool], None]


def assign_regions(model: RiskStructure, policy: PolicyLike = None) -> RegionAssignment:
    """Partition the states into safe, hazardous, and mishap regions.

    Mishap states are fixed by their phases.  The safe/hazardous split is a
    pluggable predicate; ``None`` uses the model's configured policy and the
    default policy marks a non-mishap state safe iff no hazard is active.
    """
    if policy is None:
        policy = model.options.region_policy
    if isinstance(policy, str):
        try:
            predicate = REGION_POLICIES[policy]
        except KeyError:
            raise RiskModelError(f"unknown region policy {policy!r}") from None
    else:
        predicate = policy
    regions: RegionAssignment = {}
    for s in model.states:
        if is_mishap(s):
            regions[s] = Region.MISHAP
        elif predicate(s, model):
            regions[s] = Region.SAFE
        else:
            regions[s] = Region.HAZARDOUS
    return regions


def mishap_reach_probability(
    model: RiskStructure,
    state: RiskState,
    targets: Optional[Iterable[RiskState]] = None,
) -> float:
    """Maximum path-product probability of reaching any target mishap.

    Transitions without a probability count as certain.  Returns 0.0 when no
    target is reachable and 1.0 when the state itself is a target.
    """
    model.require_state(state)
    if targets is None:
        target_set = model.mishap_states()
    else:
        target_set = frozenset(targets)
        stray = target_set - model.mishap_states()
        if stray:
            raise RiskModelError(
                f"targets must be mishap states, got {sorted(s.name for s in stray)}"
            )
    if state in target_set:
        return 1.0
    adjacency = model.outgoing()
    best: dict[RiskState, float] = {state: 1.0}
    heap: list[tuple[float, str, RiskState]] = [(-1.0, state.name, state)]
    done: set[RiskState] = set()
    while heap:
        neg, _, s = heapq.heappop(heap)
        if s in done:
            continue
        done.add(s)
        p = -neg
        if s in target_set:
            return p
        for t in adjacency[s]:
            q = p * (t.pr if t.pr is not None else 1.0)
            if q > best.get(t.target, 0.0):
                best[t.target] = q
                heapq.heappush(heap, (-q, t.target.name, t.target))
    return 0.0


def risk_priority(
    model: RiskStructure,
    state: RiskState,
    targets: Optional[Iterable[RiskState]] = None,
    thresholds: Optional[BandThresholds] = None,
) -> Severity:
    """Band of the mishap-reach probability scaled against the least severe
    reachable target mishap; marginal when no target is reachable.

    On a mishap state this is its own severity.
    """
    model.require_state(state)
    if is_mishap(state):
        return model.sv[state]
    if thresholds is None:
        thresholds = BandThresholds.from_model(model)
    target_set = (
        model.mishap_states() if targets is None else frozenset(targets)
    )
    reachable = reach(model, state) & target_set
    if not reachable:
        return Severity.MARGINAL
    probability = mishap_reach_probability(model, state, target_set)
    band = thresholds.band(probability)
    return sv_scale(band, sv_min([model.sv[s] for s in reachable]))
