"""Model reduction: equivalence quotients, explicit drop rules, chain collapse.

Quotients merge states only within one risk region (so a merge can never
bridge mishap and non-mishap states), optionally requiring equal risk
priority.  Merged states keep the phases of a maximal member and a display
label joining the member names.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

from .core import (
    ActionClass,
    RiskModelError,
    RiskState,
    RiskStructure,
    Severity,
    Transition,
    is_mishap,
)
from .analysis import (
    BandThresholds,
    Region,
    RegionAssignment,
    assign_regions,
    risk_priority,
)
from .order import (
    PhaseKind,
    degraded_in_loop_features,
    feature_profile,
    in_loop_features,
    mitigation_lt,
    sv_max,
)


class IncompatibleMerge(RiskModelError):
    """A merge would span mishap and non-mishap states."""


EQUIVALENCES = ("h", "hm", "m", "f", "d")


def _phase_pattern(state: RiskState) -> tuple:
    return tuple(p.kind is not PhaseKind.INACTIVE for _, p in state.entries)


def _mishap_pattern(state: RiskState) -> tuple:
    return tuple(p.kind is PhaseKind.MISHAP for _, p in state.entries)


def _mitigation_signature(state: RiskState) -> tuple:
    return tuple(
        (
            p.kind is not PhaseKind.INACTIVE,
            p.kind in (PhaseKind.MITIGATED, PhaseKind.INACTIVE),
        )
        for _, p in state.entries
    )


def _equivalence_key(model: RiskStructure, equivalence: str) -> Callable[[RiskState], tuple]:
    if equivalence == "h":
        return _phase_pattern
    if equivalence == "hm":
        return _mishap_pattern
    if equivalence == "m":
        return _mitigation_signature
    if equivalence in ("f", "d"):
        if model.features is None:
            raise RiskModelError(
                f"equivalence {equivalence!r} needs the model's feature declarations"
            )
        features = model.features

        def key(state: RiskState) -> tuple:
            profile = feature_profile(state, features)
            in_loop = tuple(sorted(in_loop_features(profile)))
            if equivalence == "f":
                return (in_loop,)
            return (in_loop, tuple(sorted(degraded_in_loop_features(profile))))

        return key
    raise RiskModelError(f"unknown equivalence {equivalence!r}; pick one of {EQUIVALENCES}")


def quotient(
    model: RiskStructure,
    equivalence: str,
    require_equal_rp: bool = False,
    thresholds: Optional[BandThresholds] = None,
    regions: Optional[RegionAssignment] = None,
) -> RiskStructure:
    """Merge equivalent states that share a region (and risk priority, if
    required).  Parallel merged transitions with one action name keep the
    maximum probability and minimum cost; self-loops induced by merging are
    dropped."""
    key_fn = _equivalence_key(model, equivalence)
    if regions is None:
        regions = assign_regions(model)
    if thresholds is None:
        thresholds = BandThresholds.from_model(model)

    def class_key(state: RiskState) -> tuple:
        # mishap patterns are always preserved, whatever the equivalence
        parts: tuple = (key_fn(state), _mishap_pattern(state), regions[state].value)
        if require_equal_rp:
            parts += (risk_priority(model, state, thresholds=thresholds).value,)
        return parts

    classes: dict[tuple, list[RiskState]] = {}
    for s in sorted(model.states, key=model.label):
        classes.setdefault(class_key(s), []).append(s)

    state_map: dict[RiskState, RiskState] = {}
    labels: dict[RiskState, str] = {}
    for members in classes.values():
        mishap_mix = {is_mishap(s) for s in members}
        if len(mishap_mix) > 1:
            raise IncompatibleMerge(
                "a class would span mishap and non-mishap states: "
                + ", ".join(sorted(model.label(s) for s in members))
            )
        maximal = [
            s for s in members if not any(mitigation_lt(s, t) for t in members)
        ]
        representative = min(maximal, key=model.label)
        for s in members:
            state_map[s] = representative
        if len(members) > 1:
            labels[representative] = "|".join(
                sorted(model.label(s) for s in members)
            )
        elif representative in model.labels:
            labels[representative] = model.labels[representative]

    merged: dict[tuple[RiskState, str, RiskState], Transition] = {}
    for t in model.transitions:
        src, tgt = state_map[t.source], state_map[t.target]
        if src == tgt and t.source != t.target:
            continue  # self-loop induced by the merge
        key = (src, t.action.name, tgt)
        if key in merged:
            old = merged[key]
            pr = _merge_max(old.pr, t.pr)
            cs = _merge_min(old.cs, t.cs)
            merged[key] = Transition(src, old.action, tgt, pr=pr, cs=cs, checked=False)
        else:
            merged[key] = Transition(src, t.action, tgt, pr=t.pr, cs=t.cs, checked=False)

    new_states = frozenset(state_map.values())
    sv: dict[RiskState, Severity] = {}
    for s, severity in model.sv.items():
        rep = state_map[s]
        sv[rep] = sv_max([severity, sv[rep]]) if rep in sv else severity
    transitions = tuple(sorted(merged.values(), key=lambda t: t.key()))
    return replace(
        model,
        states=new_states,
        actions=tuple(sorted({t.action for t in transitions}, key=lambda a: a.name)),
        transitions=transitions,
        initial=frozenset(state_map[s] for s in model.initial),
        sv=sv,
        labels=labels,
    )


def _merge_max(a: Optional[float], b: Optional[float]) -> Optional[float]:
    present = [x for x in (a, b) if x is not None]
    return max(present) if present else None


def _merge_min(a: Optional[int], b: Optional[int]) -> Optional[int]:
    present = [x for x in (a, b) if x is not None]
    return min(present) if present else None


@dataclass(frozen=True)
class DropRule:
    """Matches transitions by action name, plus optional source-region and
    self-loop constraints."""

    action: str
    source_region: Optional[Region] = None
    self_loop: Optional[bool] = None

    def matches(self, t: Transition, regions: RegionAssignment) -> bool:
        if t.action.name != self.action:
            return False
        if self.source_region is not None and regions[t.source] is not self.source_region:
            return False
        if self.self_loop is not None and (t.source == t.target) != self.self_loop:
            return False
        return True


def drop_irrelevant(
    model: RiskStructure,
    rules: Sequence[DropRule],
    regions: Optional[RegionAssignment] = None,
) -> RiskStructure:
    """Remove transitions matched by explicit drop rules, then prune states
    that became unreachable from the initial region."""
    if regions is None:
        regions = assign_regions(model)
    kept = tuple(
        t
        for t in model.transitions
        if not any(rule.matches(t, regions) for rule in rules)
    )
    return _prune_unreachable(replace(model, transitions=kept))


def _prune_unreachable(model: RiskStructure) -> RiskStructure:
    adjacency: dict[RiskState, list[Transition]] = {}
    for t in model.transitions:
        adjacency.setdefault(t.source, []).append(t)
    reachable = set(model.initial)
    frontier = list(model.initial)
    while frontier:
        s = frontier.pop()
        for t in adjacency.get(s, ()):
            if t.target not in reachable:
                reachable.add(t.target)
                frontier.append(t.target)
    transitions = tuple(
        t for t in model.transitions if t.source in reachable and t.target in reachable
    )
    return replace(
        model,
        states=frozenset(reachable),
        actions=tuple(sorted({t.action for t in transitions}, key=lambda a: a.name)),
        transitions=transitions,
        sv={s: v for s, v in model.sv.items() if s in reachable},
        labels={s: l for s, l in model.labels.items() if s in reachable},
    )


def collapse_safe_chains(
    model: RiskStructure, regions: Optional[RegionAssignment] = None
) -> RiskStructure:
    """Collapse runs of mitigation transitions through pass-through states.

    A state is pass-through when its only outgoing transition is a single
    mitigation, it has exactly one (mitigation) predecessor, and it shares a
    region with both neighbours; the run becomes one composite transition
    with the product of the probabilities and the sum of the costs.
    Applied to a fixed point, so collapsing twice changes nothing.
    """
    if regions is None:
        regions = assign_regions(model)
    current = model
    while True:
        collapsed = _collapse_once(current, regions)
        if collapsed is None:
            return current
        current = collapsed


def _collapse_once(
    model: RiskStructure, regions: RegionAssignment
) -> Optional[RiskStructure]:
    outgoing: dict[RiskState, list[Transition]] = {s: [] for s in model.states}
    incoming: dict[RiskState, list[Transition]] = {s: [] for s in model.states}
    for t in model.transitions:
        outgoing[t.source].append(t)
        incoming[t.target].append(t)

    def pass_through(s: RiskState) -> bool:
        outs = outgoing[s]
        ins = incoming[s]
        if len(outs) != 1 or len(ins) != 1:
            return False
        if outs[0].action.kind is not ActionClass.MITIGATION:
            return False
        if ins[0].action.kind is not ActionClass.MITIGATION:
            return False
        if s in model.initial or outs[0].target == s or ins[0].source == s:
            return False
        return regions[ins[0].source] is regions[s] is regions[outs[0].target]

    for mid in sorted(model.states, key=model.label):
        if not pass_through(mid):
            continue
        first, second = incoming[mid][0], outgoing[mid][0]
        composite = Transition(
            source=first.source,
            action=replace(
                second.action,
                name=f"{first.action.name};{second.action.name}",
                effect=_compose_effects(first, second),
            ),
            target=second.target,
            pr=_compose_pr(first.pr, second.pr),
            cs=_compose_cs(first.cs, second.cs),
        )
        transitions = tuple(
            sorted(
                [t for t in model.transitions if t not in (first, second)]
                + [composite],
                key=lambda t: t.key(),
            )
        )
        return replace(
            model,
            states=frozenset(model.states - {mid}),
            actions=tuple(
                sorted({t.action for t in transitions}, key=lambda a: a.name)
            ),
            transitions=transitions,
            sv={s: v for s, v in model.sv.items() if s != mid},
            labels={s: l for s, l in model.labels.items() if s != mid},
        )
    return None


def _compose_effects(first: Transition, second: Transition):
    """Net effect of the two steps: every hazard that changed overall."""
    effects = {}
    for hid in first.source.hazard_ids:
        end = second.target.phase(hid)
        if first.source.phase(hid) != end:
            effects[hid] = end
    return tuple(sorted(effects.items()))


def _compose_pr(a: Optional[float], b: Optional[float]) -> Optional[float]:
    if a is None and b is None:
        return None
    return (a if a is not None else 1.0) * (b if b is not None else 1.0)


def _compose_cs(a: Optional[int], b: Optional[int]) -> Optional[int]:
    if a is None and b is None:
        return None
    return (a or 0) + (b or 0)
