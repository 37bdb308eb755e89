"""Catalog-driven incremental construction of risk structures.

The engine alternates endangerment and mitigation sweeps.  Each sweep walks
the non-mishap states in canonical order, enumerates uncovered hazard subsets
up to the configured size cap, and tries every declared rule for that subset;
a rule fires when its guard holds and every move is legal in the phase model.
Coverage maps ensure each (state, subset) pair is processed once, which makes
termination a counting argument.  After each sweep pair, states unreachable
from the initial region are pruned.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

from .core import (
    Action,
    ActionClass,
    HazardPhaseModel,
    ModelOptions,
    OperationalSituation,
    Phase,
    RiskModelError,
    RiskState,
    RiskStructure,
    Severity,
    Transition,
    all_inactive,
    full_state_space_size,
    is_mishap,
    legal_phase_step,
    parse_state,
)
from .order import FeatureModel


class CatalogInvalid(RiskModelError):
    """The catalog violates its declaration contract; carries all messages."""

    def __init__(self, errors: Sequence[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class ConstructionError(RiskModelError):
    """The construction loop exceeded its state-space bound."""


@dataclass(frozen=True)
class PhaseGuard:
    """Conjunction of per-hazard phase constraints: phase must be in the set."""

    constraints: tuple[tuple[str, tuple[Phase, ...]], ...] = ()

    @classmethod
    def of(cls, mapping: Mapping[str, Iterable[Phase]]) -> "PhaseGuard":
        return cls(
            tuple(sorted((h, tuple(ps)) for h, ps in mapping.items()))
        )

    def satisfied(self, state: RiskState) -> bool:
        return all(state.phase(h) in phases for h, phases in self.constraints)

    def hazards(self) -> tuple[str, ...]:
        return tuple(h for h, _ in self.constraints)


@dataclass(frozen=True)
class EndangermentRule:
    """Activates a hazard subset; applies where those hazards sit in
    ``from_phases`` and the guard over the other hazards holds.

    ``absorbed`` rules record the endangerment as a self-loop instead of
    moving any phase (the event occurs but is modeled as absorbed).
    """

    name: str
    activates: tuple[str, ...]
    pr: float
    guard: PhaseGuard = PhaseGuard()
    from_phases: tuple[Phase, ...] = (Phase.inactive(),)
    domains: tuple[str, ...] = ()
    description: str = ""
    enabled: bool = True
    absorbed: bool = False


@dataclass(frozen=True)
class MishapRule:
    """Moves a hazard subset into the mishap phase.

    All hazards in ``requires`` and ``sets`` must be active; the guard adds
    phase constraints on the remaining hazards.
    """

    name: str
    requires: tuple[str, ...]
    sets: tuple[str, ...]
    pr: float
    sv: Severity
    guard: PhaseGuard = PhaseGuard()
    domains: tuple[str, ...] = ()
    description: str = ""
    enabled: bool = True


@dataclass(frozen=True)
class MitigationRule:
    """Moves hazards to given target phases at a probability and a cost.

    A hazard already at its target counts as untouched; the rule fires only
    when at least one hazard actually moves.
    """

    name: str
    mitigates: tuple[tuple[str, Phase], ...]
    pr: float
    cs: int
    guard: PhaseGuard = PhaseGuard()
    domains: tuple[str, ...] = ()
    description: str = ""
    enabled: bool = True

    def hazard_set(self) -> frozenset[str]:
        return frozenset(h for h, _ in self.mitigates)


@dataclass(frozen=True)
class Catalog:
    """Declarative hazard catalog: hazards, features, rules, situation, options."""

    hazards: tuple[HazardPhaseModel, ...]
    endangerments: tuple[EndangermentRule, ...] = ()
    mishaps: tuple[MishapRule, ...] = ()
    mitigations: tuple[MitigationRule, ...] = ()
    features: Optional[FeatureModel] = None
    situation: OperationalSituation = OperationalSituation()
    options: ModelOptions = ModelOptions()

    def hazard_ids(self) -> tuple[str, ...]:
        return tuple(h.id for h in self.hazards)

    def hazard(self, hazard_id: str) -> HazardPhaseModel:
        for h in self.hazards:
            if h.id == hazard_id:
                return h
        raise KeyError(hazard_id)

    def validate(self) -> None:
        """Raise :class:`CatalogInvalid` with one anchored message per defect."""
        errors: list[str] = []
        ids = [h.id for h in self.hazards]
        for hid in ids:
            if ids.count(hid) > 1:
                errors.append(f"hazards: duplicate id {hid!r}")
        declared = set(ids)

        def check_ref(anchor: str, hid: str) -> None:
            if hid not in declared:
                errors.append(f"{anchor}: undeclared hazard {hid!r}")

        def check_guard(anchor: str, guard: PhaseGuard) -> None:
            for hid, phases in guard.constraints:
                check_ref(f"{anchor}.guard", hid)
                if hid in declared:
                    model = self.hazard(hid)
                    for p in phases:
                        if not model.valid_phase(p):
                            errors.append(
                                f"{anchor}.guard: hazard {hid!r} has no phase "
                                f"{p.render()!r}"
                            )

        for i, rule in enumerate(self.endangerments):
            anchor = f"endangerments[{i}] ({rule.name!r})"
            if not rule.activates:
                errors.append(f"{anchor}: empty activation set")
            for hid in rule.activates:
                check_ref(anchor, hid)
            check_guard(anchor, rule.guard)
            if not 0.0 <= rule.pr <= 1.0:
                errors.append(f"{anchor}: pr {rule.pr} outside [0,1]")
        for i, rule in enumerate(self.mishaps):
            anchor = f"mishaps[{i}] ({rule.name!r})"
            if not rule.sets:
                errors.append(f"{anchor}: empty mishap set")
            for hid in (*rule.requires, *rule.sets):
                check_ref(anchor, hid)
            check_guard(anchor, rule.guard)
            if not 0.0 <= rule.pr <= 1.0:
                errors.append(f"{anchor}: pr {rule.pr} outside [0,1]")
        for i, rule in enumerate(self.mitigations):
            anchor = f"mitigations[{i}] ({rule.name!r})"
            if not rule.mitigates:
                errors.append(f"{anchor}: empty mitigation map")
            for hid, target in rule.mitigates:
                check_ref(anchor, hid)
                if hid in declared and not self.hazard(hid).valid_phase(target):
                    errors.append(
                        f"{anchor}: target phase {target.render()!r} exceeds "
                        f"n_mitigations of hazard {hid!r}"
                    )
            check_guard(anchor, rule.guard)
            if not 0.0 <= rule.pr <= 1.0:
                errors.append(f"{anchor}: pr {rule.pr} outside [0,1]")
            if rule.cs < 0:
                errors.append(f"{anchor}: cs {rule.cs} negative")

        # One action name, one meaning: class, effect, and domains must agree.
        seen: dict[str, tuple[ActionClass, tuple, tuple]] = {}
        for rule, cls, effect in self._action_signatures():
            sig = (cls, effect, rule.domains)
            if rule.name in seen and seen[rule.name] != sig:
                errors.append(
                    f"action {rule.name!r} declared twice with different "
                    "class, effect, or domains"
                )
            seen.setdefault(rule.name, sig)

        if self.situation.initial:
            for name in self.situation.initial:
                try:
                    parse_state(name, self.hazards)
                except RiskModelError as exc:
                    errors.append(f"situation.initial: {exc}")
        if self.options.region_policy == "handover":
            if self.features is None or not self.features.fallback_features():
                errors.append(
                    "options.region_policy: 'handover' needs a feature universe "
                    "with at least one fallback feature"
                )
        if errors:
            raise CatalogInvalid(errors)

    def _action_signatures(self):
        for rule in self.endangerments:
            effect = tuple(sorted((h, Phase.active()) for h in rule.activates))
            yield rule, ActionClass.ENDANGERMENT, effect
        for rule in self.mishaps:
            effect = tuple(sorted((h, Phase.mishap()) for h in rule.sets))
            yield rule, ActionClass.MISHAP_ACTION, effect
        for rule in self.mitigations:
            yield rule, ActionClass.MITIGATION, tuple(sorted(rule.mitigates))

    def action_for(self, rule) -> Action:
        if isinstance(rule, EndangermentRule):
            effect = tuple((h, Phase.active()) for h in rule.activates)
            return Action(rule.name, ActionClass.ENDANGERMENT, effect, rule.domains)
        if isinstance(rule, MishapRule):
            effect = tuple((h, Phase.mishap()) for h in rule.sets)
            return Action(rule.name, ActionClass.MISHAP_ACTION, effect, rule.domains)
        if isinstance(rule, MitigationRule):
            return Action(rule.name, ActionClass.MITIGATION, rule.mitigates, rule.domains)
        raise TypeError(type(rule))

    def initial_states(self) -> frozenset[RiskState]:
        if self.situation.initial:
            return frozenset(
                parse_state(name, self.hazards) for name in self.situation.initial
            )
        return frozenset({all_inactive(self.hazards)})


@dataclass
class CoverageMaps:
    """Per-state sets of hazard subsets already processed by each sweep."""

    rv_e: dict[RiskState, set[frozenset[str]]] = field(default_factory=dict)
    rv_m: dict[RiskState, set[frozenset[str]]] = field(default_factory=dict)

    def register(self, state: RiskState) -> None:
        self.rv_e.setdefault(state, set())
        self.rv_m.setdefault(state, set())

    def drop(self, state: RiskState) -> None:
        self.rv_e.pop(state, None)
        self.rv_m.pop(state, None)


@dataclass(frozen=True)
class SweepRecord:
    """What one sweep added (or one pruning step removed)."""

    increment: int
    sweep: str  # "endangerment" | "mitigation" | "prune"
    states_added: int
    transitions_added: int
    states_total: int
    non_mishap_total: int
    transitions_total: int


@dataclass(frozen=True)
class ConstructionLog:
    records: tuple[SweepRecord, ...] = ()


def _subsets(ids: Sequence[str], cap: int) -> list[frozenset[str]]:
    out: list[frozenset[str]] = []
    for k in range(1, min(cap, len(ids)) + 1):
        out.extend(frozenset(c) for c in itertools.combinations(ids, k))
    return out


class _Builder:
    """Mutable construction state, frozen into a RiskStructure at the end."""

    def __init__(self, catalog: Catalog):
        catalog.validate()
        self.catalog = catalog
        self.states: set[RiskState] = set(catalog.initial_states())
        self.initial = frozenset(self.states)
        self.transitions: dict[tuple[str, str, str], Transition] = {}
        self.sv: dict[RiskState, Severity] = {}
        self.coverage = CoverageMaps()
        for s in self.states:
            self.coverage.register(s)
        self.records: list[SweepRecord] = []
        self.subsets = _subsets(catalog.hazard_ids(), catalog.options.max_subset_size)
        self.e_rules = self._index_endangerment_like()
        self.m_rules = self._index_mitigations()

    def _index_endangerment_like(self):
        index: dict[frozenset[str], list] = {}
        for rule in self.catalog.endangerments:
            if rule.enabled:
                index.setdefault(frozenset(rule.activates), []).append(rule)
        for rule in self.catalog.mishaps:
            if rule.enabled:
                index.setdefault(frozenset(rule.sets), []).append(rule)
        return index

    def _index_mitigations(self):
        index: dict[frozenset[str], list[MitigationRule]] = {}
        for rule in self.catalog.mitigations:
            if rule.enabled:
                index.setdefault(rule.hazard_set(), []).append(rule)
        return index

    def run(self) -> tuple[RiskStructure, ConstructionLog]:
        hazard_ids = self.catalog.hazard_ids()
        if hazard_ids:
            bound = 2 * full_state_space_size(self.catalog.hazards) * (
                2 ** len(hazard_ids)
            )
        else:
            bound = 0
        increment = 0
        while self._has_uncovered():
            increment += 1
            if increment > bound:
                raise ConstructionError(
                    f"construction exceeded the state-space bound of {bound} sweeps"
                )
            self._sweep(increment, "endangerment")
            self._sweep(increment, "mitigation")
            self._prune(increment)
        return self._freeze(), ConstructionLog(tuple(self.records))

    def _has_uncovered(self) -> bool:
        for s in self.states:
            if is_mishap(s):
                continue
            if any(sub not in self.coverage.rv_e[s] for sub in self.subsets):
                return True
            if any(sub not in self.coverage.rv_m[s] for sub in self.subsets):
                return True
        return False

    def _sweep(self, increment: int, kind: str) -> None:
        snapshot = sorted(
            (s for s in self.states if not is_mishap(s)), key=lambda s: s.name
        )
        rules = self.e_rules if kind == "endangerment" else self.m_rules
        covered = self.coverage.rv_e if kind == "endangerment" else self.coverage.rv_m
        states_before = len(self.states)
        transitions_before = len(self.transitions)
        for state in snapshot:
            for subset in self.subsets:
                if subset in covered[state]:
                    continue
                for rule in rules.get(subset, ()):
                    self._try_rule(state, rule)
                covered[state].add(subset)
        self.records.append(self._record(increment, kind, states_before, transitions_before))

    def _try_rule(self, state: RiskState, rule) -> None:
        if isinstance(rule, EndangermentRule):
            if not all(state.phase(h) in rule.from_phases for h in rule.activates):
                return
            if not rule.guard.satisfied(state):
                return
            if rule.absorbed:
                target = state
            else:
                target = state.with_phases(
                    {h: Phase.active() for h in rule.activates}
                )
                if target == state and Phase.active() not in rule.from_phases:
                    return
            self._add(state, self.catalog.action_for(rule), target, pr=rule.pr)
        elif isinstance(rule, MishapRule):
            active = Phase.active()
            if not all(state.phase(h) == active for h in (*rule.requires, *rule.sets)):
                return
            if not rule.guard.satisfied(state):
                return
            target = state.with_phases({h: Phase.mishap() for h in rule.sets})
            self._add(state, self.catalog.action_for(rule), target, pr=rule.pr, sv=rule.sv)
        elif isinstance(rule, MitigationRule):
            if not rule.guard.satisfied(state):
                return
            moved = False
            for h, target_phase in rule.mitigates:
                current = state.phase(h)
                if current == target_phase:
                    continue
                if not legal_phase_step(current, ActionClass.MITIGATION, target_phase):
                    return
                moved = True
            if not moved:
                return
            target = state.with_phases(
                {
                    h: p
                    for h, p in rule.mitigates
                    if state.phase(h) != p
                }
            )
            self._add(
                state, self.catalog.action_for(rule), target, pr=rule.pr, cs=rule.cs
            )

    def _add(
        self,
        source: RiskState,
        action: Action,
        target: RiskState,
        pr: Optional[float] = None,
        cs: Optional[int] = None,
        sv: Optional[Severity] = None,
    ) -> None:
        if target not in self.states:
            self.states.add(target)
            self.coverage.register(target)
        key = (source.name, action.name, target.name)
        if key not in self.transitions:  # first declaring rule wins
            self.transitions[key] = Transition(source, action, target, pr=pr, cs=cs)
        if sv is not None and is_mishap(target) and target not in self.sv:
            self.sv[target] = sv

    def _prune(self, increment: int) -> None:
        reachable: set[RiskState] = set(self.initial)
        frontier = list(self.initial)
        adj: dict[str, list[Transition]] = {}
        for t in self.transitions.values():
            adj.setdefault(t.source.name, []).append(t)
        while frontier:
            s = frontier.pop()
            for t in adj.get(s.name, ()):
                if t.target not in reachable:
                    reachable.add(t.target)
                    frontier.append(t.target)
        dropped = self.states - reachable
        if not dropped:
            return
        states_before = len(self.states)
        transitions_before = len(self.transitions)
        self.states -= dropped
        for s in dropped:
            self.coverage.drop(s)
            self.sv.pop(s, None)
        self.transitions = {
            k: t
            for k, t in self.transitions.items()
            if t.source in self.states and t.target in self.states
        }
        self.records.append(
            self._record(increment, "prune", states_before, transitions_before)
        )

    def _record(
        self, increment: int, sweep: str, states_before: int, transitions_before: int
    ) -> SweepRecord:
        non_mishap = sum(1 for s in self.states if not is_mishap(s))
        return SweepRecord(
            increment=increment,
            sweep=sweep,
            states_added=len(self.states) - states_before,
            transitions_added=len(self.transitions) - transitions_before,
            states_total=len(self.states),
            non_mishap_total=non_mishap,
            transitions_total=len(self.transitions),
        )

    def _freeze(self) -> RiskStructure:
        transitions = tuple(
            sorted(self.transitions.values(), key=lambda t: t.key())
        )
        actions = tuple(
            sorted({t.action for t in transitions}, key=lambda a: a.name)
        )
        return RiskStructure(
            hazards=self.catalog.hazards,
            states=frozenset(self.states),
            actions=actions,
            transitions=transitions,
            initial=self.initial,
            sv=dict(sorted(self.sv.items(), key=lambda kv: kv[0].name)),
            situation=self.catalog.situation,
            features=self.catalog.features,
            options=self.catalog.options,
        )


def construct_rs(catalog: Catalog) -> tuple[RiskStructure, ConstructionLog]:
    """Build the complete risk structure the catalog describes.

    Completeness is relative to the catalog: re-running any sweep on the
    result adds nothing (see :func:`verify_complete`).
    """
    return _Builder(catalog).run()


def verify_complete(model: RiskStructure, catalog: Catalog) -> bool:
    """Check that the model is a fixed point of the construction rules.

    Re-derives every rule application over all (state, subset) pairs and
    confirms each resulting transition is already present.
    """
    builder = _Builder(catalog)
    builder.states = set(model.states)
    builder.sv = dict(model.sv)
    builder.transitions = {}
    for s in builder.states:
        builder.coverage.register(s)
    for state in sorted(builder.states, key=lambda s: s.name):
        if is_mishap(state):
            continue
        for subset in builder.subsets:
            for rule in builder.e_rules.get(subset, ()):
                builder._try_rule(state, rule)
            for rule in builder.m_rules.get(subset, ()):
                builder._try_rule(state, rule)
    existing = {t.key() for t in model.transitions}
    derived = set(builder.transitions.keys())
    return derived <= existing and builder.states == set(model.states)
