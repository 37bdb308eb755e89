"""Core domain types: hazards, phases, risk states, actions, transitions.

A risk structure is a weighted labeled transition system whose states assign
one phase to every declared hazard.  Everything in this module is an immutable
value; mutation happens only inside the construction engine, which freezes its
result into a :class:`RiskStructure`.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Optional, Sequence

DOMAINS = ("drv", "veh", "renv")

_RESERVED_ID_CHARS = set(":,|")


class RiskModelError(Exception):
    """Base class for all errors raised by this package."""


class IllegalPhaseTransition(RiskModelError):
    """An action tried to move a hazard along an edge the phase model forbids."""


class UnknownState(RiskModelError):
    """A state was referenced that is not part of the structure."""


class StateSyntaxError(RiskModelError):
    """A state name does not follow the ``id:phase,id:phase`` grammar."""


class PhaseKind(Enum):
    INACTIVE = "inactive"
    ACTIVE = "active"
    MISHAP = "mishap"
    MITIGATED = "mitigated"


@dataclass(frozen=True)
class Phase:
    """Per-hazard status: inactive, active, mishap-contributing, or mitigated.

    Mitigated phases carry a positive index selecting one of the hazard's
    ``n_mitigations`` mitigation phases; the index is an opaque catalog choice.
    """

    kind: PhaseKind
    index: int = 0

    def __post_init__(self) -> None:
        if self.kind is PhaseKind.MITIGATED:
            if self.index < 1:
                raise ValueError("mitigated phase needs a positive index")
        elif self.index != 0:
            raise ValueError(f"{self.kind.value} phase carries no index")

    @classmethod
    def inactive(cls) -> "Phase":
        return cls(PhaseKind.INACTIVE)

    @classmethod
    def active(cls) -> "Phase":
        return cls(PhaseKind.ACTIVE)

    @classmethod
    def mishap(cls) -> "Phase":
        return cls(PhaseKind.MISHAP)

    @classmethod
    def mitigated(cls, index: int) -> "Phase":
        return cls(PhaseKind.MITIGATED, index)

    def render(self) -> str:
        if self.kind is PhaseKind.INACTIVE:
            return "0"
        if self.kind is PhaseKind.ACTIVE:
            return "e"
        if self.kind is PhaseKind.MISHAP:
            return "em"
        return f"m{self.index}"

    @classmethod
    def parse(cls, text: str) -> "Phase":
        if text == "0":
            return cls.inactive()
        if text == "e":
            return cls.active()
        if text == "em":
            return cls.mishap()
        m = re.fullmatch(r"m([1-9][0-9]*)", text)
        if m:
            return cls.mitigated(int(m.group(1)))
        raise StateSyntaxError(f"not a phase: {text!r}")

    def sort_key(self) -> tuple[int, int]:
        order = {
            PhaseKind.INACTIVE: 0,
            PhaseKind.ACTIVE: 1,
            PhaseKind.MISHAP: 2,
            PhaseKind.MITIGATED: 3,
        }
        return (order[self.kind], self.index)

    def __str__(self) -> str:  # pragma: no cover - convenience
        return self.render()


class ActionClass(Enum):
    ENDANGERMENT = "endangerment"
    MITIGATION = "mitigation"
    MISHAP_ACTION = "mishap"
    ORDINARY = "ordinary"


class Severity(Enum):
    """Mishap severity scale: marginal < critical < fatal."""

    MARGINAL = "m"
    CRITICAL = "c"
    FATAL = "f"

    @property
    def rank(self) -> int:
        return {"m": 0, "c": 1, "f": 2}[self.value]


@dataclass(frozen=True)
class HazardId:
    """Symbolic hazard identifier, unique within a catalog."""

    id: str
    description: str = ""

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("hazard id must be non-empty")
        if any(c.isspace() for c in self.id) or _RESERVED_ID_CHARS & set(self.id):
            raise ValueError(
                f"hazard id {self.id!r} may not contain whitespace or any of ':,|'"
            )


@dataclass(frozen=True)
class HazardPhaseModel:
    """A hazard together with its fixed phase-transition graph.

    The phase set has ``n_mitigations + 3`` elements: inactive, active,
    mishap-contributing, and one mitigated phase per mitigation index.
    """

    hazard: HazardId
    n_mitigations: int

    def __post_init__(self) -> None:
        if self.n_mitigations < 1:
            raise ValueError(f"hazard {self.hazard.id!r}: n_mitigations must be >= 1")

    @property
    def id(self) -> str:
        return self.hazard.id

    def phases(self) -> tuple[Phase, ...]:
        return (
            Phase.inactive(),
            Phase.active(),
            Phase.mishap(),
            *(Phase.mitigated(j) for j in range(1, self.n_mitigations + 1)),
        )

    def valid_phase(self, phase: Phase) -> bool:
        if phase.kind is PhaseKind.MITIGATED:
            return 1 <= phase.index <= self.n_mitigations
        return True


def legal_phase_step(source: Phase, action_class: ActionClass, target: Phase) -> bool:
    """Whether the per-hazard phase graph has an edge (source, class, target).

    Mishap phases are absorbing: nothing leads out of them.  Ordinary actions
    never move a phase.
    """
    sk, tk = source.kind, target.kind
    if action_class is ActionClass.ENDANGERMENT:
        return tk is PhaseKind.ACTIVE and sk in (
            PhaseKind.INACTIVE,
            PhaseKind.ACTIVE,
            PhaseKind.MITIGATED,
        )
    if action_class is ActionClass.MISHAP_ACTION:
        return sk is PhaseKind.ACTIVE and tk is PhaseKind.MISHAP
    if action_class is ActionClass.MITIGATION:
        if sk is PhaseKind.ACTIVE:
            return tk in (PhaseKind.MITIGATED, PhaseKind.INACTIVE)
        if sk is PhaseKind.MITIGATED:
            if tk is PhaseKind.INACTIVE:
                return True
            return tk is PhaseKind.MITIGATED and source.index != target.index
        return False
    return False


@dataclass(frozen=True)
class RiskState:
    """One phase per hazard, ordered by catalog declaration order.

    The canonical textual form is ``id:phase`` pairs joined by commas in
    declaration order, e.g. ``A:m1,L:e,R:0``; it round-trips through
    :func:`parse_state`.
    """

    entries: tuple[tuple[str, Phase], ...]

    @property
    def name(self) -> str:
        return ",".join(f"{h}:{p.render()}" for h, p in self.entries)

    @property
    def hazard_ids(self) -> tuple[str, ...]:
        return tuple(h for h, _ in self.entries)

    def phase(self, hazard_id: str) -> Phase:
        for h, p in self.entries:
            if h == hazard_id:
                return p
        raise KeyError(hazard_id)

    def phases(self) -> Mapping[str, Phase]:
        return dict(self.entries)

    def with_phases(self, updates: Mapping[str, Phase]) -> "RiskState":
        unknown = set(updates) - set(self.hazard_ids)
        if unknown:
            raise KeyError(f"unknown hazards: {sorted(unknown)}")
        return RiskState(
            tuple((h, updates.get(h, p)) for h, p in self.entries)
        )

    def __str__(self) -> str:  # pragma: no cover - convenience
        return self.name


def state_from_phases(
    hazards: Sequence[HazardPhaseModel], phases: Mapping[str, Phase]
) -> RiskState:
    """Build a state in declaration order; every hazard must get a phase."""
    missing = [h.id for h in hazards if h.id not in phases]
    if missing:
        raise StateSyntaxError(f"no phase given for hazards: {missing}")
    extra = set(phases) - {h.id for h in hazards}
    if extra:
        raise StateSyntaxError(f"phases for undeclared hazards: {sorted(extra)}")
    for h in hazards:
        if not h.valid_phase(phases[h.id]):
            raise StateSyntaxError(
                f"hazard {h.id!r} has no phase {phases[h.id].render()!r}"
            )
    return RiskState(tuple((h.id, phases[h.id]) for h in hazards))


def all_inactive(hazards: Sequence[HazardPhaseModel]) -> RiskState:
    return RiskState(tuple((h.id, Phase.inactive()) for h in hazards))


def parse_state(text: str, hazards: Sequence[HazardPhaseModel]) -> RiskState:
    """Parse a state name; accepts any pair order but normalizes to canonical."""
    if not hazards:
        if text:
            raise StateSyntaxError(f"state {text!r} names hazards but none are declared")
        return RiskState(())
    phases: dict[str, Phase] = {}
    if text:
        for token in text.split(","):
            hid, sep, ph = token.partition(":")
            if not sep:
                raise StateSyntaxError(f"malformed state component {token!r}")
            if hid in phases:
                raise StateSyntaxError(f"hazard {hid!r} listed twice in {text!r}")
            phases[hid] = Phase.parse(ph)
    return state_from_phases(hazards, phases)


def embed_state(state: RiskState, hazards: Sequence[HazardPhaseModel]) -> RiskState:
    """Extend a state to a superset hazard list, filling inactive phases."""
    known = state.phases()
    missing = set(known) - {h.id for h in hazards}
    if missing:
        raise StateSyntaxError(f"state hazards {sorted(missing)} not in target set")
    return RiskState(
        tuple((h.id, known.get(h.id, Phase.inactive())) for h in hazards)
    )


def is_mishap(state: RiskState) -> bool:
    """True iff some hazard is in its mishap phase."""
    return any(p.kind is PhaseKind.MISHAP for _, p in state.entries)


def full_state_space_size(hazards: Sequence[HazardPhaseModel]) -> int:
    """Size of the full tuple space: product of per-hazard phase counts."""
    if not hazards:
        raise ValueError("at least one hazard required")
    size = 1
    for h in hazards:
        size *= h.n_mitigations + 3
    return size


@dataclass(frozen=True)
class Action:
    """A transition label with a class, acting domains, and an effect map.

    The effect map lists the hazards this action moves and their target
    phases; hazards outside the map are untouched.
    """

    name: str
    kind: ActionClass
    effect: tuple[tuple[str, Phase], ...]
    domains: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("action name must be non-empty")
        object.__setattr__(self, "effect", tuple(sorted(self.effect)))
        object.__setattr__(self, "domains", tuple(sorted(set(self.domains))))
        for d in self.domains:
            if d not in DOMAINS:
                raise ValueError(f"action {self.name!r}: unknown domain {d!r}")
        seen: set[str] = set()
        for hid, target in self.effect:
            if hid in seen:
                raise ValueError(f"action {self.name!r} moves hazard {hid!r} twice")
            seen.add(hid)
            if self.kind is ActionClass.MISHAP_ACTION:
                ok = target.kind is PhaseKind.MISHAP
            elif self.kind is ActionClass.MITIGATION:
                ok = target.kind in (PhaseKind.MITIGATED, PhaseKind.INACTIVE)
            elif self.kind is ActionClass.ENDANGERMENT:
                ok = target.kind is PhaseKind.ACTIVE
            else:
                ok = False  # ordinary actions carry no effect
            if not ok:
                raise ValueError(
                    f"action {self.name!r} ({self.kind.value}) cannot target "
                    f"phase {target.render()!r} of hazard {hid!r}"
                )

    def effect_map(self) -> Mapping[str, Phase]:
        return dict(self.effect)


def apply_action(state: RiskState, action: Action) -> RiskState:
    """Move exactly the effect-map hazards; all other phases stay put.

    A hazard already at its target phase counts as untouched.  Raises
    :class:`IllegalPhaseTransition` when any move is not in the phase graph.
    """
    updates: dict[str, Phase] = {}
    for hid, target in action.effect:
        try:
            current = state.phase(hid)
        except KeyError:
            raise IllegalPhaseTransition(
                f"action {action.name!r} moves unknown hazard {hid!r}"
            ) from None
        if current == target:
            continue
        if not legal_phase_step(current, action.kind, target):
            raise IllegalPhaseTransition(
                f"action {action.name!r}: hazard {hid!r} cannot move "
                f"{current.render()} -> {target.render()} as {action.kind.value}"
            )
        updates[hid] = target
    return state.with_phases(updates)


@dataclass(frozen=True)
class Transition:
    """A weighted labeled edge of the risk structure.

    Probabilities sit on endangerment, mitigation, and mishap transitions;
    costs on mitigations.  ``checked=False`` skips the per-hazard phase-graph
    validation: edges of a quotient model connect class representatives, whose
    phases stand in for whole equivalence classes.
    """

    source: RiskState
    action: Action
    target: RiskState
    pr: Optional[float] = None
    cs: Optional[int] = None
    checked: bool = field(default=True, compare=False, repr=False)

    def __post_init__(self) -> None:
        if self.source.hazard_ids != self.target.hazard_ids:
            raise ValueError("transition endpoints disagree on the hazard set")
        if self.checked:
            for hid in self.source.hazard_ids:
                sp, tp = self.source.phase(hid), self.target.phase(hid)
                if sp == tp:
                    continue
                if not legal_phase_step(sp, self.action.kind, tp):
                    raise IllegalPhaseTransition(
                        f"transition {self.source.name} -{self.action.name}-> "
                        f"{self.target.name}: hazard {hid!r} moves "
                        f"{sp.render()} -> {tp.render()} illegally"
                    )
        if self.pr is not None and not 0.0 <= self.pr <= 1.0:
            raise ValueError(f"pr must be in [0,1], got {self.pr}")
        if self.cs is not None and self.cs < 0:
            raise ValueError(f"cs must be nonnegative, got {self.cs}")

    def key(self) -> tuple[str, str, str]:
        return (self.source.name, self.action.name, self.target.name)


@dataclass(frozen=True)
class OperationalSituation:
    """Scope metadata for a model: initial states plus opaque invariants.

    The invariant predicates are carried as labels only and never evaluated.
    """

    name: str = ""
    initial: Optional[tuple[str, ...]] = None
    invariant_predicates: tuple[str, ...] = ()
    notes: str = ""


@dataclass(frozen=True)
class ModelOptions:
    """Construction and analysis knobs carried along with a model."""

    max_subset_size: int = 2
    band_l_below: float = 0.01
    band_h_at_least: float = 0.1
    region_policy: str = "no_active"

    def __post_init__(self) -> None:
        if self.max_subset_size < 1:
            raise ValueError("max_subset_size must be >= 1")
        if not 0.0 < self.band_l_below <= self.band_h_at_least <= 1.0:
            raise ValueError("band thresholds must satisfy 0 < l <= h <= 1")


@dataclass
class RiskStructure:
    """A weighted labeled transition system over risk states.

    States whose display label differs from their canonical name (merged
    equivalence classes) carry the label in ``labels``; everything else is
    addressed by canonical name.
    """

    hazards: tuple[HazardPhaseModel, ...]
    states: frozenset[RiskState]
    actions: tuple[Action, ...]
    transitions: tuple[Transition, ...]
    initial: frozenset[RiskState]
    sv: dict[RiskState, Severity] = field(default_factory=dict)
    situation: Optional[OperationalSituation] = None
    features: Optional["FeatureModel"] = None  # noqa: F821 - defined in .order
    options: ModelOptions = field(default_factory=ModelOptions)
    labels: dict[RiskState, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        ids = [h.id for h in self.hazards]
        if len(set(ids)) != len(ids):
            raise ValueError("hazard ids must be unique")
        if not self.initial or not self.initial <= self.states:
            raise ValueError("initial states must be a nonempty subset of states")
        mishaps = {s for s in self.states if is_mishap(s)}
        for t in self.transitions:
            if t.source not in self.states or t.target not in self.states:
                raise ValueError(f"transition endpoints outside state set: {t.key()}")
            if t.source in mishaps:
                raise ValueError(
                    f"mishap state {self.label(t.source)!r} must be final"
                )
        if set(self.sv) != mishaps:
            raise ValueError("severity must be assigned exactly on mishap states")

    @property
    def hazard_ids(self) -> tuple[str, ...]:
        return tuple(h.id for h in self.hazards)

    def hazard(self, hazard_id: str) -> HazardPhaseModel:
        for h in self.hazards:
            if h.id == hazard_id:
                return h
        raise KeyError(hazard_id)

    def label(self, state: RiskState) -> str:
        return self.labels.get(state, state.name)

    def sorted_states(self) -> list[RiskState]:
        return sorted(self.states, key=self.label)

    def mishap_states(self) -> frozenset[RiskState]:
        return frozenset(s for s in self.states if is_mishap(s))

    def state_named(self, label: str) -> RiskState:
        for s in self.states:
            if self.label(s) == label or s.name == label:
                return s
        raise UnknownState(f"no state named {label!r}")

    def require_state(self, state: RiskState) -> None:
        if state not in self.states:
            raise UnknownState(f"state {state.name!r} is not in the model")

    def outgoing(self) -> dict[RiskState, tuple[Transition, ...]]:
        adj: dict[RiskState, list[Transition]] = {s: [] for s in self.states}
        for t in self.transitions:
            adj[t.source].append(t)
        return {
            s: tuple(sorted(ts, key=lambda t: t.key()))
            for s, ts in adj.items()
        }

    def action_named(self, name: str) -> Action:
        for a in self.actions:
            if a.name == name:
                return a
        raise KeyError(name)
