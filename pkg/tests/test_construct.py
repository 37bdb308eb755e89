from __future__ import annotations

from dataclasses import replace
from random import Random

import pytest

from riskstruct import (
    ActionClass,
    Catalog,
    CatalogInvalid,
    EndangermentRule,
    HazardId,
    HazardPhaseModel,
    MitigationRule,
    OperationalSituation,
    OrderClass,
    Phase,
    PhaseGuard,
    Severity,
    classify_by_order,
    construct_rs,
    embed_state,
    full_state_space_size,
    mitigation_equiv,
    verify_complete,
)

from helpers import random_catalog

# The eleven expected transitions of the second-increment scenario, plus
# the mishap edge, frozen as (source, action, target, pr, cs).
R2_EXPECTED_TRANSITIONS = {
    ("A:0,L:0", "f_A", "A:e,L:0", 0.01, None),
    ("A:0,L:0", "f_L", "A:0,L:e", 0.02, None),
    ("A:0,L:e", "f_A", "A:e,L:e", 0.01, None),
    ("A:0,L:e", "m1_L", "A:0,L:m1", 0.99, 9),
    ("A:0,L:m1", "f_A", "A:e,L:m1", 0.01, None),
    ("A:e,L:0", "f_L", "A:e,L:e", 0.02, None),
    ("A:e,L:0", "m1_A", "A:m1,L:0", 0.99, 10),
    ("A:e,L:0", "m3_A", "A:m3,L:0", 0.5, 3),
    ("A:e,L:e", "m2_L", "A:m1,L:m2", 0.1, 3),
    ("A:m1,L:0", "f_L", "A:m1,L:e", 0.02, None),
    ("A:m1,L:0", "m2_A", "A:m2,L:0", 0.97, 5),
    ("A:e,L:e", "em_AL", "A:em,L:em", 0.5, None),
}

R2_EXPECTED_STATES = {
    "A:0,L:0",
    "A:e,L:0",
    "A:m1,L:0",
    "A:m2,L:0",
    "A:m3,L:0",
    "A:0,L:e",
    "A:0,L:m1",
    "A:e,L:e",
    "A:m1,L:e",
    "A:e,L:m1",
    "A:m1,L:m2",
    "A:em,L:em",
}

R3_ADDED_STATES = {
    "A:0,L:0,R:e",
    "A:0,L:e,R:e",
    "A:0,L:m1,R:e",
    "A:e,L:0,R:e",
    "A:e,L:e,R:e",
    "A:e,L:m1,R:e",
    "A:m1,L:0,R:e",
    "A:m1,L:e,R:e",
    "A:m1,L:m2,R:e",
}


class TestGoldenConstruction:
    def test_r2_states_exact(self, r2_model):
        assert {s.name for s in r2_model.states} == R2_EXPECTED_STATES

    def test_r2_exactly_one_mishap(self, r2_model):
        mishaps = r2_model.mishap_states()
        assert len(mishaps) == 1
        assert r2_model.sv[next(iter(mishaps))] is Severity.FATAL

    def test_r2_transitions_exact(self, r2_model):
        got = {
            (t.source.name, t.action.name, t.target.name, t.pr, t.cs)
            for t in r2_model.transitions
        }
        assert got == R2_EXPECTED_TRANSITIONS

    def test_increment_two_reaches_eleven_states(self, r2_catalog):
        _, log = construct_rs(r2_catalog)
        by_key = {(r.increment, r.sweep): r for r in log.records}
        assert by_key[(2, "mitigation")].non_mishap_total == 11

    def test_r3_adds_exactly_the_new_states(self, r2_model, r3_model):
        embedded = {embed_state(s, r3_model.hazards).name for s in r2_model.states}
        got = {s.name for s in r3_model.states}
        assert got - embedded == R3_ADDED_STATES
        assert embedded <= got

    def test_r3_keeps_the_joint_handover_state(self, r3_model):
        r3_model.state_named("A:m1,L:m2,R:0")

    def test_weights_recorded_per_class(self, r2_model):
        for t in r2_model.transitions:
            assert t.pr is not None
            if t.action.kind is ActionClass.MITIGATION:
                assert t.cs is not None
            else:
                assert t.cs is None

    def test_mishaps_are_final(self, r2_model, r3_model):
        for model in (r2_model, r3_model):
            sources = {t.source for t in model.transitions}
            assert all(s not in sources for s in model.mishap_states())

    def test_state_space_bound(self, r2_model):
        assert len(r2_model.states) <= full_state_space_size(r2_model.hazards)


class TestConstructionContract:
    def test_deterministic(self, r2_catalog):
        a, la = construct_rs(r2_catalog)
        b, lb = construct_rs(r2_catalog)
        assert a == b and la == lb

    def test_complete_fixed_point(self, r2_catalog, r3_catalog):
        for catalog in (r2_catalog, r3_catalog):
            model, _ = construct_rs(catalog)
            assert verify_complete(model, catalog)

    def test_empty_hazard_catalog(self):
        model, log = construct_rs(Catalog(hazards=()))
        assert len(model.states) == 1
        assert not model.transitions
        assert next(iter(model.states)).name == ""

    def test_classification_agrees_with_rule_classes(self, r2_model, r3_model):
        # Order-based classification matches the declaring rule class, with
        # the one documented exception: a move between two mitigated phases
        # is order-incomparable and lands in the same mitigation-equivalence
        # class instead.
        for model in (r2_model, r3_model):
            for t in model.transitions:
                order = classify_by_order(t.source, t.target)
                if t.action.kind is ActionClass.MITIGATION:
                    if order is OrderClass.NEITHER:
                        assert mitigation_equiv(t.source, t.target)
                    else:
                        assert order is OrderClass.MITIGATION
                else:
                    assert order is OrderClass.ENDANGERMENT

    def test_custom_initial_states(self, r2_catalog):
        situation = OperationalSituation(name="mid", initial=("A:e,L:0",))
        catalog = replace(r2_catalog, situation=situation)
        model, _ = construct_rs(catalog)
        names = {s.name for s in model.states}
        assert "A:e,L:0" in names
        assert "A:0,L:e" not in names  # nothing activates L alone from here
        assert "A:e,L:e" in names

    def test_declared_reactivation_and_self_loop(self):
        # reactivation from a mitigated phase and the active self-loop both
        # exist only when a rule spells them out
        hazards = (HazardPhaseModel(HazardId("A"), 1),)
        catalog = Catalog(
            hazards=hazards,
            endangerments=(
                EndangermentRule(name="f", activates=("A",), pr=0.2),
                EndangermentRule(
                    name="again",
                    activates=("A",),
                    pr=0.1,
                    from_phases=(Phase.mitigated(1),),
                ),
                EndangermentRule(
                    name="still",
                    activates=("A",),
                    pr=0.3,
                    from_phases=(Phase.active(),),
                ),
            ),
            mitigations=(
                MitigationRule(
                    name="m",
                    mitigates=(("A", Phase.mitigated(1)),),
                    pr=0.9,
                    cs=1,
                    guard=PhaseGuard.of({"A": (Phase.active(),)}),
                ),
            ),
        )
        model, _ = construct_rs(catalog)
        keys = {t.key() for t in model.transitions}
        assert ("A:0", "f", "A:e") in keys
        assert ("A:m1", "again", "A:e") in keys
        assert ("A:e", "still", "A:e") in keys  # declared self-loop

    def test_increments_only_grow(self, r2_catalog, r3_catalog):
        for catalog in (r2_catalog, r3_catalog):
            _, log = construct_rs(catalog)
            totals = [
                (r.states_total, r.transitions_total)
                for r in log.records
                if r.sweep != "prune"
            ]
            assert totals == sorted(totals)

    def test_subset_cap_limits_joint_rules(self, r2_catalog):
        catalog = replace(
            r2_catalog, options=replace(r2_catalog.options, max_subset_size=1)
        )
        model, _ = construct_rs(catalog)
        # the joint mishap and the joint handover need a two-hazard subset
        names = {s.name for s in model.states}
        assert "A:em,L:em" not in names
        assert "A:m1,L:m2" not in names


class TestCatalogValidation:
    def test_undeclared_hazard_named_in_error(self):
        catalog = Catalog(
            hazards=(HazardPhaseModel(HazardId("A"), 1),),
            endangerments=(
                EndangermentRule(name="f_X", activates=("X",), pr=0.1),
            ),
        )
        with pytest.raises(CatalogInvalid) as err:
            catalog.validate()
        assert "'X'" in str(err.value)

    def test_target_phase_bounds(self):
        catalog = Catalog(
            hazards=(HazardPhaseModel(HazardId("A"), 1),),
            mitigations=(
                MitigationRule(
                    name="m9",
                    mitigates=(("A", Phase.mitigated(9)),),
                    pr=0.5,
                    cs=1,
                ),
            ),
        )
        with pytest.raises(CatalogInvalid) as err:
            catalog.validate()
        assert "m9" in str(err.value)

    def test_guard_phase_bounds(self):
        catalog = Catalog(
            hazards=(HazardPhaseModel(HazardId("A"), 1),),
            endangerments=(
                EndangermentRule(
                    name="f_A",
                    activates=("A",),
                    pr=0.1,
                    guard=PhaseGuard.of({"A": (Phase.mitigated(5),)}),
                ),
            ),
        )
        with pytest.raises(CatalogInvalid):
            catalog.validate()

    def test_conflicting_action_declarations(self):
        hazards = (HazardPhaseModel(HazardId("A"), 2),)
        catalog = Catalog(
            hazards=hazards,
            mitigations=(
                MitigationRule(
                    name="m", mitigates=(("A", Phase.mitigated(1)),), pr=0.5, cs=1
                ),
                MitigationRule(
                    name="m", mitigates=(("A", Phase.mitigated(2)),), pr=0.5, cs=1
                ),
            ),
        )
        with pytest.raises(CatalogInvalid) as err:
            catalog.validate()
        assert "declared twice" in str(err.value)

    def test_probability_range(self):
        catalog = Catalog(
            hazards=(HazardPhaseModel(HazardId("A"), 1),),
            endangerments=(EndangermentRule(name="f", activates=("A",), pr=1.5),),
        )
        with pytest.raises(CatalogInvalid):
            catalog.validate()


class TestRandomCatalogs:
    def test_construction_properties(self):
        rng = Random(20_25)
        for _ in range(40):
            catalog = random_catalog(rng)
            model, log = construct_rs(catalog)
            bound = full_state_space_size(catalog.hazards)
            assert len(model.states) <= bound
            assert verify_complete(model, catalog)
            # endangerments strictly descend, mitigations strictly ascend
            for t in model.transitions:
                order = classify_by_order(t.source, t.target)
                if t.action.kind is ActionClass.MITIGATION:
                    assert order is OrderClass.MITIGATION
                else:
                    assert order is OrderClass.ENDANGERMENT
            # pruning soundness: everything reachable from the initial region
            reachable = set(model.initial)
            frontier = list(model.initial)
            adjacency = model.outgoing()
            while frontier:
                s = frontier.pop()
                for t in adjacency[s]:
                    if t.target not in reachable:
                        reachable.add(t.target)
                        frontier.append(t.target)
            assert reachable == set(model.states)

    def test_rebuild_is_identical(self):
        rng = Random(77)
        for _ in range(10):
            catalog = random_catalog(rng)
            assert construct_rs(catalog) == construct_rs(catalog)
