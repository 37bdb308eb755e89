from __future__ import annotations

from dataclasses import replace
from random import Random

import pytest

from riskstruct import (
    DELTA_M,
    Band,
    BandThresholds,
    Region,
    Severity,
    Transition,
    UnknownState,
    assign_regions,
    is_mishap,
    mishap_reach_probability,
    reach,
    risk_priority,
)

from helpers import (
    brute_force_max_path_product,
    brute_force_reach,
    random_structure,
)


class TestReach:
    def test_mishap_reaches_only_itself(self, r2_model):
        mishap = r2_model.state_named("A:em,L:em")
        assert reach(r2_model, mishap) == {mishap}

    def test_initial_reaches_everything_in_reduced_model(self, r2_reduced):
        start = r2_reduced.state_named("A:0,L:0")
        closure = reach(r2_reduced, start)
        assert closure == r2_reduced.states
        assert closure == brute_force_reach(r2_reduced, start)

    def test_mitigation_closure_from_active_state(self, r2_reduced):
        start = r2_reduced.state_named("A:e,L:0")
        closure = reach(r2_reduced, start, DELTA_M)
        labels = {r2_reduced.label(s) for s in closure}
        assert labels == {"A:e,L:0", "A:m1,L:0", "A:m2,L:0|A:m3,L:0"}
        assert closure == brute_force_reach(r2_reduced, start, DELTA_M)

    def test_unknown_state(self, r2_model):
        from riskstruct import all_inactive, HazardPhaseModel, HazardId

        stray = all_inactive((HazardPhaseModel(HazardId("Z"), 1),))
        with pytest.raises(UnknownState):
            reach(r2_model, stray)


class TestRegions:
    def test_default_policy_examples(self, r2_model):
        regions = assign_regions(r2_model, "no_active")
        assert regions[r2_model.state_named("A:0,L:0")] is Region.SAFE
        assert regions[r2_model.state_named("A:e,L:0")] is Region.HAZARDOUS
        assert regions[r2_model.state_named("A:m2,L:0")] is Region.SAFE
        assert regions[r2_model.state_named("A:em,L:em")] is Region.MISHAP

    def test_region_matches_mishap_predicate(self, r2_model):
        regions = assign_regions(r2_model)
        for s in r2_model.states:
            assert (regions[s] is Region.MISHAP) == is_mishap(s)

    def test_handover_policy_partition(self, r2_model):
        regions = assign_regions(r2_model, "handover")
        safe = {
            r2_model.label(s) for s, r in regions.items() if r is Region.SAFE
        }
        assert safe == {"A:0,L:0", "A:m2,L:0", "A:m3,L:0", "A:m1,L:m2"}

    def test_custom_policy_callable(self, r2_model):
        regions = assign_regions(r2_model, lambda s, m: False)
        non_mishap = [s for s in r2_model.states if not is_mishap(s)]
        assert all(regions[s] is Region.HAZARDOUS for s in non_mishap)


class TestBandThresholds:
    def test_edges(self):
        th = BandThresholds()
        assert th.band(0.0) is Band.LOW
        assert th.band(0.009999) is Band.LOW
        assert th.band(0.01) is Band.MEDIUM
        assert th.band(0.09999) is Band.MEDIUM
        assert th.band(0.1) is Band.HIGH
        assert th.band(1.0) is Band.HIGH

    def test_validation(self):
        with pytest.raises(ValueError):
            BandThresholds(l_below=0.0)
        with pytest.raises(ValueError):
            BandThresholds(l_below=0.5, h_at_least=0.2)


class TestMishapReachProbability:
    def test_target_state_itself(self, r2_model):
        mishap = r2_model.state_named("A:em,L:em")
        assert mishap_reach_probability(r2_model, mishap) == 1.0

    def test_unreachable_targets(self, r2_model):
        a2 = r2_model.state_named("A:m2,L:0")
        assert mishap_reach_probability(r2_model, a2) == 0.0

    def test_initial_state_value(self, r2_model):
        # two best routes, both .01 * .02 * .5
        s0 = r2_model.state_named("A:0,L:0")
        got = mishap_reach_probability(r2_model, s0)
        oracle = brute_force_max_path_product(
            r2_model, s0, r2_model.mishap_states()
        )
        assert got == pytest.approx(1.0e-4, abs=1e-12)
        assert got == pytest.approx(oracle, abs=1e-12)

    def test_oracle_equivalence_on_random_structures(self):
        rng = Random(101)
        for _ in range(30):
            model = random_structure(rng)
            targets = model.mishap_states()
            for s in model.sorted_states():
                got = mishap_reach_probability(model, s, targets)
                expected = brute_force_max_path_product(model, s, targets)
                assert got == pytest.approx(expected, abs=1e-12)

    def test_adding_a_transition_never_decreases(self, r2_model):
        base = {
            s: mishap_reach_probability(r2_model, s) for s in r2_model.states
        }
        # wire the dead-end state into the hazardous core: A:m1,L:e --> A:e,L:e
        a1l = r2_model.state_named("A:m1,L:e")
        al = r2_model.state_named("A:e,L:e")
        action = r2_model.action_named("f_A")
        extra = Transition(a1l, action, al, pr=0.3)
        bigger = replace(
            r2_model, transitions=r2_model.transitions + (extra,)
        )
        for s in bigger.states:
            assert mishap_reach_probability(bigger, s) >= base[s] - 1e-15

    def test_rejects_non_mishap_targets(self, r2_model):
        s0 = r2_model.state_named("A:0,L:0")
        with pytest.raises(Exception):
            mishap_reach_probability(r2_model, s0, targets={s0})


class TestRiskPriority:
    def test_handover_states_are_marginal(self, r2_model):
        for name in ("A:m2,L:0", "A:m3,L:0"):
            s = r2_model.state_named(name)
            assert risk_priority(r2_model, s) is Severity.MARGINAL

    def test_mishap_state_keeps_its_severity(self, r2_model):
        mishap = r2_model.state_named("A:em,L:em")
        assert risk_priority(r2_model, mishap) is Severity.FATAL

    def test_near_mishap_state(self, r2_model):
        al = r2_model.state_named("A:e,L:e")
        # probability 0.5 sits in the high band; high scaling is the identity
        assert risk_priority(r2_model, al) is Severity.FATAL

    def test_marginal_when_no_mishap_reachable(self, r2_model):
        for name in ("A:m1,L:0", "A:m1,L:e", "A:e,L:m1", "A:0,L:m1", "A:m1,L:m2"):
            s = r2_model.state_named(name)
            assert mishap_reach_probability(r2_model, s) == 0.0
            assert risk_priority(r2_model, s) is Severity.MARGINAL

    def test_band_scaling_on_initial_chain(self, r2_model):
        # probabilities 1e-4 (low), .01 (medium), .005 (low) against a fatal mishap
        s0 = r2_model.state_named("A:0,L:0")
        a = r2_model.state_named("A:e,L:0")
        l = r2_model.state_named("A:0,L:e")
        assert risk_priority(r2_model, s0) is Severity.MARGINAL
        assert risk_priority(r2_model, a) is Severity.CRITICAL
        assert risk_priority(r2_model, l) is Severity.MARGINAL

    def test_threshold_override(self, r2_model):
        a = r2_model.state_named("A:e,L:0")
        tight = BandThresholds(l_below=1e-6, h_at_least=1e-3)
        assert risk_priority(r2_model, a, thresholds=tight) is Severity.FATAL
