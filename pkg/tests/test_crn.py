"""Reaction-network data model: validation, propensities, composition, text format."""

import math

import pytest

from crnrx.crn import (
    ConfigError,
    ExternalSignalSchedule,
    InvariantViolation,
    Reaction,
    ReactionNetwork,
    Species,
    apply_reaction,
    falling_factorial,
    format_network,
    merge,
    parse_network,
    propensity,
)


class TestSpecies:
    def test_valid(self):
        s = Species("A", 3)
        assert s.name == "A" and s.initial_count == 3

    def test_default_count_zero(self):
        assert Species("A").initial_count == 0

    def test_rejects_empty_name(self):
        with pytest.raises(ConfigError):
            Species("")

    def test_rejects_negative_count(self):
        with pytest.raises(ConfigError):
            Species("A", -1)


class TestReaction:
    def test_multiset_from_iterable(self):
        rx = Reaction(reactants=["A", "A", "B"], products={"C": 1})
        assert rx.reactants == {"A": 2, "B": 1}

    def test_order_includes_catalysts(self):
        rx = Reaction(reactants={"A": 1}, products={"B": 1}, catalysts={"C": 2})
        assert rx.order() == {"A": 1, "C": 2}

    def test_delta_drops_catalysts_and_zeros(self):
        rx = Reaction(
            reactants={"A": 1, "B": 1}, products={"B": 1, "C": 2}, catalysts={"E": 1}
        )
        assert rx.delta() == {"A": -1, "C": 2}

    def test_rejects_bad_rate(self):
        with pytest.raises(ConfigError):
            Reaction(reactants={"A": 1}, rate_constant=-1.0)
        with pytest.raises(ConfigError):
            Reaction(reactants={"A": 1}, rate_constant=math.inf)

    def test_rejects_nonpositive_multiplicity(self):
        with pytest.raises(ConfigError):
            Reaction(reactants={"A": 0})


class TestSignalSchedule:
    def test_state_half_open(self):
        sig = ExternalSignalSchedule("ST", ((0.0, 1.0), (2.0, 3.0)))
        assert sig.state(0.0) and sig.state(0.999)
        assert not sig.state(1.0) and not sig.state(1.5)
        assert sig.state(2.0) and not sig.state(3.0)

    def test_flips_within(self):
        sig = ExternalSignalSchedule("ST", ((1.0, 2.0),))
        assert sig.flips_within(0.0, 3.0) == [(1.0, True), (2.0, False)]
        assert sig.flips_within(1.0, 1.5) == []

    def test_rejects_overlap(self):
        with pytest.raises(ConfigError):
            ExternalSignalSchedule("ST", ((0.0, 2.0), (1.0, 3.0)))

    def test_rejects_empty_interval(self):
        with pytest.raises(ConfigError):
            ExternalSignalSchedule("ST", ((1.0, 1.0),))


class TestNetworkValidation:
    def test_unknown_species_rejected(self):
        with pytest.raises(ConfigError):
            ReactionNetwork(
                (Species("A"),), (Reaction(reactants={"B": 1}),)
            )

    def test_duplicate_species_rejected(self):
        with pytest.raises(ConfigError):
            ReactionNetwork((Species("A"), Species("A")))

    def test_unknown_gate_rejected(self):
        with pytest.raises(ConfigError):
            ReactionNetwork(
                (Species("A"),),
                (Reaction(reactants={"A": 1}, gate="ST"),),
            )


class TestPropensity:
    def test_falling_factorial(self):
        assert falling_factorial(5, 2) == 20
        assert falling_factorial(1, 2) == 0
        assert falling_factorial(4, 0) == 1

    def test_mass_action_with_catalyst(self):
        rx = Reaction(reactants={"A": 2}, products={}, rate_constant=3.0,
                      catalysts={"C": 1})
        assert propensity(rx, {"A": 4, "C": 5}) == pytest.approx(3.0 * 12 * 5)

    def test_zero_when_understocked(self):
        rx = Reaction(reactants={"A": 2})
        assert propensity(rx, {"A": 1}) == 0.0

    def test_gate_forces_zero(self):
        sig = ExternalSignalSchedule("ST", ((1.0, 2.0),))
        rx = Reaction(reactants={"A": 1}, gate="ST", rate_constant=2.0)
        sigs = {"ST": sig}
        assert propensity(rx, {"A": 3}, t=0.5, signals=sigs) == 0.0
        assert propensity(rx, {"A": 3}, t=1.5, signals=sigs) == 6.0

    def test_gate_without_schedule_rejected(self):
        rx = Reaction(reactants={"A": 1}, gate="ST")
        with pytest.raises(ConfigError):
            propensity(rx, {"A": 1})


class TestApplyReaction:
    def test_applies_delta(self):
        rx = Reaction(reactants={"A": 1}, products={"B": 2})
        assert apply_reaction({"A": 2, "B": 0}, rx) == {"A": 1, "B": 2}

    def test_catalyst_must_be_present(self):
        rx = Reaction(reactants={"A": 1}, products={"B": 1}, catalysts={"C": 1})
        with pytest.raises(InvariantViolation):
            apply_reaction({"A": 1, "B": 0, "C": 0}, rx)

    def test_infeasible_firing_rejected(self):
        rx = Reaction(reactants={"A": 2})
        with pytest.raises(InvariantViolation):
            apply_reaction({"A": 1}, rx)


class TestMerge:
    def test_union_and_concatenation(self):
        n1 = ReactionNetwork((Species("A", 1),), (Reaction(reactants={"A": 1}),))
        n2 = ReactionNetwork(
            (Species("A", 1), Species("B", 2)), (Reaction(products={"B": 1}),)
        )
        m = merge([n1, n2])
        assert {s.name for s in m.species} == {"A", "B"}
        assert len(m.reactions) == 2
        assert m.initial_counts() == {"A": 1, "B": 2}

    def test_conflicting_counts_rejected(self):
        n1 = ReactionNetwork((Species("A", 1),))
        n2 = ReactionNetwork((Species("A", 2),))
        with pytest.raises(ConfigError):
            merge([n1, n2])

    def test_conflicting_signals_rejected(self):
        n1 = ReactionNetwork(signals=(ExternalSignalSchedule("ST", ((0, 1),)),))
        n2 = ReactionNetwork(signals=(ExternalSignalSchedule("ST", ((0, 2),)),))
        with pytest.raises(ConfigError):
            merge([n1, n2])

    def test_identical_signals_merge(self):
        sig = ExternalSignalSchedule("ST", ((0, 1),))
        m = merge([ReactionNetwork(signals=(sig,)), ReactionNetwork(signals=(sig,))])
        assert len(m.signals) == 1


class TestTextFormat:
    NETWORK = ReactionNetwork(
        (Species("A", 10), Species("B", 0), Species("H", 1)),
        (
            Reaction({"A": 1}, {"B": 1}, 2.5, name="convert"),
            Reaction({"H": 2}, {"H": 1}, 500.0),
            Reaction({}, {"A": 1}, 0.1, catalysts={"B": 1, "H": 2}, gate="ST"),
        ),
        (ExternalSignalSchedule("ST", ((0.0, 0.5), (15.0, 15.5))),),
    )

    def test_round_trip(self):
        text = format_network(self.NETWORK)
        back = parse_network(text)
        assert format_network(back) == text
        assert back.initial_counts() == self.NETWORK.initial_counts()
        assert len(back.reactions) == len(self.NETWORK.reactions)
        assert back.reactions[2].catalysts == {"B": 1, "H": 2}
        assert back.reactions[2].gate == "ST"
        assert back.signals[0].intervals == ((0.0, 0.5), (15.0, 15.5))

    def test_comments_and_blank_lines_ignored(self):
        net = parse_network("# header\n\nspecies A 1  # trailing\n")
        assert net.initial_counts() == {"A": 1}

    def test_zero_side(self):
        net = parse_network("species A 0\nreaction 0 -> A @ 1.0\n")
        assert net.reactions[0].reactants == {}
        assert net.reactions[0].products == {"A": 1}

    def test_multiplicity_terms(self):
        net = parse_network("species A 5\nspecies B 0\nreaction 2 A -> 3 B @ 1\n")
        assert net.reactions[0].reactants == {"A": 2}
        assert net.reactions[0].products == {"B": 3}

    def test_bad_lines_rejected(self):
        for text in (
            "species A\n",
            "species A x\n",
            "signal\n",
            "signal ST 1:0\n",
            "reaction A -> B\n",
            "reaction A -> B @ x\n",
            "reaction A -> B @ 1 foo=bar\n",
            "bogus A 1\n",
        ):
            with pytest.raises(ConfigError):
                parse_network(text)
