"""Receptor channel: binding laws, likelihoods, optimal thresholds, frame plans."""

import warnings

import numpy as np
import pytest

from crnrx.channel import (
    ConstantLaw,
    LognormalLaw,
    SymbolFrame,
    binding_probability,
    draw_bound_receptors,
    draw_received_concentration,
    draw_symbols_and_receptors,
    get_scenario,
    likelihood,
    lognormal_moments,
    lognormal_params,
    make_frame_plan,
    map_ber,
    map_threshold,
    pilot_sequence,
    posterior,
    threshold_ber,
)
from crnrx.crn import ConfigError


class TestLaws:
    def test_lognormal_params_round_trip(self):
        mu, sigma2 = lognormal_params(1e20, 2.5e39)
        mean, var = lognormal_moments(mu, sigma2)
        assert mean == pytest.approx(1e20, rel=1e-12)
        assert var == pytest.approx(2.5e39, rel=1e-12)

    def test_constant_law_draw(self):
        law = ConstantLaw(3.0)
        assert law.mean == 3.0
        np.testing.assert_array_equal(
            law.draw(np.random.default_rng(0), 4), np.full(4, 3.0)
        )

    def test_lognormal_law_moments(self):
        law = LognormalLaw(2.0, 5.0)
        draws = law.draw(np.random.default_rng(1), 400_000)
        assert draws.mean() == pytest.approx(2.0, rel=0.02)
        assert draws.var() == pytest.approx(5.0, rel=0.05)

    def test_scaled(self):
        law = LognormalLaw(2.0, 5.0).scaled(5.0)
        assert law.mean == 10.0
        assert law.variance == 125.0

    def test_negative_moments_rejected(self):
        with pytest.raises(ConfigError):
            ConstantLaw(-1.0)
        with pytest.raises(ConfigError):
            LognormalLaw(1.0, -1.0)


class TestScenarios:
    def test_lookup_case_insensitive(self):
        assert get_scenario("s1").name == "S1"
        assert get_scenario("S3").name == "S3"

    def test_unknown_rejected(self):
        with pytest.raises(ConfigError):
            get_scenario("S9")

    def test_binding_probabilities(self):
        s1 = get_scenario("S1")
        k_d = s1.dissociation_constant
        assert binding_probability(s1.noise_law.mean, k_d) == pytest.approx(
            0.130435, abs=1e-6
        )
        assert binding_probability(
            s1.noise_law.mean + s1.delta_law.mean, k_d
        ) == pytest.approx(0.534884, abs=1e-6)

    def test_noise_scaling(self):
        s = get_scenario("S1").with_noise_scaled(5.0)
        assert s.name == "S1xN5"
        assert s.noise_law.mean == pytest.approx(5 * get_scenario("S1").noise_law.mean)
        k_d = s.dissociation_constant
        assert binding_probability(s.noise_law.mean, k_d) == pytest.approx(
            0.428571, abs=1e-6
        )
        assert binding_probability(
            s.noise_law.mean + s.delta_law.mean, k_d
        ) == pytest.approx(0.636364, abs=1e-6)


class TestOptimalThresholds:
    # frozen golden values for the three standard scenarios
    GOLDEN = {
        "S1": (10, 0.0057798439790638775),
        "S2": (10, 0.015804099714368445),
        "S3": (9, 0.04179086633089288),
    }

    def test_thresholds_and_bers(self):
        for name, (nu, ber) in self.GOLDEN.items():
            s = get_scenario(name)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                assert map_threshold(s) == nu
                assert map_ber(s) == pytest.approx(ber, rel=1e-9)

    def test_noisy_s1_threshold(self):
        s = get_scenario("S1").with_noise_scaled(5.0)
        assert map_threshold(s) == 17
        assert map_ber(s) == pytest.approx(0.12631588319101478, rel=1e-9)

    def test_zero_noise_degenerate(self):
        s = get_scenario("S1").with_noise_scaled(0.0)
        pmf0 = likelihood(s, 0)
        assert pmf0[0] == 1.0 and pmf0[1:].sum() == 0.0
        assert likelihood(s, 1)[0] == pytest.approx(9.313225746154804e-10)
        assert map_threshold(s) == 1
        assert map_ber(s) == pytest.approx(4.656612873077402e-10, rel=1e-12)

    def test_monotonicity_warning_only_for_s2(self):
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            map_threshold(get_scenario("S1"))
            map_threshold(get_scenario("S3"))
        assert not caught
        with pytest.warns(UserWarning, match="not monotone"):
            map_threshold(get_scenario("S2"))

    def test_map_is_best_threshold(self):
        for name in ("S1", "S3"):
            s = get_scenario(name)
            best = min(threshold_ber(s, nu) for nu in range(s.n_r + 2))
            assert map_ber(s) == pytest.approx(best, rel=1e-12)

    def test_posterior_respects_threshold(self):
        s = get_scenario("S1")
        post = posterior(s)
        nu = map_threshold(s)
        assert post[nu - 1] < 0.5 <= post[nu]


class TestLikelihoodOracle:
    def test_s1_is_exact_binomial(self):
        from scipy.stats import binom

        s = get_scenario("S1")
        k_d = s.dissociation_constant
        p0 = s.noise_law.mean / (s.noise_law.mean + k_d)
        np.testing.assert_allclose(
            likelihood(s, 0), binom.pmf(np.arange(31), 30, p0), atol=1e-14
        )

    def test_s2_matches_monte_carlo(self):
        s = get_scenario("S2")
        rng = np.random.default_rng(2024)
        n = 400_000
        for x in (0, 1):
            c = draw_received_concentration(s, x, rng, size=n)
            counts = draw_bound_receptors(s, c, rng)
            hist = np.bincount(counts, minlength=31) / n
            np.testing.assert_allclose(likelihood(s, x), hist, atol=4e-3)

    def test_pmfs_normalized(self):
        for name in ("S1", "S2", "S3"):
            s = get_scenario(name)
            for x in (0, 1):
                assert likelihood(s, x).sum() == pytest.approx(1.0, abs=1e-12)


class TestDraws:
    def test_two_stage_scalar(self):
        s = get_scenario("S1")
        rng = np.random.default_rng(5)
        c = draw_received_concentration(s, 1, rng)
        assert c == s.delta_law.mean + s.noise_law.mean
        n_rb = draw_bound_receptors(s, c, rng)
        assert isinstance(n_rb, int) and 0 <= n_rb <= s.n_r

    def test_negative_concentration_rejected(self):
        s = get_scenario("S1")
        with pytest.raises(ConfigError):
            draw_bound_receptors(s, -1.0, np.random.default_rng(0))

    def test_vectorized_matches_marginals(self):
        s = get_scenario("S1")
        x, y = draw_symbols_and_receptors(s, 200_000, np.random.default_rng(3))
        assert y.shape == (200_000, 30)
        assert x.mean() == pytest.approx(0.5, abs=0.01)
        n_rb = y.sum(axis=1)
        assert n_rb[x == 0].mean() == pytest.approx(30 * 0.130435, rel=0.01)
        assert n_rb[x == 1].mean() == pytest.approx(30 * 0.534884, rel=0.01)

    def test_fixed_symbols_respected(self):
        s = get_scenario("S1")
        bits = np.array([0, 1, 1, 0], dtype=np.int8)
        x, y = draw_symbols_and_receptors(s, 4, np.random.default_rng(0), symbols=bits)
        np.testing.assert_array_equal(x, bits)


class TestFramePlan:
    def test_pilot_sequence(self):
        np.testing.assert_array_equal(pilot_sequence(5), [0, 1, 0, 1, 0])

    def test_frame_layout(self):
        plan = make_frame_plan(3, 4, 6, np.random.default_rng(0))
        assert len(plan) == 30
        for f in range(3):
            base = f * 10
            assert plan.kinds[base : base + 4] == ("pilot",) * 4
            assert plan.symbols[base : base + 4] == (0, 1, 0, 1)
            assert plan.kinds[base + 4 : base + 10] == ("data",) * 6

    def test_pilot_pattern_enforced(self):
        with pytest.raises(ConfigError):
            SymbolFrame((1, 0), ("pilot", "pilot"))
        with pytest.raises(ConfigError):
            SymbolFrame((0, 1, 1), ("pilot", "pilot", "pilot"))
        # the run counter resets after data
        SymbolFrame((0, 1, 1, 0, 1), ("pilot", "pilot", "data", "pilot", "pilot"))

    def test_bad_inputs_rejected(self):
        with pytest.raises(ConfigError):
            SymbolFrame((0, 2), ("data", "data"))
        with pytest.raises(ConfigError):
            SymbolFrame((0,), ("noise",))
        with pytest.raises(ConfigError):
            SymbolFrame((0, 1), ("data",))
