"""Weight-count birth-death chain: transition rows, stationary law, transients."""

import warnings

import numpy as np
import pytest

from crnrx.channel import get_scenario, map_ber
from crnrx.crn import ConfigError, NumericalError
from crnrx.markov import (
    build_transition_matrix,
    expected_ber,
    expected_weight_count,
    piecewise_transient,
    power_iteration_steady_state,
    steady_state,
    transient_curves,
    transient_distribution,
)


class TestTransitionMatrix:
    def test_rows_sum_to_one(self):
        for name in ("S1", "S2", "S3"):
            m = build_transition_matrix(get_scenario(name), n_W_total=25)
            np.testing.assert_allclose(m.P.sum(axis=1), 1.0, atol=1e-12)

    def test_tridiagonal_with_closed_boundaries(self):
        m = build_transition_matrix(get_scenario("S1"), n_W_total=25)
        assert m.down[0] == 0.0 and m.up[25] == 0.0
        band = np.tril(np.triu(m.P, -1), 1)
        np.testing.assert_array_equal(m.P, band)

    def test_rows_match_monte_carlo(self):
        # oracle: each row is the empirical law of one update step from state n
        s = get_scenario("S1")
        m = build_transition_matrix(s, n_W_total=25)
        rng = np.random.default_rng(77)
        n_draws = 1_000_000
        x = (rng.random(n_draws) < 0.5).astype(np.int64)
        c = np.where(
            x == 1,
            s.delta_law.mean + s.noise_law.mean,
            s.noise_law.mean,
        )
        p = c / (c + s.dissociation_constant)
        n_rb = rng.binomial(s.n_r, p)
        for state in (0, 1, 9, 10, 17, 25):
            decide_one = n_rb >= state
            next_state = state + ((x == 0) & decide_one) - (
                (x == 1) & ~decide_one
            )
            next_state = np.clip(next_state, 0, 25)
            emp = np.bincount(next_state, minlength=26) / n_draws
            assert float(np.max(np.abs(emp - m.P[state]))) < 1e-3

    def test_low_ceiling_warns(self):
        with pytest.warns(UserWarning, match="below the optimal threshold"):
            build_transition_matrix(get_scenario("S1"), n_W_total=5)

    def test_bad_arguments_rejected(self):
        s = get_scenario("S1")
        with pytest.raises(ConfigError):
            build_transition_matrix(s, n_W_total=0)
        with pytest.raises(ConfigError):
            build_transition_matrix(s, n_W_total=10, n_W_init=11)


class TestSteadyState:
    def test_fixed_point_residual(self):
        for name in ("S1", "S2", "S3"):
            m = build_transition_matrix(get_scenario(name), n_W_total=25)
            pi = steady_state(m)
            assert float(np.max(np.abs(pi @ m.P - pi))) < 1e-10

    def test_matches_power_iteration(self):
        m = build_transition_matrix(get_scenario("S1"), n_W_total=25)
        np.testing.assert_allclose(
            steady_state(m), power_iteration_steady_state(m), atol=1e-10
        )

    def test_s1_stationary_goldens(self):
        m = build_transition_matrix(get_scenario("S1"), n_W_total=25)
        pi = steady_state(m)
        assert expected_weight_count(m, pi) == pytest.approx(
            9.680956214454493, rel=1e-12
        )
        assert expected_ber(m, pi) == pytest.approx(
            0.0071298561049202985, rel=1e-12
        )

    def test_zero_noise_point_mass_at_optimum(self):
        s = get_scenario("S1").with_noise_scaled(0.0)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            m = build_transition_matrix(s, n_W_total=25)
            pi = steady_state(m)
        assert pi[1] == pytest.approx(1.0, abs=1e-9)
        # the leak mass at state 0 (error 1/2) doubles the stationary error
        assert expected_ber(m, pi) == pytest.approx(2 * map_ber(s), rel=1e-6)


class TestTransients:
    def test_step_zero_is_initial_state(self):
        m = build_transition_matrix(get_scenario("S1"), n_W_total=25, n_W_init=3)
        bers, weights = transient_curves(m, 5)
        assert weights[0] == 3.0
        assert bers[0] == pytest.approx(m.error_probability[3])

    def test_matches_repeated_multiplication(self):
        m = build_transition_matrix(get_scenario("S1"), n_W_total=25)
        pi = m.pi0.copy()
        for _ in range(40):
            pi = pi @ m.P
        np.testing.assert_allclose(transient_distribution(m, 40), pi, atol=1e-14)

    def test_converges_to_steady_state(self):
        m = build_transition_matrix(get_scenario("S1"), n_W_total=25)
        pi_inf = steady_state(m)
        bers, weights = transient_curves(m, 3000)
        assert weights[-1] == pytest.approx(expected_weight_count(m, pi_inf), abs=1e-6)
        assert bers[-1] == pytest.approx(expected_ber(m, pi_inf), abs=1e-9)

    def test_piecewise_composition(self):
        # chaining (A, k) then (A, j) equals one transient of k + j steps
        m = build_transition_matrix(get_scenario("S1"), n_W_total=25)
        b1, w1, pi1 = piecewise_transient([(m, 10), (m, 15)])
        b2, w2 = transient_curves(m, 25)
        np.testing.assert_allclose(b1, b2, atol=1e-14)
        np.testing.assert_allclose(w1, w2, atol=1e-14)
        np.testing.assert_allclose(pi1, transient_distribution(m, 25), atol=1e-14)

    def test_piecewise_regime_switch_checkpoints(self):
        # drift up under 5x noise, recovery after it ends
        clean = build_transition_matrix(get_scenario("S1"), n_W_total=25)
        noisy = build_transition_matrix(
            get_scenario("S1").with_noise_scaled(5.0), n_W_total=25
        )
        _, weights, _ = piecewise_transient([(clean, 250), (noisy, 250), (clean, 250)])
        checkpoints = weights[::50]
        expected = [
            0.0, 7.650987, 8.559088, 8.978841, 9.222231, 9.375079,
            16.366903, 16.508938, 16.511722, 16.511777, 16.511778,
            12.138749, 11.118960, 10.606840, 10.297575, 10.097473,
        ]
        np.testing.assert_allclose(checkpoints, expected, atol=1e-5)

    def test_piecewise_needs_shared_size(self):
        m1 = build_transition_matrix(get_scenario("S1"), n_W_total=25)
        m2 = build_transition_matrix(get_scenario("S1"), n_W_total=20)
        with pytest.raises(ConfigError):
            piecewise_transient([(m1, 5), (m2, 5)])

    def test_piecewise_rejects_empty(self):
        with pytest.raises(ConfigError):
            piecewise_transient([])


class TestExpectations:
    def test_point_mass_ber_equals_row_error(self):
        m = build_transition_matrix(get_scenario("S1"), n_W_total=25)
        for n in range(26):
            pi = np.zeros(26)
            pi[n] = 1.0
            assert abs(expected_ber(m, pi) - m.error_probability[n]) < 1e-15

    def test_point_mass_at_optimum_equals_map(self):
        # the chain's per-state error at the optimal threshold is the MAP BER
        for name in ("S1", "S2", "S3"):
            s = get_scenario(name)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                m = build_transition_matrix(s, n_W_total=25)
                nu = __import__("crnrx.channel", fromlist=["map_threshold"]).map_threshold(s)
                pi = np.zeros(26)
                pi[nu] = 1.0
                assert abs(expected_ber(m, pi) - map_ber(s)) < 1e-12

    def test_bad_pi_rejected(self):
        m = build_transition_matrix(get_scenario("S1"), n_W_total=25)
        with pytest.raises(ConfigError):
            expected_ber(m, np.zeros(5))
