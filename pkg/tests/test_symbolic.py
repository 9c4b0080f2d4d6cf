"""Tests for the subshift base: words, measures, Ruelle operator, mixing."""

import itertools

import numpy as np
import pytest

from skewfiber.symbolic import (
    BaseWeights,
    CylinderFunction,
    TransitionMatrix,
    base_correlation,
    base_gap_estimate,
    cylinder_mass,
    cylinder_mass_vector,
    enumerate_words,
    jacobian_weight,
    ruelle_apply,
    word_distance,
    word_tail_diameter,
)

FULL2 = TransitionMatrix([[1, 1], [1, 1]])
GOLDEN = TransitionMatrix([[1, 1], [1, 0]])
FAIR = BaseWeights.bernoulli([0.5, 0.5])
MARKOV_P = [[0.9, 0.1], [0.5, 0.5]]
MARKOV = BaseWeights.markov(MARKOV_P, stationary=[5 / 6, 1 / 6])


def brute_force_words(entries, depth):
    """Exhaustive enumeration oracle: filter all symbol tuples by admissibility."""
    n = len(entries)
    out = []
    for cand in itertools.product(range(n), repeat=depth):
        if all(entries[a][b] for a, b in zip(cand[:-1], cand[1:])):
            out.append(cand)
    return out


class TestTransitionMatrix:
    def test_rejects_periodic_matrix(self):
        with pytest.raises(ValueError, match="aperiodic"):
            TransitionMatrix([[0, 1], [1, 0]])

    def test_rejects_empty_row(self):
        with pytest.raises(ValueError, match="row and column"):
            TransitionMatrix([[1, 1], [0, 0]])

    def test_rejects_non_binary(self):
        with pytest.raises(ValueError):
            TransitionMatrix([[1, 2], [1, 1]])

    def test_smallest_tail_respects_admissibility(self):
        assert GOLDEN.smallest_tail(1, 3) == (0, 0, 0)


class TestEnumerateWords:
    def test_full_shift_depth_two(self):
        assert enumerate_words(FULL2, 2) == [(0, 0), (0, 1), (1, 0), (1, 1)]

    def test_golden_mean_depth_two(self):
        # A[1][1] = 0 excludes the word 11
        assert enumerate_words(GOLDEN, 2) == [(0, 0), (0, 1), (1, 0)]

    def test_golden_mean_depth_three_count(self):
        words = enumerate_words(GOLDEN, 3)
        assert words == brute_force_words([[1, 1], [1, 0]], 3)
        assert len(words) == 5

    def test_depth_zero_is_empty_word(self):
        assert enumerate_words(GOLDEN, 0) == [()]

    @pytest.mark.parametrize("matrix", [FULL2, GOLDEN])
    @pytest.mark.parametrize("depth", range(1, 9))
    def test_count_matches_matrix_power(self, matrix, depth):
        power = np.linalg.matrix_power(matrix.entries, depth - 1)
        assert matrix.word_count(depth) == power.sum()


class TestWordDistance:
    def test_identical_words(self):
        assert word_distance((0, 1, 0), (0, 1, 0), 0.5) == 0.0

    def test_first_index_disagreement(self):
        assert word_distance((0, 1), (1, 1), 0.5) == 1.0

    def test_all_indices_disagree(self):
        assert word_distance((0, 0, 0), (1, 1, 1), 0.5) == pytest.approx(1.75)

    def test_unequal_depths_rejected(self):
        with pytest.raises(ValueError):
            word_distance((0,), (0, 1), 0.5)

    def test_tail_diameter_values(self):
        assert word_tail_diameter(1, 0.5) == pytest.approx(1.0)
        assert word_tail_diameter(3, 0.5) == pytest.approx(0.25)
        assert word_tail_diameter(2, 1 / 3) == pytest.approx(1 / 6)


class TestCylinderMass:
    def test_bernoulli_product(self):
        assert cylinder_mass(FAIR, (0, 1, 1)) == pytest.approx(0.125)

    def test_markov_two_factor(self):
        # pi_0 * P_{01} = 5/6 * 0.1
        assert cylinder_mass(MARKOV, (0, 1)) == pytest.approx(5 / 6 * 0.1)

    def test_empty_word(self):
        assert cylinder_mass(MARKOV, ()) == 1.0

    def test_inadmissible_markov_word_rejected(self):
        weights = BaseWeights.markov([[0.5, 0.5], [1.0, 0.0]])
        with pytest.raises(ValueError, match="not admissible"):
            cylinder_mass(weights, (1, 1))

    @pytest.mark.parametrize("weights,matrix", [(FAIR, FULL2), (MARKOV, FULL2)])
    @pytest.mark.parametrize("depth", range(1, 9))
    def test_masses_sum_to_one(self, weights, matrix, depth):
        assert cylinder_mass_vector(weights, matrix, depth).sum() == pytest.approx(1.0, abs=1e-12)


class TestJacobianWeight:
    def test_bernoulli_is_symbol_weight(self):
        w = BaseWeights.bernoulli([0.25, 0.75])
        for word in FULL2.words(3):
            assert jacobian_weight(w, 0, word) == 0.25

    def test_markov_hand_value(self):
        # (pi_1 P_{10}) / pi_0 = (1/6 * 0.5) / (5/6)
        assert jacobian_weight(MARKOV, 1, (0, 1)) == pytest.approx(0.1)

    @pytest.mark.parametrize("weights", [FAIR, MARKOV])
    def test_row_normalization(self, weights):
        for word in FULL2.words(4):
            total = sum(jacobian_weight(weights, i, word) for i in range(2))
            assert total == pytest.approx(1.0, abs=1e-12)

    def test_inadmissible_transition_gives_zero(self):
        weights = BaseWeights.markov([[0.5, 0.5], [1.0, 0.0]])
        assert jacobian_weight(weights, 1, (1, 0)) == 0.0


class TestRuelleApply:
    def test_constant_one_is_fixed(self):
        f = CylinderFunction.constant(FULL2, 3, 1.0)
        out = ruelle_apply(f, MARKOV)
        assert np.allclose(out.values, 1.0, atol=1e-14)

    def test_indicator_of_first_symbol(self):
        f = CylinderFunction(FULL2, 1, [1.0, 0.0])
        out = ruelle_apply(f, FAIR)
        assert np.allclose(out.values, 0.5)

    @pytest.mark.parametrize("depth", [2, 3, 4])
    def test_zero_mean_collapse_for_bernoulli(self, depth):
        rng = np.random.default_rng(depth)
        f = CylinderFunction(FULL2, depth, rng.standard_normal(2**depth))
        f = f.shifted(-f.mean(FAIR))
        for _ in range(depth):
            f = ruelle_apply(f, FAIR)
        assert np.abs(f.values).max() <= 1e-12

    def test_mean_preserved(self):
        rng = np.random.default_rng(1)
        for weights in (FAIR, MARKOV):
            f = CylinderFunction(FULL2, 3, rng.standard_normal(8))
            out = ruelle_apply(f, weights)
            assert out.mean(weights) == pytest.approx(f.mean(weights), abs=1e-10)

    def test_result_constant_on_shorter_cylinders(self):
        rng = np.random.default_rng(2)
        f = CylinderFunction(FULL2, 3, rng.standard_normal(8))
        out = ruelle_apply(f, MARKOV)
        idx = FULL2.word_index(3)
        for w in FULL2.words(2):
            vals = [out.values[idx[w + (j,)]] for j in range(2)]
            assert vals[0] == pytest.approx(vals[1], abs=1e-14)


class TestBaseGapEstimate:
    def test_bernoulli_collapses_to_rate_zero(self):
        rate, _ = base_gap_estimate(FAIR, FULL2, 0.5, depth=3, iters=8)
        assert rate == 0.0

    def test_markov_rate_matches_second_eigenvalue(self):
        # oracle: eigenvalues of the 2x2 stochastic matrix are 1 and 0.4
        lam2 = sorted(np.abs(np.linalg.eigvals(np.array(MARKOV_P))))[0]
        assert lam2 == pytest.approx(0.4, abs=1e-12)
        rate, constant = base_gap_estimate(MARKOV, FULL2, 0.5, depth=3, iters=12)
        assert rate == pytest.approx(0.4, abs=0.05)
        assert constant >= 0.0

    def test_short_run_constant_nonnegative(self):
        _, constant = base_gap_estimate(MARKOV, FULL2, 0.5, depth=2, iters=1)
        assert constant >= 0.0


class TestBaseCorrelation:
    def test_constant_observable_uncorrelated(self):
        psi = CylinderFunction.constant(FULL2, 2, 3.0)
        s = CylinderFunction(FULL2, 2, [1.0, -1.0, 0.5, 2.0])
        assert base_correlation(MARKOV, FULL2, psi, s, 4) == pytest.approx(0.0, abs=1e-14)

    @pytest.mark.parametrize("lag", [2, 3, 5])
    def test_bernoulli_independence_beyond_depth(self, lag):
        rng = np.random.default_rng(lag)
        psi = CylinderFunction(FULL2, 2, rng.standard_normal(4))
        s = CylinderFunction(FULL2, 2, rng.standard_normal(4))
        assert abs(base_correlation(FAIR, FULL2, psi, s, lag)) <= 1e-12

    def test_markov_lag_one_hand_value(self):
        # cov = pi_0 P_00 - pi_0^2 = 5/6 * 0.9 - (5/6)^2 = 1/18
        ind = CylinderFunction(FULL2, 1, [1.0, 0.0])
        got = base_correlation(MARKOV, FULL2, ind, ind, 1)
        assert got == pytest.approx(1 / 18, abs=1e-12)

    def test_markov_decay_rate_bounded_by_gap(self):
        rate, _ = base_gap_estimate(MARKOV, FULL2, 0.5, depth=3, iters=12)
        ind = CylinderFunction(FULL2, 1, [1.0, 0.0])
        corr = [base_correlation(MARKOV, FULL2, ind, ind, n) for n in range(1, 13)]
        lags = np.arange(1, 13)
        slope, _ = np.polyfit(lags, np.log(np.abs(corr)), 1)
        assert np.exp(slope) <= rate + 0.05


class TestCylinderFunctionNorm:
    def test_constant_has_zero_lipschitz(self):
        f = CylinderFunction.constant(FULL2, 3, 2.5)
        assert f.lipschitz(0.5) == 0.0
        assert f.norm_theta(0.5) == 2.5

    def test_two_word_lipschitz(self):
        f = CylinderFunction(FULL2, 1, [0.0, 3.0])
        assert f.lipschitz(0.5) == pytest.approx(3.0)

    def test_lipschitz_uses_closest_pair(self):
        # words differing only at index 1 sit at distance theta
        f = CylinderFunction(FULL2, 2, [0.0, 1.0, 0.0, 0.0])
        assert f.lipschitz(0.5) == pytest.approx(2.0)
