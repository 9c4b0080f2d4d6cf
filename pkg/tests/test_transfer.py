"""Tests for disintegrations, the transfer operator, and the fixed point."""

import numpy as np
import pytest

from conftest import random_disintegration, random_vanishing_disintegration
from skewfiber.demos import cantor_demo, coupled_demo, markov_demo
from skewfiber.measures import AtomicMeasure, wk_distance
from skewfiber.symbolic import ruelle_apply
from skewfiber.transfer import (
    Disintegration,
    change_between,
    combine_disintegrations,
    equilibrium_decay,
    fixed_point,
    hutchinson_reference,
    lip_constant,
    marginal_density,
    norm_inf,
    norm_s_inf,
    quantize_disintegration,
    transfer_apply,
    verify_ly,
    word_sum_iterate,
)

CANTOR = cantor_demo()
DIRAC0 = AtomicMeasure.dirac(0.0)


def product_dirac(sys, depth, x=0.0):
    return Disintegration.product(sys.matrix, depth, AtomicMeasure.dirac(x))


class TestNorms:
    def test_product_point_mass_has_unit_norm(self):
        assert norm_inf(product_dirac(CANTOR, 3)) == pytest.approx(1.0, abs=1e-12)

    def test_zero_disintegration(self):
        dis = Disintegration.product(CANTOR.matrix, 2, AtomicMeasure([], []))
        assert norm_inf(dis) == 0.0

    def test_norm_homogeneity(self):
        rng = np.random.default_rng(0)
        dis = random_disintegration(CANTOR.matrix, 3, rng)
        assert norm_inf(dis.scaled(2.0)) == pytest.approx(2.0 * norm_inf(dis), rel=1e-12)

    def test_marginal_density_of_product(self):
        phi = marginal_density(product_dirac(CANTOR, 3))
        assert np.allclose(phi.values, 1.0)

    def test_marginal_density_scales(self):
        rng = np.random.default_rng(1)
        dis = random_disintegration(CANTOR.matrix, 2, rng)
        assert np.allclose(marginal_density(dis.scaled(3.0)).values, 3.0 * marginal_density(dis).values)

    def test_strong_norm_of_product_point_mass(self):
        # marginal density == 1 contributes 1, the fiber norm contributes 1
        assert norm_s_inf(product_dirac(CANTOR, 3), CANTOR.theta) == pytest.approx(2.0, abs=1e-12)

    def test_marginal_lipschitz_below_measure_lipschitz(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            dis = random_disintegration(CANTOR.matrix, 3, rng)
            phi_lip = marginal_density(dis).lipschitz(CANTOR.theta)
            assert phi_lip <= lip_constant(dis, CANTOR.theta) + 1e-10


class TestLipConstant:
    def test_product_has_zero_lip(self):
        assert lip_constant(product_dirac(CANTOR, 3), CANTOR.theta) == 0.0

    def test_two_word_point_masses(self):
        fibers = {(0,): AtomicMeasure.dirac(0.0), (1,): AtomicMeasure.dirac(1.0)}
        dis = Disintegration(CANTOR.matrix, 1, fibers)
        assert lip_constant(dis, CANTOR.theta) == pytest.approx(1.0)

    def test_sampled_estimate_is_lower_bound(self):
        rng = np.random.default_rng(3)
        dis = random_disintegration(CANTOR.matrix, 4, rng)
        full = lip_constant(dis, CANTOR.theta)
        sampled = lip_constant(dis, CANTOR.theta, max_exhaustive=2, sample_pairs=300, seed=5)
        assert sampled <= full + 1e-12


class TestTransferApply:
    def test_cantor_point_mass_one_step(self):
        # two admissible branches with weight 1/2 each
        out = transfer_apply(CANTOR, product_dirac(CANTOR, 3))
        for w in out.words():
            mu = out.fibers[w]
            assert mu.positions.tolist() == [0.0, 2 / 3]
            assert np.allclose(mu.weights, 0.5)

    def test_probability_in_probability_out(self):
        rng = np.random.default_rng(4)
        dis = random_disintegration(CANTOR.matrix, 3, rng, signed=False, unit_mass=True)
        out = transfer_apply(CANTOR, dis)
        masses = out.fiber_masses()
        assert np.allclose(masses, 1.0, atol=1e-12)
        assert all((mu.weights >= 0).all() for mu in out.fibers.values())

    @pytest.mark.parametrize("sys", [CANTOR, markov_demo(), coupled_demo()])
    def test_marginal_intertwining(self, sys):
        rng = np.random.default_rng(5)
        dis = random_disintegration(sys.matrix, 3, rng)
        lhs = marginal_density(transfer_apply(sys, dis))
        rhs = ruelle_apply(marginal_density(dis), sys.weights)
        assert np.abs(lhs.values - rhs.values).max() <= 1e-10

    @pytest.mark.parametrize("sys", [CANTOR, markov_demo()])
    def test_weak_contraction_on_random_signed(self, sys):
        rng = np.random.default_rng(6)
        for _ in range(50):
            dis = random_disintegration(sys.matrix, 3, rng)
            assert norm_inf(transfer_apply(sys, dis)) <= norm_inf(dis) + 1e-10

    def test_total_mass_preserved(self):
        rng = np.random.default_rng(7)
        for sys in (CANTOR, markov_demo()):
            dis = random_disintegration(sys.matrix, 3, rng)
            out = transfer_apply(sys, dis)
            assert out.total_mass(sys.weights) == pytest.approx(dis.total_mass(sys.weights), abs=1e-12)

    def test_offset_depth_must_fit(self):
        with pytest.raises(ValueError, match="offset depth"):
            transfer_apply(coupled_demo(), product_dirac(coupled_demo(), 1))


class TestWordSum:
    def test_one_step_matches_transfer(self):
        direct = word_sum_iterate(CANTOR, DIRAC0, 1, 3)
        stepped = transfer_apply(CANTOR, product_dirac(CANTOR, 3))
        assert change_between(direct, stepped) <= 1e-14

    def test_cantor_two_step_atoms(self):
        # the four branch compositions applied to 0
        direct = word_sum_iterate(CANTOR, DIRAC0, 2, 2)
        for w in direct.words():
            mu = direct.fibers[w]
            assert np.allclose(mu.positions, [0.0, 2 / 9, 2 / 3, 8 / 9])
            assert np.allclose(mu.weights, 0.25)

    @pytest.mark.parametrize("sys", [CANTOR, markov_demo(), coupled_demo()])
    @pytest.mark.parametrize("steps", [1, 2, 3, 4])
    def test_matches_iterated_transfer(self, sys, steps):
        depth = 4
        direct = word_sum_iterate(sys, DIRAC0, steps, depth)
        iterated = Disintegration.product(sys.matrix, depth, DIRAC0)
        for _ in range(steps):
            iterated = transfer_apply(sys, iterated)
        assert change_between(direct, iterated) <= 1e-12

    def test_budget_error_advises(self):
        with pytest.raises(ValueError, match="budget"):
            word_sum_iterate(CANTOR, DIRAC0, 20, 6)

    def test_lip_of_iterates_bounded(self):
        # iterated regularity bound with zero initial lip
        from skewfiber.skew import c1_constant

        sys = coupled_demo()
        bound = c1_constant(sys) / (1.0 - sys.theta)
        dis = word_sum_iterate(sys, DIRAC0, 4, 4)
        assert lip_constant(dis, sys.theta) <= bound + 1e-10


class TestHutchinsonReference:
    def test_moment_of_reference(self):
        ref = hutchinson_reference(CANTOR, 12)
        assert float(np.dot(ref.positions, ref.weights)) == pytest.approx(0.5, abs=1e-5)

    def test_rejects_word_dependent_systems(self):
        with pytest.raises(ValueError):
            hutchinson_reference(coupled_demo(), 4)


class TestFixedPoint:
    def test_cantor_fixed_point_properties(self):
        res = fixed_point(CANTOR, depth=4, tol=1e-6, grid=512)
        mu0 = res.disintegration
        assert norm_inf(mu0) == pytest.approx(1.0, abs=1e-6)
        assert norm_s_inf(mu0, CANTOR.theta) == pytest.approx(2.0, abs=1e-6)
        # product system: all fibers agree, so the path is constant
        assert lip_constant(mu0, CANTOR.theta) <= 1e-6

    def test_cantor_matches_ifs_reference(self):
        res = fixed_point(CANTOR, depth=4, tol=1e-6, grid=512)
        ref = hutchinson_reference(CANTOR, 12)
        gap = max(wk_distance(mu, ref) for mu in res.disintegration.fibers.values())
        assert gap <= res.certified_error + (1 / 3) ** 12 + 1e-4

    def test_reapplication_moves_at_most_tol(self):
        res = fixed_point(CANTOR, depth=3, tol=1e-6, grid=512)
        again, _ = quantize_disintegration(transfer_apply(CANTOR, res.disintegration), 512)
        assert change_between(again, res.disintegration) <= 1e-6

    def test_two_initializations_agree(self):
        grid = 512
        res_a = fixed_point(CANTOR, depth=3, tol=1e-7, grid=grid)
        uniform = AtomicMeasure(np.arange(grid + 1) / grid, np.full(grid + 1, 1.0 / (grid + 1)))
        res_b = fixed_point(
            CANTOR, depth=3, tol=1e-7, grid=grid,
            init=Disintegration.product(CANTOR.matrix, 3, uniform),
        )
        gap = change_between(res_a.disintegration, res_b.disintegration)
        assert gap <= res_a.certified_error + res_b.certified_error

    def test_coupled_demo_not_product(self):
        res = fixed_point(coupled_demo(), depth=3, tol=1e-6, grid=1024)
        assert lip_constant(res.disintegration, 0.5) > 1e-3
        assert norm_inf(res.disintegration) == pytest.approx(1.0, abs=1e-6)

    def test_tolerance_validated(self):
        with pytest.raises(ValueError):
            fixed_point(CANTOR, depth=2, tol=0.0)


class TestVerifyLY:
    @pytest.mark.parametrize("sys", [CANTOR, coupled_demo()])
    def test_margins_nonnegative_on_random_positive(self, sys):
        rng = np.random.default_rng(8)
        for _ in range(3):
            dis = random_disintegration(sys.matrix, 3, rng, n_atoms=2, signed=False)
            rows = verify_ly(sys, dis, nmax=6)
            assert min(row.margin for row in rows) >= -1e-8

    def test_product_input_reduces_to_constant_bound(self):
        from skewfiber.skew import c1_constant

        dis = product_dirac(CANTOR, 3, x=0.25)
        rows = verify_ly(CANTOR, dis, nmax=4)
        expected = c1_constant(CANTOR) / (1.0 - CANTOR.theta) * norm_inf(dis)
        assert all(row.bound == pytest.approx(expected, rel=1e-12) for row in rows)

    def test_rejects_signed_input(self):
        rng = np.random.default_rng(9)
        dis = random_disintegration(CANTOR.matrix, 2, rng, signed=True)
        with pytest.raises(ValueError, match="positive"):
            verify_ly(CANTOR, dis, 2)


class TestEquilibriumDecay:
    def test_two_point_difference_decays_at_fiber_rate(self):
        diff = AtomicMeasure([0.0, 1.0], [1.0, -1.0])
        dis = Disintegration.product(CANTOR.matrix, 3, diff)
        fit, norms = equilibrium_decay(CANTOR, dis, nmax=10)
        assert fit.rate <= 1 / 3 + 0.05
        assert norms[0] > 0

    def test_zero_input_degenerates_to_rate_zero(self):
        dis = Disintegration.product(CANTOR.matrix, 2, AtomicMeasure([], []))
        fit, _ = equilibrium_decay(CANTOR, dis, nmax=5)
        assert fit.rate == 0.0

    def test_random_vanishing_element_contracts(self):
        rng = np.random.default_rng(10)
        dis = random_vanishing_disintegration(CANTOR.matrix, CANTOR.weights, 3, rng)
        fit, _ = equilibrium_decay(CANTOR, dis, nmax=8)
        assert 0.0 < fit.rate < 1.0

    def test_nonvanishing_input_rejected(self):
        dis = product_dirac(CANTOR, 2)
        with pytest.raises(ValueError, match="vanishing"):
            equilibrium_decay(CANTOR, dis, 3)


class TestSerialization:
    def test_roundtrip(self, tmp_path):
        rng = np.random.default_rng(11)
        dis = random_disintegration(CANTOR.matrix, 3, rng)
        dis.err_bound = 1.5e-4
        path = tmp_path / "dis.json"
        dis.save(path)
        back = Disintegration.load(path)
        assert back.depth == dis.depth
        assert back.err_bound == dis.err_bound
        assert change_between(back, dis) == 0.0

    def test_combine_cancels(self):
        rng = np.random.default_rng(12)
        dis = random_disintegration(CANTOR.matrix, 2, rng)
        zero = combine_disintegrations(1.0, dis, -1.0, dis)
        assert norm_inf(zero) == 0.0
