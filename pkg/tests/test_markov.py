"""Memory-chain validation, lifting, iteration, and stationary analysis."""

import numpy as np
import pytest

from memwalk import (
    IterationLimitError,
    JointDistribution,
    StructuralError,
    TransitionTensor,
    ValidationError,
    check_primitivity,
    contract_power,
    lift_transition,
    marginalize,
    simulate_discrete,
    stationary_joint,
    step_joint,
    unfolded_chain,
    zeig_fixed_point,
)

from conftest import augmented_matrix_oracle, random_transition, stationary_eig_oracle


class TestValidation:
    def test_negative_entries_rejected(self):
        P = np.full((2, 2), 0.5)
        P = P.copy()
        P[0, 0] = -0.1
        P[1, 0] = 1.1
        with pytest.raises(ValidationError, match="nonnegative"):
            TransitionTensor(P)

    def test_bad_column_sum_names_history(self):
        P = np.full((2, 2, 2), 0.5)
        P = P.copy()
        P[0, 1, 2 - 1] = 0.4  # history (2, 2) now sums to 0.9
        with pytest.raises(ValidationError, match=r"\(2, 2\)"):
            TransitionTensor(P)

    def test_strict_rejects_dangling(self):
        P = np.zeros((2, 2))
        P[:, 0] = [0.5, 0.5]
        with pytest.raises(ValidationError, match="dangling"):
            TransitionTensor(P, policy="strict")

    def test_uniform_patches_dangling(self):
        P = np.zeros((2, 2))
        P[:, 0] = [0.5, 0.5]
        T = TransitionTensor(P, policy="uniform")
        assert np.allclose(T.P[:, 1], [0.5, 0.5])
        assert T.dangling == ()

    def test_restrict_keeps_dangling_list(self):
        P = np.zeros((2, 2))
        P[:, 0] = [1.0, 0.0]
        T = TransitionTensor(P, policy="restrict")
        assert T.dangling == ((2,),)

    def test_unknown_policy(self):
        with pytest.raises(ValidationError):
            TransitionTensor(np.eye(2), policy="ignore")

    def test_non_cubical_rejected(self):
        from memwalk import DimensionError

        with pytest.raises(DimensionError):
            TransitionTensor(np.full((2, 3), 0.5))

    def test_joint_distribution_validation(self):
        with pytest.raises(ValidationError):
            JointDistribution(np.array([0.7, -0.3]))
        with pytest.raises(ValidationError):
            JointDistribution(np.zeros(3), normalize=True)
        with pytest.raises(ValidationError):
            stationary_joint(
                TransitionTensor(np.full((2, 2), 0.5)),
                init=JointDistribution(np.array([0.5, 0.5])),
                class_index=1,
            )


class TestLift:
    def test_memoryless_lift_is_the_matrix(self):
        rng = np.random.default_rng(0)
        P = random_transition(3, 2, rng)
        T = TransitionTensor(P)
        assert np.allclose(lift_transition(T).unfolded.toarray(), P)

    def test_triangles_unit_columns(self, triangles_transition):
        M = lift_transition(triangles_transition).unfolded.toarray()
        assert M.shape == (25, 25)
        colsums = M.sum(axis=0)
        assert np.count_nonzero(colsums) == 12
        nonzero_cols = M[:, colsums > 0]
        assert np.array_equal(np.sort(nonzero_cols, axis=0)[-1], np.ones(12))
        assert np.allclose(nonzero_cols.sum(axis=0), 1.0)

    def test_matches_bruteforce_oracle_exactly(self):
        rng = np.random.default_rng(1)
        for n, m in [(2, 3), (3, 3), (2, 4)]:
            for _ in range(5):
                P = random_transition(n, m, rng)
                T = TransitionTensor(P)
                assert np.array_equal(
                    lift_transition(T).unfolded.toarray(), augmented_matrix_oracle(P)
                )

    def test_column_stochastic(self):
        rng = np.random.default_rng(2)
        P = random_transition(3, 3, rng)
        M = lift_transition(TransitionTensor(P)).unfolded
        sums = np.asarray(M.sum(axis=0)).ravel()
        assert np.max(np.abs(sums - 1.0)) <= 1e-12


class TestStepJoint:
    def test_preserves_mass(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            P = random_transition(3, 3, rng)
            T = TransitionTensor(P)
            Pi = JointDistribution(
                rng.dirichlet(np.ones(9)).reshape(3, 3), normalize=True
            )
            out = step_joint(T, Pi)
            assert abs(out.array.sum() - 1.0) <= 1e-12

    def test_equals_lift_apply(self):
        rng = np.random.default_rng(4)
        P = random_transition(2, 4, rng)
        T = TransitionTensor(P)
        Pi = rng.dirichlet(np.ones(8)).reshape((2, 2, 2))
        direct = step_joint(T, Pi)
        lifted = lift_transition(T).apply(Pi)
        assert np.max(np.abs(direct - lifted)) <= 1e-14

    def test_stationary_is_fixed_point(self):
        rng = np.random.default_rng(5)
        P = random_transition(3, 3, rng)
        T = TransitionTensor(P)
        star = stationary_joint(T).stationary
        step = step_joint(T, star)
        assert np.max(np.abs(step.array - star.array)) <= 1e-12

    def test_triangles_mass_stays_on_class(self, triangles_transition):
        Pi = JointDistribution.point((1, 2), 5)
        arr = Pi.array
        for _ in range(12):
            arr = step_joint(triangles_transition, arr)
        marg = marginalize(arr)
        assert marg[3] == 0.0 and marg[4] == 0.0
        assert abs(arr.sum() - 1.0) <= 1e-12

    def test_triangles_uniform_policy_preserves_uniform_joint_mass(self, triangles_graph):
        from memwalk import to_transition

        T = to_transition(triangles_graph, policy="uniform")
        out = step_joint(T, JointDistribution.uniform(5, 2))
        assert abs(out.array.sum() - 1.0) <= 1e-12

    def test_shape_mismatch_rejected(self, triangles_transition):
        from memwalk import DimensionError

        with pytest.raises(DimensionError):
            step_joint(triangles_transition, np.full((5,), 0.2))


class TestMarginalize:
    def test_memoryless_is_identity(self):
        x = np.array([0.2, 0.8])
        assert np.array_equal(marginalize(JointDistribution(x)), x)

    def test_uniform_joint_gives_uniform_marginal(self):
        Pi = JointDistribution.uniform(4, 3)
        assert np.allclose(marginalize(Pi), 0.25)

    def test_triangles_class_marginal(self, triangles_transition):
        summary = stationary_joint(triangles_transition)
        margs = {c.support: marginalize(c.stationary) for c in summary.classes}
        assert np.allclose(margs[(1, 2, 3)], [1 / 3, 1 / 3, 1 / 3, 0, 0], atol=1e-12)
        assert np.allclose(margs[(3, 4, 5)], [0, 0, 1 / 3, 1 / 3, 1 / 3], atol=1e-12)


class TestStationary:
    def test_primitive_matches_eig_oracle(self):
        rng = np.random.default_rng(6)
        for n, m in [(2, 3), (3, 3), (2, 4)]:
            P = random_transition(n, m, rng)
            T = TransitionTensor(P)
            summary = stationary_joint(T)
            assert summary.is_primitive
            oracle = stationary_eig_oracle(augmented_matrix_oracle(P))
            assert np.max(np.abs(summary.stationary.vec() - oracle)) <= 1e-10
            assert abs(summary.lambda1 - 1.0) <= 1e-10
            assert summary.lambda2_modulus <= summary.lambda1 + 1e-12
            assert summary.residual <= 1e-10

    def test_triangles_init_selects_class(self, triangles_transition):
        init = JointDistribution.point((2, 3), 5)
        summary = stationary_joint(triangles_transition, init=init)
        assert np.allclose(
            marginalize(summary.stationary), [1 / 3, 1 / 3, 1 / 3, 0, 0], atol=1e-12
        )
        assert summary.residual <= 1e-10
        init2 = JointDistribution.point((4, 5), 5)
        summary2 = stationary_joint(triangles_transition, init=init2)
        assert np.allclose(
            marginalize(summary2.stationary), [0, 0, 1 / 3, 1 / 3, 1 / 3], atol=1e-12
        )

    def test_per_class_stationaries_are_fixed_points(self, triangles_transition):
        summary = stationary_joint(triangles_transition)
        for cls in summary.classes:
            step = step_joint(triangles_transition, cls.stationary.array)
            assert np.abs(step - cls.stationary.array).sum() <= 1e-10

    def test_large_chain_uses_power_iteration(self):
        # 3^7 = 2187 histories exceeds the dense-solve limit.
        rng = np.random.default_rng(88)
        T = TransitionTensor(random_transition(3, 8, rng))
        summary = stationary_joint(T)
        assert summary.is_primitive
        assert summary.residual <= 1e-10
        arr = JointDistribution.uniform(3, 7).array
        for _ in range(300):
            arr = step_joint(T, arr)
        gap = np.abs(marginalize(arr) - marginalize(summary.stationary)).max()
        assert gap <= 1e-10

    def test_power_averaging_handles_periodic_class(self):
        import scipy.sparse as sp

        from memwalk.markov import _power_stationary

        cycle = sp.csc_matrix(
            np.array([[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
        )
        pi = _power_stationary(cycle, period=3, tol=1e-12)
        assert np.abs(cycle @ pi - pi).sum() <= 1e-12
        assert np.allclose(pi, 1 / 3)

    def test_triangles_unrealizable_init_rejected(self, triangles_transition):
        init = JointDistribution.point((1, 4), 5)  # never realizable
        with pytest.raises(StructuralError, match="closed class"):
            stationary_joint(triangles_transition, init=init)

    def test_class_index_selection(self, triangles_transition):
        summary = stationary_joint(triangles_transition, class_index=2)
        assert np.allclose(
            marginalize(summary.stationary), [0, 0, 1 / 3, 1 / 3, 1 / 3], atol=1e-12
        )
        with pytest.raises(StructuralError, match="out of range"):
            stationary_joint(triangles_transition, class_index=3)

    def test_absorption_weights_from_transient_start(self):
        # Memoryless 3-state chain: state 1 leaks to the absorbing states 2
        # and 3 with probabilities 0.25 and 0.75.
        P = np.array(
            [
                [0.0, 0.0, 0.0],
                [0.25, 1.0, 0.0],
                [0.75, 0.0, 1.0],
            ]
        )
        T = TransitionTensor(P)
        init = JointDistribution(np.array([1.0, 0.0, 0.0]))
        summary = stationary_joint(T, init=init)
        assert np.allclose(marginalize(summary.stationary), [0.0, 0.25, 0.75], atol=1e-12)

    def test_reducible_without_selection_reports_classes(self, triangles_transition):
        summary = stationary_joint(triangles_transition)
        assert summary.stationary is None
        assert len(summary.classes) == 2

    def test_mixture_init_weights_classes(self, triangles_transition):
        left = JointDistribution.point((2, 3), 5).array
        right = JointDistribution.point((4, 3), 5).array
        init = JointDistribution(0.5 * left + 0.5 * right)
        summary = stationary_joint(triangles_transition, init=init)
        marg = marginalize(summary.stationary)
        expected = 0.5 * np.array([1 / 3, 1 / 3, 1 / 3, 0, 0]) + 0.5 * np.array(
            [0, 0, 1 / 3, 1 / 3, 1 / 3]
        )
        assert np.allclose(marg, expected, atol=1e-12)


class TestPrimitivity:
    def test_cycle_is_irreducible_not_primitive(self):
        P = np.array([[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
        T = TransitionTensor(P)
        is_irr, is_prim, classes = check_primitivity(T)
        assert is_irr and not is_prim
        assert classes[0].period == 3

    def test_triangles_two_classes(self, triangles_transition):
        is_irr, is_prim, classes = check_primitivity(triangles_transition)
        assert not is_irr and not is_prim
        assert [c.support for c in classes] == [(1, 2, 3), (3, 4, 5)]
        assert all(c.period == 3 for c in classes)
        assert all(len(c.histories) == 6 for c in classes)

    def test_positive_tensor_is_primitive(self):
        T = TransitionTensor(np.full((3, 3, 3), 1 / 3))
        is_irr, is_prim, _ = check_primitivity(T)
        assert is_irr and is_prim

    def test_convergence_rate_tracks_second_modulus(self):
        rng = np.random.default_rng(7)
        P = random_transition(3, 3, rng, alpha=0.3, floor=0.05)
        T = TransitionTensor(P)
        summary = stationary_joint(T)
        star = summary.stationary.array
        arr = rng.dirichlet(np.ones(9)).reshape(3, 3)
        gaps = []
        for t in range(60):
            arr = step_joint(T, arr)
            gaps.append(np.abs(arr - star).sum())
        gaps = np.array(gaps)
        keep = (np.arange(1, 61) >= 10) & (gaps > 1e-13)
        slope = np.polyfit(np.arange(1, 61)[keep], np.log(gaps[keep]), 1)[0]
        assert abs(slope - np.log(summary.lambda2_modulus)) <= 0.25 * abs(
            np.log(summary.lambda2_modulus)
        )


class TestZeig:
    def test_memoryless_reduces_to_power_iteration(self):
        rng = np.random.default_rng(8)
        P = random_transition(4, 2, rng)
        T = TransitionTensor(P)
        z = zeig_fixed_point(T, tol=1e-12)
        assert np.abs(P @ z - z).sum() <= 1e-12

    def test_uniform_tensor_fixes_uniform_in_one_step(self):
        T = TransitionTensor(np.full((4, 4, 4), 0.25))
        z = zeig_fixed_point(T, z0=np.array([0.7, 0.1, 0.1, 0.1]))
        assert np.allclose(z, 0.25)

    def test_residual_contract(self):
        rng = np.random.default_rng(9)
        P = random_transition(3, 3, rng)
        T = TransitionTensor(P)
        z = zeig_fixed_point(T, tol=1e-10)
        assert np.abs(contract_power(T.P, z) - z).sum() <= 1e-10
        assert abs(z.sum() - 1.0) <= 1e-12

    def test_iteration_limit_carries_state(self):
        P = np.array([[0.0, 1.0], [1.0, 0.0]])  # period-2 flip: oscillates
        T = TransitionTensor(P)
        with pytest.raises(IterationLimitError) as err:
            zeig_fixed_point(T, z0=np.array([0.9, 0.1]), max_iter=25)
        assert err.value.iterate is not None
        assert err.value.residual > 0.1

    def test_z0_validation(self):
        T = TransitionTensor(np.full((2, 2), 0.5))
        from memwalk import DimensionError

        with pytest.raises(DimensionError):
            zeig_fixed_point(T, z0=np.ones(3) / 3)
        with pytest.raises(ValidationError):
            zeig_fixed_point(T, z0=np.array([0.9, 0.3]))


class TestSimulate:
    def test_triangles_deterministic_orbit(self, triangles_transition):
        traj = simulate_discrete(triangles_transition, (3, 1), 9, seed=0)
        assert np.array_equal(traj, [2, 1, 3] * 3)

    def test_seed_reproducibility(self):
        rng = np.random.default_rng(10)
        P = random_transition(3, 3, rng)
        T = TransitionTensor(P)
        a = simulate_discrete(T, (1, 2), 500, seed=42)
        b = simulate_discrete(T, (1, 2), 500, seed=42)
        c = simulate_discrete(T, (1, 2), 500, seed=43)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_unrealizable_start_rejected(self, triangles_transition):
        with pytest.raises(StructuralError, match="realizable"):
            simulate_discrete(triangles_transition, (1, 4), 10, seed=0)

    def test_occupation_approaches_stationary(self):
        rng = np.random.default_rng(11)
        P = random_transition(3, 3, rng)
        T = TransitionTensor(P)
        marg = marginalize(stationary_joint(T).stationary)
        traj = simulate_discrete(T, (1, 1), 100000, seed=1)
        occ = np.bincount(traj - 1, minlength=3) / traj.size
        assert 0.5 * np.abs(occ - marg).sum() <= 0.02


class TestRestrictEdgeCases:
    def test_leaky_restriction_renormalizes_with_warning(self):
        # History (1,) -> head 2 is fine, but histories (2,) and (3,) dangle,
        # and removing them starves (1,) too: everything dies.
        P = np.zeros((3, 3, 3))
        P[:, 0, 0] = [0.0, 1.0, 0.0]
        T = TransitionTensor(P, policy="restrict")
        with pytest.raises(StructuralError, match="survives"):
            unfolded_chain(T)

    def test_partial_leak_renormalizes(self):
        # Memoryless: state 1 splits between itself and dangling state 2.
        P = np.zeros((2, 2))
        P[:, 0] = [0.5, 0.5]
        T = TransitionTensor(P, policy="restrict")
        with pytest.warns(UserWarning, match="renormalized"):
            chain = unfolded_chain(T)
        assert chain.size == 1
        assert chain.renormalized
        assert np.allclose(chain.matrix.toarray(), [[1.0]])
