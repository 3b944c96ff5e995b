import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from opiniongames.opinion import (
    AttentionState,
    OpinionState,
    assemble_system_matrix,
    attention_rhs,
    ginod_rhs,
    integrate_opinions,
    linearized_ginod_matrix,
    make_table,
    opinion_weighted_value,
    price_of_indecision,
    simulate_ginod,
    softmax,
    softmax_hessian,
    softmax_jacobian,
    synthesize_ginod,
    value_gradient,
    value_hessian,
    value_hessian_block,
)


def fd_gradient(player, wrt, z_all, table, step=1e-6):
    """Central differences of the weighted value; oracle for the gradient."""
    base = [np.asarray(z, dtype=float).copy() for z in z_all]
    g = np.zeros(len(base[wrt]))
    for k in range(len(g)):
        zp = [z.copy() for z in base]
        zm = [z.copy() for z in base]
        zp[wrt][k] += step
        zm[wrt][k] -= step
        g[k] = (opinion_weighted_value(player, zp, table)
                - opinion_weighted_value(player, zm, table)) / (2 * step)
    return g


def fd_hessian_block(player, j, k, z_all, table, step=1e-5):
    """Central differences of the analytic gradient; oracle for the Hessian."""
    base = [np.asarray(z, dtype=float).copy() for z in z_all]
    H = np.zeros((len(base[j]), len(base[k])))
    for c in range(len(base[k])):
        zp = [z.copy() for z in base]
        zm = [z.copy() for z in base]
        zp[k][c] += step
        zm[k][c] -= step
        H[:, c] = (value_gradient(player, j, zp, table)
                   - value_gradient(player, j, zm, table)) / (2 * step)
    return H


def random_table(rng, counts=(2, 2), n_players=2, scale=3.0):
    return make_table([rng.uniform(-scale, scale, size=counts)
                       for _ in range(n_players)])


def random_opinions(rng, counts=(2, 2)):
    return [rng.normal(size=c) for c in counts]


class TestSoftmax:
    def test_neutral_is_uniform(self):
        assert np.allclose(softmax([0.0, 0.0]), [0.5, 0.5])

    def test_closed_form(self):
        assert np.allclose(softmax([np.log(3), 0.0]), [0.75, 0.25])

    def test_large_entries_no_overflow(self):
        out = softmax([1000.0, 0.0])
        assert np.allclose(out, [1.0, 0.0], atol=1e-12)
        assert np.all(np.isfinite(out))

    @given(st.lists(st.floats(-50, 50), min_size=2, max_size=5),
           st.floats(-50, 50))
    @settings(max_examples=100, deadline=None)
    def test_probability_vector_and_shift_invariance(self, z, c):
        z = np.array(z)
        s = softmax(z)
        assert abs(s.sum() - 1.0) <= 1e-12
        assert np.all(s >= 0)
        assert np.allclose(softmax(z + c), s, atol=1e-12)

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            softmax([np.nan, 0.0])


class TestWeightedValue:
    def test_uniform_average(self):
        table = make_table([np.array([[4.0, 2.0], [1.0, 3.0]]),
                            np.zeros((2, 2))])
        z = [np.zeros(2), np.zeros(2)]
        assert opinion_weighted_value(0, z, table) == pytest.approx(2.5)

    def test_vertex_of_simplex(self):
        table = make_table([np.array([[4.0, 2.0], [1.0, 3.0]]),
                            np.zeros((2, 2))])
        z = [np.array([1000.0, 0.0]), np.array([1000.0, 0.0])]
        assert opinion_weighted_value(0, z, table) == pytest.approx(4.0)

    def test_mixed_weights_match_direct_sum(self):
        # oracle: direct double sum with sigma1=(0.75,0.25), sigma2=(0.5,0.5)
        table = make_table([np.array([[4.0, 2.0], [1.0, 3.0]]),
                            np.zeros((2, 2))])
        z = [np.array([np.log(3), 0.0]), np.zeros(2)]
        expected = 0.75 * (0.5 * 4 + 0.5 * 2) + 0.25 * (0.5 * 1 + 0.5 * 3)
        assert opinion_weighted_value(0, z, table) == pytest.approx(expected)
        assert expected == 2.75

    def test_three_option_direct_sum(self, rng):
        table = random_table(rng, counts=(3, 2))
        z = random_opinions(rng, counts=(3, 2))
        s1, s2 = softmax(z[0]), softmax(z[1])
        direct = sum(
            s1[a] * s2[b] * table.values[1][a, b]
            for a in range(3) for b in range(2)
        )
        assert opinion_weighted_value(1, z, table) == pytest.approx(direct)

    def test_incomplete_table_rejected(self):
        with pytest.raises(ValueError):
            make_table([np.full((2, 2), np.nan), np.zeros((2, 2))])


class TestGradient:
    def test_matches_finite_differences(self, rng):
        for _ in range(50):
            table = random_table(rng)
            z = random_opinions(rng)
            for player in range(2):
                for wrt in range(2):
                    got = value_gradient(player, wrt, z, table)
                    want = fd_gradient(player, wrt, z, table)
                    assert np.allclose(got, want, atol=1e-7)

    def test_constant_table_zero_gradient(self):
        table = make_table([np.full((2, 2), 3.7), np.full((2, 2), -1.0)])
        z = [np.array([0.3, -0.2]), np.array([1.0, 0.5])]
        assert np.allclose(value_gradient(0, 0, z, table), 0.0, atol=1e-12)

    def test_orthogonal_to_ones(self, rng):
        table = random_table(rng)
        z = random_opinions(rng)
        g = value_gradient(0, 1, z, table)
        assert abs(g.sum()) < 1e-12


class TestHessian:
    def test_blocks_match_finite_differences(self, rng):
        for _ in range(30):
            table = random_table(rng)
            z = random_opinions(rng)
            for player in range(2):
                for j in range(2):
                    for k in range(2):
                        got = value_hessian_block(player, j, k, z, table)
                        want = fd_hessian_block(player, j, k, z, table)
                        assert np.allclose(got, want, atol=1e-6)

    def test_full_hessian_symmetric(self, rng):
        table = random_table(rng)
        z = random_opinions(rng)
        H = value_hessian(0, z, table)
        assert np.allclose(H, H.T, atol=1e-12)

    def test_neutral_system_matrix_closed_form(self, rng):
        # at neutral opinions the coupling matrix is Gamma kron [[1,-1],[-1,1]]
        # with zero diagonal Gamma and b_i = (-V11 - V22 + V12 + V21) / 16
        v1 = rng.uniform(-5, 5, size=(2, 2))
        v2 = rng.uniform(-5, 5, size=(2, 2))
        table = make_table([v1, v2])
        z = [np.zeros(2), np.zeros(2)]
        M = assemble_system_matrix(z, table)
        h2 = np.array([[1.0, -1.0], [-1.0, 1.0]])
        b1 = (-v1[0, 0] - v1[1, 1] + v1[0, 1] + v1[1, 0]) / 16.0
        b2 = (-v2[0, 0] - v2[1, 1] + v2[0, 1] + v2[1, 0]) / 16.0
        gamma = np.array([[0.0, b1], [b2, 0.0]])
        assert np.allclose(M, np.kron(gamma, h2), atol=1e-12)

    def test_constant_table_zero_blocks(self):
        table = make_table([np.full((2, 2), 2.0), np.full((2, 2), 5.0)])
        z = [np.array([0.4, 0.1]), np.array([-0.3, 0.8])]
        for j in range(2):
            for k in range(2):
                assert np.allclose(value_hessian_block(0, j, k, z, table), 0.0,
                                   atol=1e-12)

    def test_softmax_derivatives_match_fd(self, rng):
        z = rng.normal(size=4)
        step = 1e-6
        J = softmax_jacobian(z)
        for k in range(4):
            zp, zm = z.copy(), z.copy()
            zp[k] += step
            zm[k] -= step
            fd = (softmax(zp) - softmax(zm)) / (2 * step)
            assert np.allclose(J[:, k], fd, atol=1e-8)
        H = softmax_hessian(z)
        for k in range(4):
            zp, zm = z.copy(), z.copy()
            zp[k] += step
            zm[k] -= step
            fd = (softmax_jacobian(zp) - softmax_jacobian(zm)) / (2 * step)
            assert np.allclose(H[:, :, k], fd, atol=1e-7)


class TestSynthesize:
    def test_gains_are_negated_hessian_entries(self, rng):
        table = random_table(rng)
        z = random_opinions(rng)
        params = synthesize_ginod(z, table, damping=0.2)
        for i in range(2):
            own = value_hessian_block(i, i, i, z, table)
            assert np.allclose(params.alpha(i), -np.diag(own))
            beta = params.beta(i)
            assert beta[0, 1] == pytest.approx(-own[0, 1])
            assert beta[0, 0] == 0.0
            j = 1 - i
            cross = value_hessian_block(i, i, j, z, table)
            assert np.allclose(params.gamma(i, j), -np.diag(cross))
            assert params.eta(i, j)[1, 0] == pytest.approx(-cross[1, 0])

    def test_two_by_two_gains_from_closed_form(self, rng):
        # alpha_l = a_i, beta = -a_i, gamma = b_i, eta = -b_i at neutral nominal
        v1 = rng.uniform(-4, 4, size=(2, 2))
        v2 = rng.uniform(-4, 4, size=(2, 2))
        table = make_table([v1, v2])
        z = [np.zeros(2), np.zeros(2)]
        params = synthesize_ginod(z, table, damping=0.1)
        b1 = (-v1[0, 0] - v1[1, 1] + v1[0, 1] + v1[1, 0]) / 16.0
        assert np.allclose(params.alpha(0), 0.0, atol=1e-12)  # a_1 = 0 at neutral
        assert np.allclose(params.gamma(0, 1), [b1, b1], atol=1e-12)
        assert params.eta(0, 1)[0, 1] == pytest.approx(-b1)

    def test_constant_table_zero_gains(self):
        table = make_table([np.full((2, 2), 1.0), np.full((2, 2), 1.0)])
        z = [np.zeros(2), np.zeros(2)]
        params = synthesize_ginod(z, table, damping=0.3)
        for i in range(2):
            for j in range(2):
                assert np.allclose(params.coupling[i][j], 0.0, atol=1e-12)

    def test_damping_scalar_becomes_identity(self):
        table = make_table([np.zeros((2, 2)), np.zeros((2, 2))])
        params = synthesize_ginod([np.zeros(2), np.zeros(2)], table, damping=0.1)
        assert np.allclose(params.damping[0], [0.1, 0.1])
        with pytest.raises(ValueError):
            synthesize_ginod([np.zeros(2), np.zeros(2)], table, damping=0.0)


class TestGinodRhs:
    def make_params(self, rng, damping=0.2):
        table = random_table(rng)
        z = random_opinions(rng)
        return synthesize_ginod(z, table, damping=damping)

    def test_zero_deviation_is_equilibrium(self, rng):
        params = self.make_params(rng)
        rhs = ginod_rhs(params, [np.zeros(2), np.zeros(2)], [1.3, 0.7])
        assert np.allclose(np.concatenate(rhs), 0.0, atol=1e-15)

    def test_zero_attention_pure_decay(self, rng):
        params = self.make_params(rng, damping=0.25)
        dz = [np.array([0.5, -0.2]), np.array([0.1, 0.3])]
        rhs = ginod_rhs(params, dz, [0.0, 0.0])
        assert np.allclose(rhs[0], -0.25 * dz[0])
        assert np.allclose(rhs[1], -0.25 * dz[1])

    def test_linearization_matches_small_deviation(self, rng):
        # oracle: ratio of rhs to the linear model tends to 1 as dz -> 0
        params = self.make_params(rng)
        lam = [0.8, 1.1]
        M = linearized_ginod_matrix(params, lam)
        direction = rng.normal(size=4)
        direction /= np.linalg.norm(direction)
        for eps in (1e-4, 1e-6):
            dz = [eps * direction[:2], eps * direction[2:]]
            rhs = np.concatenate(ginod_rhs(params, dz, lam))
            lin = M @ (eps * direction)
            assert np.allclose(rhs, lin, atol=5 * eps**2 + 1e-14)

    def test_jacobian_at_zero_matches_fd(self, rng):
        params = self.make_params(rng)
        lam = [1.2, 0.4]
        M = linearized_ginod_matrix(params, lam)
        step = 1e-7
        J = np.zeros((4, 4))
        for k in range(4):
            dp = np.zeros(4)
            dp[k] = step
            up = np.concatenate(ginod_rhs(params, [dp[:2], dp[2:]], lam))
            dn = np.concatenate(ginod_rhs(params, [-dp[:2], -dp[2:]], lam))
            J[:, k] = (up - dn) / (2 * step)
        assert np.allclose(J, M, atol=1e-6)


class TestPriceOfIndecision:
    def test_direct_enumeration_example(self):
        # own-option values (4, 1) against opponent option 1 and (2, 3)
        # against option 2; neutral own opinion
        v1 = np.array([[4.0, 2.0], [1.0, 3.0]])
        table = make_table([v1, np.zeros((2, 2))])
        z = [np.zeros(2), np.zeros(2)]
        # oracle by direct enumeration: columns give 2.5/1 and 2.5/2
        assert price_of_indecision(0, z, table) == pytest.approx(2.5)

    def test_decided_on_argmin_gives_one(self):
        v1 = np.array([[1.0, 2.0], [4.0, 3.0]])  # option 1 best in both columns
        table = make_table([v1, np.zeros((2, 2))])
        z = [np.array([1000.0, 0.0]), np.zeros(2)]
        assert price_of_indecision(0, z, table) == 1.0

    def test_constant_table_gives_one(self):
        table = make_table([np.full((2, 2), -7.0), np.zeros((2, 2))])
        z = [np.array([0.3, -0.4]), np.zeros(2)]
        assert price_of_indecision(0, z, table) == 1.0

    def test_always_at_least_one(self, rng):
        for _ in range(100):
            table = random_table(rng, scale=10.0)
            z = random_opinions(rng)
            assert price_of_indecision(0, z, table) >= 1.0
            assert price_of_indecision(1, z, table) >= 1.0

    def test_shift_of_whole_table_preserved_ordering(self, rng):
        # the internal offset anchors the minimum at 1 for any sign pattern
        v = rng.uniform(-50, -10, size=(2, 2))
        table = make_table([v, np.zeros((2, 2))])
        z = [np.array([0.5, -0.5]), np.zeros(2)]
        poi = price_of_indecision(0, z, table)
        assert np.isfinite(poi) and poi >= 1.0


class TestAttention:
    def test_poi_one_decays(self):
        assert attention_rhs(1.5, 1.0, m=2.0, rho=5.0) == pytest.approx(-3.0)

    def test_steady_state(self):
        lam_bar = 5.0 * (2.0 - 1.0) / 2.0  # rho (poi-1) / m
        assert attention_rhs(lam_bar, 2.0, m=2.0, rho=5.0) == pytest.approx(0.0)
        assert attention_rhs(2.0, 2.0, m=1.0, rho=2.0) == pytest.approx(0.0)

    def test_simple_value(self):
        assert attention_rhs(0.0, 3.0, m=1.0, rho=1.0) == pytest.approx(2.0)

    def test_rejects_bad_params(self):
        with pytest.raises(ValueError):
            attention_rhs(0.0, 1.0, m=0.0, rho=1.0)


class TestIntegrate:
    def test_zero_gains_decay_factor(self):
        table = make_table([np.zeros((2, 2)), np.zeros((2, 2))])
        z = [np.zeros(2), np.zeros(2)]
        params = synthesize_ginod(z, table, damping=0.1)
        dt = 0.2
        state = OpinionState(zbar=(np.zeros(2), np.zeros(2)),
                             dz=(np.ones(2), np.ones(2)))
        att = AttentionState(lam=np.array([0.0, 0.0]))
        new_state, new_att = integrate_opinions(state, att, params, [1.0, 1.0],
                                                dt, m=2.0, rho=5.0)
        assert np.allclose(new_state.dz[0], (1 - 0.1 * dt) * np.ones(2))

    def test_zero_deviation_stays_lambda_approaches_steady_state(self):
        table = make_table([np.zeros((2, 2)), np.zeros((2, 2))])
        zeros = (np.zeros(2), np.zeros(2))
        params = synthesize_ginod(list(zeros), table, damping=0.1)
        state = OpinionState(zbar=zeros, dz=zeros)
        att = AttentionState(lam=np.array([3.0, 3.0]))
        m, rho, poi = 2.0, 5.0, 1.4
        lam_bar = rho * (poi - 1.0) / m
        for _ in range(600):
            state, att = integrate_opinions(state, att, params,
                                            [poi, poi], 0.01, m=m, rho=rho)
        assert np.allclose(np.concatenate(state.dz), 0.0)
        assert np.allclose(att.lam, lam_bar, atol=1e-4)

    def test_one_euler_step_by_hand(self, rng):
        table = random_table(rng)
        z = random_opinions(rng)
        params = synthesize_ginod(z, table, damping=0.2)
        dz = (np.array([0.1, -0.05]), np.array([0.02, 0.3]))
        state = OpinionState(zbar=tuple(z), dz=dz)
        att = AttentionState(lam=np.array([0.5, 1.0]))
        dt = 0.2
        rhs = ginod_rhs(params, list(dz), att.lam)
        new_state, new_att = integrate_opinions(state, att, params, [1.5, 1.0],
                                                dt, m=2.0, rho=5.0)
        for i in range(2):
            assert np.allclose(new_state.dz[i], dz[i] + dt * rhs[i])
            assert np.allclose(new_state.z[i], z[i] + dz[i] + dt * rhs[i])
        assert new_att.lam[0] == pytest.approx(0.5 + dt * (-2 * 0.5 + 5 * 0.5))
        assert new_att.lam[1] == pytest.approx(1.0 + dt * (-2 * 1.0))

    def test_lambda_clamped_at_zero(self):
        table = make_table([np.zeros((2, 2)), np.zeros((2, 2))])
        zeros = (np.zeros(2), np.zeros(2))
        params = synthesize_ginod(list(zeros), table, damping=0.1)
        state = OpinionState(zbar=zeros, dz=zeros)
        att = AttentionState(lam=np.array([0.01, 0.0]))
        _, new_att = integrate_opinions(state, att, params, [1.0, 1.0], 5.0,
                                        m=2.0, rho=5.0)
        assert np.all(new_att.lam >= 0.0)


def test_simulate_ginod_shapes(rng):
    table = random_table(rng)
    z = [np.zeros(2), np.zeros(2)]
    params = synthesize_ginod(z, table, damping=0.2)
    traj = simulate_ginod(params, [np.full(2, 1e-3), np.full(2, 1e-3)],
                          [1.0, 1.0], dt=0.01, steps=100)
    assert traj.shape == (101, 4)
    assert np.all(np.isfinite(traj))


def test_opinion_state_bookkeeping():
    state = OpinionState(zbar=(np.array([1.0, 2.0]),), dz=(np.array([0.1, -0.1]),))
    assert np.allclose(state.z[0], [1.1, 1.9])
    reset = state.reset_nominal()
    assert np.allclose(reset.zbar[0], [1.1, 1.9])
    assert np.allclose(reset.dz[0], [0.1, -0.1])
