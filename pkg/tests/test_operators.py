import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from treewalk.operators import (
    Dynamics,
    apply_coin,
    apply_coin_adjoint,
    apply_J,
    apply_J_star,
    apply_S,
    apply_S_inv,
    apply_shift,
    apply_U,
    apply_U0,
    apply_U0_inv,
    apply_U_inv,
    apply_Utilde0,
    apply_Utilde0_inv,
    apply_V,
    apply_V_adjoint,
    boundary_matrix,
    factor_V,
    hs_norm_sq_ball,
    hs_norm_sq_closed_form,
    spin_pair,
    weight_bracket,
)
from treewalk.states import WalkState, random_local_state, random_triple_state
from treewalk.tree import CapacityError, TreeWord, ball, word_to_key

seeds = st.integers(0, 2**31)


def W(text):
    return TreeWord.parse(text)


def test_shift_examples():
    assert apply_shift(1, 2, {W("3"): 1.0}) == {W("31"): 1.0}
    assert apply_shift(2, 3, {W("e"): 1.0}) == {W("3"): 1.0}
    assert spin_pair(1) == (2, 3) and spin_pair(2) == (3, 1) and spin_pair(3) == (1, 2)


def test_spin_shifts_follow_pairs():
    # spin 1 carries S_23: even e moves by a3
    assert apply_S(WalkState.delta("e", 1)).equals(WalkState.delta("3", 1))
    # spin 3 carries S_12: odd site 3 moves by a1
    assert apply_S(WalkState.delta("3", 3)).equals(WalkState.delta("31", 3))


@given(seeds)
def test_shift_is_a_bijection(seed):
    phi = random_local_state(np.random.default_rng(seed), radius=4, n_sites=9)
    moved = apply_S(phi)
    assert np.isclose(moved.norm2(), phi.norm2(), rtol=0, atol=1e-15)
    assert apply_S_inv(moved).equals(phi)
    assert apply_S(apply_S_inv(phi)).equals(phi)


@given(seeds)
def test_shift_adjoint(seed):
    rng = np.random.default_rng(seed)
    a, b = random_local_state(rng, 3), random_local_state(rng, 3)
    assert abs(apply_S(a).inner(b) - a.inner(apply_S_inv(b))) < 1e-14


@pytest.mark.parametrize("coin", ["pure_coin", "smooth_coin", "bound_state_coin"])
def test_evolution_is_unitary(coin, request, rng):
    cf = request.getfixturevalue(coin)
    for _ in range(10):
        phi = random_local_state(rng, radius=5, n_sites=20)
        psi = random_local_state(rng, radius=5, n_sites=20)
        assert abs(apply_U(cf, phi).norm() - 1.0) < 1e-14
        assert apply_U_inv(cf, apply_U(cf, phi)).max_abs_diff(phi) < 1e-15
        assert apply_U(cf, apply_U_inv(cf, phi)).max_abs_diff(phi) < 1e-15
        assert abs(apply_coin(cf, phi).inner(psi) - phi.inner(apply_coin_adjoint(cf, psi))) < 1e-14


def test_free_evolutions_invert(pure_coin, rng):
    Phi = random_triple_state(rng, radius=4)
    assert apply_U0_inv(pure_coin, apply_U0(pure_coin, Phi)).max_abs_diff(Phi) < 1e-15
    phi = random_local_state(rng, radius=4)
    assert apply_Utilde0_inv(pure_coin, apply_Utilde0(pure_coin, phi)).max_abs_diff(phi) < 1e-15
    # the pure walk is the glued free walk
    assert apply_Utilde0(pure_coin, phi).equals(apply_U(pure_coin, phi))


def test_identification_algebra(rng):
    for _ in range(20):
        phi = random_local_state(rng, radius=4)
        assert apply_J(apply_J_star(phi)).equals(phi)
        Phi = random_triple_state(rng, radius=4)
        JJ = apply_J_star(apply_J(Phi))
        for k in range(3):
            assert JJ[k].equals(Phi[k].restrict_class(k + 1))


def test_capacity_guard():
    far = WalkState.delta(TreeWord((1, 2) * 30), 1)
    with pytest.raises(CapacityError):
        apply_S(far, max_radius=60)


def test_boundary_part_has_finite_rank(pure_coin, smooth_coin):
    for cf in (pure_coin, smooth_coin):
        B = boundary_matrix(cf)
        assert B.shape == (12, 36)
        assert np.linalg.matrix_rank(B) <= 12


def test_pure_perturbation_is_local(pure_coin, rng):
    near = {word_to_key(w) for w in [(), (1,), (2,), (3,)]}
    for _ in range(10):
        Phi = random_triple_state(rng, radius=4)
        out = apply_V(pure_coin, Phi)
        assert set(out.sites.tolist()) <= near
        far = Phi.map(lambda c: c.restrict_norm(2))
        assert len(apply_V(pure_coin, far)) == 0


def test_V_adjoint(smooth_coin, rng):
    for _ in range(10):
        Phi = random_triple_state(rng, radius=4)
        psi = random_local_state(rng, radius=4)
        lhs = apply_V(smooth_coin, Phi).inner(psi)
        rhs = Phi.inner(apply_V_adjoint(smooth_coin, psi))
        assert abs(lhs - rhs) < 1e-14


def test_V_factorization(smooth_coin, bound_state_coin, rng):
    for cf in (smooth_coin, bound_state_coin):
        f = factor_V(cf, ball(8))
        for _ in range(10):
            Phi = random_triple_state(rng, radius=6)
            err = (apply_V(cf, Phi) - f.apply_G_star(f.apply_G0(Phi))).norm()
            assert err <= 1e-12 * Phi.norm()
        with pytest.raises(CapacityError):
            f.apply_G0(random_triple_state(rng, radius=8))


def test_weight_bracket():
    phi = WalkState.delta("121", 2)
    assert np.isclose(weight_bracket(phi, 2.0).at("121")[1], 10.0)
    assert np.isclose(weight_bracket(weight_bracket(phi, 0.7), -0.7).at("121")[1], 1.0)


@pytest.mark.parametrize("s", [0.5, 1.0, 2.0])
def test_hs_sum_matches_closed_form(s):
    assert abs(hs_norm_sq_ball(s, ball(12)) - hs_norm_sq_closed_form(s, 12)) <= 1e-10 * hs_norm_sq_closed_form(s, 12)


def test_dynamics_bundle(smooth_coin, rng):
    dyn = Dynamics(smooth_coin)
    phi = random_local_state(rng, radius=3)
    assert dyn.U(phi).equals(apply_U(smooth_coin, phi))
    U, U_inv = dyn.rotated(0.3)
    assert U_inv(U(phi)).max_abs_diff(phi) < 1e-15
    assert np.isclose(U(phi).inner(dyn.U(phi)), np.exp(-0.3j))
