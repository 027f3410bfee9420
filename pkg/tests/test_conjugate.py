import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from treewalk.conjugate import (
    a_weight,
    a_weight_ratio,
    a_weights,
    apply_A0,
    apply_A_tilde,
    apply_A_via_J,
    commutator_form,
    mourre_defect,
    regularity_profile,
    va0_tail_norm,
    verify_second_difference,
)
from treewalk.operators import apply_U0, apply_U0_inv, apply_Utilde0, apply_Utilde0_inv
from treewalk.states import WalkState, random_local_state, random_triple_state
from treewalk.tree import TreeWord, ball


def test_weight_examples():
    e, a1 = TreeWord(()), TreeWord((1,))
    assert a_weight(e, 2, 3) == 1
    # |a1 a2|_1^2 - |a1|_1^2 = 1 - 0
    assert a_weight(a1, 2, 3) == 1
    # even x = 23 steps by a3 back to its parent: |2|_1^2 - |23|_1^2
    assert a_weight(TreeWord.parse("23"), 2, 3) == 1 - 4
    with pytest.raises(ValueError):
        a_weight(e, 2, 2)


def test_vectorized_weights_match_definition():
    b = ball(7)
    w = a_weights(b.keys)
    assert w.dtype == np.int64
    for n, x in enumerate(b.words()):
        for s in range(3):
            i, j = (s + 1) % 3 + 1, (s + 2) % 3 + 1
            assert w[n, s] == a_weight(x, i, j)


def test_A_tilde_on_root():
    out = apply_A_tilde(WalkState.delta("e", 1))
    assert out.equals(WalkState.delta("e", 1))


@pytest.mark.parametrize("radius", [0, 3, 8])
def test_second_difference_is_two(radius):
    rep = verify_second_difference(radius)
    assert rep["failures"] == []
    assert rep["checked"] == 6 * len(ball(radius))


@given(seed=st.integers(0, 2**31))
def test_free_commutators_are_exactly_two(pure_coin, seed):
    rng = np.random.default_rng(seed)
    phi = random_local_state(rng, radius=6, n_sites=12)
    assert mourre_defect(lambda p: apply_Utilde0(pure_coin, p), lambda p: apply_Utilde0_inv(pure_coin, p), apply_A_tilde, phi) <= 1e-12
    Phi = random_triple_state(rng, radius=6, n_sites=12)
    assert mourre_defect(lambda p: apply_U0(pure_coin, p), lambda p: apply_U0_inv(pure_coin, p), apply_A0, Phi) <= 1e-12


def test_commutator_form_is_integer_valued(pure_coin):
    # U~0^{-1} [A~, U~0] acts as 2 on every basis vector; only the phase products round
    for x in ball(3).words():
        for s in (1, 2, 3):
            d = WalkState.delta(x, s)
            k = commutator_form(
                lambda p: apply_Utilde0(pure_coin, p), lambda p: apply_Utilde0_inv(pure_coin, p), apply_A_tilde, d
            )
            assert np.allclose(k.at(x), 2 * d.at(x), atol=1e-15 * 2**4, rtol=0)


def test_A_via_J_equals_A_tilde(rng):
    for _ in range(20):
        phi = random_local_state(rng, radius=6, n_sites=15)
        assert apply_A_via_J(phi).equals(apply_A_tilde(phi))


def test_tail_norm_decays(pure_coin, smooth_coin):
    vals = [va0_tail_norm(smooth_coin, r) for r in (2, 4, 8)]
    assert vals[0] > vals[1] > vals[2] > 0
    assert va0_tail_norm(pure_coin, 4) == 0.0


def test_weight_growth_and_regularity(smooth_coin):
    b = ball(14)
    ratio = a_weight_ratio(b)
    assert ratio.max() <= 2.5
    prof = regularity_profile(smooth_coin, b, eps=1.0)
    assert prof[4:].max() <= 2 * prof[4:].min()
