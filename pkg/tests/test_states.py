import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from treewalk.states import TripleState, WalkState, random_local_state, random_triple_state
from treewalk.tree import TreeWord, word_to_key


def states(max_sites=6):
    @st.composite
    def build(draw):
        seed = draw(st.integers(0, 2**31))
        rng = np.random.default_rng(seed)
        return random_local_state(rng, radius=3, n_sites=draw(st.integers(1, max_sites)), normalize=False)

    return build()


def test_delta_and_at():
    phi = WalkState.delta("12", 3, 2.0)
    assert len(phi) == 1
    assert np.array_equal(phi.at("12"), [0, 0, 2])
    assert np.array_equal(phi.at("e"), [0, 0, 0])
    assert phi.words() == [TreeWord((1, 2))]


def test_zero_rows_are_dropped_and_sites_sorted():
    k1, k2 = word_to_key((2,)), word_to_key((1, 3))
    phi = WalkState(np.array([k2, k1]), np.array([[1, 0, 0], [0, 0, 0]]))
    assert list(phi.sites) == [k2]
    with pytest.raises(ValueError):
        WalkState(np.array([k1, k1]), np.ones((2, 3)))


@given(states(), states())
def test_inner_product_axioms(a, b):
    assert np.isclose(a.inner(b), np.conj(b.inner(a)))
    assert np.isclose(a.inner(a).real, a.norm2())
    assert abs(a.inner(b)) <= a.norm() * b.norm() * (1 + 1e-12)
    assert (a + b - b).max_abs_diff(a) <= 1e-15


@given(states())
def test_scalar_arithmetic(a):
    z = 0.3 - 1.7j
    assert np.isclose((a * z).norm(), abs(z) * a.norm())
    assert (a - a).norm() == 0.0
    assert len(a - a) == 0
    assert (a / 2.0 * 2.0).equals(a)


def test_restrictions(rng):
    phi = random_local_state(rng, radius=4)
    parts = [phi.restrict_class(k) for k in (1, 2, 3)]
    assert np.isclose(sum(p.norm2() for p in parts), phi.norm2())
    assert (parts[0] + parts[1] + parts[2]).equals(phi)
    shell = phi.restrict_norm(2, 3)
    assert shell.min_radius >= 2 and shell.support_radius <= 3


def test_pruned_drops_small_rows():
    phi = WalkState.from_dict({"e": [1, 0, 0], "1": [1e-12, 0, 0]})
    assert len(phi.pruned(1e-9)) == 1
    assert len(phi.pruned(0.0)) == 2


def test_jsonl_roundtrip(rng):
    phi = random_local_state(rng, radius=3, n_sites=7)
    back = WalkState.from_jsonl(phi.to_jsonl())
    assert back.equals(phi)
    with pytest.raises(ValueError):
        WalkState.from_jsonl('{"site": "e", "amp": [[1,0],[0,0],[0,0]]}\n' * 2)


def test_triple_state(rng):
    phi = random_local_state(rng, radius=2)
    single = TripleState.single(2, phi)
    assert single[0].norm() == 0 and single[1].equals(phi)
    with pytest.raises(ValueError):
        TripleState.single(0, phi)
    diag = TripleState.diagonal(phi)
    assert np.isclose(diag.norm2(), 3 * phi.norm2())
    t = random_triple_state(rng, radius=2)
    assert np.isclose(t.norm(), 1.0)
    assert np.isclose(t.inner(t).real, 1.0)
    assert (t - t).norm() == 0.0
    assert t.map(lambda c: c * 2).max_abs_diff(t * 2) == 0.0
