import csv
import io

import numpy as np
import pytest

from treewalk.operators import apply_J
from treewalk.scattering import (
    WaveMode,
    adjoint_wave_apply,
    chain_and_completeness_check,
    channel_masses,
    convergence_study,
    intertwining_defect,
    wave_apply,
)
from treewalk.states import TripleState, WalkState, random_local_state, random_triple_state

MODES = [WaveMode(t, d) for t in ("triple", "shift", "tilde") for d in "+-"]


def probe(mode, rng, radius=2):
    if mode.takes_triple:
        return random_triple_state(rng, radius)
    return random_local_state(rng, radius)


def test_mode_validation():
    assert str(WaveMode()) == "triple+"
    assert WaveMode("tilde", "-").sign == -1
    with pytest.raises(ValueError):
        WaveMode("both")
    with pytest.raises(ValueError):
        WaveMode("triple", "0")


def test_input_types(smooth_coin):
    with pytest.raises(TypeError):
        wave_apply(WaveMode("triple"), 1, WalkState.delta("e", 1), smooth_coin)
    with pytest.raises(TypeError):
        wave_apply(WaveMode("tilde"), 1, TripleState.diagonal(WalkState.delta("e", 1)), smooth_coin)


def test_zeroth_iterate_is_identification(smooth_coin, rng):
    Phi = random_triple_state(rng, 3)
    assert wave_apply(WaveMode("triple"), 0, Phi, smooth_coin).equals(apply_J(Phi))
    phi = random_local_state(rng, 3)
    assert wave_apply(WaveMode("tilde"), 0, phi, smooth_coin).equals(phi)


def test_shift_mode_is_triple_mode_on_diagonal(smooth_coin, rng):
    phi = random_local_state(rng, 2)
    for d in "+-":
        for n in (0, 3, 6):
            a = wave_apply(WaveMode("shift", d), n, phi, smooth_coin)
            b = wave_apply(WaveMode("triple", d), n, TripleState.diagonal(phi), smooth_coin)
            assert a.equals(b)


@pytest.mark.parametrize("mode", MODES, ids=str)
def test_telescoped_increments_match_direct(mode, smooth_coin, rng):
    x = probe(mode, rng)
    fast = convergence_study(mode, x, 5, smooth_coin)
    slow = convergence_study(mode, x, 5, smooth_coin, direct=True)
    assert np.allclose(fast.increments, slow.increments, rtol=0, atol=1e-14)
    assert np.allclose(fast.isometry_defects, slow.isometry_defects, rtol=0, atol=1e-14)


@pytest.mark.parametrize("mode", MODES, ids=str)
def test_adjoint_duality(mode, smooth_coin, rng):
    for n in (0, 1, 4):
        x = probe(mode, rng)
        psi = random_local_state(rng, 2)
        lhs = wave_apply(mode, n, x, smooth_coin).inner(psi)
        rhs = x.inner(adjoint_wave_apply(n, psi, smooth_coin, mode))
        assert abs(lhs - rhs) <= 1e-13


def test_pure_coin_increments_vanish(pure_coin):
    root = TripleState.diagonal(WalkState.delta("e", 1))
    for d in "+-":
        rec = convergence_study(WaveMode("triple", d), root, 10, pure_coin)
        assert np.all(rec.increments[3:] == 0.0)
        assert rec.exact_zero_tail and rec.verdict == "converged"
        rec = convergence_study(WaveMode("tilde", d), WalkState.delta("e", 2), 10, pure_coin)
        assert np.all(rec.increments == 0.0)


def test_isometric_modes(smooth_coin, rng):
    for tag in ("shift", "tilde"):
        rec = convergence_study(WaveMode(tag), random_local_state(rng, 2), 12, smooth_coin)
        assert rec.isometry_defects.max() <= 1e-14


def test_smooth_coin_increments_decay(smooth_coin):
    # a single channel at e leaves its own branch at once; the diagonal lift keeps mass glued
    root = TripleState.diagonal(WalkState.delta("e", 1)) / np.sqrt(3)
    rec = convergence_study(WaveMode("triple"), root, 12, smooth_coin, tail_from=6)
    assert rec.slope is not None and rec.slope < -1.3
    assert rec.increments[12] < rec.increments[4]
    summary = rec.summary()
    assert summary["mode"] == "triple+" and summary["n_max"] == 12
    rows = list(csv.reader(io.StringIO(rec.to_csv())))
    assert rows[0] == ["n", "increment", "isometry_defect"] and len(rows) == 14
    assert float(rows[5][1]) == rec.increments[4]


def test_intertwining(smooth_coin, pure_coin, rng):
    x = random_triple_state(rng, 2)
    rec = convergence_study(WaveMode("triple"), x, 6, smooth_coin)
    for n in range(6):
        assert intertwining_defect(WaveMode("triple"), x, n, smooth_coin, m=1) == rec.increments[n]
    phi = WalkState.delta("e", 3)
    for d in "+-":
        for mode in (WaveMode("shift", d), WaveMode("tilde", d)):
            assert intertwining_defect(mode, phi, 6, pure_coin, m=2) == 0.0
    with pytest.raises(ValueError):
        intertwining_defect(WaveMode("tilde"), phi, 1, pure_coin, m=0)


def test_chain_and_reconstruction(smooth_coin, rng):
    inputs = [random_local_state(rng, 2) for _ in range(3)]
    rep = chain_and_completeness_check(inputs, 4, smooth_coin)
    assert rep["jj_star_defect"] == 0.0
    assert rep["reconstruction_defect"] < 1e-12
    assert rep["chain_rule_defect"] < 1e-12


def test_channel_masses(smooth_coin):
    rep = channel_masses(WalkState.delta("e", 1), 8, smooth_coin)
    m = rep["masses"]
    assert m.shape == (9, 3)
    assert np.allclose((m**2).sum(axis=1), 1.0, rtol=0, atol=1e-13)
    assert m[0].tolist() == [1.0, 0.0, 0.0]
    assert rep["raw_variation"] >= rep["window_variation"] >= 0
