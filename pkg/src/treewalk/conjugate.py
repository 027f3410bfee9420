"""
Conjugate operators built from squared modified word norms.

For distinct ``i, j, k`` the weight of ``A_ij`` at ``x`` is

    w_ij(x) = |x a_j|_k^2 - |x|_k^2   (x even)
    w_ij(x) = |x a_i|_k^2 - |x|_k^2   (x odd)

an integer. ``A~ = diag(A_23, A_31, A_12)`` acts on spin ``s`` with the pair
whose complementary index is ``s``, ``A_0`` applies ``A~`` in every channel and
``A = J A_0 J*`` coincides with ``A~``.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .coins import CoinField
from .operators import apply_J, apply_J_star, apply_V, apply_V_adjoint
from .states import TripleState, WalkState
from .tree import (
    BallIndex,
    TreeWord,
    ball,
    keys_last_letter,
    keys_modified_norm,
    keys_norm,
    modified_norm,
    right_translate,
    word_to_key,
)

__all__ = [
    "a_weight",
    "a_weights",
    "apply_A_tilde",
    "apply_A0",
    "apply_A_via_J",
    "commutator_form",
    "mourre_defect",
    "verify_second_difference",
    "va0_tail_norm",
    "tail_probe_keys",
    "a_weight_ratio",
    "regularity_profile",
]


def _third(i: int, j: int) -> int:
    if i == j:
        raise ValueError("a_weight needs i != j")
    return 6 - i - j


def a_weight(x: TreeWord, i: int, j: int) -> int:
    """Multiplication weight of ``A_ij`` at ``x``, evaluated from the definition."""
    k = _third(i, j)
    a = j if len(x) % 2 == 0 else i
    return modified_norm(right_translate(x, a), k) ** 2 - modified_norm(x, k) ** 2


def a_weights(keys: np.ndarray) -> np.ndarray:
    """Weights of ``A~`` for every key, shape ``(n, 3)``, integer dtype.

    Mass of spin ``s`` moves by one edge per step; the modified norm ``m`` with
    respect to ``k = s`` goes to ``m + 1`` when the step is outward and to
    ``m - 1`` when it returns to the parent, so the weight is ``+-2m + 1``.
    """
    keys = np.asarray(keys, dtype=np.int64)
    n = keys_norm(keys)
    last = keys_last_letter(keys, n)
    odd = n % 2 == 1
    out = np.empty((keys.size, 3), dtype=np.int64)
    for s in range(3):
        i, j = (s + 1) % 3, (s + 2) % 3
        step = np.where(odd, i, j)
        m = keys_modified_norm(keys, s + 1, n, last)
        out[:, s] = np.where(step == last, 1 - 2 * m, 2 * m + 1)
    return out


def apply_A_tilde(phi: WalkState) -> WalkState:
    if len(phi) == 0:
        return phi
    return phi.scale_sites(a_weights(phi.sites).astype(float))


def apply_A0(Phi: TripleState) -> TripleState:
    return Phi.map(apply_A_tilde)


def apply_A_via_J(phi: WalkState) -> WalkState:
    """``J A_0 J* phi``; equal to ``A~ phi`` on finitely supported states."""
    return apply_J(apply_A0(apply_J_star(phi)))


def commutator_form(apply_U: Callable, apply_U_inv: Callable, apply_A: Callable, phi):
    """``U^{-1} [A, U] phi = U^{-1} A U phi - A phi``."""
    return apply_U_inv(apply_A(apply_U(phi))) - apply_A(phi)


def mourre_defect(apply_U: Callable, apply_U_inv: Callable, apply_A: Callable, phi) -> float:
    """``||U^{-1}[A, U] phi - 2 phi|| / ||phi||``."""
    k = commutator_form(apply_U, apply_U_inv, apply_A, phi) - phi * 2.0
    return k.norm() / phi.norm()


def verify_second_difference(radius: int) -> dict:
    """Exhaustive integer check of the second difference along every ``S_ij`` flow.

    For every ``x`` with ``|x| <= radius`` and every ordered pair ``i != j``
    (``k`` the third index) checks

        |x a_j a_i|_k^2 - 2 |x a_j|_k^2 + |x|_k^2 = 2   (x even)
        |x a_i a_j|_k^2 - 2 |x a_i|_k^2 + |x|_k^2 = 2   (x odd)

    using cached modified norms of ``ball(radius + 2)``.
    """
    b = ball(radius + 2)
    inner = np.nonzero(b.norm <= radius)[0]
    even = b.norm[inner] % 2 == 0
    nb = {g: b.neighbor(g) for g in (1, 2, 3)}
    failures = []
    pairs = [(i, j) for i in (1, 2, 3) for j in (1, 2, 3) if i != j]
    for i, j in pairs:
        k = 6 - i - j
        m = b.modnorm[:, k - 1]
        first = np.where(even, j, i)
        second = np.where(even, i, j)
        y = np.where(first == j, nb[j][inner], nb[i][inner])
        z = np.where(second == i, nb[i][y], nb[j][y])
        value = m[z] ** 2 - 2 * m[y] ** 2 + m[inner] ** 2
        for idx in np.nonzero(value != 2)[0]:
            failures.append(
                {"site": str(b.word(int(inner[idx]))), "pair": [i, j], "value": int(value[idx])}
            )
    return {
        "radius": radius,
        "pairs": [list(p) for p in pairs],
        "checked": int(inner.size * len(pairs)),
        "failures": failures,
    }


# ---------------------------------------------------------------------------
# Compactness and regularity diagnostics
# ---------------------------------------------------------------------------


def tail_probe_keys(r: int, width: int = 4, per_norm: int = 24, seed: int = 0) -> np.ndarray:
    """Representative sites with ``r <= |x| <= r + width``.

    Includes all words alternating two letters (largest modified norm for the
    missing letter), the two cyclic words, and ``per_norm`` random words per
    norm.
    """
    rng = np.random.default_rng(seed)
    keys = set()
    for n in range(max(r, 1), r + width + 1):
        for a in (1, 2, 3):
            for b in (1, 2, 3):
                if a != b:
                    keys.add(word_to_key([a if t % 2 == 0 else b for t in range(n)]))
        for step in (1, 2):
            keys.add(word_to_key([(step * t) % 3 + 1 for t in range(n)]))
        for _ in range(per_norm):
            letters = [int(rng.integers(1, 4))]
            for _ in range(n - 1):
                letters.append((letters[-1] - 1 + int(rng.integers(1, 3))) % 3 + 1)
            keys.add(word_to_key(letters))
    if r == 0:
        keys.add(1)
    return np.array(sorted(keys), dtype=np.int64)


def va0_tail_norm(
    cf: CoinField,
    r: int,
    width: int = 4,
    iterations: int = 20,
    tol: float = 1e-8,
    seed: int = 0,
) -> float:
    """Power-iteration estimate of ``||V A_0 P_r||`` on sparse probes.

    ``P_r`` projects onto triple states supported on the probe sites of
    :func:`tail_probe_keys` (all at norm ``>= r``).
    """
    keys = tail_probe_keys(r, width, seed=seed)
    rng = np.random.default_rng(seed)

    def project(Phi: TripleState) -> TripleState:
        return Phi.map(lambda c: c.restrict(np.isin(c.sites, keys)))

    def T(Phi: TripleState) -> WalkState:
        return apply_V(cf, apply_A0(project(Phi)))

    def T_adj(psi: WalkState) -> TripleState:
        return project(apply_A0(apply_V_adjoint(cf, psi)))

    comps = []
    for _ in range(3):
        amp = rng.standard_normal((keys.size, 3)) + 1j * rng.standard_normal((keys.size, 3))
        comps.append(WalkState(keys, amp))
    Phi = TripleState(tuple(comps))
    Phi = Phi / Phi.norm()
    sigma = 0.0
    for _ in range(iterations):
        image = T(Phi)
        new_sigma = image.norm()
        nxt = T_adj(image)
        nn = nxt.norm()
        if nn == 0.0:
            return 0.0
        Phi = nxt / nn
        if abs(new_sigma - sigma) <= tol * max(new_sigma, 1e-300):
            sigma = new_sigma
            break
        sigma = new_sigma
    return float(T(Phi).norm())


def a_weight_ratio(b: BallIndex) -> np.ndarray:
    """``max |w(x)| / <x>`` per radius shell of ``b``, shape ``(radius + 1, 3)``."""
    w = np.abs(a_weights(b.keys)).astype(float)
    ratio = w / np.sqrt(1.0 + b.norm.astype(float) ** 2)[:, None]
    out = np.zeros((b.radius + 1, 3))
    for n in range(b.radius + 1):
        out[n] = ratio[b.norm == n].max(axis=0)
    return out


def regularity_profile(cf: CoinField, b: BallIndex, eps: float) -> np.ndarray:
    """``max ||<x>^eps [W(x), C(x)]||`` per radius shell.

    ``W(x)`` is the diagonal weight matrix of ``A~``. This is the site-local
    content of ``<.>^eps D_k`` with ``D_k = [A~ <.>^{-1}, <.>(C - C_k) chi_k]``;
    it stays bounded in the radius when ``eps <= min(eps_k)``.
    """
    W = a_weights(b.keys).astype(float)
    C = cf.matrices(b.keys)
    comm = W[:, :, None] * C - C * W[:, None, :]
    vals = np.linalg.norm(comm, ord=2, axis=(1, 2)) * (1.0 + b.norm.astype(float) ** 2) ** (eps / 2)
    return np.array([vals[b.norm == n].max() for n in range(b.radius + 1)])
