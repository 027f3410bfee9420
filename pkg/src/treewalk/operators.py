"""
Model operators acting on sparse states.

Conventions: a shift ``S_ij`` acts on functions by ``(S_ij f)(x) = f(x a_i)``
for even ``x`` and ``f(x a_j)`` for odd ``x``. Pushed forward onto the
amplitudes this means mass at an odd site moves by ``a_i`` and mass at an even
site moves by ``a_j``. Spin ``s`` uses the pair ``(s+1, s+2)`` mod 3, i.e.
``S = diag(S_23, S_31, S_12)``.

All operators are exact on finitely supported states: shifts permute entries,
coins multiply rows by 3x3 matrices, and no truncation happens unless a
positive ``drop_tol`` is passed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from .coins import CoinField
from .states import TripleState, WalkState
from .tree import (
    MAX_KEY_RADIUS,
    BallIndex,
    CapacityError,
    TreeWord,
    key_to_word,
    keys_chi_class,
    keys_norm,
    keys_translate,
    word_to_key,
)

__all__ = [
    "spin_pair",
    "apply_shift",
    "apply_S",
    "apply_S_inv",
    "apply_coin",
    "apply_coin_adjoint",
    "apply_U",
    "apply_U_inv",
    "apply_U0",
    "apply_U0_inv",
    "apply_Utilde0",
    "apply_Utilde0_inv",
    "apply_C0_power",
    "apply_J",
    "apply_J_star",
    "apply_V",
    "apply_V_adjoint",
    "apply_V_tilde",
    "factor_V",
    "VFactorization",
    "boundary_matrix",
    "weight_bracket",
    "hs_norm_sq_ball",
    "hs_norm_sq_closed_form",
    "Dynamics",
]


def spin_pair(spin: int) -> tuple[int, int]:
    """Generator pair ``(i, j)`` (1-based) of the shift acting on ``spin`` (1-based)."""
    s = spin - 1
    return (s + 1) % 3 + 1, (s + 2) % 3 + 1


# ---------------------------------------------------------------------------
# Shifts
# ---------------------------------------------------------------------------


def _shift_keys(keys: np.ndarray, i: int, j: int, norms=None, max_radius=MAX_KEY_RADIUS) -> np.ndarray:
    """Image sites of ``S_ij`` (0-based generators) for mass sitting at ``keys``."""
    n = keys_norm(keys) if norms is None else norms
    g = np.where(n % 2 == 1, i, j)
    return keys_translate(keys, g, n, max_radius)


def apply_shift(i: int, j: int, f: Mapping[TreeWord, complex]) -> dict[TreeWord, complex]:
    """Apply ``S_ij`` to a finitely supported scalar field ``{word: value}``."""
    if not f:
        return {}
    words = list(f)
    keys = np.array([w.key for w in words], dtype=np.int64)
    new = _shift_keys(keys, i - 1, j - 1)
    return {key_to_word(int(k)): f[w] for k, w in zip(new, words) if f[w] != 0}


def _shift_state(phi: WalkState, inverse: bool, max_radius: int) -> WalkState:
    if len(phi) == 0:
        return phi
    n = keys_norm(phi.sites)
    keys, spins, vals = [], [], []
    for s in range(3):
        nz = phi.amp[:, s] != 0
        if not np.any(nz):
            continue
        i, j = (s + 1) % 3, (s + 2) % 3
        if inverse:
            i, j = j, i
        keys.append(_shift_keys(phi.sites[nz], i, j, n[nz], max_radius))
        spins.append(np.full(keys[-1].size, s))
        vals.append(phi.amp[nz, s])
    keys = np.concatenate(keys)
    uniq, inv = np.unique(keys, return_inverse=True)
    amp = np.zeros((uniq.size, 3), dtype=np.complex128)
    amp[inv, np.concatenate(spins)] = np.concatenate(vals)
    return WalkState._raw(uniq, amp)


def apply_S(phi: WalkState, max_radius: int = MAX_KEY_RADIUS) -> WalkState:
    return _shift_state(phi, False, max_radius)


def apply_S_inv(phi: WalkState, max_radius: int = MAX_KEY_RADIUS) -> WalkState:
    return _shift_state(phi, True, max_radius)


# ---------------------------------------------------------------------------
# Coins and evolutions
# ---------------------------------------------------------------------------


def apply_coin(cf: CoinField, phi: WalkState, adjoint: bool = False) -> WalkState:
    if len(phi) == 0:
        return phi
    if cf.is_diagonal:
        d = cf.class_diag(phi.sites)
        return WalkState._raw(phi.sites, phi.amp * (np.conj(d) if adjoint else d))
    m = cf.matrices(phi.sites)
    if adjoint:
        m = np.conj(np.swapaxes(m, 1, 2))
    a = phi.amp
    out = m[:, :, 0] * a[:, 0, None] + m[:, :, 1] * a[:, 1, None] + m[:, :, 2] * a[:, 2, None]
    return WalkState._raw(phi.sites, out)


def apply_coin_adjoint(cf: CoinField, phi: WalkState) -> WalkState:
    return apply_coin(cf, phi, adjoint=True)


def apply_U(cf: CoinField, phi: WalkState, drop_tol: float = 0.0, max_radius: int = MAX_KEY_RADIUS) -> WalkState:
    """One step ``U = S C``."""
    out = apply_S(apply_coin(cf, phi), max_radius)
    return out.pruned(drop_tol) if drop_tol > 0 else out


def apply_U_inv(cf: CoinField, phi: WalkState, drop_tol: float = 0.0, max_radius: int = MAX_KEY_RADIUS) -> WalkState:
    out = apply_coin_adjoint(cf, apply_S_inv(phi, max_radius))
    return out.pruned(drop_tol) if drop_tol > 0 else out


def apply_Utilde0(cf: CoinField, phi: WalkState, max_radius: int = MAX_KEY_RADIUS) -> WalkState:
    """``S sum_k chi_k C_k``: the walk with the asymptotic coin of each branch."""
    if len(phi) == 0:
        return phi
    d = cf.class_diag(phi.sites)
    return apply_S(WalkState._raw(phi.sites, phi.amp * d), max_radius)


def apply_Utilde0_inv(cf: CoinField, phi: WalkState, max_radius: int = MAX_KEY_RADIUS) -> WalkState:
    psi = apply_S_inv(phi, max_radius)
    if len(psi) == 0:
        return psi
    return WalkState._raw(psi.sites, psi.amp * np.conj(cf.class_diag(psi.sites)))


def apply_C0_power(cf: CoinField, phi: WalkState, n: int) -> WalkState:
    """``(sum_k chi_k C_k)^n``, applied as ``|n|`` successive multiplications."""
    if len(phi) == 0 or n == 0:
        return phi
    d = cf.class_diag(phi.sites)
    if n < 0:
        d = np.conj(d)
    amp = phi.amp
    for _ in range(abs(n)):
        amp = amp * d
    return WalkState._raw(phi.sites, amp)


def apply_U0(cf: CoinField, Phi: TripleState, max_radius: int = MAX_KEY_RADIUS) -> TripleState:
    """``U_1 + U_2 + U_3`` with ``U_k = S C_k``."""
    diag = cf.asymptotic_diag
    return TripleState(
        tuple(apply_S(WalkState._raw(c.sites, c.amp * diag[k]), max_radius) for k, c in enumerate(Phi))
    )


def apply_U0_inv(cf: CoinField, Phi: TripleState, max_radius: int = MAX_KEY_RADIUS) -> TripleState:
    diag = np.conj(cf.asymptotic_diag)
    out = []
    for k, c in enumerate(Phi):
        psi = apply_S_inv(c, max_radius)
        out.append(WalkState._raw(psi.sites, psi.amp * diag[k]))
    return TripleState(tuple(out))


# ---------------------------------------------------------------------------
# Identification
# ---------------------------------------------------------------------------


def apply_J(Phi: TripleState) -> WalkState:
    """``J Phi = sum_k chi_k phi_k``; the pieces have disjoint supports."""
    parts = [c.restrict_class(k + 1) for k, c in enumerate(Phi)]
    sites = np.concatenate([p.sites for p in parts])
    amp = np.concatenate([p.amp for p in parts])
    order = np.argsort(sites, kind="stable")
    return WalkState._raw(sites[order], amp[order])


def apply_J_star(phi: WalkState) -> TripleState:
    """``J* phi = (chi_1 phi, chi_2 phi, chi_3 phi)``."""
    cls = keys_chi_class(phi.sites)
    return TripleState(tuple(phi.restrict(cls == k) for k in (1, 2, 3)))


# ---------------------------------------------------------------------------
# Perturbation
# ---------------------------------------------------------------------------


def apply_V(cf: CoinField, Phi: TripleState) -> WalkState:
    """``V = J U_0 - U J``."""
    return apply_J(apply_U0(cf, Phi)) - apply_U(cf, apply_J(Phi))


def apply_V_adjoint(cf: CoinField, psi: WalkState) -> TripleState:
    """``V* = U_0^{-1} J* - J* U^{-1}``."""
    return apply_U0_inv(cf, apply_J_star(psi)) - apply_J_star(apply_U_inv(cf, psi))


def apply_V_tilde(cf: CoinField, phi: WalkState) -> WalkState:
    """``(Utilde_0 - U) phi``."""
    return apply_Utilde0(cf, phi) - apply_U(cf, phi)


def _bracket(s: float, keys: np.ndarray) -> np.ndarray:
    return (1.0 + keys_norm(keys).astype(float) ** 2) ** s


def weight_bracket(phi: WalkState, s: float) -> WalkState:
    """Multiply by ``<x>^s`` with ``<x> = (1 + |x|^2)^{1/2}``."""
    if len(phi) == 0:
        return phi
    return phi.scale_sites(_bracket(s / 2.0, phi.sites))


@dataclass(frozen=True, eq=False)
class VFactorization:
    """``V = G* G_0`` with ``G_0 = sum_k <.>^{-(1+eps_k)/2}`` and ``G* = D G_0``.

    ``g0`` holds the diagonal weights of ``G_0`` on the ball, one row per
    channel. ``D`` is applied term by term and never materialized.
    """

    cf: CoinField
    ball: BallIndex
    g0: np.ndarray

    def _check(self, Phi) -> None:
        radius = Phi.support_radius
        if radius + 1 > self.ball.radius:
            raise CapacityError(f"support radius {radius} + 1 exceeds factorization ball {self.ball.radius}")

    def apply_G0(self, Phi: TripleState) -> TripleState:
        self._check(Phi)
        out = []
        for k, c in enumerate(Phi):
            w = self.g0[k][self.ball.index_of(c.sites)] if len(c) else np.zeros(0)
            out.append(c.scale_sites(w))
        return TripleState(tuple(out))

    def apply_D(self, Phi: TripleState) -> WalkState:
        self._check(Phi)
        cf = self.cf
        total = WalkState.zero()
        for k, c in enumerate(Phi):
            psi = weight_bracket(c, 1.0 + cf.eps[k])
            diag_k = cf.asymptotic_diag[k]
            inside = psi.restrict_class(k + 1)
            # S (C_k - C) chi_k
            if len(inside):
                diff = inside.amp * diag_k - np.einsum("nij,nj->ni", cf.matrices(inside.sites), inside.amp)
                total = total + apply_S(WalkState._raw(inside.sites, diff))
            # [chi_k, S] C_k
            ck_psi = WalkState._raw(psi.sites, psi.amp * diag_k)
            total = total + apply_S(ck_psi).restrict_class(k + 1) - apply_S(ck_psi.restrict_class(k + 1))
        return total

    def apply_G_star(self, Psi: TripleState) -> WalkState:
        return self.apply_D(self.apply_G0(Psi))


def factor_V(cf: CoinField, ball: BallIndex) -> VFactorization:
    n = ball.norm.astype(float)
    g0 = np.stack([(1.0 + n**2) ** (-(1.0 + e) / 4.0) for e in cf.eps])
    return VFactorization(cf=cf, ball=ball, g0=g0)


def boundary_matrix(cf: CoinField) -> np.ndarray:
    """Matrix of the finite-rank part ``Phi -> sum_k [chi_k, S] C_k phi_k``.

    Inputs range over channel, site in ``{e, a1, a2, a3}`` and spin (36
    columns); outputs over the same four sites and spin (12 rows). The part
    vanishes on inputs supported away from these sites.
    """
    sites = [word_to_key(w) for w in [(), (1,), (2,), (3,)]]
    row_index = {(key, s): r for r, (key, s) in enumerate((key, s) for key in sites for s in range(3))}
    cols = []
    for k in range(3):
        for key in sites:
            for s in range(3):
                phi = WalkState.delta(key, s + 1)
                ck = WalkState._raw(phi.sites, phi.amp * cf.asymptotic_diag[k])
                out = apply_S(ck).restrict_class(k + 1) - apply_S(ck.restrict_class(k + 1))
                col = np.zeros(12, dtype=np.complex128)
                for x, a in zip(out.sites, out.amp):
                    for t in range(3):
                        if a[t] != 0:
                            col[row_index[(int(x), t)]] = a[t]
                cols.append(col)
    return np.stack(cols, axis=1)


def hs_norm_sq_ball(s: float, ball: BallIndex) -> float:
    """Squared Hilbert-Schmidt norm of ``<.>^{-s}`` on ``l^2(ball, C^3)``, summed site by site."""
    diag = np.repeat((1.0 + ball.norm.astype(float) ** 2) ** (-s / 2.0), 3)
    return float(np.sum(diag**2))


def hs_norm_sq_closed_form(s: float, radius: int) -> float:
    """``3 sum_{|y| <= R} <y>^{-2s}`` using the shell sizes ``3 * 2^{n-1}``."""
    total = 1.0
    for n in range(1, radius + 1):
        total += 3 * 2 ** (n - 1) * (1.0 + n * n) ** (-s)
    return 3.0 * total


# ---------------------------------------------------------------------------
# Convenience bundle
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Dynamics:
    """A coin field with the numerical settings used for evolution.

    Exposes the evolutions as bound callables so the spectral and scattering
    routines can take ``apply_U`` / ``apply_U_inv`` pairs.
    """

    cf: CoinField
    drop_tol: float = 0.0
    max_radius: int = MAX_KEY_RADIUS

    @property
    def exact(self) -> bool:
        return self.drop_tol == 0.0

    def U(self, phi: WalkState) -> WalkState:
        return apply_U(self.cf, phi, self.drop_tol, self.max_radius)

    def U_inv(self, phi: WalkState) -> WalkState:
        return apply_U_inv(self.cf, phi, self.drop_tol, self.max_radius)

    def U0(self, Phi: TripleState) -> TripleState:
        return apply_U0(self.cf, Phi, self.max_radius)

    def U0_inv(self, Phi: TripleState) -> TripleState:
        return apply_U0_inv(self.cf, Phi, self.max_radius)

    def Ut0(self, phi: WalkState) -> WalkState:
        return apply_Utilde0(self.cf, phi, self.max_radius)

    def Ut0_inv(self, phi: WalkState) -> WalkState:
        return apply_Utilde0_inv(self.cf, phi, self.max_radius)

    def S(self, phi: WalkState) -> WalkState:
        return apply_S(phi, self.max_radius)

    def S_inv(self, phi: WalkState) -> WalkState:
        return apply_S_inv(phi, self.max_radius)

    def rotated(self, theta: float) -> tuple[Callable, Callable]:
        """``(theta U, (theta U)^{-1})`` for the unit-modulus factor ``exp(i theta)``."""
        z = np.exp(1j * theta)
        return (lambda phi: self.U(phi) * z), (lambda phi: self.U_inv(phi) * np.conj(z))
