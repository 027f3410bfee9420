"""
Finite-n wave operators for the walk and its three free comparison dynamics.

Modes
-----
``triple``  ``W_n = U^{-n} J U_0^n`` on triple states
``shift``   ``a_n = U^{-n} J_n S^n`` with ``J_n = (sum_k chi_k C_k)^n``
``tilde``   ``W_n = U^{-n} Ut_0^n``

Direction ``-`` is time reversal: ``n`` is replaced by ``-n`` everywhere, so
``W_n = U^n J U_0^{-n}`` and so on.

Increments use exact telescoping. For the triple mode

    W_{n+1} - W_n = U^{-(n+1)} V U_0^n,

so ``||W_{n+1} Phi - W_n Phi|| = ||V U_0^n Phi||`` and only the local free
orbit has to be computed. ``direct=True`` evaluates the iterates literally
instead, which is useful as a cross-check at small ``n``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .coins import CoinField
from .operators import (
    apply_C0_power,
    apply_J,
    apply_J_star,
    apply_S,
    apply_S_inv,
    apply_U,
    apply_U0,
    apply_U0_inv,
    apply_U_inv,
    apply_Utilde0,
    apply_Utilde0_inv,
)
from .states import TripleState, WalkState
from .tree import keys_chi_class

__all__ = [
    "WaveMode",
    "ConvergenceRecord",
    "wave_apply",
    "adjoint_wave_apply",
    "free_image",
    "convergence_study",
    "intertwining_defect",
    "chain_and_completeness_check",
    "channel_masses",
]

TAGS = ("triple", "shift", "tilde")


@dataclass(frozen=True)
class WaveMode:
    tag: str = "triple"
    direction: str = "+"

    def __post_init__(self) -> None:
        if self.tag not in TAGS:
            raise ValueError(f"unknown wave mode {self.tag!r}; expected one of {TAGS}")
        if self.direction not in ("+", "-"):
            raise ValueError("direction must be '+' or '-'")

    @property
    def sign(self) -> int:
        return 1 if self.direction == "+" else -1

    @property
    def takes_triple(self) -> bool:
        return self.tag == "triple"

    def __str__(self) -> str:
        return f"{self.tag}{self.direction}"


# ---------------------------------------------------------------------------
# Building blocks
# ---------------------------------------------------------------------------


def _power(step, step_inv, x, k: int):
    f = step if k >= 0 else step_inv
    for _ in range(abs(k)):
        x = f(x)
    return x


def _U_power(cf: CoinField, phi: WalkState, k: int, drop_tol: float = 0.0) -> WalkState:
    return _power(lambda p: apply_U(cf, p, drop_tol), lambda p: apply_U_inv(cf, p, drop_tol), phi, k)


def _J_index(cf: CoinField, phi: WalkState, k: int) -> WalkState:
    """``J_k phi`` (``k`` may be negative)."""
    return apply_C0_power(cf, phi, k)


def free_image(mode: WaveMode, cf: CoinField, x, k: int, j_index: int | None = None) -> WalkState:
    """Identified free evolution ``I F^k x`` in ``H``.

    ``J U_0^k`` for the triple mode, ``J_{j} S^k`` for the shift mode (``j``
    defaults to ``k``) and ``Ut_0^k`` for the tilde mode.
    """
    if mode.tag == "triple":
        return apply_J(_power(lambda P: apply_U0(cf, P), lambda P: apply_U0_inv(cf, P), x, k))
    if mode.tag == "shift":
        moved = _power(apply_S, apply_S_inv, x, k)
        return _J_index(cf, moved, k if j_index is None else j_index)
    return _power(lambda p: apply_Utilde0(cf, p), lambda p: apply_Utilde0_inv(cf, p), x, k)


def _check_input(mode: WaveMode, x) -> None:
    if mode.takes_triple and not isinstance(x, TripleState):
        raise TypeError("triple mode acts on TripleState inputs")
    if not mode.takes_triple and not isinstance(x, WalkState):
        raise TypeError(f"{mode.tag} mode acts on WalkState inputs")


def wave_apply(mode: WaveMode, n: int, x, cf: CoinField, drop_tol: float = 0.0) -> WalkState:
    """Finite iterate ``W_n x`` (see module docstring)."""
    _check_input(mode, x)
    k = mode.sign * n
    return _U_power(cf, free_image(mode, cf, x, k), -k, drop_tol)


def adjoint_wave_apply(n: int, psi: WalkState, cf: CoinField, mode: WaveMode = WaveMode(), drop_tol: float = 0.0):
    """``W_n^* psi``; a triple state for the triple mode, a walk state otherwise.

    ``U_0^{-n} J^* U^n`` for the triple mode, ``S^{-n} J_n^* U^n`` for the
    shift mode and ``Ut_0^{-n} U^n`` for the tilde mode. The projection on the
    absolutely continuous subspace of ``U`` is not applied.
    """
    k = mode.sign * n
    moved = _U_power(cf, psi, k, drop_tol)
    if mode.tag == "triple":
        return _power(lambda P: apply_U0(cf, P), lambda P: apply_U0_inv(cf, P), apply_J_star(moved), -k)
    if mode.tag == "shift":
        return _power(apply_S, apply_S_inv, _J_index(cf, moved, -k), -k)
    return _power(lambda p: apply_Utilde0(cf, p), lambda p: apply_Utilde0_inv(cf, p), moved, -k)


def _increment(mode: WaveMode, cf: CoinField, x, n: int) -> float:
    """``||W_{n+1} x - W_n x||`` from the telescoped form ``||I F^{k+s} x - U^s I F^k x||``."""
    # backward increments are multiplied by U^{-1} so that U and the free
    # dynamics run in the same direction (bit-identical where they agree)
    if mode.sign > 0:
        a = free_image(mode, cf, x, n + 1)
        b = apply_U(cf, free_image(mode, cf, x, n))
    else:
        a = free_image(mode, cf, x, -n - 1)
        b = apply_U_inv(cf, free_image(mode, cf, x, -n))
    return (a - b).norm()


# ---------------------------------------------------------------------------
# Convergence study
# ---------------------------------------------------------------------------


@dataclass
class ConvergenceRecord:
    mode: WaveMode
    n: np.ndarray
    increments: np.ndarray
    isometry_defects: np.ndarray
    input_norm: float
    fit_window: tuple[int, int]
    slope: float | None
    tail_from: int
    tail_sum: float
    thresholds: dict = field(default_factory=dict)

    @property
    def exact_zero_tail(self) -> bool:
        return bool(np.all(self.increments[self.n >= self.tail_from] == 0.0))

    @property
    def verdict(self) -> str:
        if self.exact_zero_tail:
            return "converged"
        slope_ok = self.slope is not None and self.slope <= self.thresholds.get("slope_max", -1.3)
        tail_ok = self.tail_sum <= self.thresholds.get("tail_max", 0.05) * self.input_norm
        return "converged" if slope_ok and tail_ok else "not-converged"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "increment", "isometry_defect"])
        for n, d, iso in zip(self.n, self.increments, self.isometry_defects):
            w.writerow([int(n), repr(float(d)), repr(float(iso))])
        return buf.getvalue()

    def summary(self) -> dict:
        return {
            "mode": str(self.mode),
            "n_max": int(self.n[-1]),
            "input_norm": self.input_norm,
            "fit_window": list(self.fit_window),
            "slope": self.slope,
            "tail_from": self.tail_from,
            "tail_sum": self.tail_sum,
            "exact_zero_tail": self.exact_zero_tail,
            "thresholds": self.thresholds,
            "verdict": self.verdict,
        }


def _fit_slope(n: np.ndarray, d: np.ndarray) -> float | None:
    mask = d > 0
    if mask.sum() < 2:
        return None
    return float(np.polyfit(np.log(n[mask]), np.log(d[mask]), 1)[0])


def convergence_study(
    mode: WaveMode,
    x,
    n_max: int,
    cf: CoinField,
    fit_window: tuple[int, int] | None = None,
    tail_from: int = 8,
    slope_max: float = -1.3,
    tail_max: float = 0.05,
    direct: bool = False,
) -> ConvergenceRecord:
    """Increments and isometry defects of ``W_n x`` for ``0 <= n <= n_max``.

    ``increments[n] = ||W_{n+1} x - W_n x||``; the isometry defect is
    ``| ||W_n x|| - ||x|| |`` and equals ``| ||I F^{+-n} x|| - ||x|| |`` because
    ``U`` is unitary. The slope is fitted on ``fit_window`` (default
    ``[4, n_max]``) in log-log scale and the tail sum runs over ``n >= tail_from``.
    """
    _check_input(mode, x)
    norm = x.norm()
    ns = np.arange(n_max + 1)
    inc = np.zeros(n_max + 1)
    iso = np.zeros(n_max + 1)
    prev = wave_apply(mode, 0, x, cf) if direct else None
    for n in ns:
        if direct:
            nxt = wave_apply(mode, int(n) + 1, x, cf)
            inc[n] = (nxt - prev).norm()
            iso[n] = abs(prev.norm() - norm)
            prev = nxt
        else:
            inc[n] = _increment(mode, cf, x, int(n))
            iso[n] = abs(free_image(mode, cf, x, mode.sign * int(n)).norm() - norm)
    lo, hi = fit_window if fit_window is not None else (min(4, n_max), n_max)
    window = (ns >= lo) & (ns <= hi)
    slope = _fit_slope(ns[window].astype(float), inc[window])
    tail = float(inc[ns >= tail_from].sum())
    thresholds = {"slope_max": slope_max, "tail_max": tail_max}
    return ConvergenceRecord(mode, ns, inc, iso, norm, (int(lo), int(hi)), slope, tail_from, tail, thresholds)


def intertwining_defect(mode: WaveMode, x, n: int, cf: CoinField, m: int = 1) -> float:
    """``||W_n F^m x - U^m W_n x||`` for the monomial ``z^m``.

    Multiplying by a unitary power of ``U`` reduces this to
    ``||I F^{n+m} x - U^m I F^n x||`` (direction ``+``) or
    ``||U^{-m} I F^{m-n} x - I F^{-n} x||`` (direction ``-``). For ``m = 1``
    in direction ``+`` it is the increment ``||W_{n+1} x - W_n x||``.

    ``a_n`` does not intertwine ``S`` with ``U`` because ``J_n`` depends on
    ``n``; since ``a_n phi = W_n (phi, phi, phi)``, the shift mode is tested
    through the triple mode on the diagonal lift, with ``F = U_0``.
    """
    _check_input(mode, x)
    if m < 1:
        raise ValueError("m must be a positive integer")
    if mode.tag == "shift":
        mode, x = WaveMode("triple", mode.direction), TripleState.diagonal(x)
    if mode.sign > 0:
        a = free_image(mode, cf, x, n + m)
        b = _U_power(cf, free_image(mode, cf, x, n), m)
    else:
        a = _U_power(cf, free_image(mode, cf, x, m - n), -m)
        b = free_image(mode, cf, x, -n)
    return (a - b).norm()


def chain_and_completeness_check(
    inputs: Sequence[WalkState], n: int, cf: CoinField, direction: str = "+", drop_tol: float = 1e-14
) -> dict:
    """Identification, reconstruction and chain-rule defects on walk-state inputs.

    * ``jj_star_defect``: ``max ||J J^* phi - phi||`` (zero means the condition
      on ``J J' - 1`` holds trivially)
    * ``reconstruction_defect``: ``max ||a_n b_n chi - chi||`` for ``chi = a_n phi``
    * ``chain_rule_defect``: ``max ||U^{-n} J J^* U^n phi - phi||``

    Evolving forward and back leaves rounding noise on exponentially many
    sites; amplitudes below ``drop_tol`` are pruned during these round trips.
    """
    mode = WaveMode("shift", direction)
    k = mode.sign * n
    jj = rec = chain = 0.0
    for phi in inputs:
        jj = max(jj, (apply_J(apply_J_star(phi)) - phi).norm())
        chi = wave_apply(mode, n, phi, cf, drop_tol)
        back = wave_apply(mode, n, adjoint_wave_apply(n, chi, cf, mode, drop_tol), cf, drop_tol)
        rec = max(rec, (back - chi).norm())
        moved = _U_power(cf, phi, k, drop_tol)
        chain = max(chain, (_U_power(cf, apply_J(apply_J_star(moved)), -k, drop_tol) - phi).norm())
    return {
        "n": n,
        "direction": direction,
        "drop_tol": drop_tol,
        "inputs": len(inputs),
        "jj_star_defect": jj,
        "reconstruction_defect": rec,
        "chain_rule_defect": chain,
    }


def channel_masses(phi: WalkState, n: int, cf: CoinField, drop_tol: float = 0.0) -> dict:
    """Branch norms ``||chi_k U^t phi||`` for ``0 <= t <= n``.

    ``window_variation`` is ``max_k |mean_{last 4 steps} M_k - M_k(n)|``, the
    deviation of the current masses from their Cesaro mean over the final
    window; ``raw_variation`` is the largest change within that window.
    """
    rows = np.zeros((n + 1, 3))
    psi = phi
    for t in range(n + 1):
        if t:
            psi = apply_U(cf, psi, drop_tol)
        cls = keys_chi_class(psi.sites)
        for k in (1, 2, 3):
            a = psi.amp[cls == k]
            rows[t, k - 1] = math.sqrt(float(np.sum(a.real**2 + a.imag**2)))
    window = rows[max(0, n - 3) :]
    return {
        "masses": rows,
        "window_variation": float(np.max(np.abs(window.mean(axis=0) - rows[-1]))),
        "raw_variation": float(np.max(np.abs(window - rows[-1]))),
    }
