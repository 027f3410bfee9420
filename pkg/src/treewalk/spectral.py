"""
Spectral diagnostics on the unit circle.

Nothing here diagonalizes the infinite operator. Spectral projections are
replaced by smooth arc filters ``eta(U) = sum_n eta_n U^n`` of finite degree,
spectral measures by their moments ``c_n = <phi, U^n phi>``, and eigenvalues by
modulus-one eigenpairs of ``U`` truncated to a ball that do not touch its rim.

The evolution is passed in as a pair of callables ``(apply_U, apply_U_inv)``
so the same routines serve ``U``, ``U_0`` (on triple states) and ``Ut_0``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from .coins import CoinField
from .conjugate import commutator_form
from .operators import spin_pair, weight_bracket
from .states import TripleState, WalkState
from .tree import BallIndex, ball, word_to_key

__all__ = [
    "SpectralWindow",
    "ArcFilter",
    "MomentSequence",
    "moments",
    "density_estimate",
    "kernel_weights",
    "arc_filter_apply",
    "MourreReport",
    "mourre_rayleigh",
    "SmoothSumReport",
    "smooth_sum_diagnostic",
    "truncated_matrix",
    "ScanCandidate",
    "point_spectrum_scan",
    "write_curve_csv",
    "outward_probe",
    "MourreSweep",
    "mourre_sweep",
]

Evolution = Callable[[object], object]
TWO_PI = 2.0 * math.pi


def _wrap(theta):
    """Map angles to ``(-pi, pi]``."""
    return np.pi - np.mod(np.pi - np.asarray(theta, dtype=float), TWO_PI)


@dataclass(frozen=True)
class SpectralWindow:
    """Open arc ``{theta' : |arg(theta - theta')| < half_width}`` around ``center``."""

    center: float
    half_width: float

    def __post_init__(self) -> None:
        if not 0.0 < self.half_width <= math.pi:
            raise ValueError(f"half_width must lie in (0, pi], got {self.half_width}")
        object.__setattr__(self, "center", float(_wrap(self.center)))

    def distance(self, theta) -> np.ndarray:
        return np.abs(_wrap(np.asarray(theta, dtype=float) - self.center))

    def contains(self, theta) -> np.ndarray:
        return self.distance(theta) < self.half_width

    def rotated(self, alpha: float) -> "SpectralWindow":
        return SpectralWindow(self.center + alpha, self.half_width)


def _smoothstep(u: np.ndarray) -> np.ndarray:
    """C-infinity step: 0 for u <= 0, 1 for u >= 1."""
    u = np.clip(u, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(u > 0, np.exp(-1.0 / np.where(u > 0, u, 1.0)), 0.0)
        b = np.where(u < 1, np.exp(-1.0 / np.where(u < 1, 1.0 - u, 1.0)), 0.0)
    return a / (a + b)


def _bump(window: SpectralWindow, theta: np.ndarray) -> np.ndarray:
    """1 on the inner half of the window, 0 outside, smooth in between."""
    d = window.distance(theta)
    eps = window.half_width
    return 1.0 - _smoothstep((d - eps / 2.0) / (eps / 2.0))


@dataclass(frozen=True, eq=False)
class ArcFilter:
    """Trigonometric polynomial approximating a smooth bump on a window.

    ``coeffs[n + degree]`` holds ``eta_n`` for ``-degree <= n <= degree``;
    ``filter_bias`` is the sup-norm distance of the truncation to the ideal
    bump, measured on ``grid`` points.
    """

    window: SpectralWindow | None
    degree: int
    coeffs: np.ndarray
    filter_bias: float
    squared: bool = False

    GRID = 8192

    @classmethod
    def make(cls, window: SpectralWindow, degree: int, grid: int | None = None) -> "ArcFilter":
        return cls._from_function(window, degree, lambda t: _bump(window, t), grid)

    @classmethod
    def identity(cls) -> "ArcFilter":
        return cls(None, 0, np.ones(1, dtype=np.complex128), 0.0)

    @classmethod
    def _from_function(cls, window, degree, fn, grid=None, squared=False) -> "ArcFilter":
        if degree < 0:
            raise ValueError("degree must be nonnegative")
        grid = grid or max(cls.GRID, 16 * (2 * degree + 1))
        theta = TWO_PI * np.arange(grid) / grid
        values = fn(theta)
        hat = np.fft.fft(values) / grid
        n = np.arange(-degree, degree + 1)
        coeffs = hat[n % grid]
        # eta is real, so eta_{-n} = conj(eta_n); enforce it bit-exactly
        coeffs[:degree] = np.conj(coeffs[::-1][:degree])
        coeffs[degree] = coeffs[degree].real
        trunc = (np.exp(1j * np.outer(theta, n)) @ coeffs).real
        return cls(window, degree, coeffs, float(np.max(np.abs(trunc - values))), squared)

    def square(self) -> "ArcFilter":
        """Degree-``degree`` truncation of ``eta**2`` (not the square of the truncation)."""
        if self.window is None:
            return self
        w = self.window
        return ArcFilter._from_function(w, self.degree, lambda t: _bump(w, t) ** 2, squared=True)

    def rotated(self, alpha: float) -> "ArcFilter":
        """Filter for ``exp(i alpha) U`` on the rotated window: ``eta_n -> eta_n exp(-i n alpha)``."""
        n = np.arange(-self.degree, self.degree + 1)
        window = None if self.window is None else self.window.rotated(alpha)
        return ArcFilter(window, self.degree, self.coeffs * np.exp(-1j * n * alpha), self.filter_bias, self.squared)

    def coefficient(self, n: int) -> complex:
        if abs(n) > self.degree:
            return 0.0
        return complex(self.coeffs[n + self.degree])

    def __call__(self, theta) -> np.ndarray:
        n = np.arange(-self.degree, self.degree + 1)
        return (np.exp(1j * np.outer(np.atleast_1d(theta), n)) @ self.coeffs).real

    def ideal(self, theta) -> np.ndarray:
        if self.window is None:
            return np.ones_like(np.atleast_1d(theta), dtype=float)
        v = _bump(self.window, np.atleast_1d(theta))
        return v**2 if self.squared else v

    def describe(self) -> dict:
        return {
            "center": None if self.window is None else self.window.center,
            "half_width": None if self.window is None else self.window.half_width,
            "degree": self.degree,
            "filter_bias": self.filter_bias,
        }


def arc_filter_apply(f: ArcFilter, apply_U: Evolution, apply_U_inv: Evolution, phi):
    """``eta(U) phi = sum_{|n| <= N} eta_n U^n phi``, summed in the order 0, 1, -1, 2, -2, ..."""
    out = phi * f.coefficient(0)
    fwd = bwd = phi
    for n in range(1, f.degree + 1):
        fwd = apply_U(fwd)
        bwd = apply_U_inv(bwd)
        out = out + fwd * f.coefficient(n)
        out = out + bwd * f.coefficient(-n)
    return out


# ---------------------------------------------------------------------------
# Moments and densities
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MomentSequence:
    """``c_n = <phi, U^n phi>`` for ``-N <= n <= N``; ``values[n + N]``."""

    values: np.ndarray
    exact: bool
    source: str = ""

    @property
    def N(self) -> int:
        return (self.values.size - 1) // 2

    def __getitem__(self, n: int) -> complex:
        return complex(self.values[n + self.N])

    def truncate(self, N: int) -> "MomentSequence":
        if N > self.N:
            raise ValueError(f"only {self.N} moments available")
        return MomentSequence(self.values[self.N - N : self.N + N + 1].copy(), self.exact, self.source)


def moments(apply_U: Evolution, apply_U_inv: Evolution, phi, N: int, exact: bool = True, source: str = "") -> MomentSequence:
    """Moments up to order ``N`` from ``c_{a+b} = <U^{-a} phi, U^b phi>``.

    Only ``ceil(N/2)`` forward and ``floor(N/2)`` backward steps are taken.
    ``c_{-n}`` is set to ``conj(c_n)``; ``c_0 = ||phi||^2``.
    """
    fwd = [phi]
    for _ in range(N - N // 2):
        fwd.append(apply_U(fwd[-1]))
    bwd = [phi]
    for _ in range(N // 2):
        bwd.append(apply_U_inv(bwd[-1]))
    c = np.zeros(N + 1, dtype=np.complex128)
    c[0] = phi.norm2()
    for n in range(1, N + 1):
        a = n // 2
        c[n] = bwd[a].inner(fwd[n - a])
    values = np.concatenate([np.conj(c[:0:-1]), c])
    return MomentSequence(values, exact, source)


def kernel_weights(N: int, kernel: str = "jackson") -> np.ndarray:
    """Damping factors ``g_0..g_N`` of a positive kernel."""
    n = np.arange(N + 1, dtype=float)
    if kernel == "fejer":
        return 1.0 - n / (N + 1)
    if kernel == "jackson":
        # M = N + 2 keeps g_N > 0; with M = N + 1 the top weight vanishes
        M = N + 2
        g = ((M - n) * np.cos(np.pi * n / M) + np.sin(np.pi * n / M) / np.tan(np.pi / M)) / M
        return g
    raise ValueError(f"unknown kernel {kernel!r}")


def density_estimate(m: MomentSequence, grid_size: int = 512, kernel: str = "jackson") -> tuple[np.ndarray, np.ndarray]:
    """Smoothed spectral density ``(1/2pi) sum g_|n| c_n exp(-i n theta)`` on a uniform grid.

    Returns ``(theta, rho)`` with ``theta_j = 2 pi j / grid_size``. The mean
    of ``rho`` times ``2 pi`` equals ``c_0`` on the grid.
    """
    N = m.N
    if grid_size < 2 * N + 1:
        raise ValueError(f"grid_size must be at least {2 * N + 1}")
    g = kernel_weights(N, kernel)
    n = np.arange(-N, N + 1)
    damped = m.values * g[np.abs(n)]
    spec = np.zeros(grid_size, dtype=np.complex128)
    spec[n % grid_size] = damped
    # sum_n d_n exp(-i n theta_j) = fft(spec)_j
    rho = np.fft.fft(spec).real / TWO_PI
    theta = TWO_PI * np.arange(grid_size) / grid_size
    return theta, rho


# ---------------------------------------------------------------------------
# Mourre surrogate
# ---------------------------------------------------------------------------


@dataclass
class MourreReport:
    filter: dict
    quotients: list[float | None]
    imag_parts: list[float | None]
    probe_radii: list[int]
    skipped: list[int]

    @property
    def min_quotient(self) -> float:
        vals = [q for q in self.quotients if q is not None]
        return min(vals) if vals else float("nan")

    def to_dict(self) -> dict:
        return {
            "filter": self.filter,
            "min_quotient": self.min_quotient,
            "quotients": self.quotients,
            "imag_parts": self.imag_parts,
            "probe_min_radius": self.probe_radii,
            "skipped": self.skipped,
        }


def mourre_rayleigh(
    f: ArcFilter,
    probes: Sequence,
    apply_U: Evolution,
    apply_U_inv: Evolution,
    apply_A: Callable,
    degenerate: float = 1e-8,
) -> MourreReport:
    """Rayleigh quotients ``<psi, U^{-1}[A, U] psi> / ||psi||^2`` with ``psi = eta(U) phi``."""
    quotients, imags, radii, skipped = [], [], [], []
    for idx, phi in enumerate(probes):
        radii.append(int(phi.min_radius))
        psi = arc_filter_apply(f, apply_U, apply_U_inv, phi)
        n2 = psi.norm2()
        if math.sqrt(n2) < degenerate:
            quotients.append(None)
            imags.append(None)
            skipped.append(idx)
            continue
        q = psi.inner(commutator_form(apply_U, apply_U_inv, apply_A, psi)) / n2
        quotients.append(float(q.real))
        imags.append(float(q.imag))
    return MourreReport(f.describe(), quotients, imags, radii, skipped)


# ---------------------------------------------------------------------------
# Locally smooth partial sums
# ---------------------------------------------------------------------------


@dataclass
class SmoothSumReport:
    s: float
    filter: dict
    increments: np.ndarray
    partial_sums: np.ndarray
    tail_slope: float

    @property
    def flattening_ratio(self) -> float:
        """Last increment over the first two-sided one (``m = 1``)."""
        return float(self.increments[-1] / self.increments[1])

    def to_dict(self) -> dict:
        return {
            "s": self.s,
            "filter": self.filter,
            "N": int(self.increments.size - 1),
            "total": float(self.partial_sums[-1]),
            "tail_slope": self.tail_slope,
            "flattening_ratio": self.flattening_ratio,
        }


def _weighted_norm2(state, s: float) -> float:
    if isinstance(state, TripleState):
        return sum(weight_bracket(c, -s).norm2() for c in state)
    return weight_bracket(state, -s).norm2()


def smooth_sum_diagnostic(
    s: float,
    phi,
    f: ArcFilter,
    N: int,
    apply_U: Evolution,
    apply_U_inv: Evolution,
    fit_from: int | None = None,
) -> SmoothSumReport:
    """Partial sums ``P_m = sum_{|n| <= m} ||<.>^{-s} U^n psi||^2`` with ``psi = eta(U) phi``.

    ``increments[m] = P_m - P_{m-1}`` collects both ``n = m`` and ``n = -m``
    (a single term for ``m = 0``). ``tail_slope`` is the log-log slope of the
    increments over ``[fit_from, N]`` (default ``N // 4``).
    """
    psi = arc_filter_apply(f, apply_U, apply_U_inv, phi)
    inc = np.zeros(N + 1)
    inc[0] = _weighted_norm2(psi, s)
    fwd = bwd = psi
    for m in range(1, N + 1):
        fwd = apply_U(fwd)
        bwd = apply_U_inv(bwd)
        inc[m] = _weighted_norm2(fwd, s) + _weighted_norm2(bwd, s)
    lo = max(1, N // 4 if fit_from is None else fit_from)
    slope = _loglog_slope(np.arange(lo, N + 1), inc[lo:])
    return SmoothSumReport(float(s), f.describe(), inc, np.cumsum(inc), slope)


def _loglog_slope(n: np.ndarray, values: np.ndarray) -> float:
    mask = values > 0
    if mask.sum() < 2:
        return float("-inf") if not np.any(values) else float("nan")
    return float(np.polyfit(np.log(n[mask]), np.log(values[mask]), 1)[0])


# ---------------------------------------------------------------------------
# Point-spectrum scan
# ---------------------------------------------------------------------------


def truncated_matrix(cf: CoinField, b: BallIndex) -> scipy.sparse.csr_matrix:
    """``P U P`` on ``ball(R)`` as a sparse matrix; basis index ``3 * site + spin``.

    Mass leaving the ball is discarded, so the matrix is a contraction.
    """
    n = len(b.keys)
    C = cf.matrices(b.keys)
    odd = b.norm % 2 == 1
    rows, cols, vals = [], [], []
    src = np.arange(n)
    for t in range(3):
        i, j = spin_pair(t + 1)
        dest = np.where(odd, b.neighbor(i), b.neighbor(j))
        inside = dest >= 0
        for s in range(3):
            v = C[:, t, s]
            keep = inside & (v != 0)
            rows.append(3 * dest[keep] + t)
            cols.append(3 * src[keep] + s)
            vals.append(v[keep])
    return scipy.sparse.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(3 * n, 3 * n)
    )


@dataclass
class ScanCandidate:
    phase: float
    modulus: float
    boundary_weight: float
    stable: bool | None = None

    def to_dict(self) -> dict:
        return {
            "phase": self.phase,
            "modulus": self.modulus,
            "boundary_weight": self.boundary_weight,
            "stable": self.stable,
        }


def _candidates_at(cf: CoinField, radius: int, interior_margin: int, modulus_tol: float, boundary_tol: float) -> list[ScanCandidate]:
    b = ball(radius)
    M = truncated_matrix(cf, b)
    lam = scipy.linalg.eigvals(M.toarray(), overwrite_a=True, check_finite=False)
    big = lam[np.abs(lam) >= 1.0 - modulus_tol]
    if big.size == 0:
        return []
    rim = np.repeat(b.norm >= radius - interior_margin, 3)
    out = []
    dim = M.shape[0]
    rng = np.random.default_rng(0)
    for mu in big[np.argsort(np.angle(big), kind="stable")]:
        # inverse iteration with a slightly shifted pole
        shift = mu * (1.0 + 1e-10)
        lu = scipy.sparse.linalg.splu((M - shift * scipy.sparse.identity(dim, format="csr")).tocsc())
        v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
        for _ in range(3):
            v = lu.solve(v)
            v /= np.linalg.norm(v)
        w = float(np.sum(np.abs(v[rim]) ** 2))
        if w < boundary_tol:
            out.append(ScanCandidate(float(np.angle(mu)), float(abs(mu)), w))
    return out


def point_spectrum_scan(
    cf: CoinField,
    radius: int,
    interior_margin: int = 2,
    modulus_tol: float = 1e-6,
    boundary_tol: float = 1e-4,
    stability_tol: float = 1e-3,
    compare_radius: int | None = None,
) -> list[ScanCandidate]:
    """Eigenphases of ``U`` truncated to ``ball(radius)`` that look like bound states.

    Keeps eigenvalues with modulus ``>= 1 - modulus_tol`` whose eigenvector
    carries relative mass ``< boundary_tol`` on norms ``>= radius -
    interior_margin``. Each candidate is marked stable when the scan at
    ``compare_radius`` (default ``radius + 1``; pass a negative value to skip)
    has a candidate within ``stability_tol`` in phase. Sorted by phase.
    """
    if radius > 10:
        raise ValueError("dense scans are limited to radius <= 10")
    found = _candidates_at(cf, radius, interior_margin, modulus_tol, boundary_tol)
    other_radius = radius + 1 if compare_radius is None else compare_radius
    if found and other_radius >= 0:
        other = np.array([c.phase for c in _candidates_at(cf, other_radius, interior_margin, modulus_tol, boundary_tol)])
        for c in found:
            c.stable = bool(other.size and np.min(np.abs(_wrap(other - c.phase))) <= stability_tol)
    return found


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------


def write_curve_csv(path: str | Path, header: Sequence[str], *columns: np.ndarray) -> None:
    """Write columns as CSV with full double precision (``repr`` formatting)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in zip(*columns):
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else int(x) for x in row])


# ---------------------------------------------------------------------------
# Mourre sweep over probe radii
# ---------------------------------------------------------------------------


def outward_probe(r: int, rng: np.random.Generator, n_sites: int = 4) -> WalkState:
    """Normalized random state on sites of norm ``r`` ending in all three letters.

    Every ``|x|_k`` is at most 2 on the support, so each spin component moves
    at most two steps inward under ``S`` or ``S^{-1}`` before it escapes.
    """
    if r < 3:
        raise ValueError("outward probes need r >= 3")
    keys = set()
    while len(keys) < n_sites:
        tail = [int(t) for t in rng.permutation(3) + 1]
        head = [int(rng.integers(1, 4))]
        while len(head) < r - 3:
            head.append((head[-1] - 1 + int(rng.integers(1, 3))) % 3 + 1)
        head = head[: r - 3]
        if head and head[-1] == tail[0]:
            tail[0], tail[1] = tail[1], tail[0]
        keys.add(word_to_key(head + tail))
    keys = np.array(sorted(keys), dtype=np.int64)
    amp = rng.standard_normal((keys.size, 3)) + 1j * rng.standard_normal((keys.size, 3))
    phi = WalkState(keys, amp)
    return phi / phi.norm()


@dataclass
class MourreSweep:
    radii: list[int]
    defects: list[float]
    min_quotients: list[float]
    slope: float | None
    constant: float

    @property
    def bound_holds(self) -> bool:
        return all(q >= 2.0 - self.constant / r for r, q in zip(self.radii, self.min_quotients))

    def to_dict(self) -> dict:
        return {
            "radii": self.radii,
            "defects": self.defects,
            "min_quotients": self.min_quotients,
            "defect_exponent": self.slope,
            "constant": self.constant,
            "bound_holds": self.bound_holds,
        }


def mourre_sweep(
    cf: CoinField,
    radii: Sequence[int],
    windows: Sequence[SpectralWindow],
    degree: int,
    n_probes: int = 4,
    seed: int = 0,
    constant: float | None = None,
) -> MourreSweep:
    """Filtered Rayleigh quotients of ``U^{-1}[A~, U]`` on outward probes at each radius.

    ``defects[i] = max |q - 2|`` over windows and probes at ``radii[i]``; the
    slope is the log-log fit of the defects against the radius. The default
    ``constant`` is ``12 * decay_constant``: the local commutator obeys
    ``||C(x)^{-1} [W(x), C(x)]|| <= 2 max|W(x)| ||C(x) - C_k|| <= 6 c <x>^{-1}``
    and the filtered probes reach down to about half their radius.
    """
    from .conjugate import apply_A_tilde
    from .operators import apply_U, apply_U_inv

    rng = np.random.default_rng(seed)
    defects, mins = [], []
    for r in radii:
        d, qmin = 0.0, math.inf
        probes = [outward_probe(r, rng) for _ in range(n_probes)]
        for w in windows:
            f = ArcFilter.make(w, degree)
            rep = mourre_rayleigh(f, probes, lambda p: apply_U(cf, p), lambda p: apply_U_inv(cf, p), apply_A_tilde)
            vals = [q for q in rep.quotients if q is not None]
            if vals:
                d = max(d, max(abs(q - 2.0) for q in vals))
                qmin = min(qmin, min(vals))
        defects.append(d)
        mins.append(qmin)
    rs = np.array(radii, dtype=float)
    ds = np.array(defects)
    slope = float(np.polyfit(np.log(rs[ds > 0]), np.log(ds[ds > 0]), 1)[0]) if np.sum(ds > 0) >= 2 else None
    c = 12.0 * cf.decay_constant if constant is None else constant
    return MourreSweep(list(map(int, radii)), defects, mins, slope, c)
