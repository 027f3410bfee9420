"""
Sparse states on l^2(T, C^3) and on the three-channel space H + H + H.

A :class:`WalkState` stores a sorted array of site keys and an ``(n, 3)``
complex amplitude array, one row per populated site. Sorting by key fixes the
summation order of every norm and inner product, so reductions are
bit-reproducible. Rows that are exactly zero are never stored; a positive
``drop_tol`` can be passed to :meth:`WalkState.pruned` for exploratory runs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Iterator, Mapping

import numpy as np

from .tree import TreeWord, ball, key_to_word, keys_chi_class, keys_norm

__all__ = ["WalkState", "TripleState", "random_local_state", "random_triple_state"]


def _prune(sites: np.ndarray, amp: np.ndarray, drop_tol: float = 0.0):
    if drop_tol > 0.0:
        keep = np.sum(np.abs(amp) ** 2, axis=1) > drop_tol**2
    else:
        keep = np.any(amp != 0, axis=1)
    if keep.all():
        return sites, amp
    return sites[keep], amp[keep]


@dataclass(frozen=True, eq=False)
class WalkState:
    """Finitely supported element of l^2(T, C^3)."""

    sites: np.ndarray
    amp: np.ndarray

    def __post_init__(self) -> None:
        sites = np.asarray(self.sites, dtype=np.int64)
        amp = np.asarray(self.amp, dtype=np.complex128).reshape(-1, 3)
        if sites.shape[0] != amp.shape[0]:
            raise ValueError("sites and amplitudes differ in length")
        if sites.size > 1 and np.any(np.diff(sites) <= 0):
            order = np.argsort(sites, kind="stable")
            sites, amp = sites[order], amp[order]
            if np.any(np.diff(sites) == 0):
                raise ValueError("duplicate sites")
        sites, amp = _prune(sites, amp)
        object.__setattr__(self, "sites", sites)
        object.__setattr__(self, "amp", amp)

    # -- construction -------------------------------------------------------

    @classmethod
    def zero(cls) -> "WalkState":
        return cls(np.zeros(0, dtype=np.int64), np.zeros((0, 3), dtype=np.complex128))

    @classmethod
    def delta(cls, site: TreeWord | str | int, spin: int, value: complex = 1.0) -> "WalkState":
        """The basis vector ``value * delta_site (x) e_spin`` (spin is 1-based)."""
        key = _site_key(site)
        amp = np.zeros((1, 3), dtype=np.complex128)
        amp[0, spin - 1] = value
        return cls(np.array([key], dtype=np.int64), amp)

    @classmethod
    def from_dict(cls, data: Mapping) -> "WalkState":
        """Build from ``{site: 3-vector}``; sites may be words, text or keys."""
        if not data:
            return cls.zero()
        sites = np.array([_site_key(s) for s in data], dtype=np.int64)
        amp = np.array([np.asarray(v, dtype=np.complex128).reshape(3) for v in data.values()])
        return cls(sites, amp)

    @classmethod
    def _raw(cls, sites: np.ndarray, amp: np.ndarray) -> "WalkState":
        # sites already sorted and unique
        obj = object.__new__(cls)
        sites, amp = _prune(sites, amp)
        object.__setattr__(obj, "sites", sites)
        object.__setattr__(obj, "amp", amp)
        return obj

    # -- queries ------------------------------------------------------------

    def __len__(self) -> int:
        return int(self.sites.size)

    @property
    def support_radius(self) -> int:
        if self.sites.size == 0:
            return 0
        return int(keys_norm(self.sites[-1:])[0])

    @property
    def min_radius(self) -> int:
        if self.sites.size == 0:
            return 0
        return int(keys_norm(self.sites[:1])[0])

    def norm2(self) -> float:
        return float(np.sum(self.amp.real**2 + self.amp.imag**2))

    def norm(self) -> float:
        return float(np.sqrt(self.norm2()))

    def at(self, site) -> np.ndarray:
        key = _site_key(site)
        pos = np.searchsorted(self.sites, key)
        if pos < self.sites.size and self.sites[pos] == key:
            return self.amp[pos].copy()
        return np.zeros(3, dtype=np.complex128)

    def words(self) -> list[TreeWord]:
        return [key_to_word(int(k)) for k in self.sites]

    def to_dict(self) -> dict[TreeWord, np.ndarray]:
        return {key_to_word(int(k)): a.copy() for k, a in zip(self.sites, self.amp)}

    def inner(self, other: "WalkState") -> complex:
        """``<self, other>``, antilinear in ``self``."""
        common, ia, ib = np.intersect1d(self.sites, other.sites, assume_unique=True, return_indices=True)
        if common.size == 0:
            return 0j
        return complex(np.sum(np.conj(self.amp[ia]) * other.amp[ib]))

    # -- arithmetic ---------------------------------------------------------

    def _combine(self, other: "WalkState", sign: float) -> "WalkState":
        if other.sites.size == 0:
            return self
        if self.sites.size == 0:
            return other if sign > 0 else -other
        sites = np.union1d(self.sites, other.sites)
        amp = np.zeros((sites.size, 3), dtype=np.complex128)
        amp[np.searchsorted(sites, self.sites)] = self.amp
        pos = np.searchsorted(sites, other.sites)
        if sign > 0:
            amp[pos] += other.amp
        else:
            amp[pos] -= other.amp
        return WalkState._raw(sites, amp)

    def __add__(self, other: "WalkState") -> "WalkState":
        return self._combine(other, 1.0)

    def __sub__(self, other: "WalkState") -> "WalkState":
        return self._combine(other, -1.0)

    def __neg__(self) -> "WalkState":
        return WalkState._raw(self.sites, -self.amp)

    def __mul__(self, c: complex) -> "WalkState":
        return WalkState._raw(self.sites, self.amp * c)

    __rmul__ = __mul__

    def __truediv__(self, c: complex) -> "WalkState":
        return WalkState._raw(self.sites, self.amp / c)

    # -- restrictions -------------------------------------------------------

    def restrict(self, mask: np.ndarray) -> "WalkState":
        """Keep only the rows selected by a boolean mask over ``sites``."""
        return WalkState._raw(self.sites[mask], self.amp[mask])

    def restrict_class(self, k: int) -> "WalkState":
        """Multiplication by the indicator of partition class ``k``."""
        return self.restrict(keys_chi_class(self.sites) == k)

    def restrict_norm(self, lo: int = 0, hi: int | None = None) -> "WalkState":
        n = keys_norm(self.sites)
        mask = n >= lo
        if hi is not None:
            mask &= n <= hi
        return self.restrict(mask)

    def scale_sites(self, weights: np.ndarray) -> "WalkState":
        """Multiply row ``x`` by ``weights[x]`` (shape ``(n,)`` or ``(n, 3)``)."""
        w = np.asarray(weights)
        if w.ndim == 1:
            w = w[:, None]
        return WalkState._raw(self.sites, self.amp * w)

    def pruned(self, drop_tol: float) -> "WalkState":
        sites, amp = _prune(self.sites, self.amp, drop_tol)
        return WalkState._raw(sites, amp)

    def max_abs_diff(self, other: "WalkState") -> float:
        d = self - other
        return float(np.max(np.abs(d.amp))) if len(d) else 0.0

    def equals(self, other: "WalkState") -> bool:
        """Exact equality of supports and amplitudes."""
        return (
            self.sites.shape == other.sites.shape
            and bool(np.all(self.sites == other.sites))
            and bool(np.all(self.amp == other.amp))
        )

    # -- I/O ----------------------------------------------------------------

    def to_jsonl(self) -> str:
        lines = []
        for k, a in zip(self.sites, self.amp):
            rec = {"site": str(key_to_word(int(k))), "amp": [[float(z.real), float(z.imag)] for z in a]}
            lines.append(json.dumps(rec))
        return "\n".join(lines) + ("\n" if lines else "")

    @classmethod
    def from_jsonl(cls, text: str) -> "WalkState":
        data = {}
        for line in text.splitlines():
            if not line.strip():
                continue
            rec = json.loads(line)
            word = TreeWord.parse(rec["site"])
            if word in data:
                raise ValueError(f"duplicate site {word}")
            data[word] = [complex(re, im) for re, im in rec["amp"]]
        return cls.from_dict(data)

    def __repr__(self) -> str:
        return f"WalkState(sites={len(self)}, radius={self.support_radius}, norm={self.norm():.6g})"


@dataclass(frozen=True, eq=False)
class TripleState:
    """Element ``(phi_1, phi_2, phi_3)`` of the three-channel space."""

    components: tuple[WalkState, WalkState, WalkState]

    def __post_init__(self) -> None:
        comps = tuple(self.components)
        if len(comps) != 3:
            raise ValueError("a TripleState has exactly three components")
        object.__setattr__(self, "components", comps)

    @classmethod
    def zero(cls) -> "TripleState":
        z = WalkState.zero()
        return cls((z, z, z))

    @classmethod
    def single(cls, k: int, phi: WalkState) -> "TripleState":
        """``phi`` placed in channel ``k`` (1-based), zeros elsewhere."""
        if k not in (1, 2, 3):
            raise ValueError(f"channel must be 1, 2 or 3, got {k}")
        comps = [WalkState.zero()] * 3
        comps[k - 1] = phi
        return cls(tuple(comps))

    @classmethod
    def diagonal(cls, phi: WalkState) -> "TripleState":
        return cls((phi, phi, phi))

    def __getitem__(self, k: int) -> WalkState:
        return self.components[k]

    def __iter__(self) -> Iterator[WalkState]:
        return iter(self.components)

    def map(self, f: Callable[[WalkState], WalkState]) -> "TripleState":
        return TripleState(tuple(f(c) for c in self.components))

    def norm2(self) -> float:
        return float(sum(c.norm2() for c in self.components))

    def norm(self) -> float:
        return float(np.sqrt(self.norm2()))

    def inner(self, other: "TripleState") -> complex:
        return complex(sum(a.inner(b) for a, b in zip(self.components, other.components)))

    @property
    def support_radius(self) -> int:
        return max(c.support_radius for c in self.components)

    @property
    def min_radius(self) -> int:
        radii = [c.min_radius for c in self.components if len(c)]
        return min(radii) if radii else 0

    def __len__(self) -> int:
        return sum(len(c) for c in self.components)

    def __add__(self, other: "TripleState") -> "TripleState":
        return TripleState(tuple(a + b for a, b in zip(self.components, other.components)))

    def __sub__(self, other: "TripleState") -> "TripleState":
        return TripleState(tuple(a - b for a, b in zip(self.components, other.components)))

    def __neg__(self) -> "TripleState":
        return self.map(lambda c: -c)

    def __mul__(self, c: complex) -> "TripleState":
        return self.map(lambda x: x * c)

    __rmul__ = __mul__

    def __truediv__(self, c: complex) -> "TripleState":
        return self.map(lambda x: x / c)

    def restrict_norm(self, lo: int = 0, hi: int | None = None) -> "TripleState":
        return self.map(lambda c: c.restrict_norm(lo, hi))

    def pruned(self, drop_tol: float) -> "TripleState":
        return self.map(lambda c: c.pruned(drop_tol))

    def max_abs_diff(self, other: "TripleState") -> float:
        return max(a.max_abs_diff(b) for a, b in zip(self.components, other.components))

    def equals(self, other: "TripleState") -> bool:
        return all(a.equals(b) for a, b in zip(self.components, other.components))

    def __repr__(self) -> str:
        return f"TripleState(sites={[len(c) for c in self.components]}, norm={self.norm():.6g})"


def _site_key(site) -> int:
    if isinstance(site, TreeWord):
        return site.key
    if isinstance(site, str):
        return TreeWord.parse(site).key
    if isinstance(site, (int, np.integer)):
        return int(site)
    return TreeWord(tuple(site)).key


def random_local_state(
    rng: np.random.Generator,
    radius: int = 2,
    n_sites: int | None = None,
    min_radius: int = 0,
    normalize: bool = True,
) -> WalkState:
    """Gaussian random amplitudes on random sites with ``min_radius <= |x| <= radius``."""
    b = ball(radius)
    pool = b.keys[b.norm >= min_radius]
    if n_sites is None or n_sites >= pool.size:
        chosen = pool
    else:
        chosen = rng.choice(pool, size=n_sites, replace=False)
    amp = rng.standard_normal((chosen.size, 3)) + 1j * rng.standard_normal((chosen.size, 3))
    phi = WalkState(np.sort(chosen), amp[np.argsort(chosen)])
    return phi / phi.norm() if normalize else phi


def random_triple_state(rng: np.random.Generator, radius: int = 2, n_sites: int | None = None) -> TripleState:
    comps = tuple(random_local_state(rng, radius, n_sites, normalize=False) for _ in range(3))
    t = TripleState(comps)
    return t / t.norm()
