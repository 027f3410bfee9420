"""
Combinatorics of the homogeneous tree of degree 3.

The tree is the Cayley graph of the free product Z2 * Z2 * Z2 with generators
a1, a2, a3. Elements are reduced words over the letters {1, 2, 3} (no two equal
adjacent letters); the empty word is the neutral element ``e``.

Two representations are used:

- :class:`TreeWord`, a small immutable value type used at API boundaries and in
  configuration files ("e", "1213", ...).
- integer *site keys* (``int64``), used by every vectorized routine. A key
  stores a sentinel bit, two bits for the first letter and one "step" bit per
  further letter. A step bit ``b`` means the next letter is ``last + 1 + b``
  (mod 3, letters counted from 0). With this layout translation, word norm,
  parity, branch and last letter are all closed-form integer operations.
  Numeric key order is a breadth-first order, so sorting keys gives a
  deterministic summation order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "CapacityError",
    "TreeWord",
    "SiteClassification",
    "BallIndex",
    "reduce",
    "right_translate",
    "word_norm",
    "modified_norm",
    "classify",
    "ball",
    "ball_size",
    "E_KEY",
    "MAX_KEY_RADIUS",
    "MAX_BALL_RADIUS",
    "keys_norm",
    "keys_last_letter",
    "keys_first_letter",
    "keys_chi_class",
    "keys_translate",
    "keys_modified_norm",
    "word_to_key",
    "key_to_word",
]

E_KEY = 1
MAX_KEY_RADIUS = 60
MAX_BALL_RADIUS = 22


class CapacityError(RuntimeError):
    """Raised when a computation would exceed a configured size limit."""


# ---------------------------------------------------------------------------
# Scalar word API
# ---------------------------------------------------------------------------


def reduce(letters: Iterable[int]) -> "TreeWord":
    """Return the reduced representative of a product of generators.

    Cancellation of equal adjacent letters is done with a stack, so a single
    left-to-right pass reaches the fixed point.

    >>> reduce([1, 2, 2, 3])
    TreeWord('13')
    >>> reduce([1, 1])
    TreeWord('e')
    """
    stack: list[int] = []
    for a in letters:
        a = int(a)
        if a not in (1, 2, 3):
            raise ValueError(f"generator index must be 1, 2 or 3, got {a}")
        if stack and stack[-1] == a:
            stack.pop()
        else:
            stack.append(a)
    return TreeWord(tuple(stack))


@dataclass(frozen=True, order=True)
class TreeWord:
    """A reduced word over the generators ``{1, 2, 3}``.

    Construct from a letter tuple (must already be reduced) or parse text with
    :meth:`parse`. Use :func:`reduce` for arbitrary products.
    """

    letters: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        letters = tuple(int(a) for a in self.letters)
        for a in letters:
            if a not in (1, 2, 3):
                raise ValueError(f"invalid letter {a!r}")
        for a, b in zip(letters, letters[1:]):
            if a == b:
                raise ValueError(f"word {letters} is not reduced")
        object.__setattr__(self, "letters", letters)

    @classmethod
    def parse(cls, text: str) -> "TreeWord":
        """Parse the text format: ``"e"`` or a reduced string over ``123``."""
        text = text.strip()
        if text == "e":
            return cls(())
        if not text or any(c not in "123" for c in text):
            raise ValueError(f"invalid word text {text!r}")
        return cls(tuple(int(c) for c in text))

    @classmethod
    def from_key(cls, key: int) -> "TreeWord":
        return key_to_word(key)

    @property
    def key(self) -> int:
        return word_to_key(self.letters)

    @property
    def norm(self) -> int:
        return len(self.letters)

    def __len__(self) -> int:
        return len(self.letters)

    def __mul__(self, other: "TreeWord") -> "TreeWord":
        return reduce(self.letters + other.letters)

    def __str__(self) -> str:
        return "".join(map(str, self.letters)) if self.letters else "e"

    def __repr__(self) -> str:
        return f"TreeWord('{self}')"


E = TreeWord(())


def right_translate(x: TreeWord, i: int) -> TreeWord:
    """Return ``x * a_i``; the norm changes by exactly one."""
    return reduce(x.letters + (i,))


def word_norm(x: TreeWord) -> int:
    return len(x.letters)


def modified_norm(x: TreeWord, k: int) -> int:
    """Number of letters of ``x`` after the last occurrence of ``k``.

    This is ``|x_k^{-1} x|`` where ``x_k`` is the longest prefix of ``x`` ending
    with ``a_k``; if ``k`` does not occur, the whole length is returned.
    """
    letters = x.letters
    for pos in range(len(letters) - 1, -1, -1):
        if letters[pos] == k:
            return len(letters) - 1 - pos
    return len(letters)


@dataclass(frozen=True)
class SiteClassification:
    """Norm, parity, main branch and partition class of a site.

    ``branch`` is 0 for the root ``e``; ``chi_class`` folds the root into
    class 1.
    """

    norm: int
    parity: str
    branch: int
    chi_class: int

    @property
    def is_root(self) -> bool:
        return self.branch == 0


def classify(x: TreeWord) -> SiteClassification:
    n = len(x.letters)
    branch = x.letters[0] if n else 0
    return SiteClassification(
        norm=n,
        parity="even" if n % 2 == 0 else "odd",
        branch=branch,
        chi_class=branch if n else 1,
    )


# ---------------------------------------------------------------------------
# Key encoding
# ---------------------------------------------------------------------------


def word_to_key(letters: Sequence[int]) -> int:
    letters = tuple(int(a) for a in letters)
    if not letters:
        return E_KEY
    if len(letters) > MAX_KEY_RADIUS:
        raise CapacityError(f"word length {len(letters)} exceeds {MAX_KEY_RADIUS}")
    key = 4 | (letters[0] - 1)
    prev = letters[0] - 1
    for a in letters[1:]:
        cur = a - 1
        d = (cur - prev) % 3
        if d == 0:
            raise ValueError(f"word {letters} is not reduced")
        key = (key << 1) | (d - 1)
        prev = cur
    return key


def key_to_word(key: int) -> TreeWord:
    key = int(key)
    if key == E_KEY:
        return E
    n = key.bit_length() - 2
    if n < 1 or (key >> (n - 1)) & 3 == 3:
        raise ValueError(f"invalid site key {key}")
    cur = (key >> (n - 1)) & 3
    letters = [cur + 1]
    for t in range(n - 2, -1, -1):
        cur = (cur + 1 + ((key >> t) & 1)) % 3
        letters.append(cur + 1)
    return TreeWord(tuple(letters))


def _as_keys(keys) -> np.ndarray:
    return np.asarray(keys, dtype=np.int64)


def keys_norm(keys) -> np.ndarray:
    """Word norms of an array of keys."""
    keys = _as_keys(keys)
    # frexp gives the exact bit length: no valid key is within rounding
    # distance of a power of two (the two bits after the sentinel are < 3).
    bl = np.frexp(keys.astype(np.float64))[1].astype(np.int64)
    return np.where(keys == E_KEY, 0, bl - 2)


def keys_first_letter(keys, norms=None) -> np.ndarray:
    """First letter (1-based), 0 for the root."""
    keys = _as_keys(keys)
    n = keys_norm(keys) if norms is None else norms
    shift = np.maximum(n - 1, 0)
    first = ((keys >> shift) & 3) + 1
    return np.where(n == 0, 0, first)


def keys_chi_class(keys, norms=None) -> np.ndarray:
    """Partition class (1, 2, 3); the root belongs to class 1."""
    first = keys_first_letter(keys, norms)
    return np.where(first == 0, 1, first)


def keys_last_letter(keys, norms=None) -> np.ndarray:
    """Last letter (0-based), -1 for the root."""
    keys = _as_keys(keys)
    n = keys_norm(keys) if norms is None else norms
    shift = np.maximum(n - 1, 0)
    first = (keys >> shift) & 3
    steps = keys & ((np.int64(1) << shift) - 1)
    last = (first + shift + np.bitwise_count(steps)) % 3
    return np.where(n == 0, -1, last).astype(np.int64)


def keys_translate(keys, g, norms=None, max_radius: int = MAX_KEY_RADIUS) -> np.ndarray:
    """Right translation by generator ``g`` (0-based, scalar or array)."""
    keys = _as_keys(keys)
    g = np.asarray(g, dtype=np.int64)
    n = keys_norm(keys) if norms is None else norms
    last = keys_last_letter(keys, n)
    down = last == g
    parent = np.where(n == 1, E_KEY, keys >> 1)
    step = (g - last) % 3 - 1
    child = np.where(n == 0, 4 | g, (keys << 1) | step)
    out = np.where(down, parent, child)
    if out.size and max_radius is not None:
        grow = (~down) & (n >= max_radius)
        if np.any(grow):
            raise CapacityError(f"support radius would exceed {max_radius}")
    return out


def keys_modified_norm(keys, k: int, norms=None, last=None) -> np.ndarray:
    """Modified norms ``|x|_k`` (``k`` 1-based) of an array of keys."""
    keys = _as_keys(keys)
    n = keys_norm(keys) if norms is None else norms
    cur = keys_last_letter(keys, n) if last is None else last.copy()
    target = k - 1
    out = n.copy()
    active = n > 0
    found = active & (cur == target)
    out[found] = 0
    active &= ~found
    t = 0
    while np.any(active):
        # step back over the letter at distance t+1 from the end
        idx = np.nonzero(active)[0]
        more = t + 1 < n[idx]
        idx_done = idx[~more]
        active[idx_done] = False
        idx = idx[more]
        if idx.size == 0:
            break
        b = (keys[idx] >> t) & 1
        cur[idx] = (cur[idx] - 1 - b) % 3
        hit = cur[idx] == target
        out[idx[hit]] = t + 1
        active[idx[hit]] = False
        t += 1
    return out


# ---------------------------------------------------------------------------
# Balls
# ---------------------------------------------------------------------------


def ball_size(radius: int) -> int:
    return 1 if radius == 0 else 3 * 2**radius - 2


@dataclass(frozen=True, eq=False)
class BallIndex:
    """Dense breadth-first enumeration of all sites with norm <= radius.

    Children of a site are listed by increasing generator index, which fixes
    dense indices across runs. Per-site classification and the three modified
    norms are cached as arrays.
    """

    radius: int
    keys: np.ndarray
    norm: np.ndarray
    branch: np.ndarray
    modnorm: np.ndarray  # shape (size, 3), column k-1 holds |x|_k
    _sorted: np.ndarray = field(repr=False)
    _order: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return int(self.keys.size)

    def __len__(self) -> int:
        return self.size

    @property
    def parity(self) -> np.ndarray:
        return self.norm % 2

    @property
    def chi_class(self) -> np.ndarray:
        return np.where(self.branch == 0, 1, self.branch)

    def word(self, index: int) -> TreeWord:
        return key_to_word(int(self.keys[index]))

    def words(self) -> list[TreeWord]:
        return [key_to_word(int(k)) for k in self.keys]

    def classification(self, index: int) -> SiteClassification:
        n = int(self.norm[index])
        b = int(self.branch[index])
        return SiteClassification(n, "even" if n % 2 == 0 else "odd", b, b or 1)

    def index_of(self, keys) -> np.ndarray:
        """Dense indices of keys; -1 where a key lies outside the ball."""
        keys = _as_keys(keys)
        pos = np.searchsorted(self._sorted, keys)
        pos = np.minimum(pos, self.size - 1)
        hit = self._sorted[pos] == keys
        return np.where(hit, self._order[pos], -1)

    def lookup(self, word: TreeWord) -> int:
        idx = int(self.index_of([word.key])[0])
        if idx < 0:
            raise KeyError(str(word))
        return idx

    def neighbor(self, g: int) -> np.ndarray:
        """Dense index of ``x * a_g`` (``g`` 1-based) for every site, -1 outside."""
        moved = keys_translate(self.keys, g - 1, self.norm, max_radius=None)
        return self.index_of(moved)


def ball(radius: int, max_radius: int = MAX_BALL_RADIUS) -> BallIndex:
    """Enumerate the ball of the given radius around ``e``."""
    if radius < 0:
        raise ValueError("radius must be non-negative")
    if radius > max_radius:
        raise CapacityError(
            f"ball({radius}) has {ball_size(radius)} sites; limit is radius {max_radius}"
        )
    levels_k = [np.array([E_KEY], dtype=np.int64)]
    levels_last = [np.array([-1], dtype=np.int64)]
    levels_mod = [np.zeros((1, 3), dtype=np.int64)]
    for n in range(radius):
        pk, pl, pm = levels_k[-1], levels_last[-1], levels_mod[-1]
        if n == 0:
            ck = np.array([4, 5, 6], dtype=np.int64)
            cl = np.array([0, 1, 2], dtype=np.int64)
            cm = np.ones((3, 3), dtype=np.int64)
            cm[np.arange(3), cl] = 0
        else:
            small = np.where(pl == 0, 1, 0)
            large = np.where(pl == 2, 1, 2)
            letters = np.stack([small, large], axis=1).reshape(-1)
            parents = np.repeat(np.arange(pk.size), 2)
            ck = keys_translate(pk[parents], letters, np.full(letters.size, n), None)
            cl = letters
            cm = pm[parents] + 1
            cm[np.arange(cl.size), cl] = 0
        levels_k.append(ck)
        levels_last.append(cl)
        levels_mod.append(cm)
    keys = np.concatenate(levels_k)
    norm = np.concatenate([np.full(k.size, n, dtype=np.int64) for n, k in enumerate(levels_k)])
    branch = keys_first_letter(keys, norm)
    modnorm = np.concatenate(levels_mod)
    order = np.argsort(keys, kind="stable")
    return BallIndex(
        radius=radius,
        keys=keys,
        norm=norm,
        branch=branch,
        modnorm=modnorm,
        _sorted=keys[order],
        _order=order,
    )
