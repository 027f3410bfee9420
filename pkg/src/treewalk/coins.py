"""
Coin fields: site-dependent U(3) matrices with diagonal limits on each branch.

Three presets are provided:

``pure``
    ``C(x) = C_k`` with ``k`` the partition class of ``x``.
``smooth-decay``
    ``C(x) = exp(i g <x>^{-(1+eps_k)} H) C_k`` for a fixed Hermitian ``H``.
    Unitary at every site, and ``||C(x) - C_k|| <= g ||H|| <x>^{-(1+eps_k)}``.
``finite-defect``
    Arbitrary unitaries on a listed finite set of sites, ``C_k`` elsewhere.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np
from scipy.stats import unitary_group

from .tree import TreeWord, key_to_word, keys_chi_class, keys_norm

__all__ = ["CoinField", "CoinConfigError", "make_coin_field", "PRESETS"]

PRESETS = ("pure", "smooth-decay", "finite-defect")
UNITARY_TOL = 1e-12


class CoinConfigError(ValueError):
    pass


def _is_unitary(m: np.ndarray, tol: float = UNITARY_TOL) -> bool:
    return bool(np.linalg.norm(m.conj().T @ m - np.eye(m.shape[0]), 2) <= tol)


@dataclass(frozen=True, eq=False)
class CoinField:
    """Coin operator ``C(x)`` with asymptotic diagonal coins ``C_1, C_2, C_3``.

    ``phases[k-1]`` holds the three diagonal phases (radians) of ``C_k`` and
    ``eps[k-1]`` the decay exponent on branch ``k``.
    """

    phases: np.ndarray
    eps: np.ndarray
    preset: str = "pure"
    g: float = 0.0
    H: np.ndarray | None = None
    defects: Mapping[int, np.ndarray] = field(default_factory=dict)
    seed: int | None = None

    def __post_init__(self) -> None:
        phases = np.asarray(self.phases, dtype=float).reshape(3, 3)
        eps = np.asarray(self.eps, dtype=float).reshape(3)
        if np.any(eps <= 0):
            raise CoinConfigError("decay exponents must be positive")
        if self.preset not in PRESETS:
            raise CoinConfigError(f"unknown preset {self.preset!r}")
        object.__setattr__(self, "phases", phases)
        object.__setattr__(self, "eps", eps)
        H = None
        if self.H is not None:
            H = np.asarray(self.H, dtype=np.complex128).reshape(3, 3)
            if not np.allclose(H, H.conj().T, atol=1e-14, rtol=0):
                raise CoinConfigError("H must be Hermitian")
            lam, Q = np.linalg.eigh(H)
            object.__setattr__(self, "_eig", (lam, Q))
        object.__setattr__(self, "H", H)
        if self.preset == "smooth-decay" and H is None:
            raise CoinConfigError("smooth-decay preset needs H")
        defects = {}
        for k, m in dict(self.defects).items():
            m = np.asarray(m, dtype=np.complex128).reshape(3, 3)
            if not _is_unitary(m):
                raise CoinConfigError(f"defect matrix at {key_to_word(int(k))} is not unitary")
            defects[int(k)] = m
        object.__setattr__(self, "defects", defects)
        object.__setattr__(self, "_defect_keys", np.array(sorted(defects), dtype=np.int64))

    # -- asymptotic coins -----------------------------------------------------

    @property
    def asymptotic_diag(self) -> np.ndarray:
        """Diagonals of ``C_1, C_2, C_3`` as a ``(3, 3)`` complex array."""
        return np.exp(1j * self.phases)

    def asymptotic(self, k: int) -> np.ndarray:
        return np.diag(self.asymptotic_diag[k - 1])

    def class_diag(self, keys: np.ndarray) -> np.ndarray:
        """Per-site diagonal of ``C_{chi_class(x)}``, shape ``(n, 3)``."""
        return self.asymptotic_diag[keys_chi_class(keys) - 1]

    @property
    def is_diagonal(self) -> bool:
        """True when ``C(x) = C_{chi_class(x)}`` at every site."""
        if self.preset == "pure":
            return True
        if self.preset == "smooth-decay":
            return self.g == 0.0
        return not self.defects

    # -- local coins --------------------------------------------------------

    def matrices(self, keys: np.ndarray) -> np.ndarray:
        """``C(x)`` for every key, shape ``(n, 3, 3)``."""
        keys = np.asarray(keys, dtype=np.int64)
        diag = self.class_diag(keys)
        out = np.zeros((keys.size, 3, 3), dtype=np.complex128)
        idx = np.arange(3)
        out[:, idx, idx] = diag
        if self.preset == "smooth-decay" and self.g != 0.0 and keys.size:
            # C(x) depends only on (class, norm): build that small table once
            norms = keys_norm(keys)
            cls = keys_chi_class(keys, norms) - 1
            out = self._radial_table(int(norms.max()))[cls, norms]
        if self.defects:
            pos = np.searchsorted(self._defect_keys, keys)
            pos = np.minimum(pos, self._defect_keys.size - 1)
            hit = np.nonzero(self._defect_keys[pos] == keys)[0]
            for n in hit:
                out[n] = self.defects[int(keys[n])]
        return out

    def _radial_table(self, max_norm: int) -> np.ndarray:
        """``C`` on class ``k`` at norm ``n`` as ``table[k - 1, n]``."""
        cached = self.__dict__.get("_table")
        if cached is not None and cached.shape[1] > max_norm:
            return cached
        size = max(max_norm + 1, 2 * (0 if cached is None else cached.shape[1]), 64)
        n = np.arange(size, dtype=float)
        t = self.g * (1.0 + n[None, :] ** 2) ** (-(1.0 + self.eps[:, None]) / 2.0)
        lam, Q = self._eig
        E = np.einsum("ij,knj,lj->knil", Q, np.exp(1j * t[:, :, None] * lam), Q.conj())
        table = E * self.asymptotic_diag[:, None, None, :]
        object.__setattr__(self, "_table", table)
        return table

    def matrix(self, site: TreeWord | str) -> np.ndarray:
        word = TreeWord.parse(site) if isinstance(site, str) else site
        return self.matrices(np.array([word.key]))[0]

    def deviation(self, keys: np.ndarray) -> np.ndarray:
        """Operator norms ``||C(x) - C_{chi_class(x)}||`` per key."""
        keys = np.asarray(keys, dtype=np.int64)
        d = self.matrices(keys)
        d[:, np.arange(3), np.arange(3)] -= self.class_diag(keys)
        return np.linalg.norm(d, ord=2, axis=(1, 2))

    @property
    def decay_constant(self) -> float:
        """A constant ``c`` with ``||C(x) - C_k|| <= c <x>^{-(1+eps_k)}`` on every site."""
        if self.preset == "smooth-decay":
            return float(abs(self.g) * np.linalg.norm(self.H, 2))
        if self.preset == "finite-defect" and self.defects:
            keys = self._defect_keys
            n = keys_norm(keys).astype(float)
            eps = self.eps[keys_chi_class(keys) - 1]
            return float(np.max(self.deviation(keys) * (1.0 + n**2) ** ((1.0 + eps) / 2.0)))
        return 0.0

    @property
    def min_eps(self) -> float:
        return float(np.min(self.eps))

    # -- config ---------------------------------------------------------------

    def to_config(self) -> dict[str, Any]:
        cfg: dict[str, Any] = {
            "preset": self.preset,
            "C1": self.phases[0].tolist(),
            "C2": self.phases[1].tolist(),
            "C3": self.phases[2].tolist(),
            "eps": self.eps.tolist(),
            "g": float(self.g),
            "seed": self.seed,
        }
        if self.H is not None:
            cfg["H"] = {"re": self.H.real.tolist(), "im": self.H.imag.tolist()}
        cfg["defects"] = [
            {"site": str(key_to_word(k)), "matrix": {"re": m.real.tolist(), "im": m.imag.tolist()}}
            for k, m in sorted(self.defects.items())
        ]
        return cfg

    @classmethod
    def from_config(cls, cfg: Mapping[str, Any]) -> "CoinField":
        cfg = dict(cfg)
        preset = cfg.pop("preset", "pure")
        seed = cfg.pop("seed", None)
        allowed = {"C1", "C2", "C3", "eps", "g", "H", "defects"}
        unknown = set(cfg) - allowed
        if unknown:
            raise CoinConfigError(f"unknown coin fields: {sorted(unknown)}")
        return make_coin_field(preset, cfg, seed)


def _complex_matrix(spec: Any, name: str) -> np.ndarray:
    if isinstance(spec, Mapping):
        re = np.asarray(spec.get("re", np.zeros((3, 3))), dtype=float)
        im = np.asarray(spec.get("im", np.zeros((3, 3))), dtype=float)
        m = re + 1j * im
    else:
        m = np.asarray(spec, dtype=np.complex128)
    if m.shape != (3, 3):
        raise CoinConfigError(f"{name} must be 3x3")
    return m


def random_hermitian(rng: np.random.Generator) -> np.ndarray:
    """Random Hermitian 3x3 matrix with unit operator norm."""
    a = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    h = (a + a.conj().T) / 2
    return h / np.linalg.norm(h, 2)


def make_coin_field(preset: str = "pure", params: Mapping[str, Any] | None = None, seed: int | None = None) -> CoinField:
    """Build a validated coin field.

    ``params`` may hold ``C1``, ``C2``, ``C3`` (phase triples in radians),
    ``eps`` (three positive exponents), ``g`` and ``H`` for the smooth-decay
    preset, and ``defects`` (list of ``{"site": ..., "matrix": ...}``) for the
    finite-defect preset. A missing ``H`` or a defect matrix given as
    ``"random"`` is drawn from ``seed``.
    """
    params = dict(params or {})
    if preset not in PRESETS:
        raise CoinConfigError(f"unknown preset {preset!r}; expected one of {PRESETS}")
    rng = np.random.default_rng(seed)
    try:
        phases = np.array([params.get(f"C{k}", [0.0, 0.0, 0.0]) for k in (1, 2, 3)], dtype=float)
    except (TypeError, ValueError) as exc:
        raise CoinConfigError("C1, C2, C3 must be phase triples") from exc
    if phases.shape != (3, 3):
        raise CoinConfigError("C1, C2, C3 must be phase triples")
    eps = np.asarray(params.get("eps", [1.0, 1.0, 1.0]), dtype=float)
    if eps.shape != (3,) or np.any(eps <= 0):
        raise CoinConfigError("eps must be three positive numbers")
    g = float(params.get("g", 0.0))
    H = None
    defects: dict[int, np.ndarray] = {}
    if preset == "smooth-decay":
        H = random_hermitian(rng) if params.get("H") is None else _complex_matrix(params["H"], "H")
    elif params.get("g") or params.get("H") is not None:
        raise CoinConfigError(f"g and H only apply to the smooth-decay preset, not {preset!r}")
    if preset == "finite-defect":
        for item in params.get("defects", []):
            word = TreeWord.parse(item["site"]) if isinstance(item["site"], str) else TreeWord(tuple(item["site"]))
            m = item["matrix"]
            if isinstance(m, str):
                if m != "random":
                    raise CoinConfigError(f"unknown defect matrix {m!r}")
                m = unitary_group.rvs(3, random_state=rng)
            else:
                m = _complex_matrix(m, f"defect at {word}")
            if word.key in defects:
                raise CoinConfigError(f"duplicate defect site {word}")
            defects[word.key] = m
    elif params.get("defects"):
        raise CoinConfigError("defects only apply to the finite-defect preset")
    return CoinField(phases=phases, eps=eps, preset=preset, g=g, H=H, defects=defects, seed=seed)
