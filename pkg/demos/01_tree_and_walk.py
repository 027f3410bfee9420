"""
Words, balls and one step of the walk
=====================================

The degree-3 tree is the set of reduced words in a1, a2, a3. Sites are
stored as integer keys, a ball is an indexed slice of them, and a walk state
is a sorted table of (site, 3 amplitudes) rows.
"""

import numpy as np

from treewalk import TreeWord, WalkState, ball, make_coin_field
from treewalk.operators import apply_S, apply_U, apply_U_inv
from treewalk.tree import classify, modified_norm

x = TreeWord.parse("12132")
print(x, "norm", len(x), "modified norms", [modified_norm(x, k) for k in (1, 2, 3)])
print(classify(x))

# shells grow like 3 * 2^(n-1)
for R in (0, 1, 2, 8, 14):
    print(f"ball({R}) has {len(ball(R))} sites")

# spin 1 rides S_23: the root goes to a3, then alternates a2, a3 outward
phi = WalkState.delta("e", 1)
for _ in range(4):
    print(" ", phi.words())
    phi = apply_S(phi)

# a coin that differs from the branch limits by g <x>^-2 H
coin = make_coin_field(
    "smooth-decay",
    {"C1": [0.3, 1.1, 2.0], "C2": [-0.7, 0.5, 1.9], "C3": [2.4, -1.3, 0.8], "g": 0.5},
    seed=0,
)
print("deviation at e, 1, 12121:", coin.deviation(np.array([TreeWord.parse(w).key for w in ("e", "1", "12121")])))

psi = WalkState.delta("e", 1)
for t in range(1, 7):
    psi = apply_U(coin, psi)
    print(f"t={t}: {len(psi):4d} sites, norm {psi.norm():.15f}")

back = psi
for _ in range(6):
    back = apply_U_inv(coin, back)
print("round trip error", back.max_abs_diff(WalkState.delta("e", 1)))
