"""
The conjugate operator and the Mourre commutator
================================================

A~ multiplies spin s at x by an integer weight built from squared modified
word norms. Along every shift orbit those squares have second difference 2,
which makes U~0^{-1} [A~, U~0] = 2 exactly. A coin perturbation breaks the
identity by an amount that fades with the distance from the root.
"""

import math

import numpy as np

from treewalk import WalkState, make_coin_field
from treewalk.conjugate import (
    a_weights,
    apply_A_tilde,
    mourre_defect,
    va0_tail_norm,
    verify_second_difference,
)
from treewalk.operators import apply_Utilde0, apply_Utilde0_inv
from treewalk.spectral import SpectralWindow, mourre_sweep
from treewalk.states import random_local_state
from treewalk.tree import ball

PHASES = {"C1": [0.3, 1.1, 2.0], "C2": [-0.7, 0.5, 1.9], "C3": [2.4, -1.3, 0.8]}
pure = make_coin_field("pure", PHASES)
smooth = make_coin_field("smooth-decay", dict(PHASES, g=0.5), seed=0)

b = ball(3)
print("weights on ball(3), first rows:")
for w, row in list(zip(b.words(), a_weights(b.keys)))[:8]:
    print(f"  {str(w):>4}  {row}")

rep = verify_second_difference(14)
print(f"second difference: {rep['checked']} checks, {len(rep['failures'])} failures")

rng = np.random.default_rng(1)
phi = random_local_state(rng, radius=5)
d = mourre_defect(lambda p: apply_Utilde0(pure, p), lambda p: apply_Utilde0_inv(pure, p), apply_A_tilde, phi)
print(f"free commutator defect {d:.1e}")

# compactness: V A0 restricted to far sites gets small
for r in (2, 4, 8, 16):
    print(f"||V A0 P_{r}|| ~ {va0_tail_norm(smooth, r):.4f}")

windows = [SpectralWindow(2 * math.pi * c / 5, math.pi / 3) for c in range(5)]
sweep = mourre_sweep(smooth, [4, 8, 16], windows, degree=8)
for r, q, dd in zip(sweep.radii, sweep.min_quotients, sweep.defects):
    print(f"r={r:2d}: min filtered quotient {q:.5f}, defect {dd:.2e}")
print(f"defect exponent {sweep.slope:.2f}")
