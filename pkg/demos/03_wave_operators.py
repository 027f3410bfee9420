"""
Finite-n wave operators
=======================

W_n = U^{-n} J U0^n compares the walk with three free walks glued onto the
branches. Consecutive iterates differ by U^{-(n+1)} V U0^n, so the
increments only need the free orbit and the local perturbation.
"""

import numpy as np

from treewalk import TripleState, WalkState, make_coin_field
from treewalk.scattering import WaveMode, adjoint_wave_apply, channel_masses, convergence_study, wave_apply

PHASES = {"C1": [0.3, 1.1, 2.0], "C2": [-0.7, 0.5, 1.9], "C3": [2.4, -1.3, 0.8]}
pure = make_coin_field("pure", PHASES)
smooth = make_coin_field("smooth-decay", dict(PHASES, g=0.5), seed=0)

root = TripleState.diagonal(WalkState.delta("e", 1))
root = root / root.norm()

for cf, name in ((pure, "pure"), (smooth, "smooth-decay")):
    rec = convergence_study(WaveMode("triple"), root, 16, cf)
    print(name, "increments", np.array2string(rec.increments[:8], precision=3))
    print("   slope", rec.slope, "tail", rec.tail_sum, "->", rec.verdict)

# the shift and tilde modes are isometric term by term
for tag in ("shift", "tilde"):
    rec = convergence_study(WaveMode(tag, "-"), WalkState.delta("e", 2), 16, smooth)
    print(f"{tag}-: max isometry defect {rec.isometry_defects.max():.1e}, slope {rec.slope:.2f}")

# W_n* is the adjoint of W_n at every finite n
psi = WalkState.delta("21", 3)
lhs = wave_apply(WaveMode("triple"), 6, root, smooth).inner(psi)
rhs = root.inner(adjoint_wave_apply(6, psi, smooth))
print("duality at n=6:", abs(lhs - rhs))

# where the mass of a root walker ends up
m = channel_masses(WalkState.delta("e", 1), 16, smooth)
print("branch masses at t=16:", m["masses"][-1], "window variation", m["window_variation"])
