"""
Spectral density, bound states and smooth sums
==============================================

Moments c_n = <phi, U^n phi> damped by the Jackson kernel give a positive
density on the circle. A truncated matrix finds eigenvalues that stay put
when the ball grows. Weighted partial sums of ||<x>^-1 U^n psi||^2 level off
on windows free of eigenvalues.
"""

import math

import numpy as np

from treewalk import TripleState, WalkState, make_coin_field
from treewalk.operators import Dynamics
from treewalk.spectral import (
    ArcFilter,
    SpectralWindow,
    density_estimate,
    moments,
    point_spectrum_scan,
    smooth_sum_diagnostic,
)
from treewalk.states import random_local_state

PHASES = {"C1": [0.3, 1.1, 2.0], "C2": [-0.7, 0.5, 1.9], "C3": [2.4, -1.3, 0.8]}
pure = make_coin_field("pure", PHASES)
smooth = make_coin_field("smooth-decay", dict(PHASES, g=0.5), seed=0)

# free channel walk from the root never comes back: all moments vanish
free = Dynamics(pure)
m0 = moments(free.U0, free.U0_inv, TripleState.single(1, WalkState.delta("e", 1)), 32)
print("largest free moment", np.abs(np.delete(m0.values, 32)).max())

dyn = Dynamics(smooth, drop_tol=1e-9)
phi = random_local_state(np.random.default_rng(0), 2)
m = moments(dyn.U, dyn.U_inv, phi, 64, exact=False)
theta, rho = density_estimate(m, 512)
print(f"perturbed density: min {rho.min() * 2 * math.pi:.3f}/2pi, max {rho.max() * 2 * math.pi:.3f}/2pi")

def swap(alpha, beta):
    mat = np.array([[0, np.exp(1j * alpha), 0], [np.exp(1j * beta), 0, 0], [0, 0, 1]])
    return {"re": mat.real.tolist(), "im": mat.imag.tolist()}

trap = make_coin_field(
    "finite-defect", dict(PHASES, defects=[{"site": "e", "matrix": swap(0.4, 0.0)}, {"site": "3", "matrix": swap(0.0, 0.9)}])
)
print("pure scan:", point_spectrum_scan(pure, 8))
for c in point_spectrum_scan(trap, 8):
    print(f"bound state at phase {c.phase:+.6f}, rim weight {c.boundary_weight:.1e}, stable {c.stable}")

f = ArcFilter.make(SpectralWindow(0.0, math.pi / 2), 4)
rep = smooth_sum_diagnostic(1.0, WalkState.delta("e", 1), f, 40, dyn.U, dyn.U_inv)
print("smooth sums: total", rep.partial_sums[-1], "flattening", rep.flattening_ratio)
