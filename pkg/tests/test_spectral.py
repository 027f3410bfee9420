import csv
import math

import numpy as np
import pytest

from treewalk.conjugate import apply_A0, apply_A_tilde
from treewalk.operators import Dynamics
from treewalk.spectral import (
    ArcFilter,
    MomentSequence,
    SpectralWindow,
    arc_filter_apply,
    density_estimate,
    kernel_weights,
    moments,
    mourre_rayleigh,
    mourre_sweep,
    outward_probe,
    point_spectrum_scan,
    smooth_sum_diagnostic,
    truncated_matrix,
    write_curve_csv,
)
from treewalk.states import TripleState, WalkState, random_local_state, random_triple_state
from treewalk.tree import ball, keys_norm

WINDOW = SpectralWindow(0.7, 0.9)
# perturbed coins spread mass onto every branch, so long compositions prune
DROP = 1e-12


def pair(dyn):
    return dyn.U, dyn.U_inv


@pytest.fixture(scope="module")
def dyn(smooth_coin):
    return Dynamics(smooth_coin, drop_tol=DROP)


class TestWindow:
    def test_wraps_center(self):
        w = SpectralWindow(3 * math.pi / 2, 0.5)
        assert math.isclose(w.center, -math.pi / 2)
        assert w.contains(-math.pi / 2 + 0.4) and not w.contains(-math.pi / 2 + 0.6)
        assert w.contains(3 * math.pi / 2 - 0.4)

    def test_rejects_bad_width(self):
        for hw in (0.0, -1.0, 4.0):
            with pytest.raises(ValueError):
                SpectralWindow(0.0, hw)

    def test_rotation(self):
        assert SpectralWindow(0.2, 0.3).rotated(0.5).center == pytest.approx(0.7)


class TestArcFilter:
    def test_real_and_bias_shrinks(self):
        biases = []
        for deg in (4, 8, 16, 32):
            f = ArcFilter.make(WINDOW, deg)
            assert np.array_equal(f.coeffs, np.conj(f.coeffs[::-1]))
            theta = np.linspace(-math.pi, math.pi, 1001)
            assert np.abs(f(theta) - f.ideal(theta)).max() <= f.filter_bias * (1 + 1e-3)
            biases.append(f.filter_bias)
        assert biases == sorted(biases, reverse=True)
        assert biases[-1] < 0.01

    def test_identity(self, smooth_coin, rng):
        phi = random_local_state(rng, radius=3)
        U, U_inv = pair(Dynamics(smooth_coin))
        assert arc_filter_apply(ArcFilter.identity(), U, U_inv, phi).equals(phi)

    def test_disjoint_windows_nearly_annihilate(self, dyn, rng):
        f1 = ArcFilter.make(SpectralWindow(0.0, 1.0), 8)
        f2 = ArcFilter.make(SpectralWindow(math.pi, 1.0), 8)
        b = max(f1.filter_bias, f2.filter_bias)
        U, U_inv = pair(dyn)
        for _ in range(3):
            phi = random_local_state(rng, radius=2)
            out = arc_filter_apply(f1, U, U_inv, arc_filter_apply(f2, U, U_inv, phi))
            assert out.norm() <= b * (1 + b) + 1e-9

    def test_square_is_self_consistent(self, dyn, rng):
        f = ArcFilter.make(WINDOW, 8)
        sq = f.square()
        U, U_inv = pair(dyn)
        phi = random_local_state(rng, radius=2)
        twice = arc_filter_apply(f, U, U_inv, arc_filter_apply(f, U, U_inv, phi))
        once = arc_filter_apply(sq, U, U_inv, phi)
        assert (twice - once).norm() <= sq.filter_bias + f.filter_bias * (2 + f.filter_bias) + 1e-9

    def test_rotation_covariance(self, smooth_coin, rng):
        alpha = 0.9
        f = ArcFilter.make(WINDOW, 8)
        dyn = Dynamics(smooth_coin)
        phi = random_local_state(rng, radius=2)
        plain = arc_filter_apply(f, dyn.U, dyn.U_inv, phi)
        turned = arc_filter_apply(f.rotated(alpha), *dyn.rotated(alpha), phi)
        assert (plain - turned).norm() <= 1e-13
        assert f.rotated(alpha).window.center == pytest.approx(WINDOW.center + alpha)


class TestMoments:
    def test_half_split_matches_direct(self, smooth_coin, rng):
        dyn = Dynamics(smooth_coin)
        phi = random_local_state(rng, radius=2)
        m = moments(dyn.U, dyn.U_inv, phi, 9)
        psi = phi
        for n in range(10):
            assert abs(m[n] - phi.inner(psi)) < 1e-13
            assert m[-n] == np.conj(m[n])
            psi = dyn.U(psi)
        assert m.truncate(4).N == 4 and m.truncate(4)[3] == m[3]
        with pytest.raises(ValueError):
            m.truncate(10)

    def test_free_root_moments_vanish(self, pure_coin):
        dyn = Dynamics(pure_coin)
        Phi = TripleState.single(1, WalkState.delta("e", 1))
        m = moments(dyn.U0, dyn.U0_inv, Phi, 16)
        assert m[0] == 1.0
        assert all(m[n] == 0 for n in range(1, 17))
        theta, rho = density_estimate(m, 256)
        assert np.abs(rho - 1 / (2 * math.pi)).max() < 1e-14

    @pytest.mark.parametrize("kernel", ["jackson", "fejer"])
    def test_density_is_normalized_and_positive(self, kernel, smooth_coin, rng):
        dyn = Dynamics(smooth_coin)
        phi = random_local_state(rng, radius=2)
        m = moments(dyn.U, dyn.U_inv, phi, 20)
        theta, rho = density_estimate(m, 128, kernel)
        assert theta.size == 128
        assert math.isclose(rho.mean() * 2 * math.pi, 1.0, rel_tol=1e-13)
        assert rho.min() > -1e-12

    def test_kernel_weights(self):
        for kernel in ("jackson", "fejer"):
            g = kernel_weights(12, kernel)
            assert g[0] == pytest.approx(1.0) and np.all(np.diff(g) < 0) and g[-1] > 0
        assert np.array_equal(kernel_weights(0, "jackson"), [1.0])
        with pytest.raises(ValueError):
            kernel_weights(4, "lanczos")
        with pytest.raises(ValueError):
            density_estimate(MomentSequence(np.ones(21), True), 16)


class TestMourre:
    def test_free_quotients_are_two(self, pure_coin, rng):
        dyn = Dynamics(pure_coin)
        probes = [random_triple_state(rng, radius=3) for _ in range(3)]
        rep = mourre_rayleigh(ArcFilter.make(WINDOW, 8), probes, dyn.U0, dyn.U0_inv, apply_A0)
        assert all(abs(q - 2) < 1e-10 for q in rep.quotients)
        assert all(abs(v) < 1e-10 for v in rep.imag_parts)

    def test_degenerate_probe_is_skipped(self, pure_coin):
        dyn = Dynamics(pure_coin)
        # a zero probe has no quotient and is reported, not divided by
        phi = WalkState.delta("e", 1)
        rep = mourre_rayleigh(ArcFilter.identity(), [phi, phi * 0.0], dyn.Ut0, dyn.Ut0_inv, apply_A_tilde)
        assert rep.skipped == [1] and rep.quotients[1] is None
        assert math.isclose(rep.min_quotient, 2.0)

    def test_outward_probe(self, rng):
        phi = outward_probe(7, rng, n_sites=5)
        assert len(phi) == 5 and math.isclose(phi.norm(), 1.0)
        assert set(keys_norm(phi.sites)) == {7}
        with pytest.raises(ValueError):
            outward_probe(2, rng)

    def test_sweep_defect_decays(self, smooth_coin, pure_coin):
        sweep = mourre_sweep(smooth_coin, [4, 16], [WINDOW], degree=8, n_probes=4)
        assert sweep.defects[1] < sweep.defects[0]
        assert sweep.bound_holds
        free = mourre_sweep(pure_coin, [4, 16], [WINDOW], degree=8, n_probes=2)
        assert max(free.defects) < 1e-10


class TestSmoothSums:
    def test_unweighted_control(self, dyn, rng):
        # with s = 0 every two-sided increment is 2 ||psi||^2, up to pruning
        phi = random_local_state(rng, radius=2)
        rep = smooth_sum_diagnostic(0.0, phi, ArcFilter.make(WINDOW, 4), 10, dyn.U, dyn.U_inv)
        assert np.allclose(rep.increments[1:], 2 * rep.increments[0], rtol=1e-9, atol=0)
        assert rep.flattening_ratio == pytest.approx(1.0)

    def test_weighted_sums_flatten(self, pure_coin):
        dyn = Dynamics(pure_coin)
        phi = WalkState.delta("e", 1)
        rep = smooth_sum_diagnostic(1.0, phi, ArcFilter.make(WINDOW, 4), 24, dyn.Ut0, dyn.Ut0_inv)
        assert rep.flattening_ratio < 0.05
        assert rep.tail_slope < -1.5
        assert np.all(np.diff(rep.partial_sums) >= 0)


class TestPointSpectrum:
    def test_truncation_is_contraction(self, smooth_coin):
        M = truncated_matrix(smooth_coin, ball(4)).toarray()
        assert M.shape == (3 * 46, 3 * 46)
        assert np.linalg.norm(M, 2) <= 1 + 1e-12

    def test_pure_scan_is_empty(self, pure_coin):
        assert point_spectrum_scan(pure_coin, 5) == []

    def test_bound_state_is_found_and_stable(self, bound_state_coin):
        found = point_spectrum_scan(bound_state_coin, 5)
        assert found and all(c.stable for c in found)
        assert all(abs(c.modulus - 1) < 1e-6 for c in found)
        with pytest.raises(ValueError):
            point_spectrum_scan(bound_state_coin, 11)


def test_write_curve_csv(tmp_path):
    x = np.array([0.1, 1 / 3])
    write_curve_csv(tmp_path / "c.csv", ["n", "x"], np.array([1, 2]), x)
    rows = list(csv.reader(open(tmp_path / "c.csv")))
    assert rows[0] == ["n", "x"]
    assert [float(r[1]) for r in rows[1:]] == list(x)
