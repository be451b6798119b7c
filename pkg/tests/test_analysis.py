import dataclasses

import numpy as np
import pytest

from bristletrack import (AxleTireParams, Grid, build_kernels, build_matrices,
                          certify, composite_v, dissipativity_constant,
                          lyapunov_v1, lyapunov_v2, state_norm)
from bristletrack.analysis import sigma_lipschitz, source_dissipativity_margin


class TestLyapunovV1:
    def test_values(self):
        assert lyapunov_v1(np.zeros(2)) == 0.0
        assert lyapunov_v1(np.array([3.0, 4.0])) == pytest.approx(12.5)
        assert lyapunov_v1(np.array([-1.0, 2.0])) >= 0.0


class TestLyapunovV2:
    def test_zero(self, grid50, kernels50):
        assert lyapunov_v2(grid50.zero_field(), grid50, kernels50) == 0.0

    def test_eigenvalue_bounds(self, grid50, kernels50, rng):
        qmin = kernels50.storage.min()
        qmax = kernels50.storage.max()
        for _ in range(20):
            zeta = grid50.zero_field()
            zeta[:, 1:] = rng.standard_normal((2, grid50.n_nodes - 1))
            v2 = lyapunov_v2(zeta, grid50, kernels50)
            half_l2 = 0.5 * grid50.l2_norm(zeta) ** 2
            assert qmin * half_l2 - 1e-12 <= v2 <= qmax * half_l2 + 1e-12

    def test_second_order_refinement(self, mats):
        profile = lambda s: np.sin(2.0 * s) * 1e-3
        vals = []
        for n in (25, 50, 100, 4000):
            g = Grid(n)
            k = build_kernels(g, mats)
            zeta = np.vstack([profile(g.xi)] * 2)
            vals.append(lyapunov_v2(zeta, g, k))
        errs = [abs(v - vals[-1]) for v in vals[:-1]]
        assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.25)
        assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.25)


class TestStateNorm:
    def test_zero(self, grid50):
        assert state_norm(np.zeros(2), grid50.zero_field(), grid50) == 0.0

    def test_reference_field_level(self, grid50):
        # constant 0.003 deflection on both axles has L2 norm ~0.0042
        z = grid50.const_field([0.003, 0.003])
        assert grid50.l2_norm(z) == pytest.approx(0.0042426, rel=0.01)

    def test_reference_initial_norm(self, grid50):
        z = grid50.const_field([0.003, 0.003])
        n = state_norm(np.array([1.5, -0.25]), z, grid50)
        assert n == pytest.approx(np.sqrt(1.5 ** 2 + 0.25 ** 2 + 0.0042426 ** 2),
                                  rel=1e-4)
        assert n == pytest.approx(1.5207, abs=2e-4)


class TestDissipativity:
    @pytest.mark.parametrize("n", [50, 100, 200])
    def test_strictly_positive(self, body, axles, n):
        mats = build_matrices(body, axles)
        g = Grid(n)
        k = build_kernels(g, mats)
        assert dissipativity_constant(k, g, mats) > 0.0

    def test_refinement_trend(self, body, axles):
        # upwind adds numerical dissipation, so the margin decreases
        # monotonically with resolution while staying positive, and the
        # refinement increments shrink (first-order convergence pattern)
        mats = build_matrices(body, axles)
        oms = []
        for n in (50, 100, 200, 400):
            g = Grid(n)
            oms.append(dissipativity_constant(build_kernels(g, mats), g, mats))
        assert all(o > 0 for o in oms)
        assert oms[0] > oms[1] > oms[2] > oms[3]
        steps = [oms[i] - oms[i + 1] for i in range(3)]
        assert steps[0] > steps[1] > steps[2]

    def test_vanishing_coupling_reduces_to_pure_transport(self, body, grid50):
        ax = tuple(AxleTireParams(patch_len=l, stiffness=s, shape_a=0.1, fz=f,
                                  carcass_phi=1.0, carcass_psi=0.0)
                   for l, s, f in ((0.11, 240.0, 2660.0), (0.09, 269.0, 3720.0)))
        m = build_matrices(body, ax)
        k = build_kernels(grid50, m)
        om = dissipativity_constant(k, grid50, m)
        assert om > 0
        assert np.abs(k.gradient).max() == 0.0 and k.edge.max() == 0.0

    def test_source_margin_dominates(self, body, axles, grid50, kernels50, mats):
        om = dissipativity_constant(kernels50, grid50, mats)
        for y in ([0.0, 0.0], [2.0, -3.0], [-8.0, 8.0]):
            assert source_dissipativity_margin(np.array(y), kernels50, grid50,
                                               mats) >= om * (1 - 1e-9)

    def test_large_coupling_breaks_margin(self, body, grid50):
        # oversized carcass coupling violates strict dissipativity
        ax = tuple(AxleTireParams(patch_len=l, stiffness=s, shape_a=0.1, fz=f,
                                  carcass_phi=0.5, carcass_psi=0.5)
                   for l, s, f in ((0.11, 240.0, 2660.0), (0.09, 269.0, 3720.0)))
        m = build_matrices(body, ax)
        k = build_kernels(grid50, m)
        assert dissipativity_constant(k, grid50, m) < 0.0


class TestSigmaLipschitz:
    def test_empirical_below_bound(self, axles):
        emp, bound = sigma_lipschitz(axles, eps=0.0)
        assert emp <= bound * (1 + 1e-9)
        assert bound == pytest.approx(269.0)

    def test_smooth_variant(self, axles):
        emp, bound = sigma_lipschitz(axles, eps=1e-3)
        assert emp <= bound * (1 + 1e-9)


class TestCompositeV:
    def test_zero(self, grid50, kernels50):
        assert composite_v(np.zeros(2), grid50.zero_field(), 10.0, grid50,
                           kernels50) == 0.0

    def test_mode_reduction(self, grid50, kernels50, rng):
        x = rng.standard_normal(2)
        zeta = grid50.zero_field()
        zeta[:, 1:] = rng.standard_normal((2, grid50.n_nodes - 1)) * 1e-3
        base = composite_v(x, zeta, 7.0, grid50, kernels50)
        assert base == pytest.approx(lyapunov_v1(x)
                                     + lyapunov_v2(zeta, grid50, kernels50) / 7.0)
        with_obs = composite_v(x, zeta, 7.0, grid50, kernels50, v0=0.5, gamma0=2.0)
        assert with_obs == pytest.approx(base + 1.0)

    def test_requires_gamma0_with_v0(self, grid50, kernels50):
        with pytest.raises(ValueError):
            composite_v(np.zeros(2), grid50.zero_field(), 1.0, grid50, kernels50,
                        v0=1.0)


class TestCertify:
    def test_reference_parameters_pass(self, body, axles):
        report = certify(body, axles, n_intervals=50, passivity_trials=20)
        assert report.all_pass, report.text()
        assert report.omega_h > 0
        assert report.lemma_norm_error < 1e-8
        assert report.equilibrium_residual < 1e-8
        assert report.hurwitz_margin == pytest.approx(3.68, rel=1e-6)
        assert report.passivity_residual_min >= -report.passivity_tolerance

    def test_large_coupling_flags_violation(self, body):
        ax = tuple(AxleTireParams(patch_len=l, stiffness=s, shape_a=0.1, fz=f,
                                  carcass_phi=0.5, carcass_psi=0.5)
                   for l, s, f in ((0.11, 240.0, 2660.0), (0.09, 269.0, 3720.0)))
        report = certify(body, ax, n_intervals=50, passivity_trials=5)
        assert not report.verdicts["strict_dissipativity"]
        assert not report.all_pass

    def test_report_serializable(self, body, axles):
        import json
        report = certify(body, axles, n_intervals=30, passivity_trials=5)
        payload = json.loads(report.to_json())
        assert set(payload["verdicts"]) == {
            "strict_dissipativity", "source_preserves_dissipativity",
            "profile_normalization", "equilibrium_stationarity",
            "observer_hurwitz", "source_lipschitz", "trajectory_passivity"}
        assert isinstance(report.text(), str)


class TestOutputFeedbackWeights:
    def test_positive_and_finite(self, body, axles, gains50, mats, kernels50, grid50):
        from bristletrack import gain_l1, output_feedback_weights
        w = output_feedback_weights(gains50, gain_l1(2.0, mats), mats, kernels50,
                                    grid50)
        assert set(w) == {"gamma0", "rho", "gamma2", "eta0_bound", "kappa"}
        assert all(np.isfinite(v) and v > 0 for v in w.values())
        assert w["gamma2"] == pytest.approx(min(2.0, gains50.omega_h
                                                / kernels50.storage.max()))

    def test_composite_with_observer_part(self, body, axles, gains50, mats,
                                          kernels50, grid50, rng):
        from bristletrack import gain_l1, output_feedback_weights
        w = output_feedback_weights(gains50, gain_l1(2.0, mats), mats, kernels50,
                                    grid50)
        x = rng.standard_normal(2)
        zeta = grid50.zero_field()
        total = composite_v(x, zeta, gains50.gamma1, grid50, kernels50,
                            v0=1.0, gamma0=w["gamma0"])
        assert total == pytest.approx(lyapunov_v1(x) + w["gamma0"])
