import numpy as np
import pytest
from scipy.integrate import trapezoid

from bristletrack import (Grid, apply_transport_operator,
                          assemble_transport_operator, build_kernels,
                          build_matrices, coupling_functional, force_functional,
                          gradient_functional)
from bristletrack.analysis import dissipativity_constant
from bristletrack.grid import upwind_derivative
from bristletrack.params import sigma_diag


def brute_force_integral(f, n=10_000):
    """Independent trapezoid oracle on a very fine grid."""
    s = np.linspace(0.0, 1.0, n + 1)
    return trapezoid(f(s), s)


class TestGrid:
    def test_weights(self, grid50):
        assert grid50.weights.sum() == pytest.approx(1.0)
        assert np.all(grid50.weights > 0)
        assert grid50.dxi == pytest.approx(0.02)
        assert grid50.xi[0] == 0.0 and grid50.xi[-1] == 1.0

    def test_pressure_normalization_order(self, axles, mats):
        # trapezoid reproduces the unit pressure integral to O(dxi^2)
        from bristletrack.params import pressure_profile
        errs = []
        for n in (25, 50, 100):
            g = Grid(n)
            errs.append(abs(np.sum(g.weights * pressure_profile(axles[0], g.xi)) - 1.0))
        assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.2)
        assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.2)

    def test_rejects_tiny_grid(self):
        with pytest.raises(ValueError):
            Grid(1)


class TestForceFunctional:
    def test_zero_field(self, grid50, kernels50):
        assert force_functional(grid50.zero_field(), kernels50, grid50) == pytest.approx([0, 0])

    def test_constant_field(self, grid50, kernels50, axles):
        # constant deflection c: force = fz * stiffness * c * (pressure integral)
        from bristletrack.params import pressure_profile
        c = 1e-3
        z = grid50.const_field([c, c])
        f = force_functional(z, kernels50, grid50)
        for i, axle in enumerate(axles):
            oracle = axle.fz * axle.stiffness * c * brute_force_integral(
                lambda s, a=axle: pressure_profile(a, s))
            # grid pins the inlet node to zero, so allow one-cell deviation
            assert f[i] == pytest.approx(oracle, rel=2.0 / grid50.n_intervals)

    def test_second_order_refinement(self, axles, body, mats):
        # halving dxi reduces the quadrature error by ~4 for a smooth field
        from bristletrack.params import pressure_profile
        profile = lambda s: np.sin(2.2 * s) + 0.3 * s ** 2
        exact = axles[0].fz * axles[0].stiffness * brute_force_integral(
            lambda s: pressure_profile(axles[0], s) * profile(s), n=40_000)
        errs = []
        for n in (25, 50, 100):
            g = Grid(n)
            k = build_kernels(g, mats)
            z = np.vstack([profile(g.xi), profile(g.xi)])
            errs.append(abs(force_functional(z, k, g)[0] - exact))
        assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.25)
        assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.25)

    def test_size_mismatch(self, grid50, kernels50):
        with pytest.raises(ValueError):
            force_functional(np.zeros((2, 7)), kernels50, grid50)


class TestCouplingFunctional:
    def test_zero_field(self, grid50, kernels50):
        z = grid50.const_field([0.0, 0.0])
        assert coupling_functional(z, kernels50, grid50) == pytest.approx([0, 0])

    def test_vanishes_without_carcass_coupling(self, body, grid50):
        import dataclasses
        from bristletrack import AxleTireParams
        ax = tuple(AxleTireParams(patch_len=0.1, stiffness=200.0, shape_a=0.1,
                                  fz=1000.0, carcass_phi=1.0, carcass_psi=0.0)
                   for _ in range(2))
        m = build_matrices(body, ax)
        k = build_kernels(grid50, m)
        z = np.ones((2, grid50.n_nodes))
        assert coupling_functional(z, k, grid50) == pytest.approx([0, 0])

    def test_unit_field_value(self, grid50, kernels50):
        # psi = 0.08, unit pressure integral: coupling = -0.08 per axle
        z = np.ones((2, grid50.n_nodes))
        assert coupling_functional(z, kernels50, grid50) == pytest.approx(
            [-0.08, -0.08], abs=2e-6)


class TestGradientFunctional:
    def test_zero_field(self, grid50, kernels50):
        assert gradient_functional(np.zeros((2, grid50.n_nodes)), kernels50,
                                   grid50) == pytest.approx([0, 0])

    def test_unit_field_is_leading_edge_pressure(self, grid50, kernels50, axles, body):
        # for z == 1 the integral telescopes to vx*psi/L * p(0)
        from bristletrack.params import pressure_profile
        z = np.ones((2, grid50.n_nodes))
        g = gradient_functional(z, kernels50, grid50)
        for i, axle in enumerate(axles):
            expected = body.speed * axle.carcass_psi / axle.patch_len * \
                pressure_profile(axle, 0.0)
            assert g[i] == pytest.approx(expected, rel=1e-4)

    def test_brute_force_cross_check(self, grid50, kernels50, axles, body, rng):
        from bristletrack.params import pressure_gradient, pressure_profile
        coef = rng.uniform(-1, 1, 3)
        profile = lambda s: coef[0] + coef[1] * s + coef[2] * np.sin(3 * s)
        z = np.vstack([profile(grid50.xi)] * 2)
        g = gradient_functional(z, kernels50, grid50)
        for i, axle in enumerate(axles):
            scale = body.speed * axle.carcass_psi / axle.patch_len
            oracle = scale * (pressure_profile(axle, 1.0) * profile(np.array([1.0]))[0]
                              - brute_force_integral(
                                  lambda s, a=axle: pressure_gradient(a, s) * profile(s)))
            assert g[i] == pytest.approx(oracle, rel=1e-3)


class TestTransportOperator:
    def test_pure_transport_structure(self, body, grid50):
        from bristletrack import AxleTireParams
        ax = tuple(AxleTireParams(patch_len=l, stiffness=200.0, shape_a=0.1,
                                  fz=1000.0, carcass_phi=1.0, carcass_psi=0.0)
                   for l in (0.11, 0.09))
        m = build_matrices(body, ax)
        k = build_kernels(grid50, m)
        a = assemble_transport_operator(k, grid50, m)
        nf = grid50.n_nodes - 1
        for i in range(2):
            blk = a[i * nf:(i + 1) * nf, i * nf:(i + 1) * nf]
            lam = m.transport[i]
            expected = (np.diag(np.full(nf, -lam / grid50.dxi))
                        + np.diag(np.full(nf - 1, lam / grid50.dxi), -1))
            assert blk == pytest.approx(expected)
        # off-diagonal blocks vanish (axles decoupled)
        assert a[:nf, nf:] == pytest.approx(np.zeros((nf, nf)))

    def test_matrix_matches_nodewise_application(self, grid50, kernels50, mats, rng):
        z = grid50.zero_field()
        z[:, 1:] = rng.standard_normal((2, grid50.n_nodes - 1)) * 1e-3
        via_ops = apply_transport_operator(z, kernels50, grid50, mats)
        a = assemble_transport_operator(kernels50, grid50, mats)
        nf = grid50.n_nodes - 1
        flat = np.concatenate([z[0, 1:], z[1, 1:]])
        via_mat = a @ flat
        assert via_ops[0, 1:] == pytest.approx(via_mat[:nf], abs=1e-12)
        assert via_ops[1, 1:] == pytest.approx(via_mat[nf:], abs=1e-12)

    def test_weighted_symmetric_part_negative(self, grid50, kernels50, mats):
        # discrete strict dissipativity at the reference parameters
        assert dissipativity_constant(kernels50, grid50, mats) > 0.0

    def test_dissipativity_on_random_fields(self, grid50, kernels50, mats, rng):
        omega = dissipativity_constant(kernels50, grid50, mats)
        w, q = grid50.weights, kernels50.storage
        for _ in range(25):
            z = grid50.zero_field()
            z[:, 1:] = rng.standard_normal((2, grid50.n_nodes - 1))
            az = apply_transport_operator(z, kernels50, grid50, mats)
            inner = float(np.sum(w * np.sum(q * az * z, axis=0)))
            nrm2 = float(np.sum(w * np.sum(z * z, axis=0)))
            assert inner <= -omega * nrm2 + 1e-7 * nrm2

    def test_frozen_source_preserves_dissipativity(self, grid50, kernels50, mats, body, rng):
        # adding the (non-positive) friction source keeps the same margin
        omega = dissipativity_constant(kernels50, grid50, mats)
        w, q = grid50.weights, kernels50.storage
        for _ in range(10):
            y = rng.uniform(-5, 5, 2)
            s = body.theta * sigma_diag(y, mats.axles, body.eps)
            z = grid50.zero_field()
            z[:, 1:] = rng.standard_normal((2, grid50.n_nodes - 1))
            az = apply_transport_operator(z, kernels50, grid50, mats)
            cpl = coupling_functional(z, kernels50, grid50)
            az = az + s[:, None] * (z + cpl[:, None])
            az[:, 0] = 0.0
            inner = float(np.sum(w * np.sum(q * az * z, axis=0)))
            nrm2 = float(np.sum(w * np.sum(z * z, axis=0)))
            assert inner <= -omega * nrm2 + 1e-7 * nrm2

    def test_upwind_derivative_inlet(self, grid50, rng):
        z = rng.standard_normal((2, grid50.n_nodes))
        d = upwind_derivative(z, grid50)
        assert d[:, 0] == pytest.approx([0.0, 0.0])
        assert d[0, 3] == pytest.approx((z[0, 3] - z[0, 2]) / grid50.dxi)
