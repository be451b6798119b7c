import math

import numpy as np
import pytest
from scipy.integrate import quad

from bristletrack import (AxleTireParams, ParameterError, VehicleBodyParams,
                          build_matrices, pressure_gradient, pressure_profile,
                          rel_velocity, sigma_matrix)


class TestBuildMatrices:
    def test_transport_speeds(self, mats):
        # vx / patch lengths: 50/0.11 and 50/0.09
        assert mats.transport == pytest.approx([50.0 / 0.11, 50.0 / 0.09])
        assert mats.transport == pytest.approx([454.545455, 555.555556], rel=1e-6)

    def test_wind_vector(self, mats):
        # [Fw/m, lw*Fw/Iz] with Fw=-500, lw=-0.3
        assert mats.wind == pytest.approx([-500.0 / 1300.0, 150.0 / 2000.0])
        assert mats.wind == pytest.approx([-0.384615, 0.075], abs=1e-6)

    def test_zero_wind(self, body, axles):
        import dataclasses
        m = build_matrices(dataclasses.replace(body, wind_force=0.0), axles)
        assert m.wind == pytest.approx([0.0, 0.0])

    def test_matrix_structure(self, mats, body):
        vx = body.speed
        assert mats.drift == pytest.approx(np.array([[0.0, -vx], [0.0, 0.0]]))
        assert mats.steer_gain == pytest.approx(-vx * np.eye(2))
        assert mats.deflection_gain == pytest.approx([1.84, 1.84])
        assert mats.slip_map == pytest.approx(np.array([[1.0, 1.4], [1.0, -1.0]]))
        # force gain rows follow from mass and yaw inertia
        assert mats.force_gain == pytest.approx(
            -np.array([[1 / 1300, 1 / 1300], [1.4 / 2000, -1 / 2000]]))

    def test_gains_invertible(self, mats):
        assert abs(np.linalg.det(mats.force_gain)) > 0
        assert abs(np.linalg.det(mats.steer_gain)) > 0

    @pytest.mark.parametrize("field,value", [
        ("mass", -1.0), ("yaw_inertia", 0.0), ("speed", -5.0),
    ])
    def test_rejects_nonpositive_body(self, field, value):
        kw = dict(mass=1300.0, yaw_inertia=2000.0, dist_front=1.4,
                  dist_rear=1.0, speed=50.0)
        kw[field] = value
        with pytest.raises(ParameterError):
            VehicleBodyParams(**kw)

    def test_rejects_nonpositive_patch(self):
        with pytest.raises(ParameterError):
            AxleTireParams(patch_len=0.0, stiffness=240.0, shape_a=0.1, fz=2660.0)

    def test_rejects_broken_carcass_split(self):
        with pytest.raises(ParameterError):
            AxleTireParams(patch_len=0.1, stiffness=240.0, shape_a=0.1, fz=2660.0,
                           carcass_phi=0.9, carcass_psi=0.2)


class TestPressureProfile:
    def test_leading_edge_value(self, axles):
        # a/(1 - e^-a) at xi = 0 for a = 0.1
        expected = 0.1 / (1.0 - math.exp(-0.1))
        assert expected == pytest.approx(1.05083, abs=1e-5)
        assert pressure_profile(axles[0], 0.0) == pytest.approx(expected)

    def test_trailing_edge_value(self, axles):
        expected = 0.1 / (1.0 - math.exp(-0.1)) * math.exp(-0.1)
        assert expected == pytest.approx(0.95083, abs=1e-5)
        assert pressure_profile(axles[0], 1.0) == pytest.approx(expected)

    @pytest.mark.parametrize("a", [0.05, 0.1, 1.0, 3.0])
    def test_unit_normalization(self, a):
        axle = AxleTireParams(patch_len=0.1, stiffness=200.0, shape_a=a, fz=1000.0)
        integral, _ = quad(lambda s: pressure_profile(axle, s), 0.0, 1.0)
        assert integral == pytest.approx(1.0, abs=1e-10)

    def test_gradient_matches_finite_difference(self, axles):
        xi = np.linspace(0.01, 0.99, 20)
        h = 1e-6
        fd = (pressure_profile(axles[0], xi + h) - pressure_profile(axles[0], xi - h)) / (2 * h)
        assert pressure_gradient(axles[0], xi) == pytest.approx(fd, rel=1e-6)

    def test_rejects_out_of_range(self, axles):
        with pytest.raises(ParameterError):
            pressure_profile(axles[0], 1.5)


class TestSigmaMatrix:
    def test_zero_at_zero_velocity(self, axles):
        assert sigma_matrix(np.zeros(2), axles) == pytest.approx(np.zeros((2, 2)))

    def test_direct_evaluation(self, axles):
        s = sigma_matrix(np.array([1.0, 0.0]), axles)
        assert s == pytest.approx(np.diag([-240.0, 0.0]))

    def test_diagonal_nonpositive(self, axles, rng):
        for _ in range(50):
            v = rng.uniform(-20, 20, 2)
            s = sigma_matrix(v, axles)
            assert s[0, 1] == 0.0 and s[1, 0] == 0.0
            assert s[0, 0] <= 0.0 and s[1, 1] <= 0.0

    def test_lipschitz_bound(self, axles, rng):
        # |sigma(v1) - sigma(v2)| <= max(stiffness)/mu_min |v1 - v2|
        lip = max(a.stiffness for a in axles)
        worst = 0.0
        for _ in range(200):
            v1, v2 = rng.uniform(-10, 10, 2), rng.uniform(-10, 10, 2)
            d = np.linalg.norm(sigma_matrix(v1, axles) - sigma_matrix(v2, axles), 2)
            worst = max(worst, d / max(np.linalg.norm(v1 - v2), 1e-12))
        assert worst <= lip * (1 + 1e-9)

    def test_smooth_regularization(self, axles):
        # with eps > 0 the source is differentiable at zero slip
        eps = 1e-3
        h = 1e-6
        d0 = (sigma_matrix(np.array([h, h]), axles, eps)
              - sigma_matrix(np.array([-h, -h]), axles, eps)) / (2 * h)
        assert np.abs(d0).max() < 1e-2
        # second difference stays bounded near zero (no kink)
        vals = [sigma_matrix(np.array([v, v]), axles, eps)[0, 0]
                for v in (-h, 0.0, h)]
        curv = (vals[0] - 2 * vals[1] + vals[2]) / h ** 2
        assert abs(curv) < 2 * axles[0].stiffness / math.sqrt(eps) + 1.0

    def test_velocity_dependent_mu(self):
        axle = AxleTireParams(patch_len=0.1, stiffness=100.0, shape_a=0.1, fz=1000.0,
                              mu=lambda v: 1.0 + 0.1 * abs(v))
        s = sigma_matrix(np.array([2.0, 2.0]), (axle, axle))
        assert s[0, 0] == pytest.approx(-100.0 * 2.0 / 1.2)


class TestRelVelocity:
    def test_zero(self, mats):
        assert rel_velocity(np.zeros(2), np.zeros(2), mats) == pytest.approx([0.0, 0.0])

    def test_state_only(self, mats):
        # v1 = vy + l1 r, v2 = vy - l2 r with l1=1.4, l2=1
        v = rel_velocity(np.array([1.0, 0.1]), np.zeros(2), mats)
        assert v == pytest.approx([1.14, 0.9])

    def test_steering_only(self, mats):
        v = rel_velocity(np.zeros(2), np.array([0.01, 0.01]), mats)
        assert v == pytest.approx([-0.5, -0.5])
