"""Unit tests for parallel and damped transport and the W isometry"""
import unittest

import numpy as np
from scipy.spatial.transform import Rotation

from geometry.models import build_model
from sde_engine.grid import BrownianDriver, TimeGrid
from sde_engine.integrator import integrate
from transport.errors import GridTooCoarse
from transport.fields import PathVectorField, covariant_time_derivative, script_W
from transport.frames import build_transport, damped_translate, parallel_translate


class TestSphereTransport(unittest.TestCase):
    def setUp(self):
        self.model = build_model("sphere")
        self.grid = TimeGrid(1.0, 200)
        self.path = integrate(self.model, None, BrownianDriver.sample(self.grid, 3, 17, range(6)))
        self.frame = build_transport(self.path)

    def test_parallel_frame_is_orthonormal_and_tangent(self):
        self.assertLess(self.frame.isometry_defect(), 1e-8)
        cols = np.swapaxes(self.frame.parallel, -1, -2)
        residual = self.model.tangent_residual(self.path.points[..., None, :], cols)
        self.assertLess(np.max(residual), 1e-10)

    def test_damping_decays_at_the_ricci_rate(self):
        cols = self.frame.damped_columns()
        lengths = np.sqrt(np.sum(cols ** 2, axis=-2))
        t = self.grid.times[:, None, None]
        np.testing.assert_allclose(lengths * np.exp(0.5 * t), 1.0, atol=1e-8)

    def test_damping_is_the_same_on_every_path(self):
        np.testing.assert_allclose(self.frame.damping, np.broadcast_to(self.frame.damping[:, :1], self.frame.damping.shape), atol=1e-12)

    def test_inverse_round_trip(self):
        rng = np.random.default_rng(0)
        c = rng.standard_normal((201, 6, 2))
        np.testing.assert_allclose(self.frame.damped_inverse(self.frame.damped_apply(c)), c, atol=1e-10)
        pairing = self.model.inner(self.frame.damped_apply(c), self.frame.damped_inverse_adjoint(c))
        np.testing.assert_allclose(pairing, np.sum(c * c, axis=-1), atol=1e-10)

    def test_build_transport_composes_the_two_translations(self):
        parallel = parallel_translate(self.path)
        self.assertIsNone(parallel.damping)
        damped = damped_translate(self.path, parallel)
        np.testing.assert_array_equal(damped.parallel, self.frame.parallel)
        np.testing.assert_array_equal(damped.damping, self.frame.damping)

    def test_script_w_starts_at_zero(self):
        density = self.model.diffusion(self.path.points, np.array([1.0, 0.5, 0.0]))
        field = script_W(self.path, self.frame, density)
        np.testing.assert_array_equal(field.values[0], 0.0)
        self.assertLess(field.tangency_residual(self.path), 1e-10)

    def test_covariant_time_derivative_inverts_script_w_on_random_paths(self):
        t = self.grid.times[:, None]
        coords = np.stack([np.cos(2 * t), np.sin(t) + t], axis=-1) * np.ones((1, 6, 1))
        density = self.frame.damped_apply(coords)
        field = script_W(self.path, self.frame, density)
        recovered = covariant_time_derivative(self.path, self.frame, field)
        np.testing.assert_allclose(recovered, density, atol=1e-3)

    def test_translated_constant_vector_has_zero_derivative(self):
        c = np.broadcast_to(np.array([0.3, -1.1]), (201, 6, 2))
        field = PathVectorField(values=self.frame.damped_apply(c))
        np.testing.assert_allclose(covariant_time_derivative(self.path, self.frame, field), 0.0, atol=1e-8)


class TestDeterministicPath(unittest.TestCase):
    """Constant path at the base point: transport is the damping alone"""

    def setUp(self):
        self.model = build_model("sphere")
        self.grid = TimeGrid(1.0, 100)
        self.path = integrate(self.model, None, BrownianDriver.zeros(self.grid, 3, 1))
        self.frame = build_transport(self.path)

    def test_covariant_time_derivative_inverts_script_w(self):
        density = np.broadcast_to(np.array([1.0, -0.5, 0.0]), self.path.points.shape).copy()
        field = script_W(self.path, self.frame, density)
        recovered = covariant_time_derivative(self.path, self.frame, field)
        np.testing.assert_allclose(recovered, density, atol=1e-3)

    def test_coarse_grid(self):
        grid = TimeGrid(1.0, 3)
        path = integrate(self.model, None, BrownianDriver.zeros(grid, 3, 1))
        frame = build_transport(path)
        field = PathVectorField(values=np.zeros(path.points.shape))
        with self.assertRaises(GridTooCoarse):
            covariant_time_derivative(path, frame, field)


class TestGreatCircle(unittest.TestCase):
    """Constant driver along e: the path runs on the great circle through x_0 and e"""

    def test_parallel_transport_is_the_rotation_about_the_axis(self):
        model = build_model("sphere")
        grid = TimeGrid(1.0, 200)
        x0 = model.base_point
        e = np.array([1.0, 0.0, 0.0])
        increments = np.broadcast_to(e * grid.dt, (grid.steps, 1, 3)).copy()
        path = integrate(model, None, BrownianDriver.zeros(grid, 3, 1).with_increments(increments))
        frame = parallel_translate(path)
        x = path.points[:, 0]
        theta = np.arctan2(x[:, 0], x[:, 2])
        rotations = Rotation.from_rotvec(theta[:, None] * np.cross(x0, e)).as_matrix()
        self.assertGreater(theta[-1], 0.5)
        np.testing.assert_allclose(x, rotations @ x0, atol=1e-12)
        np.testing.assert_allclose(frame.parallel[:, 0], rotations @ frame.base, atol=1e-6)


class TestGroupTransport(unittest.TestCase):
    def test_no_damping_on_the_flat_group(self):
        model = build_model("group")
        path = integrate(model, None, BrownianDriver.sample(TimeGrid(1.0, 100), 3, 17, range(4)))
        frame = build_transport(path)
        np.testing.assert_allclose(frame.damping, np.broadcast_to(np.eye(3), frame.damping.shape), atol=1e-12)
        self.assertLess(frame.isometry_defect(), 1e-8)


if __name__ == '__main__':
    unittest.main()
