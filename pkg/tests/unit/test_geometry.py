"""Unit tests for the manifold models and finite-difference oracles"""
import unittest

import numpy as np

from geometry.errors import ConstraintViolation, NotTangent, StepUnderflow
from geometry.models import build_model
from geometry.oracles import fd_lw_section_derivative, metric_compatibility_defect, ricci_oracle
from geometry.so3 import exp_so3, hat, right_jacobian_so3, vee
from sde_engine.random_streams import Channel, keyed_generator


class TestSphere(unittest.TestCase):
    def setUp(self):
        self.model = build_model("sphere")
        self.rng = keyed_generator(7, 0, Channel.AUX)
        self.x = self.model.random_point(self.rng, 50)
        self.v = self.model.random_tangent(self.rng, self.x)

    def test_diffusion_is_tangent(self):
        e = self.rng.standard_normal((50, 3))
        self.assertLess(np.max(self.model.tangent_residual(self.x, self.model.diffusion(self.x, e))), 1e-12)

    def test_kernel_complement_is_projection(self):
        k_perp = self.model.kernel_complement(self.x)
        np.testing.assert_allclose(k_perp @ k_perp, k_perp, atol=1e-12)
        x0 = self.model.base_point
        basis = self.model.kernel_basis(x0)
        self.assertEqual(basis.shape, (3, 1))
        np.testing.assert_allclose(self.model.kernel_complement(x0) @ basis, 0.0, atol=1e-12)

    def test_kernel_basis_on_a_batch(self):
        basis = self.model.kernel_basis(self.x)
        self.assertEqual(basis.shape, (50, 3, 1))
        np.testing.assert_allclose(basis[..., 0], self.x, atol=1e-12)
        np.testing.assert_allclose(self.model.kernel_complement(self.x) @ basis, 0.0, atol=1e-12)
        # rows of different lengths are normalized separately
        scaled = self.x[:2] * np.array([[2.0], [0.5]])
        np.testing.assert_allclose(self.model.kernel_basis(scaled)[..., 0], self.x[:2], atol=1e-12)

    def test_parallel_sections_have_zero_derivative(self):
        w = self.rng.standard_normal((50, 3))
        e_perp = np.einsum("...ij,...j->...i", self.model.kernel_complement(self.x), w)
        self.assertLess(np.max(np.abs(self.model.lw_derivative_of_section(self.x, self.v, e_perp))), 1e-12)
        self.assertLess(np.max(np.abs(fd_lw_section_derivative(self.model, self.x, self.v, e_perp))), 1e-6)

    def test_lw_derivative_matches_finite_differences(self):
        e = self.rng.standard_normal((50, 3))
        analytic = self.model.lw_derivative_of_section(self.x, self.v, e)
        fd = fd_lw_section_derivative(self.model, self.x, self.v, e)
        self.assertLess(np.max(np.abs(analytic - fd)), 1e-6)

    def test_connection_is_metric(self):
        e = self.rng.standard_normal((50, 3))
        f = self.rng.standard_normal((50, 3))
        self.assertLess(np.max(np.abs(metric_compatibility_defect(self.model, self.x, self.v, e, f))), 1e-6)

    def test_ricci_oracle(self):
        x, v = self.x[:10], self.v[:10]
        np.testing.assert_allclose(ricci_oracle(self.model, x, v), self.model.ricci_sharp(x, v), atol=1e-4)

    def test_ricci_is_scalar_on_higher_spheres(self):
        model = build_model("sphere", n=3)
        x = model.random_point(self.rng, 5)
        v = model.random_tangent(self.rng, x)
        np.testing.assert_allclose(model.ricci_sharp(x, v), 2 * v, atol=1e-12)

    def test_validation(self):
        with self.assertRaises(ConstraintViolation):
            self.model.diffusion_map(np.array([0.0, 0.0, 2.0]), np.ones(3))
        with self.assertRaises(NotTangent):
            self.model.right_inverse(self.model.base_point, np.array([0.0, 0.0, 1.0]))

    def test_lw_covariant_derivative_of_a_scaled_section(self):
        e = self.rng.standard_normal((50, 3))
        fd = self.model.lw_covariant_derivative(self.x, self.v, lambda y: 2.0 * self.model.diffusion(y, e))
        np.testing.assert_allclose(fd, 2.0 * self.model.lw_derivative_of_section(self.x, self.v, e), atol=2e-6)
        still = self.model.lw_covariant_derivative(self.x, np.zeros_like(self.v), lambda y: self.model.diffusion(y, e))
        np.testing.assert_allclose(still, 0.0, atol=1e-12)

    def test_step_underflow(self):
        with self.assertRaises(StepUnderflow):
            fd_lw_section_derivative(self.model, self.x, self.v, np.ones(3), step=1e-14)


class TestRotationGroup(unittest.TestCase):
    def setUp(self):
        self.model = build_model("group")
        self.rng = keyed_generator(7, 1, Channel.AUX)
        self.x = self.model.random_point(self.rng, 20)
        self.v = self.model.random_tangent(self.rng, self.x)

    def test_random_points_are_rotations(self):
        self.assertLess(np.max(self.model.constraint_residual(self.x)), 1e-10)

    def test_diffusion_is_an_isometry(self):
        cols = self.model.diffusion_matrix(self.x)
        gram = self.model.metric_scale * np.swapaxes(cols, -1, -2) @ cols
        np.testing.assert_allclose(gram, np.broadcast_to(np.eye(3), gram.shape), atol=1e-12)

    def test_no_redundant_noise(self):
        self.assertEqual(self.model.kernel_basis(self.model.base_point).shape, (3, 0))
        self.assertEqual(self.model.kernel_basis(self.x).shape, (20, 3, 0))
        np.testing.assert_allclose(self.model.kernel_complement(self.x), np.broadcast_to(np.eye(3), (20, 3, 3)), atol=1e-12)

    def test_left_invariant_sections_are_parallel(self):
        e = self.rng.standard_normal((20, 3))
        np.testing.assert_array_equal(self.model.lw_derivative_of_section(self.x, self.v, e), 0.0)
        self.assertLess(np.max(np.abs(fd_lw_section_derivative(self.model, self.x, self.v, e))), 1e-6)

    def test_flat_ricci(self):
        np.testing.assert_array_equal(self.model.ricci_sharp(self.x, self.v), 0.0)
        self.assertLess(np.max(np.abs(ricci_oracle(self.model, self.x[:5], self.v[:5]))), 1e-4)


class TestSO3Helpers(unittest.TestCase):
    def test_hat_vee(self):
        e = np.array([[0.3, -1.2, 2.0], [1e-9, 0.0, 0.0]])
        np.testing.assert_array_equal(vee(hat(e)), e)
        np.testing.assert_allclose(hat(e[0]) @ np.array([1.0, 2.0, 3.0]), np.cross(e[0], [1.0, 2.0, 3.0]))

    def test_exponential_is_rotation(self):
        r = exp_so3(np.array([[0.4, 0.1, -0.7], [1e-6, 0.0, 2e-6]]))
        np.testing.assert_allclose(np.swapaxes(r, -1, -2) @ r, np.broadcast_to(np.eye(3), r.shape), atol=1e-12)
        np.testing.assert_allclose(np.linalg.det(r), 1.0, atol=1e-12)

    def test_right_jacobian(self):
        e = np.array([0.4, 0.1, -0.7])
        w = np.array([0.2, -0.5, 0.3])
        s = 1e-6
        fd = (exp_so3(e + s * w) - exp_so3(e - s * w)) / (2 * s)
        np.testing.assert_allclose(fd, exp_so3(e) @ hat(right_jacobian_so3(e) @ w), atol=1e-8)


if __name__ == '__main__':
    unittest.main()
