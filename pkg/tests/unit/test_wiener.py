"""Unit tests for Wiener-space integrals, chaos, exponential martingales and derivatives"""
import math
import unittest

import numpy as np

from geometry.models import build_model
from harness.stats import estimate
from pathspace.cameron_martin import CameronMartinVector
from sde_engine.grid import BrownianDriver, TimeGrid
from sde_engine.integrator import integrate, select_path
from wiener.chaos import chaos_remainder_identity_check, hermite, polynomial_functional
from wiener.derivative import (
    WienerFunctional,
    exp_martingale_functional,
    flat_ibp_sample,
    linear_terminal,
    malliavin_derivative_fd,
    sine_of_marginal,
)
from wiener.errors import InvalidCoefficient, NonFiniteEvaluation
from wiener.exponential import (
    conditional_exp_martingale,
    conditional_exp_martingale_check,
    exp_martingale,
    exp_martingale_moments,
)
from wiener.integrals import (
    ChaosCoefficient,
    divergence_of_h,
    ito_integral,
    iterated_integral,
    strict_simplex_mask,
    wiener_integral,
)


class TestIntegrals(unittest.TestCase):
    def setUp(self):
        self.grid = TimeGrid(1.0, 20)
        self.driver = BrownianDriver.sample(self.grid, 1, 3, range(50))

    def test_wiener_integral(self):
        h = CameronMartinVector.constant(self.grid, np.array([2.0]))
        np.testing.assert_allclose(wiener_integral(self.driver, h), 2.0 * self.driver.terminal()[:, 0], atol=1e-12)
        np.testing.assert_allclose(divergence_of_h(self.driver, h), -2.0 * self.driver.terminal()[:, 0], atol=1e-12)

    def test_ito_integral_of_the_path(self):
        # sum B_k dB_k = (B_T^2 - sum dB_k^2) / 2
        ito = ito_integral(self.driver, lambda k, past: past[-1])
        inc = self.driver.increments[..., 0]
        expected = 0.5 * (self.driver.terminal()[:, 0] ** 2 - np.sum(inc ** 2, axis=0))
        np.testing.assert_allclose(ito, expected, atol=1e-12)

    def test_integrand_cannot_write_the_path(self):
        def cheating(k, past):
            past[-1] = 0.0
            return past[-1]

        with self.assertRaises(ValueError):
            ito_integral(self.driver, cheating)

    def test_iterated_integrals_of_constants(self):
        b_t = self.driver.terminal()[:, 0]
        quad = np.sum(self.driver.increments[..., 0] ** 2, axis=0)
        first = iterated_integral(self.driver, ChaosCoefficient(self.grid, 1, 1, constant=1.0))
        second = iterated_integral(self.driver, ChaosCoefficient(self.grid, 2, 1, constant=1.0))
        np.testing.assert_allclose(first, b_t, atol=1e-12)
        np.testing.assert_allclose(second, b_t ** 2 - quad, atol=1e-12)
        np.testing.assert_array_equal(iterated_integral(self.driver, ChaosCoefficient(self.grid, 0, value=1.5)), 1.5)

    def test_dense_and_constant_coefficients_agree(self):
        grid = TimeGrid(1.0, 6)
        driver = BrownianDriver.sample(grid, 2, 4, range(5))
        c = np.array([[1.0, -0.5], [0.25, 2.0]])
        dense = np.broadcast_to(c, (6, 6, 2, 2)).copy()
        a = iterated_integral(driver, ChaosCoefficient(grid, 2, 2, constant=c))
        b = iterated_integral(driver, ChaosCoefficient(grid, 2, 2, dense=dense))
        np.testing.assert_allclose(a, b, atol=1e-12)

    def test_second_moment_of_the_second_chaos(self):
        alpha = ChaosCoefficient(TimeGrid(1.0, 100), 2, 1, constant=1.0)
        self.assertAlmostEqual(alpha.second_moment(), 2 * (1 - 1 / 100), places=12)

    def test_strict_simplex_mask(self):
        mask = strict_simplex_mask(4, 2)
        self.assertEqual(int(mask.sum()), math.comb(4, 2))
        self.assertFalse(mask[2, 2])
        self.assertTrue(mask[1, 3])

    def test_invalid_coefficients(self):
        with self.assertRaises(InvalidCoefficient):
            ChaosCoefficient(self.grid, 2, 1)
        with self.assertRaises(InvalidCoefficient):
            ChaosCoefficient(self.grid, 2, 1, dense=np.zeros((3, 3, 1, 1)))
        with self.assertRaises(InvalidCoefficient):
            iterated_integral(self.driver, ChaosCoefficient(self.grid, 1, 2, constant=1.0))


class TestChaos(unittest.TestCase):
    def test_hermite(self):
        x = np.array([-1.0, 0.5, 2.0])
        np.testing.assert_allclose(hermite(2, x, 0.5), x ** 2 - 0.5, atol=1e-14)
        np.testing.assert_allclose(hermite(3, x, 2.0), x ** 3 - 3 * 2.0 * x, atol=1e-13)

    def test_chaos_coefficients(self):
        f = polynomial_functional([0, 0, 1], horizon=1.0)
        np.testing.assert_allclose(f.chaos_coefficients(), [1.0, 0.0, 1.0], atol=1e-14)
        self.assertEqual(f.chaos_order(), 2)

    def test_remainder_identity(self):
        square = chaos_remainder_identity_check(polynomial_functional([0, 0, 1]), 1)
        self.assertAlmostEqual(square.lhs, 4.0, places=12)
        self.assertLess(square.residual, 1e-10)
        cube = chaos_remainder_identity_check(polynomial_functional([0, 0, 0, 1]), 1)
        self.assertAlmostEqual(cube.lhs, 18.0, places=12)
        self.assertAlmostEqual(cube.a_norm_sq, 6.0, places=10)
        self.assertAlmostEqual(cube.da_norm_sq, 6.0, places=10)

    def test_trivial_remainder(self):
        result = chaos_remainder_identity_check(polynomial_functional([1, 2]), 1)
        self.assertTrue(result.trivial)
        self.assertEqual(result.rhs, 0.0)

    def test_monte_carlo_left_side_is_attached(self):
        driver = BrownianDriver.sample(TimeGrid(1.0, 2), 1, 8, range(200))
        result = chaos_remainder_identity_check(polynomial_functional([0, 0, 1]), 1, driver=driver)
        self.assertEqual(result.monte_carlo.n, 200)
        self.assertAlmostEqual(result.monte_carlo.target, result.rhs, places=12)
        # |D R_1|^2 = 4 T B_T^2 per path
        np.testing.assert_allclose(result.monte_carlo.mean, np.mean(4 * driver.terminal()[:, 0] ** 2), rtol=1e-12)

    def test_evaluate_requires_one_dimensional_noise(self):
        driver = BrownianDriver.sample(TimeGrid(1.0, 4), 2, 8, range(3))
        with self.assertRaises(InvalidCoefficient):
            polynomial_functional([0, 1]).evaluate(driver)


class TestExponentialMartingales(unittest.TestCase):
    def test_unit_mean(self):
        grid = TimeGrid(1.0, 10)
        driver = BrownianDriver.sample(grid, 2, 12, range(20000))
        a = CameronMartinVector.constant(grid, np.array([0.5, -0.5]))
        est = estimate(exp_martingale(driver, a), 1.0, z_max=5.0)
        self.assertTrue(est.passed)

    def test_first_and_second_moments(self):
        grid = TimeGrid(1.0, 20)
        driver = BrownianDriver.sample(grid, 2, 31, range(40000))
        for energy in [0.1, 0.25, 0.5]:
            a = CameronMartinVector.constant(grid, np.sqrt(energy) * np.array([0.6, 0.8]))
            first, second = exp_martingale_moments(driver, a, z_max=5.0)
            self.assertAlmostEqual(second.target, math.exp(energy), places=12)
            self.assertTrue(first.passed, f"E[eps] at |a|^2={energy}: z={first.z:.2f}")
            self.assertTrue(second.passed, f"E[eps^2] at |a|^2={energy}: z={second.z:.2f}")

    def test_second_moment_target_uses_the_step_energy(self):
        grid = TimeGrid(2.0, 8)
        driver = BrownianDriver.sample(grid, 1, 31, range(10))
        a = CameronMartinVector.from_function(grid, lambda t: t[:, None])
        _, second = exp_martingale_moments(driver, a)
        self.assertAlmostEqual(second.target, math.exp(float(a.step_energy())), places=12)
        self.assertEqual(second.n, 10)

    def test_clamp_flag(self):
        grid = TimeGrid(1.0, 4)
        driver = BrownianDriver.sample(grid, 1, 12, range(3))
        a = CameronMartinVector.constant(grid, np.array([1.0]))
        values, flag = exp_martingale(driver.with_increments(np.full(driver.increments.shape, 1e3)), a, return_flag=True)
        self.assertTrue(np.all(flag))
        self.assertTrue(np.all(np.isfinite(values)))

    def test_conditional_check_on_one_base_path(self):
        grid = TimeGrid(1.0, 40)
        base = select_path(integrate(build_model("sphere"), None, BrownianDriver.sample(grid, 3, 12, [5])), 0)
        a = CameronMartinVector.constant(grid, np.array([1.0, 0.0, 0.0]))
        est = conditional_exp_martingale_check(base, a, 32, seed=12, base_index=5, tol=np.inf)
        self.assertEqual(est.n, 32)
        self.assertAlmostEqual(est.target, float(conditional_exp_martingale(base, a)), places=12)
        self.assertGreater(est.mean, 0.0)

    def test_conditional_expectation_on_the_group_is_the_martingale(self):
        grid = TimeGrid(1.0, 50)
        path = integrate(build_model("group"), None, BrownianDriver.sample(grid, 3, 12, range(6)))
        a = CameronMartinVector.constant(grid, np.array([1.0, 0.0, 0.0]))
        np.testing.assert_allclose(conditional_exp_martingale(path, a), exp_martingale(path.driver, a), rtol=1e-12)


class TestMalliavinDerivative(unittest.TestCase):
    def setUp(self):
        self.grid = TimeGrid(1.0, 20)
        self.driver = BrownianDriver.sample(self.grid, 3, 5, range(30))
        self.h = CameronMartinVector.from_function(self.grid, lambda t: np.stack([np.ones_like(t), t, np.cos(t)], axis=-1))

    def test_finite_differences_match_the_analytic_derivatives(self):
        a = CameronMartinVector.constant(self.grid, np.array([1.0, 0.5, 0.0]))
        functionals = [
            linear_terminal(np.array([1.0, -2.0, 0.5])),
            exp_martingale_functional(a),
            sine_of_marginal(0.5, np.array([1.0, 0.0, 1.0])),
        ]
        for F in functionals:
            np.testing.assert_allclose(malliavin_derivative_fd(F, self.driver, self.h), F.derivative(self.driver, self.h), atol=1e-6)

    def test_richardson(self):
        F = sine_of_marginal(1.0, np.array([1.0, 1.0, 0.0]))
        value, discrepancy = malliavin_derivative_fd(F, self.driver, self.h, richardson=True)
        np.testing.assert_allclose(value, F.derivative(self.driver, self.h), atol=1e-9)
        self.assertTrue(np.all(discrepancy >= 0))

    def test_non_finite_evaluation(self):
        F = WienerFunctional(evaluate=lambda driver: np.full(driver.batch_shape, np.nan), label="nan")
        with self.assertRaises(NonFiniteEvaluation):
            malliavin_derivative_fd(F, self.driver, self.h)

    def test_flat_integration_by_parts_for_a_linear_functional(self):
        driver = BrownianDriver.sample(self.grid, 3, 5, range(20000))
        F = linear_terminal(np.array([1.0, 0.0, 0.0]))
        derivative, weighted = flat_ibp_sample(F, driver, self.h)
        self.assertTrue(estimate(derivative - weighted, 0.0, z_max=5.0).passed)


if __name__ == '__main__':
    unittest.main()
