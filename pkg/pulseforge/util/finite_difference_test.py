import unittest

import numpy as np

from pulseforge.util import finite_difference


class TestFiniteDifference(unittest.TestCase):
    def test_central_difference_of_sine(self):
        derivative = finite_difference.central_difference(
            lambda h: np.sin(0.7 + h), 1e-5)
        self.assertAlmostEqual(float(derivative), np.cos(0.7), places=9)

    def test_richardson_beats_plain_difference(self):
        func = lambda h: np.exp(0.3 + h)
        exact = np.exp(0.3)
        plain = finite_difference.central_difference(func, 1e-2)
        refined = finite_difference.richardson_derivative(func, 1e-2)
        self.assertLess(abs(refined - exact), abs(plain - exact) / 100)

    def test_convergence_order_is_two(self):
        order = finite_difference.convergence_order(
            lambda h: np.array([np.sin(1 + h), np.cos(2 + h)]),
            np.array([np.cos(1), -np.sin(2)]))
        self.assertAlmostEqual(order, 2.0, delta=0.1)

    def test_gradient_of_quadratic_form(self):
        matrix = np.array([[2.0, 0.5], [0.5, 1.0]])
        x = np.array([[0.3, -1.2]])
        grad = finite_difference.gradient(
            lambda y: float(y.reshape(-1) @ matrix @ y.reshape(-1)), x)
        self.assertEqual(grad.shape, x.shape)
        np.testing.assert_allclose(grad.reshape(-1),
                                   2 * matrix @ x.reshape(-1),
                                   atol=1e-8)
        np.testing.assert_array_equal(x, [[0.3, -1.2]])


if __name__ == '__main__':
    unittest.main()
