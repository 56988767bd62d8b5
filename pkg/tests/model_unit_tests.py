import unittest

import numpy as np

import gylab
from gylab.exceptions import ParameterError, ScopeError, ShapeError
from gylab.model import as_matrix, as_vector


class TestCoercion(unittest.TestCase):
    def test_vector(self):
        np.testing.assert_array_equal(as_vector(2.0, 1), [2.0])
        with self.assertRaises(ShapeError):
            as_vector(1.0, 2)

    def test_matrix(self):
        """A scalar becomes a multiple of the identity."""
        np.testing.assert_array_equal(as_matrix(3.0, 2), 3.0 * np.eye(2))
        with self.assertRaises(ShapeError):
            as_matrix(np.ones(3), 2)


class TestQuadraticGenerator(unittest.TestCase):
    def test_derivatives(self):
        # f = q^2 + b q at q = 1, b = 3
        f = gylab.QuadraticGenerator(2.0, coupling=1.0)
        self.assertAlmostEqual(f.eval(1.0, 3.0), 4.0)
        self.assertAlmostEqual(f.d_q(1.0, 3.0)[0], 5.0)
        self.assertAlmostEqual(f.d_b(1.0, 3.0)[0], 1.0)
        self.assertAlmostEqual(f.d_qq(1.0, 3.0)[0, 0], 2.0)
        self.assertAlmostEqual(f.d_qb(1.0, 3.0)[0, 0], 1.0)

    def test_symmetry(self):
        with self.assertRaises(ParameterError):
            gylab.QuadraticGenerator([[1.0, 2.0], [0.0, 1.0]])

    def test_dimension_from_matrix(self):
        f = gylab.QuadraticGenerator(np.eye(3))
        self.assertEqual(f.dimension, 3)


class TestProblemSpec(unittest.TestCase):
    def setUp(self):
        self.f = gylab.QuadraticGenerator(1.0)

    def test_coercion(self):
        spec = gylab.ProblemSpec(
            gylab.builtin_harmonic(2.0, 1.0), self.f, self.f, 3, b1=0.5
        )
        self.assertEqual(spec.mass, 2.0)
        self.assertIsInstance(spec.horizon, float)
        np.testing.assert_array_equal(spec.b1, [0.5])
        np.testing.assert_array_equal(spec.b2, [0.0])
        self.assertTrue(spec.separable)

    def test_invalid_horizon(self):
        with self.assertRaises(ParameterError):
            gylab.ProblemSpec(
                gylab.builtin_free_particle(), self.f, self.f, -1.0
            )

    def test_mass_mismatch(self):
        with self.assertRaises(ParameterError):
            gylab.ProblemSpec(
                gylab.builtin_harmonic(2.0, 1.0),
                self.f,
                self.f,
                1.0,
                mass=1.0,
            )

    def test_generator_dimension(self):
        with self.assertRaises(ShapeError):
            gylab.ProblemSpec(
                gylab.builtin_free_particle(dimension=2), self.f, self.f, 1.0
            )

    def test_with_parameters(self):
        spec = gylab.ProblemSpec(
            gylab.builtin_free_particle(), self.f, self.f, 1.0
        )
        moved = spec.with_parameters(b1=0.25)
        np.testing.assert_array_equal(moved.b1, [0.25])
        np.testing.assert_array_equal(spec.b1, [0.0])
        self.assertIs(moved.hamiltonian, spec.hamiltonian)

    def test_scope(self):
        spec = gylab.ProblemSpec(
            gylab.builtin_mixed(1.0, 1.0, 0.3), self.f, self.f, 1.0
        )
        self.assertFalse(spec.separable)
        self.assertFalse(spec.quadratic)
        with self.assertRaises(ScopeError):
            spec.require_separable("test")

        f2 = gylab.QuadraticGenerator(np.eye(2))
        spec2 = gylab.ProblemSpec(
            gylab.builtin_oscillators(1.0, np.eye(2)), f2, f2, 1.0
        )
        with self.assertRaises(ScopeError):
            spec2.require_one_dimensional("test")


class TestCheckDerivatives(unittest.TestCase):
    def test_builtin_models(self):
        report = gylab.check_derivatives(
            gylab.builtin_mixed(1.3, 0.7, 0.2), (0.3, -0.4)
        )
        self.assertLess(report.max_error, 1e-6)
        report = gylab.check_derivatives(
            gylab.builtin_polynomial(1.0, [0.0, 0.0, 0.5, 0.0, 0.25]),
            (0.1, 0.8),
        )
        self.assertLess(report.max_error, 1e-6)
        self.assertLess(report.symmetry["hess_qq"], 1e-14)

    def test_generator(self):
        f = gylab.QuadraticGenerator([[2.0, 0.5], [0.5, 1.0]], coupling=0.7)
        report = gylab.check_derivatives(f, ([0.2, -0.1], [1.0, 2.0]))
        self.assertLess(report.max_error, 1e-8)

    def test_wrong_gradient(self):
        """A gradient that is twice too large is caught."""
        h = gylab.Hamiltonian(
            1,
            energy=lambda p, q: 0.5 * p[0] ** 2 + 0.5 * q[0] ** 2,
            grad_p=lambda p, q: p,
            grad_q=lambda p, q: 2.0 * q,
            hess_pp=lambda p, q: 1.0,
            hess_pq=lambda p, q: 0.0,
            hess_qq=lambda p, q: 1.0,
        )
        report = gylab.check_derivatives(h, (0.5, 1.0))
        self.assertGreater(report.errors["grad_q"], 0.1)
        self.assertLess(report.errors["grad_p"], 1e-8)

    def test_second_order(self):
        """Central differences of a quartic are exact up to h^2 f'''/6."""
        model = gylab.builtin_polynomial(1.0, [0.0, 0.0, 0.5, 0.0, 0.25])
        coarse = gylab.check_derivatives(model, (0.1, 0.8), fd_step=1e-2)
        fine = gylab.check_derivatives(model, (0.1, 0.8), fd_step=5e-3)
        for name in ("grad_q", "hess_qq"):
            with self.subTest(name=name):
                ratio = coarse.errors[name] / fine.errors[name]
                self.assertAlmostEqual(ratio, 4.0, places=3)

    def test_step(self):
        with self.assertRaises(ParameterError):
            gylab.check_derivatives(
                gylab.builtin_harmonic(), (0.0, 0.0), fd_step=0.0
            )


class TestFactory(unittest.TestCase):
    def test_harmonic(self):
        h = gylab.builtin_harmonic(2.0, 3.0)
        # m w^2 q^2 / 2 with m w^2 = 18
        self.assertAlmostEqual(h.potential(0.5), 2.25)
        self.assertAlmostEqual(h.hess_qq(0.0, 0.5)[0, 0], 18.0)
        self.assertAlmostEqual(h.hess_pp(0.0, 0.5)[0, 0], 0.5)
        self.assertEqual(h.hess_pq(0.0, 0.5)[0, 0], 0.0)

    def test_polynomial(self):
        h = gylab.builtin_polynomial(1.0, [1.0, 0.0, 3.0])
        self.assertAlmostEqual(h.potential(2.0), 13.0)
        self.assertAlmostEqual(h.potential_gradient(2.0)[0], 12.0)
        self.assertAlmostEqual(h.potential_hessian(2.0)[0, 0], 6.0)
        with self.assertRaises(ParameterError):
            gylab.builtin_polynomial(1.0, [])
        self.assertTrue(h.quadratic)
        quartic = gylab.builtin_polynomial(1.0, [0.0, 0.0, 1.0, 0.0, 1.0])
        self.assertFalse(quartic.quadratic)

    def test_oscillators(self):
        h = gylab.builtin_oscillators(1.0, [[2.0, 1.0], [1.0, 2.0]])
        self.assertEqual(h.dimension, 2)
        self.assertAlmostEqual(h.potential([1.0, 1.0]), 3.0)
        with self.assertRaises(ParameterError):
            gylab.builtin_oscillators(1.0, [[2.0, 1.0], [0.0, 2.0]])

    def test_mixed(self):
        h = gylab.builtin_mixed(1.0, 1.0, 0.25)
        self.assertFalse(h.separable)
        self.assertFalse(h.quadratic)
        self.assertAlmostEqual(h.hess_pq(0.0, 0.0)[0, 0], 0.25)
        self.assertAlmostEqual(h.eval(1.0, 2.0), 0.5 + 2.0 + 0.5)

    def test_invalid_mass(self):
        with self.assertRaises(ParameterError):
            gylab.builtin_free_particle(mass=0.0)

    def test_invalid_frequency(self):
        for omega in (0.0, -1.0):
            with self.subTest(omega=omega):
                with self.assertRaises(ParameterError):
                    gylab.builtin_harmonic(1.0, omega)


if __name__ == "__main__":
    unittest.main()
