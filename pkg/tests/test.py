"""End-to-end checks of the built-in models."""

import unittest

import numpy as np

import gylab


class TestWorkflow(unittest.TestCase):
    def test_oscillator(self):
        """Discrete and continuum identities on one harmonic problem."""
        spec = gylab.ProblemSpec(
            gylab.builtin_harmonic(1.0, 1.0),
            gylab.quadratic_generator(0.5),
            gylab.quadratic_generator(-1.0),
            1.0,
            b1=0.2,
            b2=-0.1,
        )
        lattice = gylab.Lattice(101, spec.horizon)
        path = gylab.solve_critical_path(spec, lattice)

        self.assertTrue(gylab.verify_gy_discrete(spec, lattice, path).passed)
        self.assertTrue(gylab.verify_gy_an(spec, lattice, path).passed)
        self.assertTrue(gylab.verify_gy_zeta(spec).passed)

        # det'A_N approaches half the zeta determinant at first order
        zeta = gylab.zeta_det(spec).value
        coarse = gylab.det_prime_an(spec, gylab.Lattice(51, 1.0)).value
        fine = gylab.det_prime_an(spec, lattice, path).value
        self.assertLess(abs(fine - zeta / 2), abs(coarse - zeta / 2))
        self.assertLess(abs(fine / zeta - 0.5), 0.05)

    def test_continuum_path_on_lattice(self):
        """The sampled continuum path nearly solves the discrete problem."""
        spec = gylab.ProblemSpec(
            gylab.builtin_polynomial(1.0, [0.0, 0.0, 0.5, 0.0, 0.1]),
            gylab.quadratic_generator(0.5),
            gylab.quadratic_generator(-0.5),
            1.0,
            b1=0.3,
            b2=-0.2,
        )
        lattice = gylab.Lattice(201, 1.0)
        discrete = gylab.solve_critical_path(spec, lattice)
        continuum = gylab.shoot_classical_path(spec).sample(lattice)
        gap = np.max(np.abs(discrete.positions - continuum.positions))
        self.assertLess(gap, 1e-2)

    def test_two_freedoms(self):
        spec = gylab.ProblemSpec(
            gylab.builtin_oscillators(1.0, [[2.0, 0.5], [0.5, 1.0]]),
            gylab.quadratic_generator(0.5, dimension=2),
            gylab.quadratic_generator(-0.5, dimension=2),
            1.0,
            b1=[0.1, 0.2],
        )
        lattice = gylab.Lattice(61, 1.0)
        path = gylab.solve_critical_path(spec, lattice)
        report = gylab.verify_gy_discrete(spec, lattice, path)
        self.assertTrue(report.passed)
        self.assertEqual(report.details["parityFactor"], 1)


if __name__ == "__main__":
    unittest.main()
