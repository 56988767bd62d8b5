import json
import os
import tempfile
import unittest

import numpy as np

import gylab
from gylab.exceptions import (
    ConjugatePointError,
    ConvergenceWarning,
    ScopeError,
)


def free_particle(f1=2.0, f2=1.0, b1=1.0, b2=0.0):
    spec = gylab.ProblemSpec(
        gylab.builtin_free_particle(),
        gylab.quadratic_generator(f1),
        gylab.quadratic_generator(f2),
        2.0,
        b1=b1,
        b2=b2,
    )
    return spec, gylab.Lattice(3, 2.0)


class TestCrossHessian(unittest.TestCase):
    """On the three site free particle S = -(b1^2 + 2 b1 b2 - 5 b2^2)/6,
    so d2S/db1db2 = -1/3."""

    def setUp(self):
        self.spec, self.lattice = free_particle()
        self.path = gylab.solve_critical_path(self.spec, self.lattice)

    def test_chain(self):
        cross = gylab.action_cross_hessian_chain(
            self.spec, self.lattice, self.path
        )
        self.assertEqual(cross.shape, (1, 1))
        self.assertAlmostEqual(cross[0, 0], -1.0 / 3.0, places=12)

    def test_fd(self):
        cross = gylab.action_cross_hessian_fd(
            self.spec, self.lattice, path=self.path, threads=1
        )
        self.assertAlmostEqual(cross[0, 0], -1.0 / 3.0, places=6)

    def test_sensitivities(self):
        # q_1 = -(b1 + b2)/3, q_2 = -b2, q_3 = -b2 + (b1 - 2 b2)/3
        dq = gylab.sensitivities(self.spec, self.lattice, self.path)
        np.testing.assert_allclose(
            dq[:, 0, 0], [-1.0 / 3.0, -1.0, -5.0 / 3.0], atol=1e-12
        )

    def test_sensitivities_match_resolves(self):
        """dq/db2 from the transfer recursion against re-solved paths."""
        cases = [
            gylab.ProblemSpec(
                gylab.builtin_polynomial(1.0, [0.0, 0.0, 0.5, 0.0, 0.1]),
                gylab.quadratic_generator(0.5),
                gylab.quadratic_generator(-0.5),
                1.0,
                b1=0.3,
                b2=-0.2,
            ),
            gylab.ProblemSpec(
                gylab.builtin_oscillators(1.0, [[2.0, 0.5], [0.5, 1.0]]),
                gylab.quadratic_generator([[0.5, 0.1], [0.1, 0.3]]),
                gylab.quadratic_generator(-0.5, dimension=2),
                1.0,
                b1=[0.1, 0.2],
                b2=[-0.1, 0.0],
            ),
        ]
        h = 1e-4
        for spec in cases:
            with self.subTest(n=spec.dimension):
                lattice = gylab.Lattice(51, 1.0)
                path = gylab.solve_critical_path(
                    spec, lattice, newton_tol=1e-12
                )
                dq = gylab.sensitivities(spec, lattice, path)
                for b in range(spec.dimension):
                    shifted = []
                    for sign in (1.0, -1.0):
                        b2 = spec.b2.copy()
                        b2[b] += sign * h
                        s = spec.with_parameters(b2=b2)
                        shifted.append(
                            gylab.solve_critical_path(
                                s, lattice, init=path, newton_tol=1e-12
                            ).positions
                        )
                    fd = (shifted[0] - shifted[1]) / (2.0 * h)
                    np.testing.assert_allclose(dq[:, :, b], fd, atol=1e-6)

    def test_b1_gradient(self):
        report = gylab.check_b1_gradient(self.spec, self.lattice, self.path)
        self.assertTrue(report.passed)
        self.assertAlmostEqual(report.details["exact"][0], -1.0 / 3.0)


class TestSmallIdentities(unittest.TestCase):
    def setUp(self):
        self.spec, self.lattice = free_particle()

    def test_discrete(self):
        report = gylab.verify_gy_discrete(self.spec, self.lattice)
        self.assertTrue(report.passed)
        self.assertAlmostEqual(report.lhs, -1.0 / 3.0, places=12)
        self.assertAlmostEqual(report.rhs, -1.0 / 3.0, places=12)
        self.assertAlmostEqual(report.details["detHJ"]["value"], -3.0)
        self.assertEqual(report.details["parityFactor"], 1)
        self.assertLess(report.details["separableFormGap"], 1e-12)
        self.assertEqual(report.parity, "odd")

    def test_an(self):
        report = gylab.verify_gy_an(self.spec, self.lattice)
        self.assertTrue(report.passed)
        self.assertAlmostEqual(report.lhs, -3.0, places=12)
        self.assertAlmostEqual(report.rhs, -3.0, places=12)

    def test_report_dict(self):
        out = gylab.verify_gy_discrete(self.spec, self.lattice).to_dict()
        self.assertTrue(out["pass"])
        self.assertEqual(out["N"], 3)
        self.assertEqual(out["lhs_method"], "chain_rule")
        self.assertEqual(len(out["lhs_matrix"]), 1)

    def test_save(self):
        report = gylab.verify_gy_discrete(self.spec, self.lattice)
        out = json.loads(report.to_json())
        self.assertEqual(out["identity"], "gy_discrete")
        self.assertAlmostEqual(out["lhs"], -1.0 / 3.0, places=12)
        with tempfile.TemporaryDirectory() as tmp:
            name = os.path.join(tmp, "gy")
            report.save(name)
            with open(name + ".json") as fh:
                saved = json.load(fh)
        self.assertTrue(saved["pass"])
        self.assertEqual(saved["parity"], "odd")


class TestModels(unittest.TestCase):
    def test_harmonic(self):
        spec = gylab.ProblemSpec(
            gylab.builtin_harmonic(1.0, 2.0),
            gylab.quadratic_generator(0.5),
            gylab.quadratic_generator(-1.0),
            1.0,
            b1=0.2,
            b2=-0.3,
        )
        lattice = gylab.Lattice(201, 1.0)
        path = gylab.solve_critical_path(spec, lattice)
        report = gylab.verify_gy_discrete(spec, lattice, path)
        self.assertTrue(report.passed)
        self.assertLess(report.details["separableFormGap"], 1e-10)
        self.assertAlmostEqual(
            report.details["separableForm"], report.rhs, places=10
        )
        self.assertTrue(gylab.verify_gy_an(spec, lattice, path).passed)
        fd = gylab.verify_gy_discrete(spec, lattice, path, lhs="fd")
        self.assertEqual(fd.lhs_method, "finite_difference")
        self.assertTrue(fd.passed)

    def test_mixed(self):
        spec = gylab.ProblemSpec(
            gylab.builtin_mixed(1.0, 1.0, 0.3),
            gylab.quadratic_generator(0.5),
            gylab.quadratic_generator(-0.5),
            1.0,
            b1=0.1,
        )
        lattice = gylab.Lattice(51, 1.0)
        report = gylab.verify_gy_discrete(spec, lattice)
        self.assertTrue(report.passed)
        self.assertNotIn("parityFactor", report.details)
        with self.assertRaises(ScopeError):
            gylab.verify_gy_an(spec, lattice)

    def test_oscillators(self):
        spec = gylab.ProblemSpec(
            gylab.builtin_oscillators(1.0, [[2.0, 0.5], [0.5, 1.0]]),
            gylab.quadratic_generator([[0.5, 0.1], [0.1, 0.3]]),
            gylab.quadratic_generator(-0.5, dimension=2),
            1.0,
            b1=[0.1, 0.2],
            b2=[-0.1, 0.0],
        )
        lattice = gylab.Lattice(41, 1.0)
        report = gylab.verify_gy_discrete(spec, lattice)
        self.assertTrue(report.passed)
        self.assertEqual(report.lhs_matrix.shape, (2, 2))
        self.assertTrue(gylab.verify_gy_an(spec, lattice).passed)


class TestDegenerateCases(unittest.TestCase):
    def test_zero_coupling(self):
        """Both sides vanish when f2 does not depend on b2."""
        spec = gylab.ProblemSpec(
            gylab.builtin_free_particle(),
            gylab.quadratic_generator(2.0),
            gylab.quadratic_generator(1.0, coupling=0.0),
            2.0,
            b1=1.0,
        )
        with self.assertWarns(ConvergenceWarning):
            report = gylab.verify_gy_discrete(spec, gylab.Lattice(3, 2.0))
        self.assertEqual(report.lhs, 0.0)
        self.assertEqual(report.rhs, 0.0)
        self.assertTrue(report.passed)

    def test_conjugate_point(self):
        """Free boundaries at both ends leave the constant mode."""
        spec, lattice = free_particle(f1=0.0, f2=0.0, b1=0.0)
        path = gylab.DiscretePath(np.zeros(2), np.zeros(3))
        with self.assertRaises(ConjugatePointError):
            gylab.verify_gy_discrete(spec, lattice, path)
        with self.assertRaises(ConjugatePointError):
            gylab.action_cross_hessian_chain(spec, lattice, path)


if __name__ == "__main__":
    unittest.main()
