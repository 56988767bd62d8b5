import unittest

import numpy as np

import gylab
from gylab.exceptions import ParameterError, ScopeError
from gylab.operators import (
    DetResult,
    an_det_prime,
    det_relative_gap,
    tilde_to_an_factor,
)


def small_example():
    """Free particle, m = eps = 1, N = 3, F1 = 2, F2 = 1.

    The Schur complement is [[3, -1, 0], [-1, 2, -1], [0, -1, 0]] with
    determinant -3.
    """
    spec = gylab.ProblemSpec(
        gylab.builtin_free_particle(),
        gylab.quadratic_generator(2.0),
        gylab.quadratic_generator(1.0),
        2.0,
        b1=1.0,
    )
    lattice = gylab.Lattice(3, 2.0)
    path = gylab.solve_critical_path(spec, lattice)
    return spec, lattice, path


SCHUR = np.array([[3.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 0.0]])


class TestSmallExample(unittest.TestCase):
    def setUp(self):
        self.spec, self.lattice, self.path = small_example()

    def test_blocks(self):
        hj = gylab.assemble_hj(self.spec, self.lattice, self.path)
        self.assertEqual(hj.size, 5)
        blocks = hj.blocks()
        np.testing.assert_array_equal(blocks["D1"], -np.eye(2))
        np.testing.assert_array_equal(
            blocks["D2"], [[-1.0, 1.0, 0.0], [0.0, -1.0, 1.0]]
        )
        np.testing.assert_array_equal(blocks["D3"], blocks["D2"].T)
        np.testing.assert_array_equal(blocks["D4"], np.diag([2.0, 0.0, -1.0]))
        np.testing.assert_allclose(hj.schur_complement().to_dense(), SCHUR)

    def test_determinants(self):
        hj = gylab.assemble_hj(self.spec, self.lattice, self.path)
        dense = gylab.det_dense(hj.to_dense())
        schur = gylab.det_schur_hj(hj)
        transfer = gylab.det_transfer_hj(self.spec, self.lattice, self.path)
        self.assertAlmostEqual(dense.value, -3.0, places=12)
        self.assertAlmostEqual(schur.value, -3.0, places=12)
        self.assertAlmostEqual(transfer.value, -3.0, places=12)
        self.assertEqual(dense.method, "dense_lu")
        self.assertEqual(schur.method, "schur_blocktri")
        self.assertEqual(transfer.method, "transfer_product")
        self.assertLess(transfer.sign_convention["flippedFormGap"], 1e-12)

    def test_an(self):
        an = gylab.assemble_an(self.spec, self.lattice, self.path)
        np.testing.assert_allclose(an.to_dense(), SCHUR)
        np.testing.assert_allclose(
            an.pivots()[:, 0, 0], [3.0, 5.0 / 3.0, -3.0 / 5.0]
        )
        prime = an_det_prime(an, self.lattice.epsilon)
        self.assertAlmostEqual(prime.value, -3.0, places=12)
        self.assertEqual(prime.eps_power_removed, 2)

    def test_transfer_factors(self):
        tf = gylab.transfer_factors(self.spec, self.lattice, self.path)
        np.testing.assert_allclose(tf.e[:, 0, 0], [3.0, 2.0, 0.0])
        self.assertAlmostEqual(tf.alpha[0, 0, 0], 2.0)
        self.assertAlmostEqual(tf.beta[0, 0, 0], -1.0)
        m, log_scale = tf.chain()
        self.assertAlmostEqual(m[0, 0] * np.exp(log_scale), -3.0)
        self.assertFalse(tf.chain_is_singular())


def spec_for(hamiltonian, f1, f2, horizon=1.0, b1=0.1, b2=-0.2):
    return gylab.ProblemSpec(hamiltonian, f1, f2, horizon, b1=b1, b2=b2)


class TestEngines(unittest.TestCase):
    def check_engines(self, spec, N):
        lattice = gylab.Lattice(N, spec.horizon)
        path = gylab.solve_critical_path(spec, lattice)
        hj = gylab.assemble_hj(spec, lattice, path)
        dense = gylab.det_dense(hj.to_dense())
        schur = gylab.det_schur_hj(hj)
        transfer = gylab.det_transfer_hj(spec, lattice, path)
        self.assertLess(det_relative_gap(dense, schur), 1e-9)
        self.assertLess(det_relative_gap(dense, transfer), 1e-9)
        return lattice, path, transfer

    def test_mixed(self):
        spec = spec_for(
            gylab.builtin_mixed(1.2, 0.8, 0.3),
            gylab.quadratic_generator(0.4),
            gylab.quadratic_generator(-0.6),
        )
        self.check_engines(spec, 30)

    def test_oscillators(self):
        stiffness = [[2.0, 0.5], [0.5, 1.0]]
        spec = spec_for(
            gylab.builtin_oscillators(1.0, stiffness),
            gylab.quadratic_generator([[0.5, 0.1], [0.1, 0.3]]),
            gylab.quadratic_generator(-0.5, dimension=2),
            b1=[0.1, 0.2],
            b2=[-0.1, 0.0],
        )
        self.check_engines(spec, 25)

    def test_separable_relation(self):
        """det HJ = (-1)^{N-1} m eps^{N-1} det A_N for one freedom."""
        spec = spec_for(
            gylab.builtin_harmonic(2.0, 1.5),
            gylab.quadratic_generator(0.5),
            gylab.quadratic_generator(-1.0),
        )
        lattice, path, transfer = self.check_engines(spec, 41)
        an = gylab.assemble_an(spec, lattice, path).determinant()
        sign, log_factor = tilde_to_an_factor(
            1, lattice.N, spec.mass, lattice.epsilon
        )
        predicted = DetResult.from_log(
            sign * an.sign, log_factor + an.log_abs, "schur_blocktri"
        )
        self.assertLess(det_relative_gap(transfer, predicted), 1e-10)

    def test_an_scope(self):
        spec = spec_for(
            gylab.builtin_mixed(1.0, 1.0, 0.3),
            gylab.quadratic_generator(0.4),
            gylab.quadratic_generator(-0.6),
        )
        lattice = gylab.Lattice(5, 1.0)
        path = gylab.DiscretePath(np.zeros(4), np.zeros(5))
        with self.assertRaises(ScopeError):
            gylab.assemble_an(spec, lattice, path)


def random_oscillators(rng, n):
    """Coupled oscillators with a positive semi-definite stiffness, a
    positive left curvature and a negative right one."""

    def jitter():
        g = rng.normal(size=(n, n))
        return 0.05 * (g + g.T)

    g = rng.normal(size=(n, n))
    stiffness = g @ g.T / n
    stiffness = 0.5 * (stiffness + stiffness.T)
    left = rng.uniform(0.5, 1.5) * np.eye(n) + jitter()
    right = -rng.uniform(0.5, 1.5) * np.eye(n) + jitter()
    return gylab.ProblemSpec(
        gylab.builtin_oscillators(rng.uniform(0.5, 2.0), stiffness),
        gylab.quadratic_generator(left),
        gylab.quadratic_generator(right),
        1.0,
        b1=rng.normal(size=n),
        b2=rng.normal(size=n),
    )


class TestRandomSweep(unittest.TestCase):
    def test_sweep(self):
        """Engines, the A_N relation and the discrete identity agree over
        random systems with up to three freedoms and 2 to 100 sites."""
        rng = np.random.default_rng(7)
        cases = [(1, 2), (3, 2), (1, 100), (3, 100)]
        cases += [
            (int(rng.integers(1, 4)), int(rng.integers(2, 101)))
            for _ in range(12)
        ]
        for n, N in cases:
            with self.subTest(n=n, N=N):
                spec = random_oscillators(rng, n)
                lattice = gylab.Lattice(N, spec.horizon)
                path = gylab.solve_critical_path(spec, lattice)
                hj = gylab.assemble_hj(spec, lattice, path)
                dense = gylab.det_dense(hj.to_dense())
                schur = gylab.det_schur_hj(hj)
                transfer = gylab.det_transfer_hj(spec, lattice, path)
                self.assertLess(det_relative_gap(dense, schur), 1e-8)
                self.assertLess(det_relative_gap(dense, transfer), 1e-8)

                an = gylab.assemble_an(spec, lattice, path).determinant()
                sign, log_factor = tilde_to_an_factor(
                    n, N, spec.mass, lattice.epsilon
                )
                predicted = DetResult.from_log(
                    sign * an.sign, log_factor + an.log_abs, "schur_blocktri"
                )
                self.assertLess(det_relative_gap(dense, predicted), 1e-8)

                report = gylab.verify_gy_discrete(spec, lattice, path)
                self.assertTrue(report.passed, report.relative_gap)


class TestHessianAssembly(unittest.TestCase):
    def test_matches_finite_differences(self):
        """The assembled matrix is the Hessian of the discrete action at an
        arbitrary path, not only at the critical one."""
        models = {
            "polynomial": gylab.builtin_polynomial(
                1.5, [0.0, 0.1, 0.5, 0.0, 0.2]
            ),
            "mixed": gylab.builtin_mixed(1.2, 0.8, 0.3),
        }
        N, h = 6, 1e-4
        lattice = gylab.Lattice(N, 1.0)
        rng = np.random.default_rng(3)
        for name, model in models.items():
            with self.subTest(model=name):
                spec = spec_for(
                    model,
                    gylab.quadratic_generator(0.3),
                    gylab.quadratic_generator(-0.4),
                )
                path = gylab.DiscretePath(
                    rng.normal(size=N - 1), rng.normal(size=N)
                )
                z = path.to_vector()
                fd = np.empty((z.size, z.size))
                for k in range(z.size):
                    e = np.zeros_like(z)
                    e[k] = h
                    upper = gylab.DiscretePath.from_vector(z + e, N, 1)
                    lower = gylab.DiscretePath.from_vector(z - e, N, 1)
                    fd[:, k] = (
                        gylab.action_gradient(spec, lattice, upper)
                        - gylab.action_gradient(spec, lattice, lower)
                    ) / (2.0 * h)
                hj = gylab.assemble_hj(spec, lattice, path).to_dense()
                np.testing.assert_allclose(hj, fd, atol=1e-6)

                # one entry straight from the action
                def action(dz):
                    moved = gylab.DiscretePath.from_vector(z + dz, N, 1)
                    return gylab.discrete_action(spec, lattice, moved)

                i, j = 0, N - 1
                ei = np.zeros_like(z)
                ej = np.zeros_like(z)
                ei[i] = ej[j] = 1e-3
                second = (
                    action(ei + ej)
                    - action(ei - ej)
                    - action(ej - ei)
                    + action(-ei - ej)
                ) / (4e-6)
                self.assertAlmostEqual(second, hj[i, j], places=5)


class TestDeterminantRecords(unittest.TestCase):
    def test_overflow(self):
        big = DetResult.from_log(1.0, 800.0, "transfer_product")
        self.assertTrue(np.isinf(big.value))
        self.assertIsNone(big.to_dict()["value"])
        self.assertEqual(big.to_dict()["logAbs"], 800.0)
        close = DetResult.from_log(1.0, 800.0 + 1e-13, "transfer_product")
        self.assertLess(det_relative_gap(big, close), 1e-12)

    def test_relative_gap(self):
        self.assertAlmostEqual(det_relative_gap(2.0, -2.0), 2.0)
        self.assertEqual(det_relative_gap(0.0, 0.0), 0.0)
        self.assertEqual(det_relative_gap(1.0, 0.0), 1.0)
        self.assertAlmostEqual(det_relative_gap(1.0, 0.5), 0.5)

    def test_singular_pivot_fallback(self):
        """A zero leading pivot falls back to dense LU."""
        matrix = gylab.BlockTridiagonal(
            np.zeros((2, 1, 1)), [[[1.0]]], [[[1.0]]]
        )
        det = matrix.determinant()
        self.assertEqual(det.method, "dense_lu")
        self.assertAlmostEqual(det.value, -1.0)

    def test_invalid(self):
        with self.assertRaises(ParameterError):
            gylab.det_dense(np.ones((2, 3)))
        with self.assertRaises(ParameterError):
            gylab.BlockTridiagonal(np.zeros((3, 1, 1)), [[[1.0]]], [[[1.0]]])


if __name__ == "__main__":
    unittest.main()
