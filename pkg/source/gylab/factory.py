""" Factories for the built-in Hamiltonians and boundary generators.
"""
import numpy as np
from numpy.polynomial import Polynomial

from .exceptions import ParameterError
from .model import (
    Hamiltonian,
    QuadraticGenerator,
    SeparableHamiltonian,
    as_matrix,
)


def builtin_free_particle(mass=1.0, dimension=1):
    """This function returns the free particle H = |p|^2/2m.

    Args:
    :param mass float: Particle mass.
    :param dimension int: Number of degrees of freedom.
    :return SeparableHamiltonian: The model.
    """
    n = int(dimension)
    return SeparableHamiltonian(
        mass,
        potential=lambda q: 0.0,
        gradient=lambda q: np.zeros(n),
        hessian=lambda q: np.zeros((n, n)),
        dimension=n,
        quadratic=True,
    )


def builtin_harmonic(mass=1.0, omega=1.0):
    """This function returns the oscillator H = p^2/2m + m w^2 q^2/2.

    Args:
    :param mass float: Particle mass.
    :param omega float: Angular frequency, positive.
    :return SeparableHamiltonian: The model.
    """
    if not float(omega) > 0:
        raise ParameterError("omega", omega, "Frequency must be positive")
    k = float(mass) * float(omega) ** 2
    return SeparableHamiltonian(
        mass,
        potential=lambda q: 0.5 * k * float(q[0]) ** 2,
        gradient=lambda q: k * q,
        hessian=lambda q: k,
        dimension=1,
        quadratic=True,
    )


def builtin_polynomial(mass=1.0, coefficients=(0.0,)):
    """This function returns H = p^2/2m + sum_k c_k q^k.

    Args:
    :param mass float: Particle mass.
    :param coefficients list: Polynomial coefficients in increasing degree.
    :return SeparableHamiltonian: The model.
    """
    if len(coefficients) == 0:
        raise ParameterError(
            "coefficients", coefficients, "At least one coefficient is needed"
        )
    v = Polynomial(np.asarray(coefficients, dtype=float))
    dv = v.deriv(1)
    d2v = v.deriv(2)
    return SeparableHamiltonian(
        mass,
        potential=lambda q: v(q[0]),
        gradient=lambda q: dv(q),
        hessian=lambda q: d2v(q[0]),
        dimension=1,
        quadratic=v.degree() <= 2,
    )


def builtin_oscillators(mass=1.0, stiffness=1.0):
    """This function returns coupled oscillators H = |p|^2/2m + q.K.q/2.

    Args:
    :param mass float: Particle mass.
    :param stiffness array: Symmetric n x n stiffness matrix K.
    :return SeparableHamiltonian: The model.
    """
    k = np.asarray(stiffness, dtype=float)
    n = 1 if k.ndim == 0 else k.shape[0]
    k = as_matrix(k, n, "stiffness")
    if not np.allclose(k, k.T, rtol=1e-12, atol=0.0):
        raise ParameterError(
            "stiffness", stiffness, "Stiffness matrix must be symmetric"
        )
    return SeparableHamiltonian(
        mass,
        potential=lambda q: 0.5 * float(q @ k @ q),
        gradient=lambda q: k @ q,
        hessian=lambda q: k,
        dimension=n,
        quadratic=True,
    )


def builtin_mixed(mass=1.0, omega=1.0, coupling=0.0):
    """This function returns H = p^2/2m + m w^2 q^2/2 + g p q.

    The cross term makes d2H/dpdq = g, so the model is not separable.

    Args:
    :param mass float: Particle mass.
    :param omega float: Angular frequency.
    :param coupling float: Momentum-position coupling g.
    :return Hamiltonian: The model.
    """
    m = float(mass)
    k = m * float(omega) ** 2
    g = float(coupling)
    return Hamiltonian(
        1,
        energy=lambda p, q: p[0] ** 2 / (2 * m)
        + 0.5 * k * q[0] ** 2
        + g * p[0] * q[0],
        grad_p=lambda p, q: p / m + g * q,
        grad_q=lambda p, q: k * q + g * p,
        hess_pp=lambda p, q: 1.0 / m,
        hess_pq=lambda p, q: g,
        hess_qq=lambda p, q: k,
        mass=m,
    )


def quadratic_generator(curvature=0.0, coupling=1.0, dimension=None):
    """This function returns f(q, b) = q.A.q/2 + c b.q.

    Args:
    :param curvature: Scalar or symmetric matrix A.
    :param coupling float: Coupling c.
    :param dimension int: Needed only for a scalar curvature with n > 1.
    :return QuadraticGenerator: The generator.
    """
    return QuadraticGenerator(
        curvature, coupling=coupling, dimension=dimension
    )
