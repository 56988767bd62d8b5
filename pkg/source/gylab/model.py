"""Hamiltonian models, Lagrangian boundary generators and problem specs.

Every model is evaluated at plain numpy vectors of length ``dimension``;
scalars are accepted for one-dimensional models.  Second derivatives are
returned as ``(n, n)`` arrays with ``hess_pq[a, b] = d2H/dp_a dq_b``.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Callable, Dict, Tuple, Union

import numpy as np

from .exceptions import ParameterError, ScopeError, ShapeError

ArrayLike = Union[float, np.ndarray]


def as_vector(x: ArrayLike, n: int, name: str = "vector") -> np.ndarray:
    """Coerce a scalar or array into a float vector of length n.

    Parameters
    ----------
    x : ArrayLike
        Value to coerce.
    n : int
        Required length.
    name : str, optional
        Name used in error messages.

    Returns
    -------
    np.ndarray

    Raises
    ------
    ShapeError
        If the value cannot be viewed as a length-n vector.
    """
    v = np.asarray(x, dtype=float).reshape(-1)
    if v.size != n:
        raise ShapeError(
            (n,), v.shape, "{} must have {} components".format(name, n)
        )
    return v


def as_matrix(x: ArrayLike, n: int, name: str = "matrix") -> np.ndarray:
    """Coerce a scalar or array into an (n, n) float matrix.

    A scalar is multiplied by the identity.
    """
    m = np.asarray(x, dtype=float)
    if m.ndim == 0:
        return float(m) * np.eye(n)
    m = m.reshape(n, n) if m.size == n * n else m
    if m.shape != (n, n):
        raise ShapeError(
            (n, n), m.shape, "{} must be {}x{}".format(name, n, n)
        )
    return m


class HamiltonianModel:
    """Base class for twice-differentiable Hamiltonians H(p, q).

    Attributes
    ----------
    _dimension : int
        Number of degrees of freedom n.
    _mass : float
        Mass scale used to convert boundary curvatures into velocities.
    """

    separable = False
    quadratic = False

    def __init__(self, dimension: int, mass: float = 1.0):
        if not isinstance(dimension, (int, np.integer)) or dimension < 1:
            raise ParameterError(
                "dimension", dimension, "Dimension must be a positive integer"
            )
        if not mass > 0:
            raise ParameterError("mass", mass, "Mass must be positive")
        self._dimension = int(dimension)
        self._mass = float(mass)

    @property
    def dimension(self) -> int:
        """Number of degrees of freedom."""
        return self._dimension

    @property
    def mass(self) -> float:
        """Mass parameter."""
        return self._mass

    def eval(self, p: ArrayLike, q: ArrayLike) -> float:
        raise NotImplementedError

    def grad_p(self, p: ArrayLike, q: ArrayLike) -> np.ndarray:
        raise NotImplementedError

    def grad_q(self, p: ArrayLike, q: ArrayLike) -> np.ndarray:
        raise NotImplementedError

    def hess_pp(self, p: ArrayLike, q: ArrayLike) -> np.ndarray:
        raise NotImplementedError

    def hess_pq(self, p: ArrayLike, q: ArrayLike) -> np.ndarray:
        raise NotImplementedError

    def hess_qq(self, p: ArrayLike, q: ArrayLike) -> np.ndarray:
        raise NotImplementedError


class Hamiltonian(HamiltonianModel):
    """General Hamiltonian built from user supplied callbacks.

    Each callback takes ``(p, q)`` as length-n vectors.  Gradients may return
    scalars when n is 1; Hessian blocks may return scalars when n is 1.
    """

    def __init__(
        self,
        dimension: int,
        energy: Callable,
        grad_p: Callable,
        grad_q: Callable,
        hess_pp: Callable,
        hess_pq: Callable,
        hess_qq: Callable,
        mass: float = 1.0,
    ):
        super().__init__(dimension, mass)
        self._energy = energy
        self._grad_p = grad_p
        self._grad_q = grad_q
        self._hess_pp = hess_pp
        self._hess_pq = hess_pq
        self._hess_qq = hess_qq

    def _args(self, p, q):
        n = self._dimension
        return as_vector(p, n, "p"), as_vector(q, n, "q")

    def eval(self, p, q):
        return float(self._energy(*self._args(p, q)))

    def grad_p(self, p, q):
        return as_vector(self._grad_p(*self._args(p, q)), self._dimension)

    def grad_q(self, p, q):
        return as_vector(self._grad_q(*self._args(p, q)), self._dimension)

    def hess_pp(self, p, q):
        return as_matrix(self._hess_pp(*self._args(p, q)), self._dimension)

    def hess_pq(self, p, q):
        return as_matrix(self._hess_pq(*self._args(p, q)), self._dimension)

    def hess_qq(self, p, q):
        return as_matrix(self._hess_qq(*self._args(p, q)), self._dimension)


class SeparableHamiltonian(HamiltonianModel):
    """Hamiltonian of the form H = |p|^2/2m + V(q).

    The potential is given analytically by three callbacks returning V(q),
    its gradient and its Hessian.  ``hess_pp`` is exactly I/m and ``hess_pq``
    exactly zero.  With ``quadratic`` the Hessian of V is declared constant.
    """

    separable = True

    def __init__(
        self,
        mass: float,
        potential: Callable,
        gradient: Callable,
        hessian: Callable,
        dimension: int = 1,
        quadratic: bool = False,
    ):
        super().__init__(dimension, mass)
        self.quadratic = bool(quadratic)
        self._potential = potential
        self._gradient = gradient
        self._hessian = hessian

    def potential(self, q: ArrayLike) -> float:
        """Potential energy V(q)."""
        return float(self._potential(as_vector(q, self._dimension, "q")))

    def potential_gradient(self, q: ArrayLike) -> np.ndarray:
        """Gradient V'(q)."""
        n = self._dimension
        return as_vector(self._gradient(as_vector(q, n, "q")), n)

    def potential_hessian(self, q: ArrayLike) -> np.ndarray:
        """Hessian V''(q)."""
        n = self._dimension
        return as_matrix(self._hessian(as_vector(q, n, "q")), n)

    def eval(self, p, q):
        p = as_vector(p, self._dimension, "p")
        return float(p @ p) / (2.0 * self._mass) + self.potential(q)

    def grad_p(self, p, q):
        return as_vector(p, self._dimension, "p") / self._mass

    def grad_q(self, p, q):
        return self.potential_gradient(q)

    def hess_pp(self, p, q):
        return np.eye(self._dimension) / self._mass

    def hess_pq(self, p, q):
        return np.zeros((self._dimension, self._dimension))

    def hess_qq(self, p, q):
        return self.potential_hessian(q)


class BoundaryGenerator:
    """Base class for generating functions f(q, b) of Lagrangian boundary
    conditions p = df/dq."""

    def __init__(self, dimension: int):
        if not isinstance(dimension, (int, np.integer)) or dimension < 1:
            raise ParameterError(
                "dimension", dimension, "Dimension must be a positive integer"
            )
        self._dimension = int(dimension)

    @property
    def dimension(self) -> int:
        return self._dimension

    def eval(self, q: ArrayLike, b: ArrayLike) -> float:
        raise NotImplementedError

    def d_q(self, q: ArrayLike, b: ArrayLike) -> np.ndarray:
        raise NotImplementedError

    def d_b(self, q: ArrayLike, b: ArrayLike) -> np.ndarray:
        raise NotImplementedError

    def d_qq(self, q: ArrayLike, b: ArrayLike) -> np.ndarray:
        raise NotImplementedError

    def d_qb(self, q: ArrayLike, b: ArrayLike) -> np.ndarray:
        raise NotImplementedError


class QuadraticGenerator(BoundaryGenerator):
    """Generator f(q, b) = q.A.q/2 + c b.q.

    Attributes
    ----------
    _curvature : np.ndarray
        Symmetric matrix A (d2f/dq2).
    _coupling : float
        Coupling c; d2f/dqdb = c I.  A zero coupling gives a generator that
        does not depend on b.
    """

    def __init__(
        self,
        curvature: ArrayLike = 0.0,
        coupling: float = 1.0,
        dimension: int = None,
    ):
        c = np.asarray(curvature, dtype=float)
        if dimension is None:
            dimension = 1 if c.ndim == 0 else c.shape[0]
        super().__init__(dimension)
        a = as_matrix(c, self._dimension, "curvature")
        if not np.allclose(a, a.T, rtol=1e-12, atol=0.0):
            raise ParameterError(
                "curvature", curvature, "Curvature matrix must be symmetric"
            )
        self._curvature = a
        self._coupling = float(coupling)

    @property
    def curvature(self) -> np.ndarray:
        return self._curvature

    @property
    def coupling(self) -> float:
        return self._coupling

    def _args(self, q, b):
        n = self._dimension
        return as_vector(q, n, "q"), as_vector(b, n, "b")

    def eval(self, q, b):
        q, b = self._args(q, b)
        quadratic = 0.5 * float(q @ self._curvature @ q)
        return quadratic + self._coupling * float(b @ q)

    def d_q(self, q, b):
        q, b = self._args(q, b)
        return self._curvature @ q + self._coupling * b

    def d_b(self, q, b):
        q, b = self._args(q, b)
        return self._coupling * q

    def d_qq(self, q, b):
        return self._curvature.copy()

    def d_qb(self, q, b):
        return self._coupling * np.eye(self._dimension)


class CallbackGenerator(BoundaryGenerator):
    """Generator built from user supplied callbacks of (q, b)."""

    def __init__(
        self,
        dimension: int,
        value: Callable,
        d_q: Callable,
        d_b: Callable,
        d_qq: Callable,
        d_qb: Callable,
    ):
        super().__init__(dimension)
        self._value = value
        self._d_q = d_q
        self._d_b = d_b
        self._d_qq = d_qq
        self._d_qb = d_qb

    def _args(self, q, b):
        n = self._dimension
        return as_vector(q, n, "q"), as_vector(b, n, "b")

    def eval(self, q, b):
        return float(self._value(*self._args(q, b)))

    def d_q(self, q, b):
        return as_vector(self._d_q(*self._args(q, b)), self._dimension)

    def d_b(self, q, b):
        return as_vector(self._d_b(*self._args(q, b)), self._dimension)

    def d_qq(self, q, b):
        return as_matrix(self._d_qq(*self._args(q, b)), self._dimension)

    def d_qb(self, q, b):
        return as_matrix(self._d_qb(*self._args(q, b)), self._dimension)


@dataclass(frozen=True)
class ProblemSpec:
    """Hamiltonian system on [0, T] with Lagrangian boundary conditions.

    Attributes
    ----------
    hamiltonian : HamiltonianModel
        The Hamiltonian.
    f1, f2 : BoundaryGenerator
        Generators of the initial and final Lagrangian submanifolds.
    horizon : float
        Length T of the time interval.
    b1, b2 : np.ndarray
        Lagrangian parameters; a scalar applies to every component.
    mass : float, optional
        Mass m; taken from the Hamiltonian when omitted.
    """

    hamiltonian: HamiltonianModel
    f1: BoundaryGenerator
    f2: BoundaryGenerator
    horizon: float
    b1: np.ndarray = 0.0
    b2: np.ndarray = 0.0
    mass: float = None

    def __post_init__(self):
        n = self.hamiltonian.dimension
        if not self.horizon > 0:
            raise ParameterError(
                "horizon", self.horizon, "Horizon T must be positive"
            )
        mass = self.mass
        mass = self.hamiltonian.mass if mass is None else float(mass)
        if not mass > 0:
            raise ParameterError("mass", mass, "Mass must be positive")
        if self.hamiltonian.separable and not np.isclose(
            mass, self.hamiltonian.mass, rtol=1e-14
        ):
            raise ParameterError(
                "mass", mass, "Mass differs from the separable Hamiltonian"
            )
        for name, gen in (("f1", self.f1), ("f2", self.f2)):
            if gen.dimension != n:
                raise ShapeError(
                    (n,),
                    (gen.dimension,),
                    "{} has dimension {}, expected {}".format(
                        name, gen.dimension, n
                    ),
                )
        object.__setattr__(self, "mass", mass)
        object.__setattr__(self, "horizon", float(self.horizon))
        for name in ("b1", "b2"):
            b = getattr(self, name)
            if np.ndim(b) == 0:
                b = np.full(n, float(b))
            object.__setattr__(self, name, as_vector(b, n, name))

    @property
    def dimension(self) -> int:
        return self.hamiltonian.dimension

    @property
    def separable(self) -> bool:
        return self.hamiltonian.separable

    @property
    def quadratic(self) -> bool:
        """True when the fluctuation operator does not depend on the path."""
        return self.hamiltonian.quadratic and all(
            isinstance(f, QuadraticGenerator) for f in (self.f1, self.f2)
        )

    def with_parameters(
        self, b1: ArrayLike = None, b2: ArrayLike = None
    ) -> "ProblemSpec":
        """Return a copy with new Lagrangian parameters."""
        return dataclasses.replace(
            self,
            b1=self.b1 if b1 is None else b1,
            b2=self.b2 if b2 is None else b2,
        )

    def require_separable(self, operation: str):
        """Raise ScopeError unless the Hamiltonian is separable.

        Parameters
        ----------
        operation : str
            Name of the calling operation, reported in the error.
        """
        if not self.separable:
            raise ScopeError(
                operation,
                "{} requires H = |p|^2/2m + V(q)".format(operation),
            )

    def require_one_dimensional(self, operation: str):
        if self.dimension != 1:
            raise ScopeError(
                operation,
                "{} needs one degree of freedom".format(operation),
            )


@dataclass
class DerivativeReport:
    """Finite-difference audit of a model's analytic derivatives.

    Attributes
    ----------
    errors : dict
        Maximum relative error per derivative block.
    symmetry : dict
        Relative asymmetry of the symmetric Hessian blocks.
    fd_step : float
        The finite difference step.
    """

    errors: Dict[str, float]
    symmetry: Dict[str, float]
    fd_step: float

    @property
    def max_error(self) -> float:
        return max(self.errors.values())

    def to_dict(self) -> dict:
        return {
            "errors": dict(self.errors),
            "symmetry": dict(self.symmetry),
            "fdStep": self.fd_step,
        }


def _relative(a: np.ndarray, b: np.ndarray) -> float:
    scale = max(1.0, float(np.max(np.abs(b))) if np.size(b) else 1.0)
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b)))) / scale


def _asymmetry(m: np.ndarray) -> float:
    scale = max(float(np.max(np.abs(m))), 1e-300)
    return float(np.max(np.abs(m - m.T))) / scale


def _central_gradient(fun: Callable, x: np.ndarray, h: float) -> np.ndarray:
    cols = []
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = h
        upper = np.asarray(fun(x + e), dtype=float)
        lower = np.asarray(fun(x - e), dtype=float)
        cols.append((upper - lower) / (2.0 * h))
    return np.stack(cols, axis=-1)


def check_derivatives(
    model: Union[HamiltonianModel, BoundaryGenerator],
    point: Tuple[ArrayLike, ArrayLike],
    fd_step: float = 1e-4,
) -> DerivativeReport:
    """Compare analytic derivatives against central finite differences.

    Parameters
    ----------
    model : Union[HamiltonianModel, BoundaryGenerator]
        Model to audit.
    point : Tuple[ArrayLike, ArrayLike]
        ``(p, q)`` for a Hamiltonian, ``(q, b)`` for a boundary generator.
    fd_step : float, optional
        Finite difference step, by default 1e-4.

    Returns
    -------
    DerivativeReport

    Raises
    ------
    ParameterError
        If fd_step is not positive.
    """
    if not fd_step > 0:
        raise ParameterError(
            "fd_step", fd_step, "Finite difference step must be positive"
        )
    n = model.dimension
    x = as_vector(point[0], n)
    y = as_vector(point[1], n)
    h = float(fd_step)

    def error(fun, at, analytic):
        return _relative(_central_gradient(fun, at, h), analytic)

    if isinstance(model, HamiltonianModel):
        hpq = model.hess_pq(x, y)
        errors = {
            "grad_p": error(lambda v: model.eval(v, y), x, model.grad_p(x, y)),
            "grad_q": error(lambda v: model.eval(x, v), y, model.grad_q(x, y)),
            "hess_pp": error(
                lambda v: model.grad_p(v, y), x, model.hess_pp(x, y)
            ),
            "hess_pq": max(
                error(lambda v: model.grad_p(x, v), y, hpq),
                error(lambda v: model.grad_q(v, y), x, hpq.T),
            ),
            "hess_qq": error(
                lambda v: model.grad_q(x, v), y, model.hess_qq(x, y)
            ),
        }
        symmetry = {
            "hess_pp": _asymmetry(model.hess_pp(x, y)),
            "hess_qq": _asymmetry(model.hess_qq(x, y)),
        }
    elif isinstance(model, BoundaryGenerator):
        errors = {
            "d_q": error(lambda v: model.eval(v, y), x, model.d_q(x, y)),
            "d_b": error(lambda v: model.eval(x, v), y, model.d_b(x, y)),
            "d_qq": error(lambda v: model.d_q(v, y), x, model.d_qq(x, y)),
            "d_qb": error(lambda v: model.d_q(x, v), y, model.d_qb(x, y)),
        }
        symmetry = {"d_qq": _asymmetry(model.d_qq(x, y))}
    else:
        raise TypeError("Expected a HamiltonianModel or a BoundaryGenerator")
    return DerivativeReport(errors=errors, symmetry=symmetry, fd_step=h)
