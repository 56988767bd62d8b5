"""Uniform lattices, discrete paths, the discrete action and its critical
points.

Unknowns are ordered ``(p_1, ..., p_{N-1}, q_1, ..., q_N)`` and flattened with
the degree of freedom running fastest.  Momenta live on the N-1 edges and
positions on the N sites of the lattice.
"""
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg

from .exceptions import AdmissibilityError, ConvergenceError, ParameterError
from .model import ProblemSpec

logger = logging.getLogger(__name__)

MAX_HALVINGS = 30


@dataclass(frozen=True)
class Lattice:
    """Uniform time grid t_i = (i-1) eps, i = 1..N, with eps = T/(N-1).

    Attributes
    ----------
    N : int
        Number of sites (at least 2).
    horizon : float
        Length T of the interval.
    """

    N: int
    horizon: float

    def __post_init__(self):
        if not isinstance(self.N, (int, np.integer)) or self.N < 2:
            raise ParameterError(
                "N", self.N, "Lattice needs at least two sites"
            )
        if not self.horizon > 0:
            raise ParameterError(
                "horizon", self.horizon, "Horizon T must be positive"
            )
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "horizon", float(self.horizon))

    @property
    def epsilon(self) -> float:
        return self.horizon / (self.N - 1)

    @property
    def times(self) -> np.ndarray:
        """Site times; the endpoints are 0 and T exactly."""
        return np.linspace(0.0, self.horizon, self.N)

    @classmethod
    def for_problem(cls, spec: ProblemSpec, N: int) -> "Lattice":
        return cls(N, spec.horizon)


@dataclass
class DiscretePath:
    """Momenta on edges and positions on sites.

    Attributes
    ----------
    momenta : np.ndarray
        Array of shape (N-1, n).
    positions : np.ndarray
        Array of shape (N, n).
    iterations : int
        Newton iterations used to produce the path (0 for a supplied path).
    residual_norm : float
        Max-norm of the stationarity residual when the path was produced.
    """

    momenta: np.ndarray
    positions: np.ndarray
    iterations: int = 0
    residual_norm: float = field(default=float("nan"))

    def __post_init__(self):
        self.momenta = np.asarray(self.momenta, dtype=float)
        self.positions = np.asarray(self.positions, dtype=float)
        if self.positions.ndim == 1:
            self.positions = self.positions[:, None]
        if self.momenta.ndim == 1:
            self.momenta = self.momenta[:, None]
        N, n = self.positions.shape
        if self.momenta.shape != (N - 1, n):
            raise ParameterError(
                "momenta",
                self.momenta.shape,
                "Momenta must have shape ({}, {})".format(N - 1, n),
            )

    @property
    def N(self) -> int:
        return self.positions.shape[0]

    @property
    def dimension(self) -> int:
        return self.positions.shape[1]

    def to_vector(self) -> np.ndarray:
        """Flatten into the (p, q) unknown ordering."""
        return np.concatenate(
            [self.momenta.reshape(-1), self.positions.reshape(-1)]
        )

    @classmethod
    def from_vector(
        cls, z: np.ndarray, N: int, n: int, **kwargs
    ) -> "DiscretePath":
        z = np.asarray(z, dtype=float)
        split = (N - 1) * n
        return cls(
            z[:split].reshape(N - 1, n), z[split:].reshape(N, n), **kwargs
        )


@dataclass
class SiteDerivatives:
    """Derivatives of the discrete Hamiltonian H_d = eps H at each edge
    (p_i, q_i), i = 1..N-1, plus the boundary generator data.

    ``hpq[i][a, b]`` is eps d2H/dp_a dq_b.
    """

    energy: np.ndarray
    hp: np.ndarray
    hq: np.ndarray
    hpp: np.ndarray
    hpq: np.ndarray
    hqq: np.ndarray
    f1_q: np.ndarray
    f2_q: np.ndarray
    f1_qq: np.ndarray
    f2_qq: np.ndarray
    f1_qb: np.ndarray
    f2_qb: np.ndarray


def site_derivatives(
    spec: ProblemSpec, lattice: Lattice, path: DiscretePath
) -> SiteDerivatives:
    """Evaluate the eps-scaled Hamiltonian derivatives along a discrete path.

    Parameters
    ----------
    spec : ProblemSpec
    lattice : Lattice
    path : DiscretePath

    Returns
    -------
    SiteDerivatives
    """
    _check_path(spec, lattice, path)
    h = spec.hamiltonian
    eps = lattice.epsilon
    pairs = list(zip(path.momenta, path.positions[:-1]))
    q1 = path.positions[0]
    qN = path.positions[-1]
    return SiteDerivatives(
        energy=eps * np.array([h.eval(p, q) for p, q in pairs]),
        hp=eps * np.array([h.grad_p(p, q) for p, q in pairs]),
        hq=eps * np.array([h.grad_q(p, q) for p, q in pairs]),
        hpp=eps * np.array([h.hess_pp(p, q) for p, q in pairs]),
        hpq=eps * np.array([h.hess_pq(p, q) for p, q in pairs]),
        hqq=eps * np.array([h.hess_qq(p, q) for p, q in pairs]),
        f1_q=spec.f1.d_q(q1, spec.b1),
        f2_q=spec.f2.d_q(qN, spec.b2),
        f1_qq=spec.f1.d_qq(q1, spec.b1),
        f2_qq=spec.f2.d_qq(qN, spec.b2),
        f1_qb=spec.f1.d_qb(q1, spec.b1),
        f2_qb=spec.f2.d_qb(qN, spec.b2),
    )


def _check_path(spec: ProblemSpec, lattice: Lattice, path: DiscretePath):
    if path.N != lattice.N or path.dimension != spec.dimension:
        raise ParameterError(
            "path",
            (path.N, path.dimension),
            "Path is {}x{}, expected {}x{}".format(
                path.N, path.dimension, lattice.N, spec.dimension
            ),
        )


def discrete_action(
    spec: ProblemSpec, lattice: Lattice, path: DiscretePath
) -> float:
    """Evaluate the discrete action

        S_d = sum_i [p_i.(q_{i+1} - q_i) - H_d(p_i, q_i)]
              + f1(q_1, b1) - f2(q_N, b2).
    """
    d = site_derivatives(spec, lattice, path)
    dq = np.diff(path.positions, axis=0)
    bulk = float(np.sum(path.momenta * dq)) - float(np.sum(d.energy))
    initial = spec.f1.eval(path.positions[0], spec.b1)
    final = spec.f2.eval(path.positions[-1], spec.b2)
    return bulk + initial - final


def action_gradient(
    spec: ProblemSpec, lattice: Lattice, path: DiscretePath
) -> np.ndarray:
    """Gradient of the discrete action in the (p, q) unknown ordering."""
    d = site_derivatives(spec, lattice, path)
    return _gradient_from(d, path)


def _gradient_from(d: SiteDerivatives, path: DiscretePath) -> np.ndarray:
    p = path.momenta
    q = path.positions
    g_p = np.diff(q, axis=0) - d.hp
    g_q = np.zeros_like(q)
    g_q[0] = d.f1_q - p[0] - d.hq[0]
    g_q[1:-1] = p[:-1] - p[1:] - d.hq[1:]
    g_q[-1] = p[-1] - d.f2_q
    return np.concatenate([g_p.reshape(-1), g_q.reshape(-1)])


def residual(
    spec: ProblemSpec, lattice: Lattice, path: DiscretePath
) -> np.ndarray:
    """Residual of the discrete Hamilton equations and boundary conditions.

    Rows are, in order: the position update for i = 1..N-1, the momentum
    update for i = 2..N-1, the initial boundary condition and the final
    boundary condition.  Each row is written as ``lhs - rhs``.

    Returns
    -------
    np.ndarray
        Flat vector of length (2N-1) n.
    """
    d = site_derivatives(spec, lattice, path)
    p = path.momenta
    q = path.positions
    position_rows = np.diff(q, axis=0) - d.hp
    momentum_rows = p[1:] - p[:-1] + d.hq[1:]
    initial = d.f1_q - p[0] - d.hq[0]
    final = d.f2_q - p[-1]
    return np.concatenate(
        [position_rows.reshape(-1), momentum_rows.reshape(-1), initial, final]
    )


def default_initial_path(spec: ProblemSpec, lattice: Lattice) -> DiscretePath:
    """Straight-line starting guess.

    The velocity is the average of the boundary momenta at q = 0 divided by
    the mass; momenta follow from the discrete velocity.
    """
    n = spec.dimension
    zero = np.zeros(n)
    v = spec.f1.d_q(zero, spec.b1) + spec.f2.d_q(zero, spec.b2)
    v = v / (2.0 * spec.mass)
    q = lattice.times[:, None] * v[None, :]
    p = spec.mass * np.diff(q, axis=0) / lattice.epsilon
    return DiscretePath(p, q)


def solve_critical_path(
    spec: ProblemSpec,
    lattice: Lattice,
    init: DiscretePath = None,
    newton_tol: float = 1e-10,
    max_iter: int = 50,
) -> DiscretePath:
    """Find the critical point of the discrete action by damped Newton.

    The Jacobian of the stationarity system is the action Hessian, solved
    sparsely at each step.  A step is halved until the residual decreases.

    Parameters
    ----------
    spec : ProblemSpec
    lattice : Lattice
    init : DiscretePath, optional
        Starting path; a straight line when omitted.
    newton_tol : float, optional
        Tolerance on the max-norm of the residual, by default 1e-10.
    max_iter : int, optional
        Maximum number of Newton iterations, by default 50.

    Returns
    -------
    DiscretePath
        The critical path with ``iterations`` and ``residual_norm`` filled in.

    Raises
    ------
    AdmissibilityError
        If the Hessian is singular at a site or as a whole.
    ConvergenceError
        If the residual does not reach newton_tol within max_iter iterations.
    """
    from .operators import assemble_hj

    N = lattice.N
    n = spec.dimension
    path = default_initial_path(spec, lattice) if init is None else init
    _check_path(spec, lattice, path)
    z = path.to_vector()
    g = action_gradient(spec, lattice, path)
    norm = float(np.max(np.abs(g)))
    if not np.isfinite(norm):
        raise ConvergenceError(
            0, norm, "Residual is not finite at the starting path"
        )
    iterations = 0
    while norm > newton_tol:
        if iterations >= max_iter:
            raise ConvergenceError(
                iterations,
                norm,
                "Newton did not converge in {} iterations "
                "(residual {:.3e})".format(iterations, norm),
            )
        current = DiscretePath.from_vector(z, N, n)
        jac = assemble_hj(spec, lattice, current).to_sparse()
        try:
            step = scipy.sparse.linalg.splu(jac.tocsc()).solve(-g)
        except RuntimeError as err:
            raise AdmissibilityError(
                None, "Singular action Hessian: {}".format(err)
            )
        if not np.all(np.isfinite(step)):
            raise AdmissibilityError(
                None, "Singular action Hessian during Newton step"
            )
        scale = 1.0
        for _ in range(MAX_HALVINGS + 1):
            trial = DiscretePath.from_vector(z + scale * step, N, n)
            g_trial = action_gradient(spec, lattice, trial)
            norm_trial = float(np.max(np.abs(g_trial)))
            if np.isfinite(norm_trial) and norm_trial < norm:
                break
            scale *= 0.5
        else:
            raise ConvergenceError(
                iterations,
                norm,
                "Newton step failed to reduce the residual after {} "
                "halvings (residual {:.3e})".format(MAX_HALVINGS, norm),
            )
        z = z + scale * step
        g = g_trial
        norm = norm_trial
        iterations += 1
        logger.debug(
            "Newton iteration %d: residual %.3e (step scale %g)",
            iterations,
            norm,
            scale,
        )
    logger.info(
        "Critical path found for N=%d in %d iterations, residual %.3e",
        N,
        iterations,
        norm,
    )
    return DiscretePath.from_vector(
        z, N, n, iterations=iterations, residual_norm=norm
    )
