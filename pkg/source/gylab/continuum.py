"""Continuum side: classical paths, Jacobi fields and zeta-determinants.

Paths are integrated with fixed-step classical Runge-Kutta and interpolated
with cubic Hermite splines whose node derivatives come from Hamilton's
equations.  Jacobi fields of the operator -d2/dt2 - V''(q_c)/m with mixed
boundary conditions y'(0) = (a1/m) y(0), y'(T) = (a2/m) y(T) give the
zeta-regularised determinant

    det A = 2 (y'(T) - (a2/m) y(T)),   y(0) = 1, y'(0) = a1/m.

Only one degree of freedom is supported for the operator functions.
"""
import logging
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.integrate
import scipy.interpolate
import scipy.linalg
import scipy.optimize

from .discrete import DiscretePath, Lattice
from .exceptions import (
    ConjugatePointError,
    ConvergenceError,
    ConvergenceWarning,
    DegenerateFamilyError,
    ParameterError,
    PreconditionError,
    SearchError,
)
from .gy import GYReport, cross_stencil
from .model import ProblemSpec, as_vector
from .operators import assemble_an, assemble_hj
from .report import JsonRecord

logger = logging.getLogger(__name__)

DEFAULT_ODE_STEPS = 4096
RESCALE_THRESHOLD = 1e100
MAX_SCAN_POINTS = 64 * 400
SCAN_CHUNK = 64
SHOOT_SINGULAR_RTOL = 1e-12
MAX_HALVINGS = 30


def _grid(horizon: float, h_ode: Optional[float]) -> np.ndarray:
    if h_ode is None:
        steps = DEFAULT_ODE_STEPS
    else:
        if not h_ode > 0:
            raise ParameterError("h_ode", h_ode, "ODE step must be positive")
        steps = max(2, int(round(horizon / h_ode)))
    return np.linspace(0.0, horizon, steps + 1)


def rk4(rhs: Callable, y0: np.ndarray, times: np.ndarray) -> np.ndarray:
    """Classical fourth-order Runge-Kutta on a fixed grid.

    Parameters
    ----------
    rhs : Callable
        Right-hand side f(t, y).
    y0 : np.ndarray
        Initial state.
    times : np.ndarray
        Grid, starting at the initial time.

    Returns
    -------
    np.ndarray
        States at every grid time, shape (len(times),) + y0.shape.
    """
    y = np.array(y0, dtype=float)
    out = np.empty((len(times),) + y.shape)
    out[0] = y
    for k in range(len(times) - 1):
        t = times[k]
        h = times[k + 1] - t
        k1 = rhs(t, y)
        k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1)
        k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2)
        k4 = rhs(t + h, y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[k + 1] = y
    return out


@dataclass
class OdeSolution:
    """A Hamiltonian trajectory sampled on a uniform grid.

    Attributes
    ----------
    times : np.ndarray
        Grid times, 0 and T exactly at the ends.
    momenta, positions : np.ndarray
        Shape (K+1, n).
    velocities, forces : np.ndarray
        dq/dt and dp/dt at the nodes, shape (K+1, n).
    tangent_p, tangent_q : np.ndarray
        Derivatives of p(t) and q(t) with respect to q(0), shape (K+1, n, n),
        or None when the tangent map was not integrated.
    iterations : int
        Shooting iterations used to produce the trajectory.
    residual_norm : float
        Final boundary residual.
    """

    times: np.ndarray
    momenta: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    forces: np.ndarray
    tangent_p: Optional[np.ndarray] = None
    tangent_q: Optional[np.ndarray] = None
    iterations: int = 0
    residual_norm: float = float("nan")
    method: str = "rk4"
    interpolation: str = "cubic_hermite"

    @property
    def h_ode(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def states(self) -> np.ndarray:
        return np.hstack([self.momenta, self.positions])

    def position(self, t) -> np.ndarray:
        """Dense-output position q(t), shape (len(t), n)."""
        spline = scipy.interpolate.CubicHermiteSpline(
            self.times, self.positions, self.velocities, axis=0
        )
        return spline(np.atleast_1d(np.asarray(t, dtype=float)))

    def momentum(self, t) -> np.ndarray:
        """Dense-output momentum p(t), shape (len(t), n)."""
        spline = scipy.interpolate.CubicHermiteSpline(
            self.times, self.momenta, self.forces, axis=0
        )
        return spline(np.atleast_1d(np.asarray(t, dtype=float)))

    def sample(self, lattice: Lattice) -> DiscretePath:
        """Restrict to lattice sites; momenta are taken at the left site."""
        t = lattice.times
        return DiscretePath(self.momentum(t[:-1]), self.position(t))


def hamilton_flow(
    spec: ProblemSpec,
    q0,
    h_ode: float = None,
    tangent: bool = True,
) -> OdeSolution:
    """Integrate Hamilton's equations from q(0) = q0, p(0) = df1/dq(q0, b1).

    With ``tangent`` the variational equations are integrated as well,
    starting from dq/dq0 = I and dp/dq0 = d2f1/dq2.

    Returns
    -------
    OdeSolution
    """
    h = spec.hamiltonian
    n = spec.dimension
    q0 = as_vector(q0, n, "q0")
    p0 = spec.f1.d_q(q0, spec.b1)
    times = _grid(spec.horizon, h_ode)

    def rhs(t, y):
        p = y[:n]
        q = y[n : 2 * n]
        out = np.empty_like(y)
        out[:n] = -h.grad_q(p, q)
        out[n : 2 * n] = h.grad_p(p, q)
        if tangent:
            fp = y[2 * n : 2 * n + n * n].reshape(n, n)
            fq = y[2 * n + n * n :].reshape(n, n)
            hpp = h.hess_pp(p, q)
            hpq = h.hess_pq(p, q)
            hqq = h.hess_qq(p, q)
            out[2 * n : 2 * n + n * n] = (-hpq.T @ fp - hqq @ fq).ravel()
            out[2 * n + n * n :] = (hpp @ fp + hpq @ fq).ravel()
        return out

    y0 = [p0, q0]
    if tangent:
        y0 += [spec.f1.d_qq(q0, spec.b1).ravel(), np.eye(n).ravel()]
    states = rk4(rhs, np.concatenate(y0), times)
    p = states[:, :n]
    q = states[:, n : 2 * n]
    velocities = np.array([h.grad_p(a, b) for a, b in zip(p, q)])
    forces = -np.array([h.grad_q(a, b) for a, b in zip(p, q)])
    out = OdeSolution(times, p, q, velocities, forces)
    if tangent:
        out.tangent_p = states[:, 2 * n : 2 * n + n * n].reshape(-1, n, n)
        out.tangent_q = states[:, 2 * n + n * n :].reshape(-1, n, n)
    return out


def _final_residual(spec: ProblemSpec, sol: OdeSolution) -> np.ndarray:
    return sol.momenta[-1] - spec.f2.d_q(sol.positions[-1], spec.b2)


def shoot_classical_path(
    spec: ProblemSpec,
    h_ode: float = None,
    shoot_tol: float = 1e-12,
    max_iter: int = 50,
    q0=None,
) -> OdeSolution:
    """Solve the Lagrangian boundary value problem by Newton shooting on q(0).

    Parameters
    ----------
    spec : ProblemSpec
    h_ode : float, optional
        RK4 step, by default T/4096.
    shoot_tol : float, optional
        Tolerance on the max-norm of p(T) - df2/dq(q(T), b2).
    max_iter : int, optional
        Maximum Newton iterations.
    q0 : array_like, optional
        Starting guess for q(0), zero by default.

    Returns
    -------
    OdeSolution

    Raises
    ------
    DegenerateFamilyError
        If the shooting Jacobian is singular.
    ConvergenceError
        If the residual does not reach shoot_tol.
    """
    n = spec.dimension
    q0 = np.zeros(n) if q0 is None else as_vector(q0, n, "q0")
    sol = hamilton_flow(spec, q0, h_ode)
    r = _final_residual(spec, sol)
    norm = float(np.max(np.abs(r)))
    if not np.isfinite(norm):
        raise ConvergenceError(
            0, norm, "Boundary residual is not finite at the initial guess"
        )
    iterations = 0
    while norm > shoot_tol:
        if iterations >= max_iter:
            raise ConvergenceError(
                iterations,
                norm,
                "Shooting did not converge (residual {:.3e})".format(norm),
            )
        f2 = spec.f2.d_qq(sol.positions[-1], spec.b2)
        fq = f2 @ sol.tangent_q[-1]
        jac = sol.tangent_p[-1] - fq
        s = np.linalg.svd(jac, compute_uv=False)
        scale = max(
            np.linalg.norm(sol.tangent_p[-1], 2),
            np.linalg.norm(fq, 2),
            np.linalg.norm(sol.tangent_q[-1], 2),
        )
        if s[-1] <= SHOOT_SINGULAR_RTOL * scale:
            raise DegenerateFamilyError(
                iterations,
                norm,
                "Shooting Jacobian is singular: the boundary problem has a "
                "family of solutions",
            )
        step = np.linalg.solve(jac, -r)
        scale = 1.0
        for _ in range(MAX_HALVINGS + 1):
            trial = hamilton_flow(spec, q0 + scale * step, h_ode)
            r_trial = _final_residual(spec, trial)
            norm_trial = float(np.max(np.abs(r_trial)))
            if np.isfinite(norm_trial) and norm_trial < norm:
                break
            scale *= 0.5
        else:
            raise ConvergenceError(
                iterations,
                norm,
                "Shooting step failed to reduce the residual after {} "
                "halvings (residual {:.3e})".format(MAX_HALVINGS, norm),
            )
        q0 = q0 + scale * step
        sol, r, norm = trial, r_trial, norm_trial
        iterations += 1
        logger.debug("Shooting iteration %d: residual %.3e", iterations, norm)
    sol.iterations = iterations
    sol.residual_norm = norm
    return sol


def operator_path(
    spec: ProblemSpec, h_ode: float = None, shoot_tol: float = 1e-12
) -> OdeSolution:
    """Path along which the fluctuation operator is evaluated.

    This is the classical path, except for quadratic problems with a
    degenerate family (a zero mode): their operator does not depend on the
    path, and the trivial trajectory with b1 = b2 = 0 is used instead.
    """
    try:
        return shoot_classical_path(spec, h_ode=h_ode, shoot_tol=shoot_tol)
    except DegenerateFamilyError:
        if not spec.quadratic:
            raise
    logger.info("Degenerate quadratic problem: using the trivial path")
    trivial = spec.with_parameters(b1=0.0, b2=0.0)
    return hamilton_flow(trivial, np.zeros(spec.dimension), h_ode)


def continuum_action(spec: ProblemSpec, sol: OdeSolution) -> float:
    """Action of a trajectory with its boundary terms.

    The integral of p.dq/dt - H is evaluated with Simpson's rule on the
    trajectory grid.
    """
    h = spec.hamiltonian
    pairs = zip(sol.momenta, sol.positions)
    energy = np.array([h.eval(a, b) for a, b in pairs])
    integrand = np.sum(sol.momenta * sol.velocities, axis=1) - energy
    bulk = scipy.integrate.simpson(integrand, x=sol.times)
    return (
        float(bulk)
        + spec.f1.eval(sol.positions[0], spec.b1)
        - spec.f2.eval(sol.positions[-1], spec.b2)
    )


@dataclass
class ZetaResult:
    """Jacobi field endpoint data and the derived determinant.

    Fields hold arrays when the spectral parameter is an array.

    Attributes
    ----------
    lam : float or np.ndarray
        Spectral parameter; det(A - lam) is represented.
    y_T, ydot_T : float or np.ndarray
        Rescaled y(T) and y'(T).
    log_scale : float or np.ndarray
        The true values are exp(log_scale) times the rescaled ones.
    a1_over_m, a2_over_m : float
        Boundary slopes.
    h_ode : float
        RK4 step.
    """

    lam: np.ndarray
    y_T: np.ndarray
    ydot_T: np.ndarray
    log_scale: np.ndarray
    a1_over_m: float
    a2_over_m: float
    h_ode: float

    @property
    def scaled_omega(self):
        """(a2/m) y(T) - y'(T) without the rescaling factor."""
        return self.a2_over_m * self.y_T - self.ydot_T

    @property
    def sign(self):
        return np.sign(-self.scaled_omega)

    @property
    def log_abs_value(self):
        with np.errstate(divide="ignore"):
            return np.log(2.0 * np.abs(self.scaled_omega)) + self.log_scale

    @property
    def value(self):
        """The zeta-regularised determinant of A - lam."""
        with np.errstate(over="ignore"):
            return -2.0 * self.scaled_omega * np.exp(self.log_scale)

    @property
    def omega(self):
        """Boundary function whose zeros are the eigenvalues."""
        return -0.5 * self.value

    def to_dict(self) -> dict:
        def plain(x):
            x = np.asarray(x, dtype=float)
            x = np.where(np.isfinite(x), x, np.nan)
            out = x.tolist()
            if isinstance(out, float):
                return None if np.isnan(out) else out
            return [None if np.isnan(v) else v for v in out]

        return {
            "lambda": plain(self.lam),
            "value": plain(self.value),
            "omega": plain(self.omega),
            "logAbsValue": plain(self.log_abs_value),
            "hOde": self.h_ode,
        }


def _potential_curvature(spec: ProblemSpec, path: OdeSolution, times):
    """u(t) = -V''(q_c(t))/m on the given times."""
    h = spec.hamiltonian
    q = path.position(times)
    return np.array([-h.potential_hessian(x)[0, 0] for x in q]) / spec.mass


def _boundary_slopes(spec: ProblemSpec, path: OdeSolution):
    m = spec.mass
    a1 = float(spec.f1.d_qq(path.positions[0], spec.b1)[0, 0])
    a2 = float(spec.f2.d_qq(path.positions[-1], spec.b2)[0, 0])
    return a1 / m, a2 / m


def _require_operator_scope(spec: ProblemSpec, operation: str):
    spec.require_separable(operation)
    spec.require_one_dimensional(operation)


def _integrate_jacobi(spec, path, lam, h_ode):
    """RK4 for y'' = (u(t) - lam) y over an array of lam with rescaling.

    Returns times, states of shape (K+1, 2, L) and log scales (K+1, L).
    """
    times = path.times if h_ode is None else _grid(spec.horizon, h_ode)
    steps = len(times) - 1
    half = np.linspace(0.0, spec.horizon, 2 * steps + 1)
    u = _potential_curvature(spec, path, half)
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    alpha, _ = _boundary_slopes(spec, path)

    y = np.empty((2, lam.size))
    y[0] = 1.0
    y[1] = alpha
    states = np.empty((steps + 1, 2, lam.size))
    scales = np.zeros((steps + 1, lam.size))
    states[0] = y
    log_scale = np.zeros(lam.size)

    def rhs(uk, v):
        return np.stack([v[1], (uk - lam) * v[0]])

    for k in range(steps):
        h = times[k + 1] - times[k]
        k1 = rhs(u[2 * k], y)
        k2 = rhs(u[2 * k + 1], y + 0.5 * h * k1)
        k3 = rhs(u[2 * k + 1], y + 0.5 * h * k2)
        k4 = rhs(u[2 * k + 2], y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        size = np.max(np.abs(y), axis=0)
        big = size > RESCALE_THRESHOLD
        if np.any(big):
            y[:, big] /= size[big]
            log_scale[big] += np.log(size[big])
        states[k + 1] = y
        scales[k + 1] = log_scale
    return times, states, scales


def jacobi_field(
    spec: ProblemSpec, path: OdeSolution, lam=0.0, h_ode: float = None
) -> ZetaResult:
    """Integrate the Jacobi field of A - lam along a classical path.

    Parameters
    ----------
    spec : ProblemSpec
    path : OdeSolution
        The classical path.
    lam : float or array_like
        Spectral parameter(s); arrays are integrated together.
    h_ode : float, optional
        RK4 step; the path grid is used when omitted.

    Returns
    -------
    ZetaResult

    Raises
    ------
    ScopeError
        Unless the model is separable with one degree of freedom.
    """
    _require_operator_scope(spec, "jacobi_field")
    times, states, scales = _integrate_jacobi(spec, path, lam, h_ode)
    alpha, beta = _boundary_slopes(spec, path)
    scalar = np.ndim(lam) == 0

    def pick(x):
        return float(x[0]) if scalar else x

    return ZetaResult(
        lam=pick(np.atleast_1d(np.asarray(lam, dtype=float))),
        y_T=pick(states[-1, 0]),
        ydot_T=pick(states[-1, 1]),
        log_scale=pick(scales[-1]),
        a1_over_m=alpha,
        a2_over_m=beta,
        h_ode=float(times[1] - times[0]),
    )


def zeta_det(
    spec: ProblemSpec,
    lam=0.0,
    h_ode: float = None,
    path: OdeSolution = None,
    shoot_tol: float = 1e-12,
) -> ZetaResult:
    """Zeta-regularised det(A - lam) from the Jacobi field endpoint."""
    _require_operator_scope(spec, "zeta_det")
    if path is None:
        path = operator_path(spec, h_ode=h_ode, shoot_tol=shoot_tol)
    result = jacobi_field(spec, path, lam, h_ode)
    logger.info("zeta determinant: %s", result.value)
    return result


def _perturbed_flows(spec, path, fd_step, h_ode):
    q0 = path.positions[0]
    plus = hamilton_flow(spec, q0 + fd_step, h_ode, tangent=False)
    minus = hamilton_flow(spec, q0 - fd_step, h_ode, tangent=False)
    return plus, minus


def zeta_det_from_sensitivity(
    spec: ProblemSpec,
    h_ode: float = None,
    fd_step: float = 1e-5,
    path: OdeSolution = None,
) -> float:
    """det A = 2 (d qdot(T)/dq0 - (a2/m) d q(T)/dq0) by finite differences
    of the trajectory family through q0 = q(0)."""
    _require_operator_scope(spec, "zeta_det_from_sensitivity")
    if path is None:
        path = shoot_classical_path(spec, h_ode=h_ode)
    plus, minus = _perturbed_flows(spec, path, fd_step, h_ode)
    dq = (plus.positions[-1, 0] - minus.positions[-1, 0]) / (2 * fd_step)
    dv = (plus.velocities[-1, 0] - minus.velocities[-1, 0]) / (2 * fd_step)
    _, beta = _boundary_slopes(spec, path)
    return float(2.0 * (dv - beta * dq))


def sensitivity_jacobi_gap(
    spec: ProblemSpec,
    h_ode: float = None,
    fd_step: float = 1e-5,
    path: OdeSolution = None,
) -> float:
    """Largest difference over the grid between dq_c(t)/dq0 by finite
    differences and the Jacobi field at lam = 0."""
    _require_operator_scope(spec, "sensitivity_jacobi_gap")
    if path is None:
        path = shoot_classical_path(spec, h_ode=h_ode)
    plus, minus = _perturbed_flows(spec, path, fd_step, path.h_ode)
    fd = (plus.positions[:, 0] - minus.positions[:, 0]) / (2 * fd_step)
    _, states, scales = _integrate_jacobi(spec, path, 0.0, None)
    y = states[:, 0, 0] * np.exp(scales[:, 0])
    return float(np.max(np.abs(fd - y)))


@dataclass
class EigenReport(JsonRecord):
    """Eigenvalues from Jacobi-field roots against finite differences.

    Attributes
    ----------
    roots : np.ndarray
        Lowest eigenvalues from the roots of omega.
    fd_eigenvalues : np.ndarray
        Lowest eigenvalues of the finite difference operator.
    relative_deviation : np.ndarray
        |roots - fd| / max(1, |roots|).
    weyl_ratio : np.ndarray
        lam_k T^2 / (pi^2 k^2) for k >= 1 (nan for k = 0).
    tolerance : float
    """

    roots: np.ndarray
    fd_eigenvalues: np.ndarray
    relative_deviation: np.ndarray
    weyl_ratio: np.ndarray
    tolerance: float = 1e-3

    @property
    def passed(self) -> bool:
        return bool(np.max(self.relative_deviation) <= self.tolerance)

    def to_dict(self) -> dict:
        return {
            "roots": self.roots.tolist(),
            "fdEigenvalues": self.fd_eigenvalues.tolist(),
            "relativeDeviation": self.relative_deviation.tolist(),
            "weylRatio": [
                None if np.isnan(x) else float(x) for x in self.weyl_ratio
            ],
            "tolerance": self.tolerance,
            "pass": self.passed,
        }


def fd_eigenvalues(
    spec: ProblemSpec, path: OdeSolution, k: int, points: int = 4001
) -> np.ndarray:
    """Lowest k eigenvalues of a second-order finite difference discretisation
    of -d2/dt2 + u(t) with the mixed boundary conditions.

    Ghost points impose the boundary conditions; the boundary rows are halved
    and the operator is symmetrised before the tridiagonal eigensolve.
    """
    _require_operator_scope(spec, "fd_eigenvalues")
    alpha, beta = _boundary_slopes(spec, path)
    t = np.linspace(0.0, spec.horizon, points)
    h = t[1] - t[0]
    u = _potential_curvature(spec, path, t)
    d = 2.0 / h**2 + u
    d[0] += 2.0 * alpha / h
    d[-1] -= 2.0 * beta / h
    e = np.full(points - 1, -1.0 / h**2)
    e[0] *= np.sqrt(2.0)
    e[-1] *= np.sqrt(2.0)
    return scipy.linalg.eigh_tridiagonal(
        d, e, eigvals_only=True, select="i", select_range=(0, k - 1)
    )


def eigen_crosscheck(
    spec: ProblemSpec,
    k: int = 5,
    h_ode: float = None,
    path: OdeSolution = None,
    fd_points: int = 4001,
    tolerance: float = 1e-3,
) -> EigenReport:
    """Find the lowest k eigenvalues as roots of omega and compare them with
    a finite difference eigensolve.

    The scan starts below the lowest finite difference eigenvalue and steps
    by pi^2/(4T^2) on a grid offset by an irrational fraction of the step;
    each bracketed sign change is refined with Brent's method.

    Raises
    ------
    SearchError
        If fewer than k roots are bracketed within the scan budget.
    """
    _require_operator_scope(spec, "eigen_crosscheck")
    if k < 1:
        raise ParameterError("k", k, "Need at least one eigenvalue")
    if path is None:
        path = operator_path(spec, h_ode=h_ode)
    fd = fd_eigenvalues(spec, path, k, fd_points)
    T = spec.horizon
    delta = np.pi**2 / (4.0 * T**2)
    lower = fd[0] - max(1.0, 0.1 * abs(fd[0])) - delta
    offset = 0.5 * (np.sqrt(5.0) - 1.0) * delta

    def omega(lam):
        return float(jacobi_field(spec, path, lam, h_ode).scaled_omega)

    roots = []
    scanned = 0
    prev_lam = prev_sign = None
    while len(roots) < k:
        if scanned >= MAX_SCAN_POINTS:
            raise SearchError(
                (lower, lower + scanned * delta),
                len(roots),
                "Found {} of {} eigenvalues".format(len(roots), k),
            )
        steps = np.arange(scanned, scanned + SCAN_CHUNK)
        grid = lower + offset + delta * steps
        signs = np.sign(jacobi_field(spec, path, grid, h_ode).scaled_omega)
        scanned += SCAN_CHUNK
        lams = grid if prev_lam is None else np.concatenate([[prev_lam], grid])
        if prev_sign is None:
            sgn = signs
        else:
            sgn = np.concatenate([[prev_sign], signs])
        for i in range(len(lams) - 1):
            if len(roots) == k:
                break
            if sgn[i] == 0:
                roots.append(float(lams[i]))
            elif sgn[i] * sgn[i + 1] < 0:
                roots.append(
                    scipy.optimize.brentq(
                        omega, lams[i], lams[i + 1], xtol=1e-12, rtol=1e-14
                    )
                )
        prev_lam, prev_sign = grid[-1], signs[-1]
    roots = np.array(roots)
    idx = np.arange(k, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        weyl = np.where(idx > 0, roots * T**2 / (np.pi**2 * idx**2), np.nan)
    return EigenReport(
        roots=roots,
        fd_eigenvalues=np.asarray(fd),
        relative_deviation=np.abs(roots - fd) / np.maximum(1.0, np.abs(roots)),
        weyl_ratio=weyl,
        tolerance=tolerance,
    )


def log_sinh(x):
    """log(sinh(x)) for x > 0 without overflow."""
    x = np.asarray(x, dtype=float)
    return x + np.log1p(-np.exp(-2.0 * x)) - np.log(2.0)


@dataclass
class AsymptoticReport(JsonRecord):
    """det(A + mu) / (2 sqrt(mu) sinh(T sqrt(mu))) over increasing mu."""

    mu: np.ndarray
    ratio: np.ndarray

    @property
    def deviation(self) -> np.ndarray:
        return np.abs(self.ratio - 1.0)

    @property
    def monotone(self) -> bool:
        return bool(np.all(np.diff(self.deviation) <= 0))

    @property
    def passed(self) -> bool:
        return self.monotone and bool(self.deviation[-1] < self.deviation[0])

    def to_dict(self) -> dict:
        return {
            "mu": self.mu.tolist(),
            "ratio": self.ratio.tolist(),
            "deviation": self.deviation.tolist(),
            "monotone": self.monotone,
            "pass": self.passed,
        }


def asymptotic_check(
    spec: ProblemSpec,
    mu_list: Sequence[float] = (1.0, 10.0, 100.0, 1000.0, 10000.0),
    h_ode: float = None,
    path: OdeSolution = None,
) -> AsymptoticReport:
    """Compare det(A + mu) with 2 sqrt(mu) sinh(T sqrt(mu)) in log space."""
    _require_operator_scope(spec, "asymptotic_check")
    mu = np.asarray(mu_list, dtype=float)
    if np.any(mu <= 0):
        raise ParameterError("mu_list", mu_list, "mu values must be positive")
    if path is None:
        path = operator_path(spec, h_ode=h_ode)
    z = jacobi_field(spec, path, -mu, h_ode)
    root = np.sqrt(mu)
    log_ratio = (
        z.log_abs_value - np.log(2.0 * root) - log_sinh(spec.horizon * root)
    )
    report = AsymptoticReport(mu=mu, ratio=z.sign * np.exp(log_ratio))
    if not report.monotone:
        warnings.warn(
            "Asymptotic ratio does not approach 1 monotonically",
            ConvergenceWarning,
        )
    return report


def verify_gy_zeta(
    spec: ProblemSpec,
    h_ode: float = None,
    fd_step: float = None,
    shoot_tol: float = 1e-12,
    tolerance: float = 1e-6,
    threads: int = None,
) -> GYReport:
    """Check d2S/db1 db2 = 2 f1_qb f2_qb / (m det A) on the continuum.

    The left-hand side is a four-point stencil of shot critical actions.

    Raises
    ------
    ConjugatePointError
        If det A vanishes.
    """
    _require_operator_scope(spec, "verify_gy_zeta")
    path = shoot_classical_path(spec, h_ode=h_ode, shoot_tol=shoot_tol)
    det = zeta_det(spec, 0.0, h_ode, path=path)
    if det.value == 0:
        raise ConjugatePointError(0.0, "Zeta determinant vanishes")
    c1 = float(spec.f1.d_qb(path.positions[0], spec.b1)[0, 0])
    c2 = float(spec.f2.d_qb(path.positions[-1], spec.b2)[0, 0])

    def action(b1, b2):
        s = spec.with_parameters(b1=b1, b2=b2)
        sol = shoot_classical_path(
            s, h_ode=h_ode, shoot_tol=shoot_tol, q0=path.positions[0]
        )
        return continuum_action(s, sol)

    cross = cross_stencil(action, spec.b1, spec.b2, fd_step, threads)
    lhs = float(cross[0, 0])
    rhs = 2.0 * c1 * c2 / (spec.mass * det.value)
    details = {"zeta": det.to_dict()}
    if c1 * c2 == 0:
        warnings.warn(
            "Boundary generators do not couple q and b; both sides vanish",
            ConvergenceWarning,
        )
        gap = abs(lhs)
        details["degenerateCoupling"] = True
    else:
        gap = abs(lhs - rhs) / max(abs(lhs), abs(rhs))
    return GYReport(
        identity="gy_zeta",
        lhs=lhs,
        rhs=rhs,
        relative_gap=gap,
        tolerance=tolerance,
        lhs_method="finite_difference",
        rhs_method="jacobi_field",
        lhs_matrix=cross,
        details=details,
    )


@dataclass
class WeakTestFunction:
    """A smooth test function with analytic derivatives.

    For the Hamiltonian operator, value and derivative return arrays of shape
    (2, len(t)) holding the momentum and position components.
    """

    value: Callable
    derivative: Callable
    second: Callable = None


def tilde_test_function(horizon, a1, a2, variant=0) -> WeakTestFunction:
    """Pair (x1, x2) with x1(0) = a1 x2(0) and x1(T) = a2 x2(T).

    Even variants use a linear position component, odd variants a cosine.
    """
    T = float(horizon)
    k = variant + 1

    def g(s):
        if variant % 2 == 0:
            return 1.0 + k * s
        return np.cos(np.pi * k * s)

    def dg(s):
        if variant % 2 == 0:
            return k + 0.0 * s
        return -np.pi * k * np.sin(np.pi * k * s)

    g0, g1 = g(0.0), g(1.0)

    def value(t):
        s = np.asarray(t, dtype=float) / T
        x1 = a1 * g0 * (1 - s) + a2 * g1 * s + np.sin(np.pi * k * s)
        return np.stack([x1, g(s)])

    def derivative(t):
        s = np.asarray(t, dtype=float) / T
        dx1 = -a1 * g0 + a2 * g1 + np.pi * k * np.cos(np.pi * k * s)
        return np.stack([dx1, dg(s)]) / T

    return WeakTestFunction(value, derivative)


def laplacian_test_function(
    horizon, alpha, beta, variant=0
) -> WeakTestFunction:
    """Cubic x(t) = 1 + alpha t + c t^2 + d t^3 with x'(0) = alpha x(0) and
    x'(T) = beta x(T)."""
    T = float(horizon)
    c = float(variant)
    denominator = 3.0 * T**2 - beta * T**3
    if denominator == 0:
        raise ParameterError(
            "beta", beta, "No cubic test function for beta = 3/T"
        )
    d = (beta * (1 + alpha * T + c * T**2) - alpha - 2 * c * T) / denominator
    return WeakTestFunction(
        value=lambda t: 1 + alpha * t + c * t**2 + d * t**3,
        derivative=lambda t: alpha + 2 * c * t + 3 * d * t**2,
        second=lambda t: 2 * c + 6 * d * t,
    )


@dataclass
class WeakConvergenceReport(JsonRecord):
    """<Y_N, A_N X_N> against the continuum pairing as N grows."""

    operator: str
    N_list: list
    epsilon: np.ndarray
    discrete: np.ndarray
    continuum: float
    gaps: np.ndarray = field(init=False)
    slope: Optional[float] = field(init=False)

    def __post_init__(self):
        self.gaps = np.abs(np.asarray(self.discrete) - self.continuum)
        if np.all(self.gaps > 0) and len(self.gaps) > 1:
            self.slope = float(
                np.polyfit(np.log(self.epsilon), np.log(self.gaps), 1)[0]
            )
        else:
            self.slope = None

    def passed(self, min_slope: float = 0.9) -> bool:
        if self.slope is None:
            return bool(np.all(self.gaps <= 1e-12))
        return self.slope >= min_slope

    def to_dict(self) -> dict:
        return {
            "operator": self.operator,
            "N": list(self.N_list),
            "epsilon": np.asarray(self.epsilon).tolist(),
            "discrete": np.asarray(self.discrete).tolist(),
            "continuum": self.continuum,
            "gaps": self.gaps.tolist(),
            "slope": self.slope,
            "pass": self.passed(),
        }


def _check_domain(name, gap, scale):
    if gap > 1e-8 * max(1.0, scale):
        raise PreconditionError(
            name,
            gap,
            "Test function violates {} by {:.3e}".format(name, gap),
        )


def weak_convergence_test(
    spec: ProblemSpec,
    x: WeakTestFunction,
    y: WeakTestFunction,
    N_list: Sequence[int] = (101, 201, 401, 801),
    operator: str = "tilde",
    h_ode: float = None,
    path: OdeSolution = None,
    quad_steps: int = 8192,
) -> WeakConvergenceReport:
    """Pair the lattice operator with sampled test functions and compare with
    the continuum quadratic form.

    Parameters
    ----------
    spec : ProblemSpec
    x, y : WeakTestFunction
        Test functions on the operator domain.
    N_list : Sequence[int]
        Lattice sizes.
    operator : str
        ``tilde`` for the Hamiltonian operator, ``laplacian`` for A_N.
    h_ode : float, optional
        RK4 step for the classical path.
    path : OdeSolution, optional
        The classical path; shot when omitted.
    quad_steps : int
        Simpson intervals for the continuum integral.

    Raises
    ------
    PreconditionError
        If a test function is off the operator domain.
    ScopeError
        For more than one degree of freedom, or a non-separable model with
        the ``laplacian`` operator.
    """
    spec.require_one_dimensional("weak_convergence_test")
    if operator not in ("tilde", "laplacian"):
        raise ParameterError("operator", operator, "Unknown operator")
    if operator == "laplacian":
        spec.require_separable("weak_convergence_test")
    if path is None:
        path = operator_path(spec, h_ode=h_ode)
    T = spec.horizon
    m = spec.mass
    a1 = float(spec.f1.d_qq(path.positions[0], spec.b1)[0, 0])
    a2 = float(spec.f2.d_qq(path.positions[-1], spec.b2)[0, 0])
    ends = np.array([0.0, T])
    for name, fn in (("x", x), ("y", y)):
        v = fn.value(ends)
        if operator == "tilde":
            start = abs(v[0, 0] - a1 * v[1, 0])
            end = abs(v[0, 1] - a2 * v[1, 1])
            _check_domain(name + " at t=0", start, abs(v[0, 0]))
            _check_domain(name + " at t=T", end, abs(v[0, 1]))
        else:
            dv = fn.derivative(ends)
            start = abs(dv[0] - a1 / m * v[0])
            end = abs(dv[1] - a2 / m * v[1])
            _check_domain(name + "' at t=0", start, abs(dv[0]))
            _check_domain(name + "' at t=T", end, abs(dv[1]))

    h = spec.hamiltonian
    t = np.linspace(0.0, T, quad_steps + 1)
    q = path.position(t)
    p = path.momentum(t)
    hqq = np.array([h.hess_qq(a, b)[0, 0] for a, b in zip(p, q)])
    if operator == "tilde":
        hpp = np.array([h.hess_pp(a, b)[0, 0] for a, b in zip(p, q)])
        hpq = np.array([h.hess_pq(a, b)[0, 0] for a, b in zip(p, q)])
        xv, xd, yv = x.value(t), x.derivative(t), y.value(t)
        integrand = yv[0] * (-hpp * xv[0] + xd[1] - hpq * xv[1]) + yv[1] * (
            -xd[0] - hpq * xv[0] - hqq * xv[1]
        )
    else:
        if x.second is None:
            raise ParameterError("x", x, "Laplacian pairing needs x''")
        integrand = y.value(t) * (-x.second(t) - hqq / m * x.value(t))
    continuum = float(scipy.integrate.simpson(integrand, x=t))

    eps = []
    discrete = []
    for N in N_list:
        lattice = Lattice(int(N), T)
        sampled = path.sample(lattice)
        ts = lattice.times
        if operator == "tilde":
            xv, yv = x.value(ts), y.value(ts)
            xs = np.concatenate([xv[0, :-1], xv[1]])
            ys = np.concatenate([yv[0, :-1], yv[1]])
            matrix = assemble_hj(spec, lattice, sampled).to_sparse()
        else:
            xs, ys = x.value(ts), y.value(ts)
            matrix = assemble_an(spec, lattice, sampled).to_sparse()
        eps.append(lattice.epsilon)
        discrete.append(float(ys @ (matrix @ xs)))
        logger.debug("weak pairing N=%d: %.12g", N, discrete[-1])
    return WeakConvergenceReport(
        operator=operator,
        N_list=[int(N) for N in N_list],
        epsilon=np.array(eps),
        discrete=np.array(discrete),
        continuum=continuum,
    )
