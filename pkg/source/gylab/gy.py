"""Discrete Gelfand-Yaglom identities.

The mixed second derivative of the critical discrete action with respect to
the Lagrangian parameters is obtained either by finite differences of re-solved
critical actions or by propagating parameter sensitivities through the
transfer matrices.  It is then compared with the determinant of the action
Hessian or of A_N.
"""
import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .config import resolve_threads
from .discrete import (
    DiscretePath,
    Lattice,
    discrete_action,
    site_derivatives,
    solve_critical_path,
)
from .exceptions import ConjugatePointError, ConvergenceWarning, ParameterError
from .model import ProblemSpec
from .operators import (
    DetResult,
    an_det_prime,
    assemble_an,
    det_relative_gap,
    slogdet_product,
    transfer_factors,
)
from .report import JsonRecord

logger = logging.getLogger(__name__)

CHAIN_TOLERANCE = 1e-10
FD_TOLERANCE = 1e-5


@dataclass
class GYReport(JsonRecord):
    """Outcome of checking one identity.

    Attributes
    ----------
    identity : str
        Identity name.
    lhs, rhs : float
        The two sides; for matrix sides the determinant.
    relative_gap : float
        |lhs - rhs| / max(|lhs|, |rhs|).
    tolerance : float
        Gap below which the identity passes.
    lhs_method, rhs_method : str
        How each side was computed.
    N : int
        Lattice size, None for continuum identities.
    epsilon : float
        Lattice spacing, None for continuum identities.
    lhs_matrix : np.ndarray
        The n x n cross-Hessian, if any.
    details : dict
        Further quantities worth reporting.
    """

    identity: str
    lhs: float
    rhs: float
    relative_gap: float
    tolerance: float
    lhs_method: str
    rhs_method: str
    N: int = None
    epsilon: float = None
    lhs_matrix: np.ndarray = None
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return bool(self.relative_gap <= self.tolerance)

    @property
    def parity(self) -> str:
        if self.N is None:
            return None
        return "odd" if self.N % 2 else "even"

    def to_dict(self) -> dict:
        """Convert to a JSON-friendly dictionary."""
        return {
            "identity": self.identity,
            "lhs": _finite(self.lhs),
            "rhs": _finite(self.rhs),
            "relative_gap": _finite(self.relative_gap),
            "tolerance": self.tolerance,
            "pass": self.passed,
            "lhs_method": self.lhs_method,
            "rhs_method": self.rhs_method,
            "N": self.N,
            "epsilon": self.epsilon,
            "parity": self.parity,
            "lhs_matrix": None
            if self.lhs_matrix is None
            else np.asarray(self.lhs_matrix).tolist(),
            "details": self.details,
        }


def _finite(x):
    if x is None:
        return None
    x = float(x)
    return x if np.isfinite(x) else None


def _fd_steps(b: np.ndarray, fd_step: float) -> np.ndarray:
    if fd_step is not None:
        if not fd_step > 0:
            raise ParameterError(
                "fd_step", fd_step, "Finite difference step must be positive"
            )
        return np.full(b.shape, float(fd_step))
    return 1e-4 * np.maximum(1.0, np.abs(b))


def _det_value(matrix: np.ndarray) -> float:
    return float(np.linalg.det(matrix))


def cross_stencil(action, b1, b2, fd_step=None, threads=None) -> np.ndarray:
    """Four-point central stencil for d2S/db1 db2.

    Parameters
    ----------
    action : callable
        Maps (b1, b2) to the critical action.
    b1, b2 : np.ndarray
        Parameters at which to differentiate.
    fd_step : float, optional
        Step; by default 1e-4 max(1, |b|) per component.
    threads : int, optional
        Worker threads; resolved from GYLAB_THREADS when None.

    Returns
    -------
    np.ndarray
        The n x n matrix with entry [i, j] = d2S/db1_i db2_j.
    """
    n = b1.size
    h1 = _fd_steps(b1, fd_step)
    h2 = _fd_steps(b2, fd_step)
    jobs = []
    for i in range(n):
        for j in range(n):
            for s1, s2 in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
                d1 = np.zeros(n)
                d2 = np.zeros(n)
                d1[i] = s1 * h1[i]
                d2[j] = s2 * h2[j]
                jobs.append((b1 + d1, b2 + d2))
    with ThreadPoolExecutor(max_workers=resolve_threads(threads)) as pool:
        values = list(pool.map(lambda args: action(*args), jobs))
    values = np.asarray(values).reshape(n, n, 4)
    stencil = values[..., 0] - values[..., 1] - values[..., 2] + values[..., 3]
    return stencil / (4.0 * h1[:, None] * h2[None, :])


def action_cross_hessian_fd(
    spec: ProblemSpec,
    lattice: Lattice,
    fd_step: float = None,
    path: DiscretePath = None,
    newton_tol: float = 1e-10,
    threads: int = None,
) -> np.ndarray:
    """Mixed derivative of the critical discrete action by finite differences.

    Each stencil point re-solves the critical path, warm-started from the path
    at the unperturbed parameters.
    """
    base = path
    if base is None:
        base = solve_critical_path(spec, lattice, newton_tol=newton_tol)

    def action(b1, b2):
        s = spec.with_parameters(b1=b1, b2=b2)
        critical = solve_critical_path(
            s, lattice, init=base, newton_tol=newton_tol
        )
        return discrete_action(s, lattice, critical)

    return cross_stencil(action, spec.b1, spec.b2, fd_step, threads)


def _chain(spec, lattice, path):
    tf = transfer_factors(spec, lattice, path)
    panels, scales = tf.propagate()
    m = tf.w2t @ panels[-1]
    if tf.chain_is_singular():
        raise ConjugatePointError(
            float(np.linalg.det(m) * np.exp(scales[-1])),
            "Sensitivity chain matrix is singular: conjugate point on [0, T]",
        )
    return tf, panels, scales, m


def action_cross_hessian_chain(
    spec: ProblemSpec, lattice: Lattice, path: DiscretePath
) -> np.ndarray:
    """Mixed derivative of the critical discrete action by the chain rule.

    The derivative of q_1 with respect to b2 solves M x = f2_qb where M is the
    transfer-matrix product; the mixed derivative is f1_qb^T x.

    Raises
    ------
    ConjugatePointError
        If M is singular.
    """
    d = site_derivatives(spec, lattice, path)
    _, _, scales, m = _chain(spec, lattice, path)
    x = np.linalg.solve(m, d.f2_qb) * np.exp(-scales[-1])
    return d.f1_qb.T @ x


def sensitivities(
    spec: ProblemSpec, lattice: Lattice, path: DiscretePath
) -> np.ndarray:
    """Derivatives dq_i/db2 at every site from the transfer recursion.

    Returns
    -------
    np.ndarray
        Shape (N, n, n); entry [i, a, b] = dq_{i+1, a} / db2_b.
    """
    n = spec.dimension
    d = site_derivatives(spec, lattice, path)
    _, panels, scales, m = _chain(spec, lattice, path)
    x = np.linalg.solve(m, d.f2_qb)
    weights = np.exp(scales - scales[-1])
    out = np.empty((lattice.N, n, n))
    out[0] = weights[0] * (panels[0][n:] @ x)
    out[1:] = weights[:, None, None] * (panels[:, :n, :] @ x)
    return out


def check_b1_gradient(
    spec: ProblemSpec,
    lattice: Lattice,
    path: DiscretePath = None,
    fd_step: float = None,
    newton_tol: float = 1e-10,
    tolerance: float = FD_TOLERANCE,
) -> GYReport:
    """Compare dS/db1 by finite differences with df1/db1 at q_1."""
    if path is None:
        path = solve_critical_path(spec, lattice, newton_tol=newton_tol)
    n = spec.dimension
    h = _fd_steps(spec.b1, fd_step)
    fd = np.empty(n)
    for i in range(n):
        values = []
        for sign in (1, -1):
            b1 = spec.b1.copy()
            b1[i] += sign * h[i]
            s = spec.with_parameters(b1=b1)
            critical = solve_critical_path(
                s, lattice, init=path, newton_tol=newton_tol
            )
            values.append(discrete_action(s, lattice, critical))
        fd[i] = (values[0] - values[1]) / (2.0 * h[i])
    exact = spec.f1.d_b(path.positions[0], spec.b1)
    gap = float(np.max(np.abs(fd - exact))) / max(
        1.0, float(np.max(np.abs(exact)))
    )
    return GYReport(
        identity="action_b1_gradient",
        lhs=float(np.linalg.norm(fd)),
        rhs=float(np.linalg.norm(exact)),
        relative_gap=gap,
        tolerance=tolerance,
        lhs_method="finite_difference",
        rhs_method="generator_derivative",
        N=lattice.N,
        epsilon=lattice.epsilon,
        details={"fd": fd.tolist(), "exact": exact.tolist()},
    )


def _coupling_log(d):
    s1, l1 = slogdet_product(d.f1_qb[None])
    s2, l2 = slogdet_product(d.f2_qb[None])
    return s1 * s2, l1 + l2


def verify_gy_discrete(
    spec: ProblemSpec,
    lattice: Lattice,
    path: DiscretePath = None,
    lhs: str = "chain",
    fd_step: float = None,
    tolerance: float = None,
    threads: int = None,
) -> GYReport:
    """Check det(d2S/db1 db2) = prod det(-K_i) det f1_qb det f2_qb / det(HJ).

    Parameters
    ----------
    spec : ProblemSpec
    lattice : Lattice
    path : DiscretePath, optional
        Critical path; solved for when omitted.
    lhs : str, optional
        ``chain`` (default) or ``fd``.
    fd_step : float, optional
        Step for the finite difference left-hand side.
    tolerance : float, optional
        1e-10 for the chain rule, max(1e-5, 10 h^2) for finite differences.
    threads : int, optional
        Worker threads for the finite difference stencil.

    Returns
    -------
    GYReport
    """
    if lhs not in ("chain", "fd"):
        raise ParameterError("lhs", lhs, "lhs must be 'chain' or 'fd'")
    if path is None:
        path = solve_critical_path(spec, lattice)
    n = spec.dimension
    N = lattice.N
    d = site_derivatives(spec, lattice, path)
    coupling_sign, coupling_log = _coupling_log(d)

    if coupling_sign == 0:
        warnings.warn(
            "Boundary generators do not couple q and b; both sides vanish",
            ConvergenceWarning,
        )
        cross = np.zeros((n, n))
    elif lhs == "chain":
        cross = action_cross_hessian_chain(spec, lattice, path)
    else:
        cross = action_cross_hessian_fd(
            spec, lattice, fd_step=fd_step, path=path, threads=threads
        )
    if tolerance is None:
        if lhs == "chain":
            tolerance = CHAIN_TOLERANCE
        else:
            h = 1e-4 if fd_step is None else fd_step
            tolerance = max(FD_TOLERANCE, 10.0 * h**2)

    det_hj = transfer_factors(spec, lattice, path).determinant()
    ks, kl = slogdet_product(-(np.eye(n) + d.hpq))
    if coupling_sign == 0 or det_hj.singular:
        rhs = DetResult.from_log(0.0, -np.inf, "transfer_product")
    else:
        rhs = DetResult.from_log(
            ks * coupling_sign * det_hj.sign,
            kl + coupling_log - det_hj.log_abs,
            "transfer_product",
        )
    lhs_value = _det_value(cross)
    details = {"detHJ": det_hj.to_dict(), "kFactorSign": ks}
    gap = det_relative_gap(lhs_value, rhs)
    if spec.separable:
        parity_factor = (-1) ** (n * (N - 1))
        if coupling_sign == 0 or det_hj.singular:
            separable = DetResult.from_log(0.0, -np.inf, "transfer_product")
        else:
            separable = DetResult.from_log(
                parity_factor * coupling_sign * det_hj.sign,
                coupling_log - det_hj.log_abs,
                "transfer_product",
            )
        separable_gap = det_relative_gap(lhs_value, separable)
        details["parityFactor"] = parity_factor
        details["separableForm"] = _finite(separable.value)
        details["separableFormGap"] = separable_gap
        # odd N drops the parity factor entirely
        if N % 2 == 1:
            gap = max(gap, separable_gap)
    report = GYReport(
        identity="gy_discrete",
        lhs=lhs_value,
        rhs=rhs.value,
        relative_gap=gap,
        tolerance=tolerance,
        lhs_method="chain_rule" if lhs == "chain" else "finite_difference",
        rhs_method="transfer_product",
        N=N,
        epsilon=lattice.epsilon,
        lhs_matrix=cross,
        details=details,
    )
    logger.info(
        "GY discrete N=%d: lhs %.12g rhs %.12g gap %.3e",
        N,
        report.lhs,
        report.rhs,
        report.relative_gap,
    )
    return report


def verify_gy_an(
    spec: ProblemSpec,
    lattice: Lattice,
    path: DiscretePath = None,
    tolerance: float = CHAIN_TOLERANCE,
) -> GYReport:
    """Check eps^{n(N-1)} det A_N = det f1_qb det f2_qb / (m^n det cross).

    Raises
    ------
    ScopeError
        If the Hamiltonian is not separable.
    ConjugatePointError
        If A_N or the sensitivity chain is singular.
    """
    spec.require_separable("verify_gy_an")
    if path is None:
        path = solve_critical_path(spec, lattice)
    n = spec.dimension
    d = site_derivatives(spec, lattice, path)
    cross = action_cross_hessian_chain(spec, lattice, path)
    det_prime = an_det_prime(
        assemble_an(spec, lattice, path), lattice.epsilon
    )
    if det_prime.singular:
        raise ConjugatePointError(0.0, "A_N is singular")
    coupling_sign, coupling_log = _coupling_log(d)
    cs, cl = slogdet_product(cross[None])
    if coupling_sign == 0 or cs == 0:
        rhs = DetResult.from_log(0.0, -np.inf, "chain_rule")
    else:
        rhs = DetResult.from_log(
            coupling_sign * cs,
            coupling_log - n * np.log(spec.mass) - cl,
            "chain_rule",
        )
    return GYReport(
        identity="gy_an",
        lhs=det_prime.value,
        rhs=rhs.value,
        relative_gap=det_relative_gap(det_prime, rhs),
        tolerance=tolerance,
        lhs_method=det_prime.method,
        rhs_method="chain_rule",
        N=lattice.N,
        epsilon=lattice.epsilon,
        lhs_matrix=cross,
        details={"detPrime": det_prime.to_dict()},
    )
