"""Lattice regularisation of functional determinants and its continuum limit.

For a separable model the regularised lattice determinant
det'A_N = eps^{n(N-1)} det A_N tends to half the zeta-regularised determinant
as eps -> 0.  Sweeps over N are extrapolated with two levels of Richardson
extrapolation (first order, then second order in eps).
"""
import json
import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd

from .config import DEFAULT_N_LIST, resolve_threads
from .continuum import (
    continuum_action,
    shoot_classical_path,
    zeta_det,
)
from .discrete import DiscretePath, Lattice, solve_critical_path
from .exceptions import ConvergenceWarning, ParameterError
from .gy import GYReport, cross_stencil
from .model import ProblemSpec
from .operators import (
    DetResult,
    an_det_prime,
    assemble_an,
    det_relative_gap,
    tilde_to_an_factor,
    transfer_factors,
)
from .report import JsonRecord

logger = logging.getLogger(__name__)

ROW_IDENTITY_TOLERANCE = 1e-10


def det_prime_an(
    spec: ProblemSpec, lattice: Lattice, path: DiscretePath = None
) -> DetResult:
    """Regularised lattice determinant eps^{n(N-1)} det A_N.

    Raises
    ------
    ScopeError
        If the model is not separable.
    """
    spec.require_separable("det_prime_an")
    if path is None:
        path = solve_critical_path(spec, lattice)
    return an_det_prime(assemble_an(spec, lattice, path), lattice.epsilon)


@dataclass
class ConvergenceRow:
    """One lattice size of a sweep.

    Attributes
    ----------
    N : int
    epsilon : float
    det_tilde : float
        det of the action Hessian times (-1)^{n(N-1)}.
    det_prime : float
        eps^{n(N-1)} det A_N (None for non-separable models).
    identity_gap : float
        Relative gap of det HJ = (-1)^{n(N-1)} m^n det'A_N (None when not
        separable).
    value : float
        The swept quantity.
    gap : float
        Relative distance of value to the reference.
    est_order : float
        Observed convergence order from this and the two previous rows.
    """

    N: int
    epsilon: float
    det_tilde: float
    det_prime: Optional[float]
    identity_gap: Optional[float]
    value: float
    gap: Optional[float] = None
    est_order: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "N": self.N,
            "epsilon": self.epsilon,
            "det_tildeA": self.det_tilde,
            "det_prime_A": self.det_prime,
            "identity_gap": self.identity_gap,
            "value": self.value,
            "gap": self.gap,
            "est_order": self.est_order,
        }


@dataclass
class ConvergenceTable(JsonRecord):
    """Sweep over lattice sizes with its extrapolated limit.

    Attributes
    ----------
    target : str
        ``A`` for det'A_N or ``tildeA`` for the action Hessian determinant.
    rows : List[ConvergenceRow]
    reference : float
        Expected limit, if known.
    reference_label : str
        What the reference is; names the reference column of the CSV table.
    limit : float
        Richardson extrapolated limit.
    error_bar : float
        Difference of the two finest extrapolants.
    order : float
        Observed order at the finest rows.
    notes : List[str]
        Warnings raised while building the table.
    """

    target: str
    rows: List[ConvergenceRow]
    reference: Optional[float] = None
    reference_label: str = "zeta_half"
    limit: float = float("nan")
    error_bar: float = float("nan")
    order: Optional[float] = None
    notes: List[str] = field(default_factory=list)

    @property
    def values(self) -> np.ndarray:
        return np.array([r.value for r in self.rows])

    @property
    def epsilons(self) -> np.ndarray:
        return np.array([r.epsilon for r in self.rows])

    def to_dataframe(self) -> pd.DataFrame:
        """Rows as a table, one column per row field plus the reference."""
        frame = pd.DataFrame(
            [r.to_dict() for r in self.rows],
            columns=[
                "N",
                "epsilon",
                "det_tildeA",
                "det_prime_A",
                "identity_gap",
                "gap",
                "est_order",
            ],
        )
        frame.insert(4, "ref_" + self.reference_label, self.reference)
        return frame.astype({c: float for c in frame.columns if c != "N"})

    def to_dict(self) -> dict:
        return {
            "target": self.target,
            "reference": self.reference,
            "reference_label": self.reference_label,
            "limit": self.limit,
            "error_bar": self.error_bar,
            "order": self.order,
            "notes": list(self.notes),
            "rows": [r.to_dict() for r in self.rows],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ConvergenceTable":
        """Rebuild a table from ``to_dict`` output.

        Raises
        ------
        ParameterError
            If required entries are missing.
        """
        try:
            rows = [
                ConvergenceRow(
                    N=int(r["N"]),
                    epsilon=r["epsilon"],
                    det_tilde=r["det_tildeA"],
                    det_prime=r["det_prime_A"],
                    identity_gap=r["identity_gap"],
                    value=r["value"],
                    gap=r["gap"],
                    est_order=r["est_order"],
                )
                for r in d["rows"]
            ]
            return cls(
                target=d["target"],
                rows=rows,
                reference=d.get("reference"),
                reference_label=d.get("reference_label", "zeta_half"),
                limit=_nan_if_none(d["limit"]),
                error_bar=_nan_if_none(d["error_bar"]),
                order=d.get("order"),
                notes=list(d.get("notes", [])),
            )
        except (KeyError, TypeError) as err:
            raise ParameterError(
                "table", d, "Incomplete convergence table: {}".format(err)
            )

    @classmethod
    def from_json(cls, json_string: str) -> "ConvergenceTable":
        return cls.from_dict(json.loads(json_string))

    @classmethod
    def load(cls, filename: str) -> "ConvergenceTable":
        """Load a table saved with ``save``."""
        with open(filename, "r") as fh:
            return cls.from_dict(json.load(fh))


def _nan_if_none(x):
    return float("nan") if x is None else float(x)


def richardson(epsilons: Sequence[float], values: Sequence[float]):
    """Two-level Richardson extrapolation over a geometric sequence of steps.

    The first level removes the eps term, the second the eps^2 term.

    Returns
    -------
    limit : float
        Finest extrapolant of the deepest available level.
    error_bar : float
        Absolute difference of the two finest extrapolants at that level.
    """
    eps = np.asarray(epsilons, dtype=float)
    last_level = np.asarray(values, dtype=float)
    if last_level.size < 3:
        raise ParameterError(
            "values", values, "Richardson extrapolation needs three values"
        )
    for m in (1, 2):
        steps = eps[: last_level.size]
        ratio = steps[:-1] / steps[1:]
        mult = ratio**m
        this_level = (mult * last_level[1:] - last_level[:-1]) / (mult - 1.0)
        if this_level.size < 2:
            break
        last_level = this_level
    return float(last_level[-1]), float(abs(last_level[-1] - last_level[-2]))


def observed_orders(epsilons, values) -> List[Optional[float]]:
    """log(|d_{k-1}| / |d_k|) / log(eps_{k-1} / eps_k) with d_k the change
    between successive values; None where undefined."""
    eps = np.asarray(epsilons, dtype=float)
    v = np.asarray(values, dtype=float)
    out = [None] * len(v)
    d = np.abs(np.diff(v))
    for k in range(2, len(v)):
        if d[k - 2] > 0 and d[k - 1] > 0:
            out[k] = float(
                np.log(d[k - 2] / d[k - 1]) / np.log(eps[k - 1] / eps[k])
            )
    return out


def _sweep_row(spec, N, target, newton_tol):
    lattice = Lattice(int(N), spec.horizon)
    path = solve_critical_path(spec, lattice, newton_tol=newton_tol)
    n = spec.dimension
    det_tilde = transfer_factors(spec, lattice, path).determinant()
    parity = (-1.0) ** (n * (lattice.N - 1))
    tilde_value = parity * det_tilde.value
    det_prime = identity_gap = None
    if spec.separable:
        prime = det_prime_an(spec, lattice, path)
        sign, _ = tilde_to_an_factor(
            n, lattice.N, spec.mass, lattice.epsilon
        )
        predicted = DetResult.from_log(
            sign * prime.sign,
            prime.log_abs + n * np.log(spec.mass),
            prime.method,
        )
        identity_gap = det_relative_gap(det_tilde, predicted)
        if identity_gap > ROW_IDENTITY_TOLERANCE:
            logger.warning(
                "N=%d: det HJ and m^n det'A_N differ by %.3e",
                lattice.N,
                identity_gap,
            )
        det_prime = prime.value
    value = det_prime if target == "A" else tilde_value
    logger.debug("Sweep N=%d: value %.15g", lattice.N, value)
    return ConvergenceRow(
        N=lattice.N,
        epsilon=lattice.epsilon,
        det_tilde=tilde_value,
        det_prime=det_prime,
        identity_gap=identity_gap,
        value=value,
    )


def lattice_limit(
    spec: ProblemSpec,
    N_list: Sequence[int] = None,
    target: str = "A",
    reference: float = None,
    reference_label: str = "zeta_half",
    newton_tol: float = 1e-10,
    threads: int = None,
) -> ConvergenceTable:
    """Sweep lattice sizes and extrapolate the regularised determinant.

    Parameters
    ----------
    spec : ProblemSpec
    N_list : Sequence[int], optional
        Increasing lattice sizes, at least four; 100 2^k + 1 for k = 0..6 by
        default.
    target : str, optional
        ``A`` (separable models only) or ``tildeA``.
    reference : float, optional
        Expected limit used for the gap column.
    reference_label : str, optional
        Names the reference column; ``zeta_half`` for det_zeta A / 2.
    newton_tol : float, optional
        Newton tolerance for each critical path.
    threads : int, optional
        Worker threads; GYLAB_THREADS when None.

    Returns
    -------
    ConvergenceTable

    Raises
    ------
    ParameterError
        If N_list is too short, not increasing or has an even size.
    ScopeError
        For target ``A`` with a non-separable model.
    """
    N_list = list(DEFAULT_N_LIST if N_list is None else N_list)
    if len(N_list) < 4:
        raise ParameterError("N_list", N_list, "Need at least four sizes")
    if any(b <= a for a, b in zip(N_list, N_list[1:])):
        raise ParameterError("N_list", N_list, "Sizes must increase")
    if any(int(N) % 2 == 0 for N in N_list):
        raise ParameterError("N_list", N_list, "Sizes must be odd")
    if target not in ("A", "tildeA"):
        raise ParameterError("target", target, "target must be A or tildeA")
    if target == "A":
        spec.require_separable("lattice_limit")

    notes = []
    if not spec.separable:
        message = (
            "Hamiltonian is not separable: the lattice limit is reported "
            "but not asserted"
        )
        warnings.warn(message, ConvergenceWarning)
        notes.append(message)

    with ThreadPoolExecutor(max_workers=resolve_threads(threads)) as pool:
        rows = list(
            pool.map(
                lambda N: _sweep_row(spec, N, target, newton_tol), N_list
            )
        )
    rows.sort(key=lambda r: r.N)

    values = np.array([r.value for r in rows])
    eps = np.array([r.epsilon for r in rows])
    for row, order in zip(rows, observed_orders(eps, values)):
        row.est_order = order
        if reference is not None and reference != 0:
            row.gap = abs(row.value - reference) / abs(reference)

    changes = np.abs(np.diff(values))
    noise = 1e-12 * max(1.0, float(np.max(np.abs(values))))
    if np.any((changes[1:] > changes[:-1]) & (changes[1:] > noise)):
        message = "Successive changes are not decreasing monotonically"
        warnings.warn(message, ConvergenceWarning)
        notes.append(message)

    limit, error_bar = richardson(eps, values)
    orders = [r.est_order for r in rows if r.est_order is not None]
    table = ConvergenceTable(
        target=target,
        rows=rows,
        reference=reference,
        reference_label=reference_label,
        limit=limit,
        error_bar=error_bar,
        order=orders[-1] if orders else None,
        notes=notes,
    )
    logger.info(
        "Lattice limit (%s): %.15g +/- %.3e", target, limit, error_bar
    )
    return table


@dataclass
class RegularizationReport(JsonRecord):
    """Lattice-regularised determinant against the zeta-determinant.

    Attributes
    ----------
    zeta : float
        The zeta-regularised determinant.
    table : ConvergenceTable
        Sweep of det'A_N with reference zeta / 2.
    ratio_finest : float
        det'A_N / zeta at the largest N.
    ratio_limit : float
        Extrapolated limit / zeta.
    tolerance : float
        Allowed distance of ratio_limit from 1/2.
    """

    zeta: float
    table: ConvergenceTable
    ratio_finest: float
    ratio_limit: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(abs(self.ratio_limit - 0.5) <= self.tolerance)

    def to_dict(self) -> dict:
        return {
            "zeta": self.zeta,
            "ratio_finest": self.ratio_finest,
            "ratio_limit": self.ratio_limit,
            "tolerance": self.tolerance,
            "pass": self.passed,
            "table": self.table.to_dict(),
        }


def compare_regularizations(
    spec: ProblemSpec,
    N_list: Sequence[int] = None,
    h_ode: float = None,
    newton_tol: float = 1e-10,
    threads: int = None,
) -> RegularizationReport:
    """Check det'A_N -> det_zeta A / 2 by extrapolation.

    The tolerance is the extrapolation error bar relative to the zeta
    determinant, floored at 1e-4.
    """
    spec.require_separable("compare_regularizations")
    zeta = float(zeta_det(spec, 0.0, h_ode).value)
    table = lattice_limit(
        spec,
        N_list,
        target="A",
        reference=0.5 * zeta,
        newton_tol=newton_tol,
        threads=threads,
    )
    tolerance = max(1e-4, table.error_bar / abs(zeta))
    report = RegularizationReport(
        zeta=zeta,
        table=table,
        ratio_finest=table.rows[-1].value / zeta,
        ratio_limit=table.limit / zeta,
        tolerance=tolerance,
    )
    logger.info(
        "det'A / det_zeta A: finest %.10f, extrapolated %.10f",
        report.ratio_finest,
        report.ratio_limit,
    )
    return report


def verify_gy_lattice(
    spec: ProblemSpec,
    table: ConvergenceTable = None,
    N_list: Sequence[int] = None,
    h_ode: float = None,
    fd_step: float = None,
    shoot_tol: float = 1e-12,
    threads: int = None,
) -> GYReport:
    """Check lim det'A_N = f1_qb f2_qb / (m d2S/db1 db2) with the continuum
    mixed derivative of the action.

    The tolerance is the extrapolation error bar relative to the limit,
    floored at 1e-6.
    """
    spec.require_separable("verify_gy_lattice")
    spec.require_one_dimensional("verify_gy_lattice")
    if table is None:
        table = lattice_limit(spec, N_list, target="A", threads=threads)
    path = shoot_classical_path(spec, h_ode=h_ode, shoot_tol=shoot_tol)
    c1 = float(spec.f1.d_qb(path.positions[0], spec.b1)[0, 0])
    c2 = float(spec.f2.d_qb(path.positions[-1], spec.b2)[0, 0])

    def action(b1, b2):
        s = spec.with_parameters(b1=b1, b2=b2)
        sol = shoot_classical_path(
            s, h_ode=h_ode, shoot_tol=shoot_tol, q0=path.positions[0]
        )
        return continuum_action(s, sol)

    cross = cross_stencil(action, spec.b1, spec.b2, fd_step, threads)
    rhs = c1 * c2 / (spec.mass * float(cross[0, 0]))
    gap = abs(table.limit - rhs) / max(abs(table.limit), abs(rhs))
    return GYReport(
        identity="gy_lattice",
        lhs=table.limit,
        rhs=rhs,
        relative_gap=gap,
        tolerance=max(1e-6, table.error_bar / abs(table.limit)),
        lhs_method="richardson",
        rhs_method="finite_difference",
        lhs_matrix=cross,
        details={"errorBar": table.error_bar},
    )
