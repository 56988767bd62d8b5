"""Discrete Jacobi operators and their determinants.

The action Hessian is held in the 2x2 block form

    [ D1  D2 ]
    [ D3  D4 ]

with D1 = blockdiag(-eps H_pp), D2 upper block-bidiagonal with blocks
-(I + eps H_pq) and I, D3 = D2^T and D4 block-diagonal with the boundary
curvatures and -eps H_qq.  Eliminating the momenta gives the block-tridiagonal
Schur complement D4 - D3 D1^{-1} D2, which for separable models is m A_N.

Determinants are returned as :class:`DetResult` records carrying a sign and a
log-magnitude so that long products do not overflow.
"""
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse

from .discrete import DiscretePath, Lattice, SiteDerivatives, site_derivatives
from .exceptions import AdmissibilityError, ParameterError
from .model import ProblemSpec

logger = logging.getLogger(__name__)

ADMISSIBILITY_RTOL = 1e-13
RESCALE_THRESHOLD = 1e150
FLIPPED_FORM_RTOL = 1e-10


@dataclass
class DetResult:
    """A determinant with provenance.

    Attributes
    ----------
    value : float
        The determinant; may be +/-inf if it overflows, see log_abs.
    method : str
        Engine tag: ``dense_lu``, ``schur_blocktri`` or ``transfer_product``.
    sign : float
        -1, 0 or +1.
    log_abs : float
        Natural log of the magnitude (-inf when singular).
    eps_power_removed : int
        Power of eps divided out of the raw determinant.
    sign_convention : dict
        Free-form record of sign factors applied.
    """

    value: float
    method: str
    sign: float
    log_abs: float
    eps_power_removed: int = 0
    sign_convention: dict = field(default_factory=dict)

    @property
    def singular(self) -> bool:
        return self.sign == 0

    @classmethod
    def from_log(
        cls, sign: float, log_abs: float, method: str, **kwargs
    ) -> "DetResult":
        """Build a record from a sign and log-magnitude."""
        if sign == 0 or log_abs == -np.inf:
            return cls(0.0, method, 0.0, -np.inf, **kwargs)
        with np.errstate(over="ignore"):
            value = float(sign * np.exp(log_abs))
        return cls(value, method, float(sign), float(log_abs), **kwargs)

    def to_dict(self) -> dict:
        return {
            "value": self.value if np.isfinite(self.value) else None,
            "method": self.method,
            "sign": self.sign,
            "logAbs": self.log_abs if np.isfinite(self.log_abs) else None,
            "epsPowerRemoved": self.eps_power_removed,
            "signConvention": dict(self.sign_convention),
        }


def det_relative_gap(a, b) -> float:
    """Relative gap |a - b| / max(|a|, |b|) between two determinants.

    Either argument may be a DetResult or a float; DetResults are compared in
    log space.
    """
    sa, la = _sign_log(a)
    sb, lb = _sign_log(b)
    if sa == 0 and sb == 0:
        return 0.0
    if sa == 0 or sb == 0:
        return 1.0
    if sa == sb:
        return float(-np.expm1(-abs(la - lb)))
    return float(1.0 + np.exp(-abs(la - lb)))


def _sign_log(x):
    if isinstance(x, DetResult):
        return x.sign, x.log_abs
    x = float(x)
    if x == 0:
        return 0.0, -np.inf
    return float(np.sign(x)), float(np.log(abs(x)))


def slogdet_product(blocks: np.ndarray):
    """Sign and log-magnitude of the product of block determinants."""
    if len(blocks) == 0:
        return 1.0, 0.0
    signs, logs = np.linalg.slogdet(blocks)
    if np.any(signs == 0):
        return 0.0, -np.inf
    return float(np.prod(signs)), float(np.sum(logs))


def _block_coo(blocks, rows, cols, n):
    a, b = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    r = (np.asarray(rows)[:, None, None] * n + a[None]).ravel()
    c = (np.asarray(cols)[:, None, None] * n + b[None]).ravel()
    return np.asarray(blocks).ravel(), r, c


def _transpose(blocks: np.ndarray) -> np.ndarray:
    return np.swapaxes(blocks, -1, -2)


def det_dense(matrix) -> DetResult:
    """Determinant by pivoted dense LU.

    Parameters
    ----------
    matrix : array_like or sparse matrix
        Square matrix.

    Returns
    -------
    DetResult
        Tagged ``dense_lu``.
    """
    if scipy.sparse.issparse(matrix):
        matrix = matrix.toarray()
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ParameterError(
            "matrix", a.shape, "Determinant needs a square matrix"
        )
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(a)
    diag = np.diag(lu)
    if np.any(diag == 0):
        return DetResult.from_log(0.0, -np.inf, "dense_lu")
    swaps = int(np.count_nonzero(piv != np.arange(piv.size)))
    sign = (-1.0) ** swaps * float(np.prod(np.sign(diag)))
    log_abs = float(np.sum(np.log(np.abs(diag))))
    return DetResult.from_log(sign, log_abs, "dense_lu")


class BlockTridiagonal:
    """Block-tridiagonal matrix with square n x n blocks.

    Attributes
    ----------
    diagonal : np.ndarray
        Diagonal blocks, shape (K, n, n).
    upper : np.ndarray
        Blocks at (k, k+1), shape (K-1, n, n).
    lower : np.ndarray
        Blocks at (k+1, k), shape (K-1, n, n).
    """

    def __init__(self, diagonal, upper, lower):
        self.diagonal = np.asarray(diagonal, dtype=float)
        block = self.diagonal.shape[1:]
        self.upper = np.asarray(upper, dtype=float).reshape(-1, *block)
        self.lower = np.asarray(lower, dtype=float).reshape(-1, *block)
        K = self.diagonal.shape[0]
        if self.upper.shape[0] != K - 1 or self.lower.shape[0] != K - 1:
            raise ParameterError(
                "upper",
                self.upper.shape,
                "Need one off-diagonal block fewer than diagonal blocks",
            )

    @property
    def block_size(self) -> int:
        return self.diagonal.shape[1]

    @property
    def block_count(self) -> int:
        return self.diagonal.shape[0]

    @property
    def shape(self):
        size = self.block_size * self.block_count
        return (size, size)

    def scaled(self, factor: float) -> "BlockTridiagonal":
        return BlockTridiagonal(
            factor * self.diagonal, factor * self.upper, factor * self.lower
        )

    def to_sparse(self) -> scipy.sparse.csr_matrix:
        K = self.block_count
        idx = np.arange(K)
        parts = [
            _block_coo(self.diagonal, idx, idx, self.block_size),
            _block_coo(self.upper, idx[:-1], idx[1:], self.block_size),
            _block_coo(self.lower, idx[1:], idx[:-1], self.block_size),
        ]
        v, r, c = (np.concatenate(x) for x in zip(*parts))
        return scipy.sparse.coo_matrix((v, (r, c)), shape=self.shape).tocsr()

    def to_dense(self) -> np.ndarray:
        return self.to_sparse().toarray()

    def pivots(self) -> np.ndarray:
        """Diagonal blocks of the block-LU factorisation without pivoting.

        Raises
        ------
        AdmissibilityError
            If an intermediate pivot block is singular.
        """
        out = np.empty_like(self.diagonal)
        out[0] = self.diagonal[0]
        for k in range(1, self.block_count):
            try:
                x = np.linalg.solve(out[k - 1], self.upper[k - 1])
            except np.linalg.LinAlgError:
                raise AdmissibilityError(
                    k, "Singular pivot block {} in block LU".format(k)
                )
            out[k] = self.diagonal[k] - self.lower[k - 1] @ x
        return out

    def determinant(self) -> DetResult:
        """Determinant by the block-LU recurrence, falling back to dense LU
        when an intermediate pivot is singular."""
        try:
            pivots = self.pivots()
        except AdmissibilityError as err:
            logger.warning("%s; using dense LU", err)
            return det_dense(self.to_dense())
        sign, log_abs = slogdet_product(pivots)
        return DetResult.from_log(sign, log_abs, "schur_blocktri")


@dataclass
class HJMatrix:
    """Action Hessian in 2x2 block form.

    Attributes
    ----------
    d1 : np.ndarray
        Diagonal blocks of D1, shape (N-1, n, n).
    d2_diag : np.ndarray
        Blocks (i, i) of D2, shape (N-1, n, n).
    d2_upper : np.ndarray
        Blocks (i, i+1) of D2, shape (N-1, n, n).
    d4 : np.ndarray
        Diagonal blocks of D4, shape (N, n, n).
    """

    d1: np.ndarray
    d2_diag: np.ndarray
    d2_upper: np.ndarray
    d4: np.ndarray

    @property
    def N(self) -> int:
        return self.d4.shape[0]

    @property
    def block_size(self) -> int:
        return self.d4.shape[1]

    @property
    def size(self) -> int:
        return (2 * self.N - 1) * self.block_size

    def to_sparse(self) -> scipy.sparse.csr_matrix:
        N, n = self.N, self.block_size
        e = np.arange(N - 1)
        s = np.arange(N) + (N - 1)
        parts = [
            _block_coo(self.d1, e, e, n),
            _block_coo(self.d2_diag, e, s[:-1], n),
            _block_coo(self.d2_upper, e, s[1:], n),
            _block_coo(_transpose(self.d2_diag), s[:-1], e, n),
            _block_coo(_transpose(self.d2_upper), s[1:], e, n),
            _block_coo(self.d4, s, s, n),
        ]
        v, r, c = (np.concatenate(x) for x in zip(*parts))
        shape = (self.size, self.size)
        return scipy.sparse.coo_matrix((v, (r, c)), shape=shape).tocsr()

    def to_dense(self) -> np.ndarray:
        return self.to_sparse().toarray()

    def blocks(self) -> dict:
        """Dense D1, D2, D3 and D4."""
        dense = self.to_dense()
        split = (self.N - 1) * self.block_size
        return {
            "D1": dense[:split, :split],
            "D2": dense[:split, split:],
            "D3": dense[split:, :split],
            "D4": dense[split:, split:],
        }

    def schur_complement(self) -> BlockTridiagonal:
        """D4 - D3 D1^{-1} D2 as a block-tridiagonal matrix."""
        try:
            g = np.linalg.solve(self.d1, self.d2_diag)
            h = np.linalg.solve(self.d1, self.d2_upper)
        except np.linalg.LinAlgError:
            raise AdmissibilityError(None, "Singular momentum block in D1")
        gt = _transpose(self.d2_diag)
        ht = _transpose(self.d2_upper)
        diagonal = self.d4.copy()
        diagonal[:-1] -= gt @ g
        diagonal[1:] -= ht @ h
        upper = -(gt @ h)
        lower = -(ht @ g)
        return BlockTridiagonal(diagonal, upper, lower)

    def d1_determinant(self):
        return slogdet_product(self.d1)


def _check_admissible(d: SiteDerivatives):
    n = d.hpp.shape[-1]
    tiny = np.finfo(float).tiny
    checks = (("eps H_pp", d.hpp), ("I + eps H_pq", np.eye(n) + d.hpq))
    for name, blocks in checks:
        s = np.linalg.svd(blocks, compute_uv=False)
        floor = ADMISSIBILITY_RTOL * np.maximum(s[:, 0], tiny)
        bad = np.nonzero(s[:, -1] <= floor)[0]
        if bad.size:
            site = int(bad[0]) + 1
            raise AdmissibilityError(
                site, "{} is singular at site {}".format(name, site)
            )


def assemble_hj(
    spec: ProblemSpec,
    lattice: Lattice,
    path: DiscretePath,
    check_admissibility: bool = True,
) -> HJMatrix:
    """Assemble the action Hessian at a discrete path.

    Parameters
    ----------
    spec : ProblemSpec
    lattice : Lattice
    path : DiscretePath
    check_admissibility : bool, optional
        Verify that eps H_pp and I + eps H_pq are invertible at every site.

    Returns
    -------
    HJMatrix

    Raises
    ------
    AdmissibilityError
        If a site fails the admissibility check.
    """
    d = site_derivatives(spec, lattice, path)
    if check_admissibility:
        _check_admissible(d)
    n = spec.dimension
    eye = np.broadcast_to(np.eye(n), d.hpp.shape)
    d4 = -np.concatenate([d.hqq, np.zeros((1, n, n))])
    d4[0] += d.f1_qq
    d4[-1] -= d.f2_qq
    return HJMatrix(
        d1=-d.hpp, d2_diag=-(eye + d.hpq), d2_upper=eye.copy(), d4=d4
    )


def assemble_an(
    spec: ProblemSpec, lattice: Lattice, path: DiscretePath
) -> BlockTridiagonal:
    """Assemble the lattice Laplacian-type operator A_N of a separable model.

    Off-diagonal blocks are -I/eps.  The diagonal blocks are
    F1/m + I/eps - (eps/m) V''(q_1) at the first site,
    2I/eps - (eps/m) V''(q_i) inside and -F2/m + I/eps at the last site.

    Raises
    ------
    ScopeError
        If the Hamiltonian is not separable.
    """
    spec.require_separable("assemble_an")
    d = site_derivatives(spec, lattice, path)
    n = spec.dimension
    m = spec.mass
    eps = lattice.epsilon
    N = lattice.N
    eye = np.eye(n)
    # d.hqq already carries one factor of eps
    diagonal = np.empty((N, n, n))
    diagonal[:-1] = 2.0 * eye / eps - d.hqq / m
    diagonal[0] = d.f1_qq / m + eye / eps - d.hqq[0] / m
    diagonal[-1] = -d.f2_qq / m + eye / eps
    off = np.broadcast_to(-eye / eps, (N - 1, n, n))
    return BlockTridiagonal(diagonal, off, off)


def det_schur_hj(hj: HJMatrix) -> DetResult:
    """det of the action Hessian as det(D1) det(D4 - D3 D1^{-1} D2)."""
    s1, l1 = hj.d1_determinant()
    schur = hj.schur_complement().determinant()
    if s1 == 0 or schur.singular:
        return DetResult.from_log(0.0, -np.inf, "schur_blocktri")
    return DetResult.from_log(
        s1 * schur.sign, l1 + schur.log_abs, "schur_blocktri"
    )


@dataclass
class TransferFactors:
    """Factors of the transfer-matrix representation of the action Hessian.

    Attributes
    ----------
    p : np.ndarray
        eps H_pp blocks, shape (N-1, n, n).
    b, c : np.ndarray
        B_i = K_i^T P_i^{-1} and C_i = P_i^{-1} K_i, shape (N-1, n, n).
    e : np.ndarray
        Diagonal blocks E_1..E_N of the Schur complement, shape (N, n, n).
    u : np.ndarray
        Transfer matrices U_2..U_{N-1}, shape (N-2, 2n, 2n).
    w1 : np.ndarray
        Initial panel, shape (2n, n).
    w2t : np.ndarray
        Final row panel, shape (n, 2n).
    """

    p: np.ndarray
    b: np.ndarray
    c: np.ndarray
    e: np.ndarray
    u: np.ndarray
    w1: np.ndarray
    w2t: np.ndarray

    @property
    def block_size(self) -> int:
        return self.p.shape[-1]

    @property
    def alpha(self) -> np.ndarray:
        n = self.block_size
        return self.u[:, :n, :n]

    @property
    def beta(self) -> np.ndarray:
        n = self.block_size
        return self.u[:, :n, n:]

    def _flips(self):
        n = self.block_size
        j = np.diag(np.concatenate([-np.ones(n), np.ones(n)]))
        jp = np.diag(np.concatenate([np.ones(n), -np.ones(n)]))
        return j, jp

    def t_blocks(self):
        """Sign-flipped factors T_i = J U_i J', V1 = J W1, V2^T = W2^T J."""
        j, jp = self._flips()
        return j @ self.u @ jp, j @ self.w1, self.w2t @ j

    def propagate(self, u: np.ndarray = None, w1: np.ndarray = None):
        """Apply the transfer matrices to the initial panel.

        Returns
        -------
        panels : np.ndarray
            Shape (N-1, 2n, n); panel k equals exp(log_scales[k]) times
            U_{k+1} ... U_2 W1.
        log_scales : np.ndarray
            Accumulated log rescalings.
        """
        u = self.u if u is None else u
        y = self.w1 if w1 is None else w1
        panels = [y]
        scales = [0.0]
        log_scale = 0.0
        for step in u:
            y = step @ y
            size = float(np.max(np.abs(y)))
            if size > RESCALE_THRESHOLD or 0 < size < 1.0 / RESCALE_THRESHOLD:
                y = y / size
                log_scale += np.log(size)
            panels.append(y)
            scales.append(log_scale)
        return np.array(panels), np.array(scales)

    def chain(self):
        """The n x n product W2^T U_{N-1} ... U_2 W1.

        Returns
        -------
        matrix : np.ndarray
            The product divided by exp(log_scale).
        log_scale : float
        """
        panels, scales = self.propagate()
        return self.w2t @ panels[-1], float(scales[-1])

    def chain_is_singular(self, rtol: float = 1e-12) -> bool:
        panels, _ = self.propagate()
        m = self.w2t @ panels[-1]
        s = np.linalg.svd(m, compute_uv=False)
        scale = np.linalg.norm(self.w2t, 2) * np.linalg.norm(panels[-1], 2)
        return bool(s[-1] <= rtol * scale)

    def determinant(self) -> DetResult:
        n = self.block_size
        sp, lp = slogdet_product(-self.p)
        sb, lb = slogdet_product(self.b)
        m, scale = self.chain()
        sm, lm = np.linalg.slogdet(m)
        if sp == 0 or sb == 0 or sm == 0:
            return DetResult.from_log(0.0, -np.inf, "transfer_product")
        sign = sp * sb * float(sm)
        log_abs = lp + lb + float(lm) + n * scale

        # Same product written with the sign-flipped factors.
        N = self.e.shape[0]
        t, v1, v2t = self.t_blocks()
        panels, scales = self.propagate(t, v1)
        st, lt = np.linalg.slogdet(v2t @ panels[-1])
        flipped_sign = (-1.0) ** (N * n) * sp * sb * float(st)
        flipped_log = lp + lb + float(lt) + n * float(scales[-1])
        gap = det_relative_gap(
            DetResult.from_log(sign, log_abs, "transfer_product"),
            DetResult.from_log(flipped_sign, flipped_log, "transfer_product"),
        )
        if gap > FLIPPED_FORM_RTOL:
            logger.warning(
                "Transfer determinant forms disagree: relative gap %.3e", gap
            )
        return DetResult.from_log(
            sign,
            log_abs,
            "transfer_product",
            sign_convention={
                "flippedFormSign": (-1) ** (N * n),
                "flippedFormGap": gap,
            },
        )


def transfer_factors(
    spec: ProblemSpec, lattice: Lattice, path: DiscretePath
) -> TransferFactors:
    """Build B_i, C_i, E_i and the transfer matrices along a path.

    Raises
    ------
    AdmissibilityError
        If the path is not admissible.
    """
    d = site_derivatives(spec, lattice, path)
    _check_admissible(d)
    n = spec.dimension
    N = lattice.N
    eye = np.eye(n)
    p = d.hpp
    k = eye + d.hpq
    pinv = np.linalg.inv(p)
    b = _transpose(k) @ pinv
    c = pinv @ k
    ktpk = b @ k
    e = np.empty((N, n, n))
    e[:-1] = -d.hqq + ktpk
    e[1:-1] += pinv[:-1]
    e[0] += d.f1_qq
    e[-1] = -d.f2_qq + pinv[-1]
    u = np.zeros((N - 2, 2 * n, 2 * n))
    if N > 2:
        u[:, :n, :n] = np.linalg.solve(b[1:], e[1:-1])
        u[:, :n, n:] = -np.linalg.solve(b[1:], c[:-1])
        u[:, n:, :n] = eye
    w1 = np.vstack([np.linalg.solve(b[0], e[0]), eye])
    w2t = np.hstack([e[-1], -c[-1]])
    return TransferFactors(p=p, b=b, c=c, e=e, u=u, w1=w1, w2t=w2t)


def det_transfer_hj(
    spec: ProblemSpec, lattice: Lattice, path: DiscretePath
) -> DetResult:
    """det of the action Hessian from the transfer-matrix product in O(N)."""
    return transfer_factors(spec, lattice, path).determinant()


def tilde_to_an_factor(n: int, N: int, mass: float, epsilon: float):
    """Sign and log-magnitude of the factor relating det of the action Hessian
    to det A_N for a separable model: (-1)^{n(N-1)} m^n eps^{n(N-1)}."""
    sign = (-1.0) ** (n * (N - 1))
    return sign, n * np.log(mass) + n * (N - 1) * np.log(epsilon)


def an_det_prime(an: BlockTridiagonal, epsilon: float) -> DetResult:
    """Lattice-regularised determinant eps^{n(N-1)} det A_N.

    Computed as det(eps A_N) / eps^n so that no large power of eps is formed.
    """
    n = an.block_size
    N = an.block_count
    raw = an.scaled(epsilon).determinant()
    if raw.singular:
        return DetResult.from_log(
            0.0, -np.inf, raw.method, eps_power_removed=n * (N - 1)
        )
    return DetResult.from_log(
        raw.sign,
        raw.log_abs - n * np.log(epsilon),
        raw.method,
        eps_power_removed=n * (N - 1),
    )
