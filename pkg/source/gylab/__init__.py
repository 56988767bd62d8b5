# Module metadata.
__author__ = "gylab developers"
__copyright__ = "Copyright 2026 gylab developers"
__version__ = "1.0"
__email__ = ""
__status__ = "beta"
__date__ = "18 October 2026"
__docformat__ = "numpy"

from .config import RunConfig, config_deserialiser, load_config
from .continuum import (
    OdeSolution,
    ZetaResult,
    asymptotic_check,
    continuum_action,
    eigen_crosscheck,
    hamilton_flow,
    jacobi_field,
    laplacian_test_function,
    operator_path,
    sensitivity_jacobi_gap,
    shoot_classical_path,
    tilde_test_function,
    verify_gy_zeta,
    weak_convergence_test,
    zeta_det,
    zeta_det_from_sensitivity,
)
from .discrete import (
    DiscretePath,
    Lattice,
    action_gradient,
    discrete_action,
    residual,
    solve_critical_path,
)
from .factory import (
    builtin_free_particle,
    builtin_harmonic,
    builtin_mixed,
    builtin_oscillators,
    builtin_polynomial,
    quadratic_generator,
)
from .gy import (
    GYReport,
    action_cross_hessian_chain,
    action_cross_hessian_fd,
    check_b1_gradient,
    sensitivities,
    verify_gy_an,
    verify_gy_discrete,
)
from .model import (
    BoundaryGenerator,
    CallbackGenerator,
    Hamiltonian,
    HamiltonianModel,
    ProblemSpec,
    QuadraticGenerator,
    SeparableHamiltonian,
    check_derivatives,
)
from .operators import (
    BlockTridiagonal,
    DetResult,
    HJMatrix,
    assemble_an,
    assemble_hj,
    det_dense,
    det_schur_hj,
    det_transfer_hj,
    transfer_factors,
)
from .regularize import (
    ConvergenceTable,
    compare_regularizations,
    det_prime_an,
    lattice_limit,
    verify_gy_lattice,
)

__all__ = [
    "HamiltonianModel",
    "Hamiltonian",
    "SeparableHamiltonian",
    "BoundaryGenerator",
    "QuadraticGenerator",
    "CallbackGenerator",
    "ProblemSpec",
    "check_derivatives",
    "builtin_free_particle",
    "builtin_harmonic",
    "builtin_polynomial",
    "builtin_oscillators",
    "builtin_mixed",
    "quadratic_generator",
    "Lattice",
    "DiscretePath",
    "discrete_action",
    "action_gradient",
    "residual",
    "solve_critical_path",
    "BlockTridiagonal",
    "HJMatrix",
    "DetResult",
    "assemble_hj",
    "assemble_an",
    "det_dense",
    "det_schur_hj",
    "det_transfer_hj",
    "transfer_factors",
    "GYReport",
    "action_cross_hessian_fd",
    "action_cross_hessian_chain",
    "sensitivities",
    "check_b1_gradient",
    "verify_gy_discrete",
    "verify_gy_an",
    "OdeSolution",
    "ZetaResult",
    "hamilton_flow",
    "shoot_classical_path",
    "continuum_action",
    "jacobi_field",
    "zeta_det",
    "zeta_det_from_sensitivity",
    "sensitivity_jacobi_gap",
    "eigen_crosscheck",
    "asymptotic_check",
    "verify_gy_zeta",
    "tilde_test_function",
    "laplacian_test_function",
    "operator_path",
    "weak_convergence_test",
    "ConvergenceTable",
    "det_prime_an",
    "lattice_limit",
    "compare_regularizations",
    "verify_gy_lattice",
    "RunConfig",
    "config_deserialiser",
    "load_config",
]
