"""Run configuration: TOML files deserialised into problem and numerics
objects.
"""
import logging
import os
import sys
from dataclasses import dataclass, field
from typing import List, Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .exceptions import ConfigError, GylabError
from .factory import (
    builtin_free_particle,
    builtin_harmonic,
    builtin_mixed,
    builtin_oscillators,
    builtin_polynomial,
)
from .model import HamiltonianModel, ProblemSpec, QuadraticGenerator

logger = logging.getLogger(__name__)

THREADS_ENV = "GYLAB_THREADS"
DEFAULT_N_LIST = [100 * 2**k + 1 for k in range(7)]
WHICH = ("thm23", "lemma22", "gy-discrete", "gy-an", "gy-zeta", "weak-conv")

_PROBLEM_KEYS = {
    "hamiltonian",
    "mass",
    "omega",
    "coefficients",
    "stiffness",
    "coupling",
    "dimension",
    "horizon",
    "f1",
    "f2",
}
_GENERATOR_KEYS = {"curvature", "coupling", "b"}
_HAMILTONIAN_KEYS = {
    "free": {"mass", "dimension"},
    "harmonic": {"mass", "omega"},
    "polynomial": {"mass", "coefficients"},
    "oscillators": {"mass", "stiffness"},
    "mixed": {"mass", "omega", "coupling"},
}


def resolve_threads(threads: Optional[int] = None) -> Optional[int]:
    """Number of worker threads for sweeps and stencils.

    Parameters
    ----------
    threads : int, optional
        Explicit value; read from GYLAB_THREADS when None.

    Returns
    -------
    Optional[int]
        None lets the executor choose (the value 0 means auto).

    Raises
    ------
    ConfigError
        If the value is not a non-negative integer.
    """
    key = "threads"
    if threads is None:
        raw = os.environ.get(THREADS_ENV, "0").strip() or "0"
        key = THREADS_ENV
        try:
            threads = int(raw)
        except ValueError:
            raise ConfigError(key, "{} must be an integer".format(THREADS_ENV))
    if threads < 0:
        raise ConfigError(key, "Thread count must not be negative")
    return None if threads == 0 else int(threads)


@dataclass
class NumericsConfig:
    """Numerical parameters shared by the commands."""

    N: int = 201
    N_list: List[int] = field(default_factory=lambda: list(DEFAULT_N_LIST))
    newton_tol: float = 1e-10
    max_iter: int = 50
    ode_steps: int = 4096
    shoot_tol: float = 1e-12
    fd_step: Optional[float] = None
    eigen_count: int = 5
    mu_list: List[float] = field(
        default_factory=lambda: [1.0, 10.0, 100.0, 1000.0, 10000.0]
    )

    def h_ode(self, horizon: float) -> float:
        return horizon / self.ode_steps


@dataclass
class OutputConfig:
    directory: str = "."
    timestamp: bool = True
    continuum: bool = False


@dataclass
class RunConfig:
    """Everything a CLI command needs.

    Attributes
    ----------
    problem : ProblemSpec
    numerics : NumericsConfig
    output : OutputConfig
    verify : dict
        ``which`` and ``lhs`` for the verify command.
    converge : dict
        ``target`` for the converge command.
    """

    problem: ProblemSpec
    numerics: NumericsConfig = field(default_factory=NumericsConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    verify: dict = field(
        default_factory=lambda: {"which": "gy-discrete", "lhs": "chain"}
    )
    converge: dict = field(default_factory=lambda: {"target": "A"})


def _check_keys(section: dict, allowed: set, prefix: str):
    if not isinstance(section, dict):
        raise ConfigError(prefix, "[{}] must be a table".format(prefix))
    for key in section:
        if key not in allowed:
            raise ConfigError(
                "{}.{}".format(prefix, key), "Unknown key <{}>".format(key)
            )


def _positive(value, key: str) -> float:
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise ConfigError(key, "<{}> must be a number".format(key))
    if not value > 0:
        raise ConfigError(key, "<{}> must be positive".format(key))
    return value


def hamiltonian_deserialiser(v: dict) -> HamiltonianModel:
    """Turn the [problem] table into a built-in Hamiltonian.

    Parameters
    ----------
    v : dict
        The [problem] table.

    Returns
    -------
    HamiltonianModel

    Raises
    ------
    ConfigError
        If the Hamiltonian kind is unknown or its parameters are invalid.
    """
    kind = v.get("hamiltonian")
    if kind is None:
        raise ConfigError("problem.hamiltonian", "No <hamiltonian> entry")
    if kind not in _HAMILTONIAN_KEYS:
        raise ConfigError(
            "problem.hamiltonian", "Unknown Hamiltonian <{}>".format(kind)
        )
    model_keys = _PROBLEM_KEYS - {"hamiltonian", "horizon", "f1", "f2"}
    for key in model_keys - _HAMILTONIAN_KEYS[kind]:
        if key in v:
            raise ConfigError(
                "problem." + key,
                "<{}> does not apply to the {} Hamiltonian".format(key, kind),
            )
    mass = _positive(v.get("mass", 1.0), "problem.mass")
    try:
        if kind == "free":
            return builtin_free_particle(mass, int(v.get("dimension", 1)))
        elif kind == "harmonic":
            omega = _positive(v.get("omega", 1.0), "problem.omega")
            return builtin_harmonic(mass, omega)
        elif kind == "polynomial":
            if "coefficients" not in v:
                raise ConfigError(
                    "problem.coefficients", "Polynomial needs <coefficients>"
                )
            return builtin_polynomial(mass, v["coefficients"])
        elif kind == "oscillators":
            if "stiffness" not in v:
                raise ConfigError(
                    "problem.stiffness", "Oscillators need <stiffness>"
                )
            return builtin_oscillators(mass, v["stiffness"])
        else:
            return builtin_mixed(
                mass, float(v.get("omega", 1.0)), float(v.get("coupling", 0.0))
            )
    except ConfigError:
        raise
    except (GylabError, TypeError, ValueError) as err:
        raise ConfigError("problem", str(err))


def generator_deserialiser(v: dict, key: str, dimension: int):
    """Turn a [problem.f1] or [problem.f2] table into a generator and its b.

    Returns
    -------
    Tuple[QuadraticGenerator, object]
    """
    _check_keys(v, _GENERATOR_KEYS, key)
    try:
        gen = QuadraticGenerator(
            v.get("curvature", 0.0),
            coupling=float(v.get("coupling", 1.0)),
            dimension=dimension,
        )
    except (GylabError, TypeError, ValueError) as err:
        raise ConfigError(key, str(err))
    return gen, v.get("b", 0.0)


def problem_deserialiser(v: dict) -> ProblemSpec:
    """Turn the [problem] table into a ProblemSpec.

    Raises
    ------
    ConfigError
        If keys are unknown or missing, or the physical parameters violate
        the problem invariants.
    """
    _check_keys(v, _PROBLEM_KEYS, "problem")
    hamiltonian = hamiltonian_deserialiser(v)
    if "horizon" not in v:
        raise ConfigError("problem.horizon", "No <horizon> entry")
    horizon = _positive(v["horizon"], "problem.horizon")
    n = hamiltonian.dimension
    f1, b1 = generator_deserialiser(v.get("f1", {}), "problem.f1", n)
    f2, b2 = generator_deserialiser(v.get("f2", {}), "problem.f2", n)
    try:
        return ProblemSpec(hamiltonian, f1, f2, horizon, b1=b1, b2=b2)
    except GylabError as err:
        raise ConfigError("problem", str(err))


def numerics_deserialiser(v: dict) -> NumericsConfig:
    allowed = set(NumericsConfig.__dataclass_fields__)
    _check_keys(v, allowed, "numerics")
    out = NumericsConfig(**v)
    if not isinstance(out.N, int) or out.N < 2:
        raise ConfigError("numerics.N", "<N> must be an integer >= 2")
    if not isinstance(out.N_list, list) or len(out.N_list) == 0:
        raise ConfigError("numerics.N_list", "<N_list> must not be empty")
    if any(not isinstance(x, int) or x < 2 for x in out.N_list):
        raise ConfigError(
            "numerics.N_list", "<N_list> entries must be integers >= 2"
        )
    if any(x % 2 == 0 for x in out.N_list):
        raise ConfigError("numerics.N_list", "<N_list> entries must be odd")
    for key in ("newton_tol", "shoot_tol"):
        _positive(getattr(out, key), "numerics." + key)
    if out.fd_step is not None:
        _positive(out.fd_step, "numerics.fd_step")
    if not isinstance(out.ode_steps, int) or out.ode_steps < 2:
        raise ConfigError("numerics.ode_steps", "<ode_steps> must be >= 2")
    if not isinstance(out.max_iter, int) or out.max_iter < 1:
        raise ConfigError("numerics.max_iter", "<max_iter> must be >= 1")
    if not isinstance(out.eigen_count, int) or out.eigen_count < 1:
        raise ConfigError("numerics.eigen_count", "<eigen_count> must be >= 1")
    if len(out.mu_list) == 0:
        raise ConfigError("numerics.mu_list", "<mu_list> must not be empty")
    for mu in out.mu_list:
        _positive(mu, "numerics.mu_list")
    return out


def config_deserialiser(v: dict) -> RunConfig:
    """Turn a parsed TOML document into a RunConfig.

    Parameters
    ----------
    v : dict
        The parsed document.

    Returns
    -------
    RunConfig

    Raises
    ------
    ConfigError
        If the document is incomplete, has unknown keys or invalid values.
    """
    _check_keys(
        v, {"problem", "numerics", "output", "verify", "converge"}, "config"
    )
    if "problem" not in v:
        raise ConfigError("problem", "No [problem] section")
    problem = problem_deserialiser(v["problem"])
    numerics = numerics_deserialiser(v.get("numerics", {}))

    output = v.get("output", {})
    _check_keys(output, {"directory", "timestamp", "continuum"}, "output")
    output = OutputConfig(**output)
    if not isinstance(output.timestamp, bool):
        raise ConfigError("output.timestamp", "<timestamp> must be a boolean")
    if not isinstance(output.continuum, bool):
        raise ConfigError("output.continuum", "<continuum> must be a boolean")

    verify = {"which": "gy-discrete", "lhs": "chain"}
    _check_keys(v.get("verify", {}), set(verify), "verify")
    verify.update(v.get("verify", {}))
    if verify["which"] not in WHICH:
        raise ConfigError(
            "verify.which", "Unknown identity <{}>".format(verify["which"])
        )
    if verify["lhs"] not in ("chain", "fd"):
        raise ConfigError("verify.lhs", "<lhs> must be 'chain' or 'fd'")

    converge = {"target": "A"}
    _check_keys(v.get("converge", {}), set(converge), "converge")
    converge.update(v.get("converge", {}))
    if converge["target"] not in ("A", "tildeA"):
        raise ConfigError(
            "converge.target", "<target> must be 'A' or 'tildeA'"
        )
    return RunConfig(problem, numerics, output, verify, converge)


def load_config(filename: str) -> RunConfig:
    """Read and deserialise a TOML configuration file.

    Raises
    ------
    ConfigError
        If the file cannot be read or parsed, or fails validation.
    """
    try:
        with open(filename, "rb") as fh:
            document = tomllib.load(fh)
    except OSError as err:
        raise ConfigError("config", "Cannot read {}: {}".format(filename, err))
    except tomllib.TOMLDecodeError as err:
        raise ConfigError(
            "config", "Invalid TOML in {}: {}".format(filename, err)
        )
    logger.debug("Loaded configuration from %s", filename)
    return config_deserialiser(document)
