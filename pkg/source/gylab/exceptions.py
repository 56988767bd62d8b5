"""Exceptions class definitions.
"""


class GylabError(Exception):
    """Base class for gylab exceptions."""

    pass


class ConvergenceWarning(UserWarning):
    """Warning issued when a numerical sequence does not behave as expected."""

    pass


class ParameterError(GylabError):
    """Exception raised for physically or numerically invalid parameters.

    Attributes
    ----------
    parameter : str
        Name of the offending parameter.
    value : object
        The value that was supplied.
    message : str
        The message accompanying the error.
    """

    def __init__(self, parameter: str, value, message: str):
        """Initialise.

        Parameters
        ----------
        parameter : str
            Name of the offending parameter.
        value : object
            The value that was supplied.
        message : str
            The message accompanying the error.
        """
        super().__init__(message)
        self.parameter = parameter
        self.value = value
        self.message = message


class ShapeError(GylabError):
    """Exception raised when array shapes do not match the lattice or model.

    Attributes
    ----------
    expected : tuple
        Expected shape.
    received : tuple
        Shape that was received.
    message : str
        The message accompanying the error.
    """

    def __init__(self, expected: tuple, received: tuple, message: str):
        """Initialise.

        Parameters
        ----------
        expected : tuple
            Expected shape.
        received : tuple
            Shape that was received.
        message : str
            The message accompanying the error.
        """
        super().__init__(message)
        self.expected = expected
        self.received = received
        self.message = message


class AdmissibilityError(GylabError):
    """Exception raised when a lattice site violates the invertibility
    conditions on the Hamiltonian blocks.

    Attributes
    ----------
    site : int
        One-based lattice site (momentum index) where the violation occurs,
        or None when the site is not known.
    message : str
        The message accompanying the error.
    """

    def __init__(self, site, message: str):
        """Initialise.

        Parameters
        ----------
        site : int
            One-based lattice site, or None.
        message : str
            The message accompanying the error.
        """
        super().__init__(message)
        self.site = site
        self.message = message


class ConvergenceError(GylabError):
    """Exception raised when an iterative solver fails to converge.

    Attributes
    ----------
    iterations : int
        Number of iterations performed.
    residual_norm : float
        Max-norm of the last residual.
    message : str
        The message accompanying the error.
    """

    def __init__(self, iterations: int, residual_norm: float, message: str):
        """Initialise.

        Parameters
        ----------
        iterations : int
            Number of iterations performed.
        residual_norm : float
            Max-norm of the last residual.
        message : str
            The message accompanying the error.
        """
        super().__init__(message)
        self.iterations = iterations
        self.residual_norm = residual_norm
        self.message = message


class DegenerateFamilyError(ConvergenceError):
    """Shooting Jacobian is singular: the boundary problem has a family of
    solutions rather than an isolated one."""

    pass


class ConjugatePointError(GylabError):
    """Exception raised when the sensitivity chain matrix is singular.

    Attributes
    ----------
    determinant : float
        Determinant of the singular matrix.
    message : str
        The message accompanying the error.
    """

    def __init__(self, determinant: float, message: str):
        """Initialise.

        Parameters
        ----------
        determinant : float
            Determinant of the singular matrix.
        message : str
            The message accompanying the error.
        """
        super().__init__(message)
        self.determinant = determinant
        self.message = message


class ScopeError(GylabError):
    """Exception raised when an operation only defined for separable
    Hamiltonians receives a general one.

    Attributes
    ----------
    operation : str
        Name of the operation.
    message : str
        The message accompanying the error.
    """

    def __init__(self, operation: str, message: str):
        """Initialise.

        Parameters
        ----------
        operation : str
            Name of the operation.
        message : str
            The message accompanying the error.
        """
        super().__init__(message)
        self.operation = operation
        self.message = message


class SearchError(GylabError):
    """Exception raised when a root scan fails to bracket enough roots.

    Attributes
    ----------
    interval : tuple
        The scanned (lower, upper) interval.
    found : int
        Number of roots found before giving up.
    message : str
        The message accompanying the error.
    """

    def __init__(self, interval: tuple, found: int, message: str):
        """Initialise.

        Parameters
        ----------
        interval : tuple
            The scanned (lower, upper) interval.
        found : int
            Number of roots found before giving up.
        message : str
            The message accompanying the error.
        """
        super().__init__(message)
        self.interval = interval
        self.found = found
        self.message = message


class PreconditionError(GylabError):
    """Exception raised when test functions violate a domain condition.

    Attributes
    ----------
    condition : str
        Description of the violated condition.
    gap : float
        Size of the violation.
    message : str
        The message accompanying the error.
    """

    def __init__(self, condition: str, gap: float, message: str):
        """Initialise.

        Parameters
        ----------
        condition : str
            Description of the violated condition.
        gap : float
            Size of the violation.
        message : str
            The message accompanying the error.
        """
        super().__init__(message)
        self.condition = condition
        self.gap = gap
        self.message = message


class ConfigError(GylabError):
    """Configuration cannot be deserialised.

    Attributes
    ----------
    key : str
        The offending key (dotted path).
    message : str
        The message accompanying the error.
    """

    def __init__(self, key: str, message: str):
        """Initialise.

        Parameters
        ----------
        key : str
            The offending key (dotted path).
        message : str
            The message accompanying the error.
        """
        super().__init__(message)
        self.key = key
        self.message = message
