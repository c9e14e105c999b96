"""Exception hierarchy shared by all modules."""


class ForceNoiseError(Exception):
    """Base class for every error raised by :mod:`forcenoise`."""


class ParameterError(ForceNoiseError, ValueError):
    """Invalid or inconsistent physical parameters / case combination."""


class PlateContactError(ParameterError):
    """Displacement reaches or exceeds the uncharged plate gap."""


class UnstableBiasError(ForceNoiseError):
    """Electrostatic pull-in: no stable (positive definite) equilibrium."""

    def __init__(self, message, V_DC=None, V_pull_in=None):
        super().__init__(message)
        self.V_DC = V_DC
        self.V_pull_in = V_pull_in


class ConvergenceError(ForceNoiseError):
    """An iterative solver did not reach its tolerance."""


class SingularMatrixError(ForceNoiseError, ArithmeticError):
    """LU factorisation hit a pivot that is zero to working precision."""

    def __init__(self, message, pivot=0.0, index=None):
        super().__init__(message)
        self.pivot = pivot
        self.index = index


class PoleSingularityError(ForceNoiseError, ArithmeticError):
    """Evaluation exactly at a real pole of a response function."""

    def __init__(self, message, nu=None):
        super().__init__(message)
        self.nu = nu


class ZeroSignalError(ForceNoiseError, ArithmeticError):
    """The force-to-output coefficient vanishes, so no estimator exists."""


class DegenerateOptimumError(ForceNoiseError, ArithmeticError):
    """The SQL coupling is undefined (pole or zero at the target frequency)."""


class QuadratureError(ForceNoiseError):
    """Adaptive quadrature failed to reach the requested accuracy."""

    def __init__(self, message, estimate=None, error=None):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class ConfigError(ForceNoiseError):
    """Malformed configuration file; carries the 1-based line and column."""

    def __init__(self, message, line=None, column=None, path=None):
        self.line = line
        self.column = column
        self.path = path
        loc = ""
        if line is not None:
            loc = f"{path or '<config>'}:{line}:{column or 1}: "
        elif path is not None:
            loc = f"{path}: "
        super().__init__(loc + message)
