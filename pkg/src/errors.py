"""Exception hierarchy shared by the library, the CLI and the HTTP service."""

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INFEASIBLE = 3
EXIT_DIVERGED = 4


class GraspScpError(Exception):
    """Base class for every error raised on purpose by this package."""

    exit_code = 1


class ConfigError(GraspScpError):
    exit_code = EXIT_USAGE


class DomainError(GraspScpError, ValueError):
    """A parameter lies outside its admissible interval."""

    exit_code = EXIT_USAGE


class DimensionError(GraspScpError, ValueError):
    exit_code = EXIT_USAGE


class SingularityError(GraspScpError):
    """Rank deficiency, singular hand Jacobian or a matrix that should be PD but is not."""


class UnreachableError(GraspScpError):
    """A contact point lies outside a finger's workspace."""


class InfeasibleDesignError(GraspScpError):
    exit_code = EXIT_INFEASIBLE


class DivergedSimulationError(GraspScpError):
    exit_code = EXIT_DIVERGED
