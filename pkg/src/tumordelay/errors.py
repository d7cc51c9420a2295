"""Exception hierarchy shared by the solvers and the command line."""


class DomainError(ValueError):
    """An argument lies outside the domain where the quantity is defined."""


class NoStationaryRadiusError(DomainError):
    """The parameters admit no positive stationary radius."""


class ConvergenceError(RuntimeError):
    """An iterative solver failed to converge."""


class DelayTooLargeError(ConvergenceError):
    """The delayed stationary fixed-point map does not contract."""


class SimulationAborted(RuntimeError):
    """The radial simulation left the physically meaningful regime."""
