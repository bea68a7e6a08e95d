"""Exception hierarchy."""


class StableCondError(Exception):
    """Base class for all package errors."""


class ParameterError(StableCondError, ValueError):
    """Invalid process parameters."""


class OutOfRange(ParameterError):
    """Stability index outside (0, 2)."""


class OneSidedJumps(ParameterError):
    """Positivity parameter at or beyond the admissible boundary."""


class CauchyAsymmetric(ParameterError):
    """Cauchy case requested with rho != 1/2."""


class DomainError(StableCondError, ValueError):
    """Argument outside the domain of a function."""


class NearDiagonal(DomainError):
    """Green's function requested too close to its diagonal pole."""


class ScopeError(StableCondError, ValueError):
    """Operation not defined in the requested parameter regime."""


class QuadratureFailure(StableCondError, ArithmeticError):
    """Numerical integration did not reach the requested tolerance."""


class GridFailure(StableCondError, ArithmeticError):
    """Transition mass of a conditioned chain could not be resolved."""


class KilledPath(StableCondError, ValueError):
    """Closest reach requested for a path that entered the interval."""


class InsufficientAcceptance(StableCondError, RuntimeError):
    """Too few accepted samples in a rejection estimator."""


class ConfigError(StableCondError, ValueError):
    """Malformed or empty experiment configuration."""
