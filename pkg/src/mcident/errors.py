"""Exception types raised across the package."""


class MCIdentError(Exception):
    """Base class for all errors raised by mcident."""


class DimensionMismatchError(MCIdentError, ValueError):
    pass


class NotStochasticError(MCIdentError, ValueError):
    """A matrix or vector violates the stochasticity invariants."""


class NotSymmetricError(MCIdentError, ValueError):
    pass


class ConvergenceError(MCIdentError, RuntimeError):
    pass


class InfiniteHittingTimeError(MCIdentError, ValueError):
    """Some target state is unreachable from some start state."""


class NoFiniteLengthError(MCIdentError, ValueError):
    """No finite word length separates the two chains."""


class CapExceededError(MCIdentError, RuntimeError):
    """An iterative search ran past its cap."""


class GuardExceededError(MCIdentError, ValueError):
    """A brute-force enumeration would be too large."""


class DegenerateChainError(MCIdentError, ValueError):
    """Pruning removed every outgoing edge of a reachable state."""


class NotARiffleError(MCIdentError, ValueError):
    """The permutation is not an interleaving of two contiguous blocks."""


class InsufficientSamplesError(MCIdentError, ValueError):
    pass


class ConfigError(MCIdentError, ValueError):
    pass
