"""
Error types raised by the numerical engines and the experiment harness
"""

from typing import Any, Optional


class SinaiLabError(Exception):
    """Base class for every toolkit error"""


class InvalidLaw(SinaiLabError, ValueError):
    """Stable-law parameters violate the admissible region"""


class UnsupportedParameterization(SinaiLabError, ValueError):
    """Valid law that the closed forms or the sampler do not cover (drifted Cauchy)"""


class DomainError(SinaiLabError, ValueError):
    """Argument outside the domain of a function (norming below 1, transform pole, omega outside (0,1))"""


class RangeError(SinaiLabError, LookupError):
    """Evaluation point or walk position outside the materialized span"""


class NotAttained(SinaiLabError, LookupError):
    """A first passage needed by a functional did not happen within the path span"""


class Undecided(SinaiLabError, LookupError):
    """Step stream ran out before either exit threshold was crossed"""


class PartialLadder(SinaiLabError, LookupError):
    """Fewer ladder epochs than requested; carries the partial decomposition"""

    def __init__(self, message: str, partial: Any, found: int):
        super().__init__(message)
        self.partial = partial
        self.found = found

    def __reduce__(self):
        return type(self), (str(self), self.partial, self.found)


class PrecisionError(SinaiLabError, ArithmeticError):
    """Requested precision not reachable; carries the achieved bound"""

    def __init__(self, message: str, achieved: Optional[float] = None):
        super().__init__(message)
        self.achieved = achieved

    def __reduce__(self):
        return type(self), (str(self), self.achieved)


class RootNotFound(SinaiLabError, ArithmeticError):
    """No sign change inside the root scan window"""


class InversionUnstable(SinaiLabError, ArithmeticError):
    """Consecutive Gaver-Stehfest orders disagree; carries the divergence"""

    def __init__(self, message: str, divergence: float):
        super().__init__(message)
        self.divergence = divergence

    def __reduce__(self):
        return type(self), (str(self), self.divergence)


class TruncatedI2(SinaiLabError, LookupError):
    """Squared Bessel clock on the negative side outran the environment; carries the partial value"""

    def __init__(self, message: str, partial: float):
        super().__init__(message)
        self.partial = partial

    def __reduce__(self):
        return type(self), (str(self), self.partial)


class HorizonExceeded(SinaiLabError, LookupError):
    """Backward passage unresolved at the step cap"""


class ConfigError(SinaiLabError, ValueError):
    """Unknown experiment, unknown config key or unreadable config file (CLI usage error)"""
