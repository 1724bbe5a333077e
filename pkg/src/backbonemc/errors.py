"""Exception types shared across the package."""


class BackboneMcError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(BackboneMcError):
    """Invalid configuration: bad parameter set, malformed config file, bad bounds."""


class DivergenceError(BackboneMcError):
    """A free-decay integration produced a non-finite state."""

    def __init__(self, message: str, step: int | None = None, time: float | None = None):
        super().__init__(message)
        self.step = step
        self.time = time


class InsufficientDecayError(BackboneMcError):
    """Too few displacement peaks above threshold to form a backbone curve."""


class GridCoverageError(BackboneMcError):
    """An amplitude level is not covered by enough measurement curves."""


class FitError(BackboneMcError):
    """A slice-density fit failed (degenerate sample or non-convergent optimizer)."""


class InitializationError(BackboneMcError):
    """An MCMC chain could not be started (infeasible initial state)."""


class DegenerateChainError(BackboneMcError):
    """Chains have zero within-chain variance; convergence diagnostics undefined."""
