"""Exception types shared across the package."""


class SbartdsError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(SbartdsError):
    """Invalid configuration value or malformed config file."""


class DataError(SbartdsError):
    """Input data violates a precondition (missing values, bad shapes)."""


class SingularDesignError(SbartdsError):
    """Base-model design matrix is rank deficient."""


class DegenerateStateError(SbartdsError):
    """A state produced numerically degenerate quantities (zero variance,
    vanishing normalizing constant)."""


class DivergingRejectionError(SbartdsError):
    """The rejection sampler exceeded its proposal cap; the acceptance
    function has collapsed toward zero on the base-model support."""


class InvalidTreeError(SbartdsError):
    """Tree structure violates the prior's constraints (e.g. exceeds the
    maximum depth)."""
