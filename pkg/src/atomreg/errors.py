"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Bad configuration: unknown key, unparsable value, inconsistent options."""


class NumericalError(RuntimeError):
    """A numeric precondition failed (singular covariance, degenerate
    identifiability region, non-positive curvature, ...)."""
