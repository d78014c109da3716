"""Exception types shared across the package."""


class MMDScanError(Exception):
    """Base class for all package errors."""


class ConfigurationError(MMDScanError, ValueError):
    """Invalid kernel, geometry, bounds or experiment configuration."""


class InsufficientSamplesError(MMDScanError, ValueError):
    """A sample set is too small for the unbiased MMD estimator."""


class DomainError(MMDScanError, ValueError):
    """Arguments outside the domain where a bound formula is defined."""


class ResourceError(MMDScanError, RuntimeError):
    """A memory or candidate-count budget would be exceeded."""
