"""Exception types shared across the package."""


class FsosecError(Exception):
    """Base class for all package-specific errors."""


class PrbsError(FsosecError, ValueError):
    """Invalid shift-register specification (zero state or non-maximal taps)."""


class SyncError(FsosecError, RuntimeError):
    """Frame synchronization failed or its correlation peak is untrustworthy."""


class EstimationError(FsosecError, ValueError):
    """A transition-probability estimate cannot be formed from the given data."""


class InfeasibleRateError(FsosecError, ValueError):
    """The requested secrecy criterion cannot be met at any code length."""


class ConfigError(FsosecError, ValueError):
    """Campaign configuration is missing, malformed, or inconsistent."""
