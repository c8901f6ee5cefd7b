"""Exception taxonomy shared across the package."""


class TrustloopError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(TrustloopError):
    """Invalid scenario configuration. Carries the offending field name."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class SignalError(TrustloopError):
    """Malformed input to a behavioral-signal computation."""


class TrustError(TrustloopError):
    """Malformed input to decision-matrix or trust-score computation."""


class SimulationFault(TrustloopError):
    """Numerical breakdown inside the simulation (non-finite loss etc.)."""
