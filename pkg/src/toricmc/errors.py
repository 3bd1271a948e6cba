"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid user input: lattice spec, couplings, run parameters, CLI flags."""


class SignProblemError(ConfigurationError):
    """Coupling signs that would make worldline weights negative."""


class ConsistencyError(RuntimeError):
    """Internal state check failed (cached action drifted, parity broken)."""
