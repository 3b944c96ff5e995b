"""Exception types shared across the package."""


class ConfigError(ValueError):
    """A scenario configuration is malformed or references unknown keys."""


class SolverError(RuntimeError):
    """A numerical solve failed (singular system, divergence, bad problem)."""

    def __init__(self, message, context=None):
        super().__init__(message)
        self.context = context or {}
