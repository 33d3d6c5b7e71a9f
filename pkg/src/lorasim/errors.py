"""Shared exception types."""


class ConfigError(ValueError):
    """Bad or missing configuration; message names the offending key."""


class InvariantError(RuntimeError):
    """An internal model invariant was violated (e.g. oracle self-check)."""
