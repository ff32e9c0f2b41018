"""Shared exception types."""


class ConfigError(ValueError):
    """Invalid configuration value; the message names the offending key or field."""
