"""Harness errors"""


class UnknownCheck(ValueError):
    """Check id is not in the catalog"""


class ConfigError(ValueError):
    """Config file missing or malformed"""


class InvalidSweep(ValueError):
    """Sweep asked for fewer levels than an order fit needs"""
