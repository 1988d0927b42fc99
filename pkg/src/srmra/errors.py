"""Exception types shared across the package and the CLI."""


class ConfigError(Exception):
    """Malformed configuration: bad file syntax, unknown key, invalid value."""


class NumericalError(Exception):
    """A computation failed for numerical reasons (singular solve, noisy
    input where an exact structure was required, divergence)."""
