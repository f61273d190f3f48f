"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Malformed configuration: bad file, unknown key, unparsable override."""


class ValidationError(ValueError):
    """Physically or numerically invalid inputs (e.g. surface in free fall)."""
