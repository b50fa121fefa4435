"""Exception hierarchy shared across the toolkit.

The CLI maps each class to a one-word error category on stderr.
"""


class ManeuverNetError(Exception):
    category = "error"


class FormatError(ManeuverNetError):
    """A file is missing or does not follow the interchange format."""

    category = "format"


class ValidationError(ManeuverNetError, ValueError):
    """Input data violates a documented invariant."""

    category = "validation"


class ConfigError(ManeuverNetError, ValueError):
    category = "config"


class GapError(ValidationError):
    """A requested frame has no contour observation."""

    category = "gap"


class OutOfRangeError(ValidationError):
    category = "range"


class CacheMissError(ManeuverNetError, KeyError):
    category = "cache"

    def __str__(self):
        return Exception.__str__(self)


class TrainingError(ManeuverNetError, RuntimeError):
    category = "training"
