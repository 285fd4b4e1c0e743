class PointitError(Exception):
    pass


class FormatError(PointitError, ValueError):
    """Malformed input file. Carries the location (byte offset or line) in the message."""


class ConfigError(PointitError, ValueError):
    pass


class InputError(PointitError, ValueError):
    pass


class SequenceError(PointitError, ValueError):
    pass


class SpecError(PointitError, ValueError):
    pass
