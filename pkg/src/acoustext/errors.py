"""Exception hierarchy.  ``exit_code`` maps onto the CLI exit-code taxonomy."""


class LidError(Exception):
    exit_code = 1


class UsageError(LidError):
    exit_code = 1


class ConfigError(LidError):
    exit_code = 2


class DataError(LidError):
    exit_code = 3


class ShapeError(DataError, ValueError):
    """Dimension mismatch between tensors, layers or snapshots."""


class NumericError(LidError):
    exit_code = 4


class UndefinedMetricError(DataError):
    """A metric whose denominator is empty (e.g. no utterances of a language)."""


class UndecidableError(DataError):
    """Arbitration never reached a ready interval."""


class DecoderStateError(UsageError):
    """Polling or terminating a decoder in the wrong state."""
