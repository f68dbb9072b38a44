"""Exception hierarchy.

``InputError`` subclasses map to CLI exit status 1, everything else to 2.
"""


class SexismEnsembleError(Exception):
    """Base class for all package errors."""


class InputError(SexismEnsembleError):
    """Bad user-supplied data or configuration."""


class SchemaError(InputError):
    pass


class LabelParseError(InputError):
    pass


class EncodingError(InputError):
    pass


class MissingLabelError(InputError):
    pass


class ConfigError(InputError):
    pass


class AlignmentError(InputError):
    pass


class CheckpointError(InputError):
    """A checkpoint or manifest could not be read."""


class NumericalError(SexismEnsembleError):
    """Non-finite values appeared during training."""


class TrainingError(SexismEnsembleError):
    pass
