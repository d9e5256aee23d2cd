"""Exception types raised across the toolkit."""


class RadioSVError(ValueError):
    """Base class for all input/contract violations."""


class InvalidCutoffError(RadioSVError):
    pass


class InvalidOrderError(RadioSVError):
    pass


class SampleRateMismatchError(RadioSVError):
    pass


class UnsupportedEncodingError(RadioSVError):
    pass


class TruncatedFileError(RadioSVError):
    pass


class ConfigError(RadioSVError):
    """Invalid run configuration (unknown keys, bad values, missing paths)."""
