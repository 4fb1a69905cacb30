"""Exception hierarchy shared across the toolkit."""


class AdvRainError(Exception):
    """Base class for all toolkit errors."""


class UnsupportedFormat(AdvRainError):
    """Image file is not an 8-bit grayscale/RGB PNG."""


class DimensionMismatch(AdvRainError):
    """Two buffers/masks that must share dimensions do not."""


class ChannelOutOfRange(AdvRainError):
    pass


class NonPositiveSigma(AdvRainError):
    pass


class InvalidStrength(AdvRainError):
    """Fish-eye strength below 1."""


class EmptyMask(AdvRainError):
    """Critical mask has no allowed pixel."""


class PatternFormatError(AdvRainError):
    """Malformed or unknown-field RaindropPattern JSON."""


class ConfigInvalid(AdvRainError):
    pass


class OracleError(AdvRainError):
    """Base class for classifier-oracle failures."""


class OracleUnreachable(OracleError):
    pass


class ProtocolError(OracleError):
    """Oracle returned a malformed response."""


class ShapeMismatch(OracleError):
    """Oracle returned logits of unexpected length."""


class ClassOutOfRange(OracleError):
    pass
