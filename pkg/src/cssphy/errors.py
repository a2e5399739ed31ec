"""Exception types shared across the package."""


class CssPhyError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(CssPhyError):
    """Invalid or malformed configuration input."""


class SyncError(CssPhyError):
    """Preamble detection or frame synchronization failed."""


class FramingError(CssPhyError):
    """Frame header or structure could not be parsed."""


class IqFormatError(CssPhyError):
    """IQ sample file is malformed or inconsistent."""
