"""Exception hierarchy shared by every module."""


class QSDCError(Exception):
    """Base class for all package errors."""


class ConfigurationError(QSDCError, ValueError):
    """A parameter is outside its allowed range."""


class UsageError(QSDCError, ValueError):
    """An operation was called with inconsistent arguments."""


class ProtocolError(QSDCError, RuntimeError):
    """The protocol state machine was driven out of order or lost data."""
