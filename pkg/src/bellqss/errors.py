"""Exception hierarchy shared by the simulator, engine and CLI."""


class QSSError(Exception):
    """Base class for every error raised by this package."""


class InvalidArgumentError(QSSError, ValueError):
    """A caller passed an argument that violates an operation's precondition."""


class ConfigError(InvalidArgumentError):
    """A protocol or scenario configuration is inconsistent."""


class ProtocolStateError(QSSError):
    """An operation was invoked at a point the protocol does not allow."""


class ProtocolAbortError(QSSError):
    """A party refused or failed to perform a mandatory protocol action."""


class InternalInvariantError(QSSError, AssertionError):
    """The simulator reached a state that indicates a bug, never a legal outcome."""
