"""Exception hierarchy shared by every party."""


class SSEError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(SSEError):
    """Invalid or inconsistent cryptographic parameters."""


class StateError(SSEError):
    """A party's state machine was driven out of sequence."""


class CapacityError(SSEError, ValueError):
    """A file index does not fit in the deployment's bitmap capacity."""


class IntegrityError(SSEError):
    """Unmasked or decoded material failed structural validation."""


class NotAuthorized(SSEError):
    """The client holds no key able to unlock the requested keyword."""


class Rejected(SSEError):
    """The server refused a trapdoor (stale, revoked or forged credential)."""


class NotFound(SSEError):
    """No entry (or shard) exists at the requested address."""


class FrameError(SSEError):
    """A wire frame was truncated, oversized or of unknown type."""


class CorruptFile(SSEError):
    """A persisted container failed its checksum or version check."""
