"""Shared exception types."""


class NstmError(Exception):
    """Base class for all package errors."""


class DimMismatch(NstmError):
    """Tensor extents or axis pairings do not line up."""


class DomainError(NstmError):
    """Numeric argument outside the function's domain."""


class TapeOverflow(NstmError):
    """Head or tape would exceed the configured cell cap."""


class HeadUnderflow(NstmError):
    """Head moved left of cell 1 while left growth is disabled."""


class IllegalState(NstmError):
    """State tensor does not describe a machine configuration."""


class HashMismatch(NstmError):
    """Compiled program does not belong to the supplied machine."""


class InfeasibleWindow(NstmError):
    """No sample of the requested kind exists in the length window."""


class DataFormatError(NstmError):
    """Dataset file or record does not follow the expected layout."""


class MemoryCapExceeded(NstmError):
    """Requested tensor would exceed the configured memory cap."""


class AlphabetError(NstmError):
    """String contains symbols outside the expected alphabet."""
