"""Exception types shared across the farm modules."""


class FarmError(Exception):
    """Base class for every error raised by taskfarm."""


class OutOfRangeBlock(FarmError, IndexError):
    def __init__(self, k, m):
        super().__init__(f"block-id {k} outside 1..{m}")
        self.k = k
        self.m = m


class ProtocolError(FarmError):
    """An actor received a message it has no transition for."""
