"""Exception types shared across the package."""


class LossTreeError(Exception):
    """Base class for all losstree errors."""


class InvalidInputError(LossTreeError, ValueError):
    """A caller supplied a parameter outside its documented domain."""


class CapacityError(LossTreeError, RuntimeError):
    """A request exceeded a hard resource guard (e.g. the enumeration cap)."""


class ContradictionError(LossTreeError, RuntimeError):
    """A forced measurement outcome conflicts with a deterministic result."""
