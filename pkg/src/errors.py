"""Exception types shared by the freewick modules."""


class FreewickError(Exception):
    """Base class for all freewick failures."""


class CapacityError(FreewickError, ValueError):
    """A request exceeds a configured size cap (dimension, word length, N, samples)."""


class AlphabetError(FreewickError, ValueError):
    """Generator index outside the declared alphabet."""


class ParseError(FreewickError, ValueError):
    """Polynomial DSL syntax error; position is the 0-based character offset."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


class ConsistencyError(FreewickError, RuntimeError):
    """Two independent evaluations of the same quantity disagree."""

    def __init__(self, message: str, witness: dict | None = None):
        super().__init__(message)
        self.witness = witness or {}


class ConvergenceError(FreewickError, RuntimeError):
    """An iterative method did not reach its tolerance within the iteration cap."""


class BoundViolation(FreewickError, AssertionError):
    """A certified inequality failed; witness names the offending instance."""

    def __init__(self, message: str, witness: dict | None = None):
        super().__init__(message)
        self.witness = witness or {}
