"""Exception types shared across the package."""


class GwishError(Exception):
    """Base class for all package-specific errors."""


class NotDecomposable(GwishError):
    """Raised when an operation requires a decomposable (chordal) graph."""


class InvalidMove(GwishError):
    """Raised for an edge move that is not applicable to the given graph."""


class NoValidMove(GwishError):
    """Raised when a proposal kernel has no move available at all."""


class NotPositiveDefinite(GwishError):
    """Raised when a matrix required to be positive definite is not."""


class CliqueTooLarge(GwishError):
    """Raised when a clique exceeds the sample size, so its Gram block is singular."""

    def __init__(self, clique_size: int, n: int):
        self.clique_size = clique_size
        self.n = n
        super().__init__(
            f"clique of size {clique_size} exceeds the sample size n={n}; "
            f"its Gram submatrix cannot be positive definite"
        )


class DimensionMismatch(GwishError):
    """Raised when array shapes are inconsistent with each other."""


class IndexOutOfRange(GwishError, IndexError):
    """Raised when a vertex or index set refers outside the matrix/graph."""
