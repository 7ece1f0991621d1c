"""Exception types shared across the package."""


class AdaptcsError(Exception):
    """Base class for errors raised by this package."""


class ParseError(AdaptcsError, ValueError):
    """A text input file could not be parsed.

    Carries the offending path and 1-based line number when known.
    """

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        prefix = ""
        if path is not None:
            prefix = f"{path}:"
            if line is not None:
                prefix += f"{line}:"
            prefix += " "
        super().__init__(prefix + message)


class ValidationError(AdaptcsError, ValueError):
    """An in-memory object violates a documented invariant."""


class UndefinedMetricError(AdaptcsError, ValueError):
    """A metric was requested on inputs where it has no defined value."""


class SvdConvergenceError(AdaptcsError, RuntimeError):
    """Randomized SVD failed to reach the requested residual tolerance."""

    def __init__(self, residual: float, tol: float, rank: int):
        self.residual = residual
        self.tol = tol
        self.rank = rank
        super().__init__(
            f"rank-{rank} factorization residual {residual:.3e} exceeds tolerance {tol:.3e}"
        )


class HopBudgetError(AdaptcsError, RuntimeError):
    """Exact hop construction exceeded the nonzero budget.

    The message names the hop at which the budget was exceeded; callers
    should fall back to the low-rank latent path for graphs this dense.
    """

    def __init__(self, hop: int, nnz: int, budget: int):
        self.hop = hop
        self.nnz = nnz
        self.budget = budget
        super().__init__(
            f"hop {hop} operator has {nnz} nonzeros, over budget {budget}; "
            "use the low-rank latent path for this graph"
        )


class TrainingDivergenceError(AdaptcsError, RuntimeError):
    """Training produced a non-finite loss or activation."""

    def __init__(self, epoch: int, what: str = "loss"):
        self.epoch = epoch
        super().__init__(f"non-finite {what} at epoch {epoch}")


class UsageError(AdaptcsError, ValueError):
    """A command-line invocation is inconsistent or incomplete."""
