"""Exception types shared across the library.

Every invalid-input condition raises a dedicated class so callers (and the
test suite) can distinguish "the bound failed" from "the hypothesis of the
bound was not satisfied".
"""


class PinnlabError(Exception):
    """Base class for all library errors."""


class DimensionMismatchError(PinnlabError, ValueError):
    pass


class NonSymmetricError(PinnlabError, ValueError):
    pass


class SingularMatrixError(PinnlabError, ArithmeticError):
    pass


class ZeroRowError(PinnlabError, ValueError):
    def __init__(self, index, layer=None):
        self.index = index
        self.layer = layer
        where = f"layer {layer}, row {index}" if layer is not None else f"row {index}"
        super().__init__(f"zero (or underflowing) row norm at {where}")


class ZeroDiagonalError(PinnlabError, ValueError):
    def __init__(self, index):
        self.index = index
        super().__init__(f"zero (or underflowing) diagonal entry at index {index}")


class AngleOutOfRangeError(PinnlabError, ValueError):
    def __init__(self, message, pair=None):
        self.pair = pair
        super().__init__(message)


class BadTopologyError(PinnlabError, ValueError):
    pass


class NonScalarOutputError(PinnlabError, ValueError):
    pass


class QuadratureNotConvergedError(PinnlabError, ArithmeticError):
    def __init__(self, x, t, nodes, delta, tol):
        self.x = x
        self.t = t
        self.nodes = nodes
        self.delta = delta
        super().__init__(
            f"Gauss-Hermite value at (x={x!r}, t={t!r}) moved by {delta:.3e} "
            f"(> {tol:.1e}) when doubling {nodes} nodes"
        )


class NoExactSolutionError(PinnlabError, ValueError):
    pass


class NonFiniteLossError(PinnlabError, ArithmeticError):
    """Training aborted on a non-finite loss.

    Carries the last finite checkpoint and the metric records emitted before
    the blow-up so the caller can inspect or resume.
    """

    def __init__(self, epoch, checkpoint=None, records=None):
        self.epoch = epoch
        self.checkpoint = checkpoint
        self.records = records if records is not None else []
        super().__init__(f"non-finite loss at epoch {epoch}")


class ConfigError(PinnlabError, ValueError):
    pass
