"""
Exception hierarchy for cfkit.

Every error carries the CLI exit code it maps to, so the command-line
front end never has to pattern-match on exception types.
"""

EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_CONDITION = 4
EXIT_NOT_CONVERGED = 5


class CFKitError(Exception):
    """Base class for all cfkit errors."""

    exit_code = EXIT_IO


class ConditionViolated(CFKitError, ValueError):
    """A constant fails one of the inequalities the convergence theory needs."""

    exit_code = EXIT_CONDITION

    def __init__(self, which: str, detail: str = ""):
        self.which = which
        message = f"condition {which} violated"
        if detail:
            message += f": {detail}"
        super().__init__(message)


class NonPositiveScale(CFKitError, ValueError):
    exit_code = EXIT_USAGE


class DimensionMismatch(CFKitError, ValueError):
    exit_code = EXIT_USAGE


class NonFiniteValue(CFKitError, ArithmeticError):
    """An oracle or prox call produced NaN or infinity."""

    exit_code = EXIT_NOT_CONVERGED


class MaxItersExceeded(CFKitError):
    """A solve ran out of iterations. Carries the result (last state and trace)."""

    exit_code = EXIT_NOT_CONVERGED

    def __init__(self, result):
        self.result = result
        super().__init__(
            f"no convergence after {result.iterations} iterations "
            f"(residual {result.residual:.3e})"
        )


class InnerMaxIters(CFKitError):
    """The overlapping prox dual solver hit its iteration cap. Carries the best iterate."""

    exit_code = EXIT_NOT_CONVERGED

    def __init__(self, x, block):
        self.x = x
        self.block = block
        super().__init__(
            f"dual solver stopped after {block.iterations} iterations "
            f"(residual {block.residual:.3e})"
        )


class EmptyGroups(CFKitError, ValueError):
    exit_code = EXIT_USAGE


class BoxInverted(CFKitError, ValueError):
    exit_code = EXIT_USAGE


class NotConverged(CFKitError):
    """Power iteration did not settle. Carries the best SpectralBounds."""

    exit_code = EXIT_NOT_CONVERGED

    def __init__(self, bounds):
        self.bounds = bounds
        super().__init__(
            f"spectral estimate not converged after {bounds.iters_used} iterations "
            f"(residual {bounds.residual:.3e})"
        )


class ZeroMatrix(CFKitError, ValueError):
    exit_code = EXIT_USAGE


class PatternMismatch(CFKitError, ValueError):
    exit_code = EXIT_USAGE


class OddSampleCount(CFKitError, ValueError):
    exit_code = EXIT_USAGE


class FormatVersionMismatch(CFKitError):
    exit_code = EXIT_IO


class CorruptFile(CFKitError):
    exit_code = EXIT_IO
