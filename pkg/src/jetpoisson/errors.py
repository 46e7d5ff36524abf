"""Exception hierarchy with machine-readable codes."""

from __future__ import annotations


class JetPoissonError(Exception):
    """Base class.  ``code`` is a stable identifier used by the CLI."""

    code = "ERROR"
    #: True for errors caused by malformed input rather than by mathematics.
    input_error = False


class InputError(JetPoissonError):
    code = "INPUT_ERROR"
    input_error = True


class ParseError(InputError):
    """Syntax error in an expression or file, with 1-based position."""

    code = "PARSE_ERROR"

    def __init__(self, message: str, line: int | None = None, column: int | None = None,
                 source: str | None = None):
        self.message = message
        self.line = line
        self.column = column
        self.source = source
        where = ""
        if line is not None:
            where = f"line {line}, column {column}: " if column is not None else f"line {line}: "
        if source:
            where = f"{source}: {where}"
        super().__init__(f"{where}{message}")


class TargetOutOfRange(InputError):
    code = "TARGET_OUT_OF_RANGE"


class ShapeError(JetPoissonError):
    code = "SHAPE_ERROR"


class NotSkew(JetPoissonError):
    code = "NOT_SKEW"


class DepthExceeded(JetPoissonError):
    code = "DEPTH_EXCEEDED"


class IrreducibleNonlocal(JetPoissonError):
    code = "IRREDUCIBLE_NONLOCAL"


class NotInvertible(JetPoissonError):
    code = "NOT_INVERTIBLE"


class InvalidSubstitution(InputError):
    code = "INVALID_SUBSTITUTION"


class EpsOrderMismatch(InputError):
    code = "EPS_ORDER_MISMATCH"


class SingularMetric(JetPoissonError):
    code = "SINGULAR_METRIC"


class NonLocalDensity(JetPoissonError):
    code = "NONLOCAL_DENSITY"


class TruncationTooSmall(JetPoissonError):
    code = "TRUNCATION_TOO_SMALL"


class NotSemisimple(JetPoissonError):
    code = "NOT_SEMISIMPLE"


class NotCanonicalForm(JetPoissonError):
    code = "NOT_CANONICAL_FORM"


class NotHomogeneous(JetPoissonError):
    code = "NOT_HOMOGENEOUS"


class NotDivisible(JetPoissonError):
    code = "NOT_DIVISIBLE"

    def __init__(self, message: str, remainder=None):
        super().__init__(message)
        self.remainder = remainder


class NotDP(JetPoissonError):
    """Failure of the factorisation ``P = D o Q o D`` with a certificate."""

    code = "NOT_DP"

    def __init__(self, message: str, step: str, entry: tuple[int, int], remainder):
        super().__init__(message)
        self.step = step
        self.entry = entry
        self.remainder = remainder
