"""Exception types shared across the package."""


class CanalQCError(Exception):
    """Base class for all errors raised by canalqc."""


class UsageError(CanalQCError, ValueError):
    """Bad arguments, such as a dimension mismatch or a vector of the wrong causal character."""


class ParseError(CanalQCError):
    """Expression syntax error, carrying the byte offset of the failure."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (at offset {offset})")
        self.message = message
        self.offset = offset


class EvaluationError(CanalQCError, ArithmeticError):
    """Expression evaluated outside the domain of one of its functions."""

    def __init__(self, message, subexpr):
        super().__init__(f"{message}: {subexpr}")
        self.subexpr = subexpr


class ConstructionError(CanalQCError):
    """Generating data violates a constraint of the requested hypersurface kind."""


class DegeneracyError(CanalQCError, ArithmeticError):
    """A geometric quantity is singular, for example a rank-deficient chart."""


class NotQC(CanalQCError):
    """Curvature data does not have the quasi-constant-curvature form."""

    def __init__(self, message, spectrum=None, residual=None):
        super().__init__(message)
        self.spectrum = spectrum
        self.residual = residual


class ConstantCurvature(CanalQCError):
    """All sectional curvatures agree at the point; the structure vector is undefined."""

    def __init__(self, curvature):
        super().__init__(f"constant sectional curvature {curvature:.6g}; xi undefined")
        self.curvature = curvature
