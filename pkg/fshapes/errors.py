"""Exception hierarchy shared by the library and the command line"""


class FShapeError(Exception):
    """Base class for every error raised by fshapes"""

    code = "fshape_error"
    exit_code = 1

    def one_line(self) -> str:
        """Machine-parsable single-line rendering used by the CLI"""
        message = " ".join(str(self).split())
        return f"error: {self.code}: {message}"


class FileFormatError(FShapeError, ValueError):
    """A shape, current or result file could not be parsed"""

    code = "file_format"
    exit_code = 3


class KernelSpecError(FShapeError, ValueError):
    """Unknown or malformed kernel specification"""

    code = "kernel_spec"
    exit_code = 4


class DimensionMismatchError(FShapeError, ValueError):
    """Operands disagree on ambient, manifold or signal dimension"""

    code = "dimension_mismatch"
    exit_code = 5


class ShapeValidationError(FShapeError, ValueError):
    """A functional shape violates its invariants"""

    code = "invalid_shape"
    exit_code = 6

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations) or "invalid shape")


class FlowDivergenceError(FShapeError, ArithmeticError):
    """Flow integration produced non-finite positions"""

    code = "flow_divergence"
    exit_code = 7


class SingularGramError(FShapeError, ArithmeticError):
    """The pursuit Gram system could not be solved even with ridge"""

    code = "singular_gram"
    exit_code = 8


class SingularJacobianError(FShapeError, ArithmeticError):
    """A deformation Jacobian is singular at some atom"""

    code = "singular_jacobian"
    exit_code = 9


class OptimizationError(FShapeError, ArithmeticError):
    """Registration produced a non-finite energy"""

    code = "optimization"
    exit_code = 10
