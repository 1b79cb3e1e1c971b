"""Exception hierarchy.

Three categories drive the CLI exit codes: input/parse problems, geometric
degeneracies, and solver/convergence failures.
"""


class CalibrationError(Exception):
    """Base class for all errors raised by this package."""


class InputError(CalibrationError):
    """A file or document could not be understood."""


class ParseError(InputError):
    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f" [{path}"
            if line is not None:
                where += f":{line}"
            where += "]"
        super().__init__(f"{message}{where}")


class SchemaError(InputError):
    def __init__(self, message, field=None, path=None):
        self.field = field
        self.path = path
        prefix = f"field '{field}': " if field else ""
        suffix = f" [{path}]" if path else ""
        super().__init__(f"{prefix}{message}{suffix}")


class EmptyCloud(InputError):
    """A point-cloud file contained no valid points."""


class GeometryError(CalibrationError):
    """Input geometry is degenerate or out of range."""


class PointBehindCamera(GeometryError):
    """A 3D point has non-positive depth in the camera frame."""


class NoVisiblePoints(GeometryError):
    """No cloud point projects into the image."""


class OutOfBounds(GeometryError):
    """A pixel lies outside the image."""


class DegenerateConfiguration(GeometryError):
    """Every minimal sample was collinear or otherwise unusable."""


class EmptyJacobian(GeometryError):
    """No feature survived the visibility check."""


class EmptyCornerSet(GeometryError):
    """A corner set has no 3D or no 2D corners."""


class BoardOutOfView(GeometryError):
    """A synthetic checkerboard does not project fully into the image."""


class InsufficientFeatures(GeometryError):
    """Too few correspondences for the requested solve."""


class ConvergenceError(CalibrationError):
    """The optimizer could not produce a usable solution."""


class NoConsensus(ConvergenceError):
    """RANSAC found no hypothesis with enough inliers."""


class SingularNormalEquations(ConvergenceError):
    """The (weighted) normal equations are rank-deficient beyond damping."""


class Diverged(ConvergenceError):
    """Cost increased across an entire reweighting round."""


class EmptySystem(ConvergenceError):
    """All residual rows were removed (for example all weights are zero)."""
