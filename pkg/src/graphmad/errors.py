"""Exception hierarchy shared across the toolkit.

Every error carries a short machine-parseable ``code`` used by the CLI to
emit single-line diagnostics.
"""

from __future__ import annotations


class GraphmadError(Exception):
    """Base class for all toolkit errors."""

    code = "ERROR"


class LoadError(GraphmadError):
    """A required input file is missing or unreadable."""

    code = "LOAD_ERROR"


class FormatError(GraphmadError):
    """An input file violates the expected on-disk format."""

    code = "FORMAT_ERROR"


class WriteError(GraphmadError):
    """An output file could not be written."""

    code = "WRITE_ERROR"


class EstimationError(GraphmadError):
    """Graphon estimation is impossible for the given inputs."""

    code = "ESTIMATION_ERROR"


class ShapeError(GraphmadError):
    """An array argument has an incompatible shape."""

    code = "SHAPE_ERROR"


class ValidityError(GraphmadError):
    """A value violates a domain invariant (symmetry, bounds, simplex)."""

    code = "VALIDITY_ERROR"


class ConfigError(GraphmadError):
    """A configuration value is out of range or inconsistent."""

    code = "CONFIG_ERROR"


class PartitionError(GraphmadError):
    """Index sets do not form a valid partition of the samples."""

    code = "PARTITION_ERROR"


class LockError(GraphmadError):
    """Another invocation already holds the output directory."""

    code = "LOCK_ERROR"


class SolverError(GraphmadError):
    """The clusterpath solver failed to reach the required accuracy.

    Carries the best optimality residual achieved and, when raised from a
    path trace, the mixup-parameter value at which the solve failed.
    """

    code = "SOLVER_ERROR"

    def __init__(self, message: str, residual: float, lam: float | None = None):
        super().__init__(message)
        self.residual = residual
        self.lam = lam
