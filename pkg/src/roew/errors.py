"""Exception types shared across the package."""


class NotHermitianError(ValueError):
    """Matrix fails the elementwise Hermiticity check."""


class NotPSDError(ValueError):
    """Symmetric matrix has an eigenvalue below the rejection threshold."""


class DimMismatchError(ValueError):
    """Operand shapes are incompatible with the requested operation."""


class OutOfRangeError(ValueError):
    """Scalar parameter lies outside its admissible interval."""


class RetryExhaustedError(RuntimeError):
    """A guarded sampler gave up after its retry budget."""


class NonRealExpectationError(ValueError):
    """An expectation value that must be real carried a large imaginary part."""


class SolverDivergedError(RuntimeError):
    """The optimizer stopped without meeting its convergence tolerances."""


class InfeasibleError(RuntimeError):
    """Hard constraints admit no feasible point at the requested parameters.

    Carries a certificate: the largest violation found, the index of the
    offending constraint, and (when known) the Bell group being trained.
    """

    def __init__(self, max_violation, worst_index, group=None):
        self.max_violation = float(max_violation)
        self.worst_index = int(worst_index)
        self.group = group
        tag = f" group={group}" if group is not None else ""
        super().__init__(
            f"hard constraints infeasible:{tag} worst index {self.worst_index} "
            f"violated by {self.max_violation:.6g}"
        )


class NormalizationUndefinedError(ValueError):
    """Trace normalization requested for an operator with (near-)zero trace."""


class EmptyStratumError(ValueError):
    """A dataset stratum required by the operation has no samples."""


class LengthMismatchError(ValueError):
    """Paired sequences have different lengths."""


class SingleClassError(ValueError):
    """Both classes are required but only one is present."""


class ConfigError(ValueError):
    """A configuration field failed validation."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"config field '{field}': {message}")
