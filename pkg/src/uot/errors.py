"""Error taxonomy shared by all modules.

Every failure mode raised on purpose by this package derives from
:class:`UotError`, so callers (and the CLI) can distinguish our diagnostics
from genuine bugs. The split mirrors how the CLI maps failures to exit
codes: admissibility/feasibility problems are "the math says no" (exit 2),
everything else is "the input or the computation is broken" (exit 1).
"""


class UotError(Exception):
    """Base class for all package errors."""


class InvalidInputError(UotError):
    """Malformed argument: wrong dimension, non-finite data, bad schema."""


class DegenerateInputError(UotError):
    """Input at a genuine singularity (cut locus, apex start, antipodes)."""


class BranchCutError(UotError):
    """Cone exponential asked to continue past the arctan branch."""


class AdmissibilityError(UotError):
    """Measure pair not admissible for the requested cost (c_H infinite)."""


class FeasibilityError(UotError):
    """Dual potentials violate the cost constraint."""

    def __init__(self, message, max_violation=None):
        super().__init__(message)
        self.max_violation = max_violation


class SchemaError(UotError):
    """A JSON document failed validation; carries pointer diagnostics."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = list(diagnostics or [])


class NumericalError(UotError):
    """Iteration diverged or produced non-finite intermediates."""


class SingularityError(UotError):
    """Evaluation hit a pole (vanishing density, cos² → 0)."""


class DomainError(UotError):
    """Scalar argument outside the function's domain of validity."""
