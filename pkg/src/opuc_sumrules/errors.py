"""Exception hierarchy shared by all modules."""


class OpucError(Exception):
    """Base class for library errors."""


class DomainError(OpucError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class SingularInputError(OpucError, ValueError):
    """Input hits a pole or a singular matrix of the transform."""


class KindError(OpucError, TypeError):
    """Plain coefficients passed where deformed ones are required, or vice versa."""


class InvalidMeasureError(OpucError, ValueError):
    """Moment data or density does not describe a valid (nontrivial) measure."""


class DetectionError(OpucError, RuntimeError):
    """Radial limit or atom refinement did not converge."""
