"""Exception hierarchy shared by every divsurgeon module."""

from typing import Any, Optional


class DivsurgeonError(Exception):
    """Base class for all library errors."""

    pass


# Grid


class InvalidFieldError(DivsurgeonError):
    """Raised when a field has the wrong shape or non-finite samples."""

    pass


class OutOfDomainError(DivsurgeonError):
    """Raised when a point lies outside a box domain."""

    pass


class UnderResolvedError(DivsurgeonError):
    """Raised when a feature is narrower than the grid can resolve."""

    def __init__(self, message: str, required_resolution: Optional[int] = None):
        if required_resolution is not None:
            message = f"{message} (need resolution ≥ {required_resolution})"
        super().__init__(message)
        self.required_resolution = required_resolution


# Cutoffs and chains


class GeometryError(DivsurgeonError):
    """Raised when regions or cubes do not fit the required geometry."""

    pass


class OverlapError(GeometryError):
    """Raised when a chain link is too thin to carry a transfer window."""

    pass


# Divergence solver


class MeanViolationError(DivsurgeonError):
    """Raised when divergence data does not integrate to zero."""

    def __init__(self, message: str, measured: float):
        super().__init__(f"{message}: ∫h = {measured:.3e}")
        self.measured = measured


class MarginError(DivsurgeonError):
    """Raised when divergence data reaches into a cube's boundary margin."""

    pass


# Norms


class UnsupportedOrderError(DivsurgeonError):
    """Raised for derivative orders above the finite-difference cap."""

    pass


# Pasting


class ObstructionError(DivsurgeonError):
    """Raised when a flux obstruction forbids pasting."""

    def __init__(self, message: str, record: Any):
        super().__init__(message)
        self.record = record


# Linearization and volume-preserving maps


class AdmissibilityError(DivsurgeonError):
    """Raised when the target matrix is too far from the derivative."""

    def __init__(self, message: str, measured: float):
        super().__init__(f"{message}: measured distance {measured:.3e}")
        self.measured = measured


class ResolutionError(DivsurgeonError):
    """Raised when a scale search runs out of grid resolution."""

    pass


class RangeError(DivsurgeonError):
    """Raised when a map's image escapes the grid it must be read on."""

    def __init__(self, message: str, escape: float):
        super().__init__(f"{message}: max escape {escape:.3e}")
        self.escape = escape


class InversionError(DivsurgeonError):
    """Raised when Newton inversion fails to converge at some nodes."""

    def __init__(self, message: str, nodes: list[tuple[int, ...]]):
        shown = ", ".join(str(node) for node in nodes[:10])
        more = f" (+{len(nodes) - 10} more)" if len(nodes) > 10 else ""
        super().__init__(f"{message} at nodes {shown}{more}")
        self.nodes = nodes


class VolumeBudgetError(DivsurgeonError):
    """Raised when clamping a Jacobian target moves too much mass."""

    pass


# Scenarios


class ScenarioParseError(DivsurgeonError):
    """Raised for malformed scenario files; carries the position."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class ScenarioError(DivsurgeonError):
    """Raised when a parsed scenario cannot be run."""

    pass


class FieldFormatError(DivsurgeonError):
    """Raised when a DVSF container is malformed."""

    pass


# Verification


class VerificationFailure(DivsurgeonError):
    """Raised when a measured estimate check fails."""

    pass
