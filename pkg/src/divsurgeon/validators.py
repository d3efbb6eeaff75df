"""Input validators for domains, regions, matrices and scenario values."""

from typing import Any, Dict, List, Sequence

import numpy as np

from divsurgeon.errors import DivsurgeonError

MIN_RESOLUTION = 8
MAX_DIMENSION = 3


class ValidationError(DivsurgeonError):
    """Raised when input validation fails."""

    pass


def _validate_positive_numeric_fields(
    row: Dict[str, Any], fields: List[str]
) -> List[str]:
    """
    Validate that specified fields are positive finite numbers.

    Args:
        row: Parameter dictionary
        fields: List of field names to validate

    Returns:
        List of error messages (empty if all valid)
    """
    errors = []
    for field in fields:
        value = row.get(field)
        if value is not None:
            try:
                num_value = float(value)
                if not np.isfinite(num_value) or num_value <= 0:
                    errors.append(f"{field} must be positive, got {num_value}")
            except (ValueError, TypeError):
                errors.append(f"{field} must be numeric, got {value}")
    return errors


def validate_domain(
    kind: str,
    lower: Sequence[float],
    lengths: Sequence[float],
    resolution: Sequence[int],
) -> List[str]:
    """
    Validate a domain description.

    Args:
        kind: "box" or "torus"
        lower: Lower corner
        lengths: Side lengths
        resolution: Grid cells per axis

    Returns:
        List of error messages (empty if valid)
    """
    errors = []
    if kind not in ("box", "torus"):
        errors.append(f"Domain kind must be 'box' or 'torus', got {kind!r}")

    n = len(lengths)
    if not 1 <= n <= MAX_DIMENSION:
        errors.append(f"Dimension must be between 1 and {MAX_DIMENSION}, got {n}")
    if len(lower) != n or len(resolution) != n:
        errors.append(
            f"lower, lengths and resolution must all have {n} entries, "
            f"got {len(lower)}, {n}, {len(resolution)}"
        )

    errors.extend(
        _validate_positive_numeric_fields(
            {f"lengths[{i}]": length for i, length in enumerate(lengths)},
            [f"lengths[{i}]" for i in range(n)],
        )
    )
    for i, corner in enumerate(lower):
        if not np.isfinite(corner):
            errors.append(f"lower[{i}] must be finite, got {corner}")
    for i, count in enumerate(resolution):
        if int(count) != count or count < MIN_RESOLUTION:
            errors.append(
                f"resolution[{i}] must be an integer ≥ {MIN_RESOLUTION}, got {count}"
            )
    return errors


def validate_square_matrix(matrix: Any, n: int) -> List[str]:
    """
    Validate that a matrix is a finite n×n real array.

    Args:
        matrix: Candidate matrix
        n: Expected size

    Returns:
        List of error messages (empty if valid)
    """
    try:
        array = np.asarray(matrix, dtype=float)
    except (ValueError, TypeError):
        return [f"Matrix must be numeric, got {matrix!r}"]
    if array.shape != (n, n):
        return [f"Matrix must have shape ({n}, {n}), got {array.shape}"]
    if not np.all(np.isfinite(array)):
        return ["Matrix entries must be finite"]
    return []


def validate_traceless(matrix: Any, n: int, tolerance: float = 1e-12) -> List[str]:
    """Validate an n×n matrix with zero trace."""
    errors = validate_square_matrix(matrix, n)
    if errors:
        return errors
    trace = float(np.trace(np.asarray(matrix, dtype=float)))
    if abs(trace) > tolerance:
        errors.append(f"Matrix must be traceless, trace = {trace:.3e}")
    return errors


def validate_unimodular(matrix: Any, n: int, tolerance: float = 1e-10) -> List[str]:
    """Validate an n×n matrix with determinant one."""
    errors = validate_square_matrix(matrix, n)
    if errors:
        return errors
    det = float(np.linalg.det(np.asarray(matrix, dtype=float)))
    if abs(det - 1.0) > tolerance:
        errors.append(f"Matrix must have determinant 1, det = {det:.12f}")
    return errors


def raise_if_errors(errors: List[str], context: str) -> None:
    """
    Raise ValidationError listing every message, if any.

    Args:
        errors: Messages collected by the validators
        context: What was being validated
    """
    if errors:
        raise ValidationError(f"Invalid {context}: " + "; ".join(errors))


def validate_positive(values: Dict[str, Any]) -> List[str]:
    """Validate that every named value is a positive finite number."""
    return _validate_positive_numeric_fields(values, list(values))


def validate_support_ball(
    center: Sequence[float],
    radius: float,
    lower: Sequence[float],
    lengths: Sequence[float],
    periodic: bool,
) -> List[str]:
    """
    Validate that ball(center, radius) lies inside the domain interior.

    On a torus the ball must not wrap onto itself.

    Returns:
        List of error messages (empty if valid)
    """
    if len(center) != len(lengths):
        return [f"Point must have {len(lengths)} coordinates, got {len(center)}"]
    if periodic:
        if radius >= min(lengths) / 2:
            return [f"Support radius {radius:g} wraps around the torus"]
        return []
    errors = []
    for axis, (c, lo, length) in enumerate(zip(center, lower, lengths)):
        if not (lo < c - radius and c + radius < lo + length):
            errors.append(
                f"Support ball of radius {radius:g} leaves the domain along axis {axis}"
            )
    return errors
