"""Tests for input validators."""

import numpy as np
import pytest

from divsurgeon.validators import (
    MIN_RESOLUTION,
    ValidationError,
    raise_if_errors,
    validate_domain,
    validate_positive,
    validate_square_matrix,
    validate_support_ball,
    validate_traceless,
    validate_unimodular,
)


class TestValidateDomain:
    """Tests for validate_domain function."""

    def test_valid_domain(self) -> None:
        assert validate_domain("torus", [0.0, 0.0], [1.0, 1.0], [64, 64]) == []

    def test_unknown_kind(self) -> None:
        errors = validate_domain("sphere", [0.0], [1.0], [64])
        assert any("box" in e for e in errors)

    def test_dimension_too_large(self) -> None:
        errors = validate_domain("box", [0.0] * 4, [1.0] * 4, [16] * 4)
        assert any("Dimension" in e for e in errors)

    def test_mismatched_lengths(self) -> None:
        errors = validate_domain("box", [0.0], [1.0, 1.0], [64, 64])
        assert any("entries" in e for e in errors)

    def test_non_positive_length(self) -> None:
        errors = validate_domain("box", [0.0, 0.0], [1.0, -2.0], [64, 64])
        assert any("lengths[1] must be positive" in e for e in errors)

    def test_coarse_resolution(self) -> None:
        errors = validate_domain("box", [0.0, 0.0], [1.0, 1.0], [64, MIN_RESOLUTION - 1])
        assert any("resolution[1]" in e for e in errors)

    def test_infinite_corner(self) -> None:
        errors = validate_domain("box", [np.inf, 0.0], [1.0, 1.0], [64, 64])
        assert any("lower[0] must be finite" in e for e in errors)


class TestMatrixValidators:
    """Tests for the matrix validators."""

    def test_square(self) -> None:
        assert validate_square_matrix(np.eye(3), 3) == []

    def test_wrong_shape(self) -> None:
        errors = validate_square_matrix(np.eye(2), 3)
        assert "shape (3, 3)" in errors[0]

    def test_non_numeric(self) -> None:
        assert "numeric" in validate_square_matrix([["a", "b"], ["c", "d"]], 2)[0]

    def test_non_finite(self) -> None:
        assert validate_square_matrix([[np.nan, 0.0], [0.0, 1.0]], 2) == [
            "Matrix entries must be finite"
        ]

    def test_traceless(self) -> None:
        assert validate_traceless([[1.0, 2.0], [3.0, -1.0]], 2) == []
        assert "traceless" in validate_traceless(np.eye(2), 2)[0]

    def test_unimodular(self) -> None:
        assert validate_unimodular([[2.0, 0.0], [0.0, 0.5]], 2) == []
        assert "determinant 1" in validate_unimodular(np.eye(2) * 2, 2)[0]


class TestValidatePositive:
    """Tests for validate_positive function."""

    def test_positive(self) -> None:
        assert validate_positive({"radius": 0.2, "eps": 1e-3}) == []

    @pytest.mark.parametrize("value", [0.0, -1.0, np.inf])
    def test_rejected(self, value) -> None:
        assert validate_positive({"radius": value}) == [
            f"radius must be positive, got {float(value)}"
        ]

    def test_non_numeric(self) -> None:
        assert "must be numeric" in validate_positive({"radius": "wide"})[0]

    def test_none_is_skipped(self) -> None:
        assert validate_positive({"radius": None}) == []


class TestValidateSupportBall:
    """Tests for validate_support_ball function."""

    def test_inside_box(self) -> None:
        assert validate_support_ball((0.0, 0.0), 0.5, (-1.0, -1.0), (2.0, 2.0), False) == []

    def test_leaves_box(self) -> None:
        errors = validate_support_ball((0.8, 0.0), 0.5, (-1.0, -1.0), (2.0, 2.0), False)
        assert errors == ["Support ball of radius 0.5 leaves the domain along axis 0"]

    def test_wraps_torus(self) -> None:
        errors = validate_support_ball((0.5, 0.5), 0.5, (0.0, 0.0), (1.0, 1.0), True)
        assert "wraps around the torus" in errors[0]

    def test_wrong_dimension(self) -> None:
        errors = validate_support_ball((0.0,), 0.1, (0.0, 0.0), (1.0, 1.0), True)
        assert "2 coordinates" in errors[0]


class TestRaiseIfErrors:
    """Tests for raise_if_errors function."""

    def test_no_errors(self) -> None:
        raise_if_errors([], "nothing")

    def test_joins_messages(self) -> None:
        with pytest.raises(ValidationError, match="Invalid scenario: a; b"):
            raise_if_errors(["a", "b"], "scenario")
