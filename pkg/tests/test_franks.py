"""Tests for the conservative linearization of volume-preserving maps."""

import numpy as np
import pytest

from divsurgeon.constructors import rotation_map
from divsurgeon.errors import AdmissibilityError
from divsurgeon.validators import ValidationError
from divsurgeon.volmaps.diffeo import DiffeoGrid
from divsurgeon.volmaps.franks import (
    derivative_at_origin,
    franks_linearize,
    franks_sweep,
    unimodular_target,
)

HYPERBOLIC = np.diag([1.0, -1.0])


@pytest.fixture
def rotation(box256):
    return rotation_map(box256, 0.3)


class TestUnimodularTarget:
    """Tests for unimodular_target function."""

    def test_determinant_one(self) -> None:
        A = unimodular_target(np.array([[2.0, 1.0], [1.0, 1.0]]), HYPERBOLIC, 0.2)
        assert np.linalg.det(A) == pytest.approx(1.0)

    def test_zero_direction_keeps_base(self) -> None:
        base = np.array([[1.0, 0.3], [0.0, 1.0]])
        np.testing.assert_allclose(unimodular_target(base, np.zeros((2, 2)), 0.5), base)

    def test_trace_is_removed(self) -> None:
        a = unimodular_target(np.eye(2), np.eye(2) + HYPERBOLIC, 0.1)
        b = unimodular_target(np.eye(2), HYPERBOLIC, 0.1)
        np.testing.assert_allclose(a, b)

    def test_orientation_reversing_base(self) -> None:
        with pytest.raises(ValidationError, match="positive determinant"):
            unimodular_target(np.diag([1.0, -1.0]), HYPERBOLIC, 0.1)


class TestFranksLinearize:
    """Tests for franks_linearize function."""

    def test_derivative_at_origin(self, rotation) -> None:
        c, s = np.cos(0.3), np.sin(0.3)
        np.testing.assert_allclose(derivative_at_origin(rotation), [[c, -s], [s, c]], atol=1e-12)

    def test_rotation_perturbed_hyperbolically(self, rotation, fixed_chi) -> None:
        A = unimodular_target(derivative_at_origin(rotation), HYPERBOLIC, fixed_chi * 0.1 / 2)
        report = franks_linearize(rotation, A, 0.1)
        assert not report.trivial
        assert report.checks == {
            "plateau_exact": True,
            "plateau_jacobian": True,
            "exterior_exact": True,
            "volume": True,
            "c1_small": True,
            "injective": True,
            "separated": True,
        }
        assert report.moser is not None
        entries = report.as_mapping()
        assert entries["franks.lambda"] == report.lam
        assert "moser.residual" in entries

    def test_exact_derivative_is_trivial(self, rotation, fixed_chi) -> None:
        report = franks_linearize(rotation, derivative_at_origin(rotation), 0.1)
        assert report.trivial
        assert report.f_A is rotation
        assert report.passed

    def test_not_admissible(self, rotation, fixed_chi) -> None:
        A = unimodular_target(derivative_at_origin(rotation), HYPERBOLIC, 0.5)
        with pytest.raises(AdmissibilityError):
            franks_linearize(rotation, A, 0.1)

    @pytest.mark.parametrize(
        "matrix,eps0,match",
        [
            (np.diag([2.0, 2.0]), 0.1, "determinant"),
            (np.eye(2), 1.5, "at most 1"),
            (np.eye(2), 0.0, "eps0"),
        ],
    )
    def test_invalid_request(self, rotation, matrix, eps0, match) -> None:
        with pytest.raises(ValidationError, match=match):
            franks_linearize(rotation, matrix, eps0)

    def test_fixed_point_required(self, box256) -> None:
        shifted = DiffeoGrid.from_function(box256, lambda p: p + 0.1)
        with pytest.raises(ValidationError, match="f\\(0\\) must be 0"):
            franks_linearize(shifted, np.eye(2), 0.1)

    def test_volume_preservation_required(self, box256) -> None:
        stretch = DiffeoGrid.linear(box256, np.diag([2.0, 1.0]))
        with pytest.raises(ValidationError, match="not volume preserving"):
            franks_linearize(stretch, np.eye(2), 0.1)


class TestFranksSweep:
    """Tests for franks_sweep function."""

    def test_zero_direction_columns(self, rotation, fixed_chi) -> None:
        table = franks_sweep(rotation, np.zeros((2, 2)), [0.1, 0.2])
        assert table.columns == ["eps0", "delta", "lambda", "distance", "ratio", "det_deviation"]
        assert table["distance"].to_list() == [0.0, 0.0]

    def test_distance_is_linear_in_eps(self, rotation, fixed_chi) -> None:
        table = franks_sweep(rotation, HYPERBOLIC, [0.1, 0.05, 0.025])
        ratios = table["ratio"].to_list()
        assert 0 < min(ratios)
        assert max(ratios) <= 1.0
        assert max(ratios) <= 1.25 * min(ratios)
