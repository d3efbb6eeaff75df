"""Tests for sampled maps: construction, Jacobians, composition and inversion."""

import numpy as np
import pytest

from divsurgeon.constructors import linear_map, rotation_map
from divsurgeon.errors import GeometryError, InvalidFieldError, RangeError
from divsurgeon.grid.regions import Ball
from divsurgeon.validators import ValidationError
from divsurgeon.volmaps.diffeo import (
    DiffeoGrid,
    compose,
    escape_distance,
    SEPARATION_FLOOR,
    injectivity_margin,
    invert,
    jacobian_det,
    solve_preimages,
)


class TestDiffeoGrid:
    """Tests for DiffeoGrid construction."""

    def test_identity(self, box64) -> None:
        phi = DiffeoGrid.identity(box64)
        assert phi.is_identity()
        assert phi.displacement().sup() == 0.0

    def test_torus_rejected(self, torus64) -> None:
        with pytest.raises(GeometryError, match="box domains"):
            DiffeoGrid(torus64, np.zeros((2, *torus64.shape)))

    def test_wrong_shape(self, box64) -> None:
        with pytest.raises(InvalidFieldError, match="expected"):
            DiffeoGrid(box64, np.zeros((2, 4, 4)))

    def test_non_finite(self, box64) -> None:
        images = np.moveaxis(box64.points(), -1, 0).copy()
        images[0, 1, 1] = np.inf
        with pytest.raises(InvalidFieldError, match="finite"):
            DiffeoGrid(box64, images)

    def test_from_function_matches_linear(self, box64) -> None:
        matrix = np.array([[1.0, 0.5], [0.0, 1.0]])
        a = DiffeoGrid.from_function(box64, lambda p: p @ matrix.T)
        b = DiffeoGrid.linear(box64, matrix)
        np.testing.assert_allclose(a.images, b.images, atol=1e-15)

    def test_call_interpolates_linear_maps(self, box64) -> None:
        phi = rotation_map(box64, 0.3)
        point = np.array([0.123, -0.456])
        c, s = np.cos(0.3), np.sin(0.3)
        np.testing.assert_allclose(phi(point), [c * 0.123 + s * 0.456, s * 0.123 - c * 0.456])

    def test_linear_map_must_be_unimodular(self, box64) -> None:
        with pytest.raises(ValidationError):
            linear_map(box64, np.diag([2.0, 2.0]))


class TestJacobianDet:
    """Tests for jacobian_det function."""

    def test_shear_preserves_volume(self, box64) -> None:
        phi = linear_map(box64, np.array([[1.0, 0.7], [0.0, 1.0]]))
        np.testing.assert_allclose(jacobian_det(phi).values, 1.0, atol=1e-12)

    def test_scaling(self, box64) -> None:
        phi = DiffeoGrid.linear(box64, np.diag([2.0, 3.0]))
        np.testing.assert_allclose(jacobian_det(phi).values, 6.0, atol=1e-12)


class TestCompose:
    """Tests for compose function."""

    def test_rotation_after_contraction(self, box64) -> None:
        half = DiffeoGrid.linear(box64, 0.5 * np.eye(2))
        rotated = compose(rotation_map(box64, 0.3), half)
        c, s = np.cos(0.3), np.sin(0.3)
        expected = DiffeoGrid.linear(box64, 0.5 * np.array([[c, -s], [s, c]]))
        np.testing.assert_allclose(rotated.images, expected.images, atol=1e-12)

    def test_identity_outer_map(self, box64) -> None:
        psi = DiffeoGrid.linear(box64, 0.5 * np.eye(2))
        assert compose(DiffeoGrid.identity(box64), psi) is psi

    def test_image_leaves_grid(self, box64) -> None:
        rotation = rotation_map(box64, 0.3)
        with pytest.raises(RangeError) as excinfo:
            compose(rotation, rotation)
        assert excinfo.value.escape > 0

    def test_escape_distance(self, box64) -> None:
        assert escape_distance(box64, np.array([[0.0, 0.0]])) == 0.0
        assert escape_distance(box64, np.array([[1.5, 0.0]])) == pytest.approx(0.5)


class TestInvert:
    """Tests for invert and solve_preimages functions."""

    def test_rotation_inverse(self, box64) -> None:
        inverse = invert(rotation_map(box64, 0.3))
        expected = rotation_map(box64, -0.3)
        np.testing.assert_allclose(inverse.images, expected.images, atol=1e-9)

    def test_identity_nodes_come_back_exactly(self, box64) -> None:
        phi = DiffeoGrid.identity(box64)
        assert invert(phi).is_identity()

    def test_preimages_with_threads(self, box64) -> None:
        shear = linear_map(box64, np.array([[1.0, 0.2], [0.0, 1.0]]))
        targets = np.array([[0.1, 0.2], [-0.3, 0.4], [0.5, -0.5]])
        preimages, residuals = solve_preimages(shear, targets, threads=2)
        np.testing.assert_allclose(shear(preimages), targets, atol=1e-9)
        assert np.all(residuals <= 1e-9)


class TestInjectivityMargin:
    """Tests for injectivity_margin function."""

    def test_identity(self, box64) -> None:
        margin = injectivity_margin(DiffeoGrid.identity(box64), pairs=500, seed=1)
        assert margin.certified
        assert margin.margin == pytest.approx(0.25)
        assert margin.worst_ratio == pytest.approx(1.0)

    def test_strong_shear_not_certified(self, box64) -> None:
        shear = linear_map(box64, np.array([[1.0, 0.5], [0.0, 1.0]]))
        assert not injectivity_margin(shear, Ball((0.0, 0.0), 0.5)).certified

    def test_certified_map_keeps_the_separation_floor(self, box64) -> None:
        shear = linear_map(box64, np.array([[1.0, 0.2], [0.0, 1.0]]))
        margin = injectivity_margin(shear, Ball((0.0, 0.0), 0.5), pairs=10_000, seed=2)
        assert margin.certified
        assert margin.separated
        assert margin.worst_ratio >= SEPARATION_FLOOR
        assert margin.pairs > 9_000

    def test_collapsing_map_breaks_the_separation_floor(self, box64) -> None:
        squash = DiffeoGrid.linear(box64, np.diag([0.1, 1.0]))
        margin = injectivity_margin(squash, pairs=2_000, seed=3)
        assert not margin.certified
        assert margin.worst_ratio < SEPARATION_FLOOR
        assert not margin.separated

    def test_empty_region(self, box64) -> None:
        with pytest.raises(GeometryError):
            injectivity_margin(DiffeoGrid.identity(box64), Ball((0.01, 0.01), 1e-3))
