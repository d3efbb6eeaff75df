"""Tests for the scenario field and map factories."""

import numpy as np
import pytest

from divsurgeon.constructors import (
    build_field,
    build_map,
    build_target,
    constant_field,
    linear_field,
    noise_perturbed,
    radial_source,
    rotation_field,
    solenoidal_bump,
    vertical_field,
)
from divsurgeon.errors import GeometryError, ScenarioError
from divsurgeon.grid.calculus import divergence
from divsurgeon.grid.domain import Domain
from divsurgeon.pasting.flux import Circle, flux
from divsurgeon.storage.field_store import write_field
from divsurgeon.validators import ValidationError

ROTATION = np.array([[0.0, -1.0], [1.0, 0.0]])


class TestSimpleFields:
    """Tests for constant, vertical, linear and rotation fields."""

    def test_constant(self, torus64) -> None:
        field = constant_field(torus64, [0.5, -2.0])
        assert np.all(field.data[0] == 0.5)
        assert np.all(field.data[1] == -2.0)

    def test_constant_wrong_length(self, torus64) -> None:
        with pytest.raises(GeometryError, match="2 components"):
            constant_field(torus64, [1.0, 2.0, 3.0])

    def test_vertical_uses_last_axis(self, torus64) -> None:
        field = vertical_field(torus64, 1.05)
        assert np.all(field.data[0] == 0.0)
        assert np.all(field.data[1] == 1.05)

    def test_linear_is_divergence_free(self, box64) -> None:
        field = linear_field(box64, ROTATION, (0.0, 0.0))
        assert divergence(field).sup() < 1e-10

    def test_linear_rejects_trace(self, box64) -> None:
        with pytest.raises(ValidationError, match="traceless"):
            linear_field(box64, np.eye(2))

    def test_rotation_at_a_point(self, box64) -> None:
        field = rotation_field(box64, 2.0, (0.0, 0.0))
        index = box64.nearest_node((0.5, 0.0))
        assert field.data[0][index] == pytest.approx(0.0, abs=1e-12)
        assert field.data[1][index] == pytest.approx(1.0)

    def test_rotation_needs_box(self, torus64) -> None:
        with pytest.raises(GeometryError, match="box domains"):
            rotation_field(torus64)


class TestSolenoidalFields:
    """Tests for solenoidal_bump, noise_perturbed and radial_source."""

    def test_bump_is_divergence_free(self, box128) -> None:
        field = solenoidal_bump(box128, 0.01, 0.3, (0.0, 0.0))
        assert field.sup() > 0
        assert divergence(field).sup() < 1e-10

    def test_bump_support(self, box128) -> None:
        field = solenoidal_bump(box128, 0.01, 0.3, (0.0, 0.0))
        far = np.linalg.norm(box128.points(), axis=-1) > 0.35
        assert np.all(field.magnitude()[far] == 0.0)

    def test_bump_radius_must_be_positive(self, box64) -> None:
        with pytest.raises(ValidationError, match="radius must be positive"):
            solenoidal_bump(box64, 0.01, 0.0)

    def test_bump_in_three_dimensions(self) -> None:
        domain = Domain.torus([1.0, 1.0, 1.0], 16)
        field = solenoidal_bump(domain, 0.01, 0.3)
        assert divergence(field).sup() < 1e-10

    def test_noise_changes_the_bump(self, box64, rng) -> None:
        base = solenoidal_bump(box64, 0.01, 0.4, (0.0, 0.0))
        noisy = noise_perturbed(box64, 0.01, 0.4, 0.001, rng, (0.0, 0.0))
        assert (noisy - base).sup() == pytest.approx(0.001)
        assert divergence(noisy).sup() < 1e-8

    def test_radial_source_flux(self, box256) -> None:
        field = radial_source(box256, 0.05, 0.2, (0.0, 0.0))
        measured = flux(field, Circle((0.0, 0.0), 0.3))
        assert measured == pytest.approx(0.05 * 2 * np.pi * 0.2, rel=0.02)

    def test_radial_source_is_tapered(self, box64) -> None:
        field = radial_source(box64, 0.05, 0.2, (0.0, 0.0))
        near = np.linalg.norm(box64.points(), axis=-1) < 0.05
        assert np.all(field.magnitude()[near] == 0.0)


class TestBuildField:
    """Tests for build_field function."""

    def test_flat_matrix(self, box64, rng) -> None:
        nested = build_field(box64, "linear", {"matrix": ROTATION.tolist()}, rng)
        flat = build_field(box64, "linear", {"matrix": [0, -1, 1, 0]}, rng)
        assert np.array_equal(nested.data, flat.data)

    def test_unknown_tag(self, box64, rng) -> None:
        with pytest.raises(ScenarioError, match="Unknown field tag"):
            build_field(box64, "spiral", {}, rng)

    def test_missing_parameter(self, box64, rng) -> None:
        with pytest.raises(ScenarioError, match="needs parameter 'amplitude'"):
            build_field(box64, "solenoidal-bump", {"radius": 0.2}, rng)

    def test_file_relative_to_base_dir(self, box64, rng, tmp_path) -> None:
        stored = vertical_field(box64, 2.0)
        write_field(tmp_path / "X.dvsf", stored)
        loaded = build_field(box64, "file", {"path": "X.dvsf"}, rng, tmp_path)
        assert np.array_equal(loaded.data, stored.data)

    def test_file_on_other_domain(self, box64, box128, rng, tmp_path) -> None:
        write_field(tmp_path / "X.dvsf", vertical_field(box128))
        with pytest.raises(ScenarioError, match="expected"):
            build_field(box64, "file", {"path": str(tmp_path / "X.dvsf")}, rng)


class TestBuildMap:
    """Tests for build_map and build_target functions."""

    def test_rotation(self, box64) -> None:
        phi = build_map(box64, "rotation", {"angle": 0.3})
        image = phi(np.array([0.5, 0.0]))
        assert np.allclose(image, [0.5 * np.cos(0.3), 0.5 * np.sin(0.3)])

    def test_linear_needs_unit_determinant(self, box64) -> None:
        with pytest.raises(ValidationError, match="determinant 1"):
            build_map(box64, "linear", {"matrix": [2, 0, 0, 1]})

    def test_shear(self, box64) -> None:
        phi = build_map(box64, "linear", {"matrix": [[1, 0.5], [0, 1]]})
        assert np.allclose(phi(np.array([0.0, 0.5])), [0.25, 0.5])

    def test_file_must_hold_a_map(self, box64, tmp_path) -> None:
        write_field(tmp_path / "X.dvsf", vertical_field(box64))
        with pytest.raises(ScenarioError, match="not a map"):
            build_map(box64, "file", {"path": "X.dvsf"}, tmp_path)

    def test_unknown_tag(self, box64) -> None:
        with pytest.raises(ScenarioError, match="Unknown map tag"):
            build_map(box64, "twist", {})

    def test_target_amplitude(self, box128) -> None:
        target = build_target(box128, {"amplitude": 0.05})
        assert float(np.max(np.abs(target.theta.values - 1.0))) == pytest.approx(0.05)
