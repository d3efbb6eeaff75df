"""Tests for Jacobian targets, the Moser flow and the transport check."""

import numpy as np
import pytest

from divsurgeon.errors import GeometryError
from divsurgeon.grid.calculus import Interpolant, integrate
from divsurgeon.grid.domain import Domain, ScalarField
from divsurgeon.grid.regions import Annulus, Box
from divsurgeon.validators import ValidationError
from divsurgeon.volmaps.moser import (
    DEFAULT_SHELL,
    _rk4,
    JacobianTarget,
    measure_transport,
    prescribed_jacobian,
    radial_bump_target,
)


@pytest.fixture(scope="module")
def moser_report():
    domain = Domain.box([-1.0, -1.0], [2.0, 2.0], 256)
    target = radial_bump_target(domain, 0.1)
    return target, prescribed_jacobian(target)


class TestRadialBumpTarget:
    """Tests for radial_bump_target function."""

    def test_amplitude_and_mass(self, box128) -> None:
        target = radial_bump_target(box128, 0.1)
        deviation = target.theta.values - 1.0
        assert float(np.max(np.abs(deviation))) == pytest.approx(0.1)
        assert abs(integrate(ScalarField(box128, deviation)).value) < 1e-10
        assert target.shell.inner == DEFAULT_SHELL[0]
        assert not target.trivial

    def test_zero_amplitude_is_trivial(self, box128) -> None:
        assert radial_bump_target(box128, 0.0).trivial

    @pytest.mark.parametrize("amplitude", [-0.1, 1.0])
    def test_amplitude_range(self, box128, amplitude) -> None:
        with pytest.raises(GeometryError):
            radial_bump_target(box128, amplitude)

    def test_shell_outside_collar(self, box128) -> None:
        with pytest.raises(ValidationError, match="strictly"):
            radial_bump_target(box128, 0.1, Annulus((0.0, 0.0), 0.2, 0.5))


class TestJacobianTarget:
    """Tests for JacobianTarget validation."""

    def test_nonzero_mass(self, box128) -> None:
        shell = Annulus((0.0, 0.0), *DEFAULT_SHELL)
        theta = np.where(shell.closure_mask(box128), 1.05, 1.0)
        with pytest.raises(ValidationError, match="not zero"):
            JacobianTarget(ScalarField(box128, theta), shell)

    def test_torus_rejected(self, torus64) -> None:
        shell = Annulus((0.5, 0.5), *DEFAULT_SHELL)
        with pytest.raises(ValidationError, match="box domains"):
            JacobianTarget(ScalarField.constant(torus64, 1.0), shell)


class TestPrescribedJacobian:
    """Tests for prescribed_jacobian function."""

    def test_trivial_target(self, box128) -> None:
        report = prescribed_jacobian(radial_bump_target(box128, 0.0))
        assert report.phi.is_identity()
        assert report.steps == 0
        assert report.passed

    def test_radial_bump(self, moser_report) -> None:
        _, report = moser_report
        assert report.checks == {"jacobian": True, "collar_exact": True}
        assert report.cubes >= 4
        assert report.as_mapping()["check.jacobian"] == 1.0

    def test_transport(self, moser_report) -> None:
        target, report = moser_report
        boxes = [
            Box((0.45, -0.05), (0.55, 0.05)),
            Box((-0.1, -0.1), (0.1, 0.1)),
        ]
        table = measure_transport(report.phi, target.theta, boxes, log2_samples=12)
        assert table.columns == ["box", "image_volume", "predicted", "error"]
        for row in table.iter_rows(named=True):
            assert row["error"] <= 0.05 * row["predicted"]


class TestRK4:
    """Tests for the fixed-step Moser integrator."""

    def test_fourth_order_in_the_step(self, box128) -> None:
        # u = rotation generator, θ ≡ 2: y(1) = R(ln 2)·y(0)
        points = box128.points()
        generator = np.array([[0.0, -1.0], [1.0, 0.0]])
        values = np.concatenate(
            [points @ generator.T, np.full((*box128.shape, 1), 2.0)], axis=-1
        )
        reader = Interpolant(box128, values)
        start = np.array([[0.3, 0.0], [0.0, -0.2], [0.15, 0.25]])
        angle = np.log(2.0)
        c, s = np.cos(angle), np.sin(angle)
        exact = start @ np.array([[c, -s], [s, c]]).T
        errors = [
            float(np.max(np.abs(_rk4(reader, box128, start, steps) - exact)))
            for steps in (2, 4, 8)
        ]
        assert errors[2] < errors[1] < errors[0]
        for coarse, fine in zip(errors, errors[1:]):
            assert np.log2(coarse / fine) >= 3.0
