"""Tests for global smoothing and regular extension."""

import numpy as np
import pytest

from divsurgeon.constructors import solenoidal_bump, vertical_field
from divsurgeon.divsolve.samples import random_solenoidal
from divsurgeon.errors import GeometryError, UnderResolvedError
from divsurgeon.grid.calculus import rotated_gradient
from divsurgeon.grid.domain import Domain, ScalarField, VectorField
from divsurgeon.grid.regions import Ball, Band, Complement, whole
from divsurgeon.norms import cr_norm
from divsurgeon.pasting.regions import derive_regions
from divsurgeon.pasting.smoothing import extend_regular, smooth_global, smoothing_residual

K_BAND = Band(1, 0.5, 0.2)


def _grid_noise(domain: Domain, amplitude: float, seed: int) -> VectorField:
    """Curl of a white-noise stream function: solenoidal, rough at the grid scale."""
    noise = np.random.default_rng(seed).normal(size=domain.shape)
    return rotated_gradient(ScalarField(domain, amplitude * noise))


@pytest.fixture
def band_regions(torus128):
    return derive_regions(K_BAND, whole(), torus128)


class TestSmoothGlobal:
    """Tests for smooth_global function."""

    def test_constant_field_is_unchanged(self, torus128) -> None:
        X = VectorField.constant(torus128, [0.3, -1.0])
        Z = smooth_global(X, 4 / 128)
        np.testing.assert_allclose(Z.data, X.data, atol=1e-12)
        assert smoothing_residual(X, Z) < 1e-10

    def test_stays_divergence_free(self, torus128, rng) -> None:
        X = random_solenoidal(torus128, Ball((0.5, 0.5), 0.4), rng)
        Z = smooth_global(X, 4 / 128)
        assert smoothing_residual(X, Z) <= 1e-3
        assert cr_norm(Z - X, 0).value < 0.2 * X.sup()

    def test_converges_as_the_width_shrinks(self, torus128, rng) -> None:
        X = random_solenoidal(torus128, Ball((0.5, 0.5), 0.4), rng)
        distances = [
            cr_norm(smooth_global(X, cells / 128) - X, 0).value for cells in (16, 8, 4, 2)
        ]
        assert all(fine < coarse for coarse, fine in zip(distances, distances[1:]))

    def test_box_rejected(self, box64) -> None:
        with pytest.raises(GeometryError, match="planar tori"):
            smooth_global(VectorField.zeros(box64), 0.1)

    def test_three_dimensional_torus_rejected(self) -> None:
        torus = Domain.torus([1.0, 1.0, 1.0], 16)
        with pytest.raises(GeometryError, match="planar tori"):
            smooth_global(VectorField.zeros(torus), 0.2)

    def test_width_below_two_cells(self, torus128) -> None:
        with pytest.raises(UnderResolvedError):
            smooth_global(VectorField.zeros(torus128), 1 / 128)


class TestExtendRegular:
    """Tests for extend_regular function."""

    def test_extension_bound(self, torus128, band_regions) -> None:
        X = vertical_field(torus128, 1.0) + solenoidal_bump(torus128, 0.01, 0.1, (0.5, 0.15))
        Y = vertical_field(torus128, 1.05)
        report = extend_regular(X, Y, band_regions)
        extras = report.extras
        difference = cr_norm(Y - X, 1, band_regions.U).value
        assert extras["extend.constant"] >= 1.0
        assert 1 <= extras["extend.rounds"] <= 3
        assert extras["extend.bound"] == pytest.approx((extras["extend.constant"] - 0.5) * difference)
        assert extras["extend.bound_holds"] == 1.0
        assert extras["extend.distance"] <= extras["extend.bound"] * (1 + 1e-9) + 1e-14
        assert extras["extend.delta"] >= 0.0
        assert report.checks["plateau_exact"]
        assert {"extend.smoothness_z", "extend.smoothness_x"} <= set(report.as_mapping())

    @pytest.mark.parametrize("seed", [1, 2, 3, 4, 5])
    def test_bound_on_random_instances(self, torus128, band_regions, seed) -> None:
        X = vertical_field(torus128, 1.0) + solenoidal_bump(torus128, 0.01, 0.1, (0.5, 0.15))
        bump = random_solenoidal(torus128, Ball((0.5, 0.5), 0.3), np.random.default_rng(seed))
        Y = X + bump * (0.05 / bump.sup())
        report = extend_regular(X, Y, band_regions)
        assert report.extras["extend.reached"] == 1.0
        assert report.extras["extend.bound_holds"] == 1.0
        assert report.checks["plateau_exact"]
        assert report.checks["exterior_exact"]

    def test_exterior_is_smoother_than_the_input(self, torus128, band_regions) -> None:
        X = vertical_field(torus128, 1.0) + _grid_noise(torus128, 1e-8, 9)
        Y = vertical_field(torus128, 1.05)
        report = extend_regular(X, Y, band_regions, width=8 / 128)
        extras = report.extras
        assert extras["extend.smoothness_smoothed"] < 0.1 * extras["extend.smoothness_x"]

        exterior = Complement(band_regions.w1)
        assert report.coincidence.exterior_nodes > 0
        rough = cr_norm(X, 2, exterior).per_order[2]
        assert cr_norm(report.Z, 2, exterior).per_order[2] < 0.1 * rough

    def test_nothing_to_paste(self, torus128, band_regions) -> None:
        X = vertical_field(torus128, 1.0) + solenoidal_bump(torus128, 0.01, 0.1, (0.5, 0.15))
        report = extend_regular(X, X, band_regions)
        np.testing.assert_array_equal(report.Z.data, X.data)
        assert report.extras["extend.constant"] == 1.0
        assert report.extras["extend.distance"] == 0.0
        assert report.extras["extend.bound_holds"] == 1.0

    def test_fixed_width(self, torus128, band_regions) -> None:
        X = vertical_field(torus128, 1.0)
        report = extend_regular(X, vertical_field(torus128, 1.05), band_regions, width=4 / 128)
        assert report.extras["extend.reached"] == 1.0
        assert report.extras["extend.delta"] < 1e-12
