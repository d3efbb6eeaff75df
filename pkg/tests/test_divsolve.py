"""Tests for the single-cube solver, cube chains and the divergence inverse."""

import numpy as np
import pytest

from divsurgeon.cutoffs import bump
from divsurgeon.divsolve.chain import build_chain, fit_chain
from divsurgeon.divsolve.cube import centered_antiderivative, solve_cube_array, solve_div_cube
from divsurgeon.divsolve.decompose import (
    admissible_datum,
    class_balanced,
    decompose_chain,
    node_classes,
)
from divsurgeon.divsolve.operator import DivergenceInverse, div_inverse, measure_stability
from divsurgeon.divsolve.samples import interior_bump, random_admissible, random_solenoidal
from divsurgeon.errors import (
    GeometryError,
    InvalidFieldError,
    MarginError,
    MeanViolationError,
)
from divsurgeon.grid.calculus import class_totals, divergence, integrate
from divsurgeon.grid.domain import Domain, ScalarField
from divsurgeon.grid.regions import Annulus, Ball, Band

OMEGA = Annulus((0.0, 0.0), 0.4, 0.8)
OMEGA1 = Annulus((0.0, 0.0), 0.5, 0.7)


@pytest.fixture
def unit_cube() -> Domain:
    return Domain.box([0.0, 0.0], [1.0, 1.0], 128)


@pytest.fixture
def annulus_chain(box128):
    return fit_chain(OMEGA1, OMEGA, 0.32, box128)


def _product_data(domain: Domain) -> ScalarField:
    """A bump in x times two opposite bumps in y, mirrored about y = ½ so every sum vanishes."""
    x, y = domain.mesh()
    across = bump((x - 0.5) / 0.3)
    up = bump((y - 0.35) / 0.12) - bump((y - 0.65) / 0.12)
    return ScalarField(domain, across * up)


def _relative_residual(v, h) -> float:
    return (divergence(v) - h).sup() / h.sup()


class TestCenteredAntiderivative:
    """Tests for centered_antiderivative function."""

    def test_undoes_the_centered_difference(self) -> None:
        dx = 1 / 64
        f = bump((np.arange(65) * dx - 0.5) / 0.3)
        g = np.zeros_like(f)
        g[1:-1] = (f[2:] - f[:-2]) / (2 * dx)
        np.testing.assert_allclose(centered_antiderivative(g, dx), f, atol=1e-14)

    def test_any_data_is_reproduced_inside(self, rng) -> None:
        dx = 0.1
        g = rng.normal(size=(3, 21))
        v = centered_antiderivative(g, dx)
        np.testing.assert_allclose((v[:, 2:] - v[:, :-2]) / (2 * dx), g[:, 1:-1], atol=1e-12)
        assert not np.any(v[:, 0])


class TestSolveDivCube:
    """Tests for solve_div_cube function."""

    def test_product_bump_residual(self, unit_cube) -> None:
        h = _product_data(unit_cube)
        v = solve_div_cube(h, margin=0.15)
        assert _relative_residual(v, h) <= 1e-3

    def test_vanishes_within_half_margin(self, unit_cube) -> None:
        margin = 0.15
        v = solve_div_cube(_product_data(unit_cube), margin=margin)
        points = unit_cube.points()
        distance = np.minimum(points, 1 - points).min(axis=-1)
        near = distance <= min(margin, 0.25) / 2
        assert np.all(v.data[:, near] == 0.0)

    def test_random_data_is_solved(self, unit_cube, rng) -> None:
        h = random_admissible(unit_cube, Ball((0.5, 0.5), 0.3), rng)
        v = solve_div_cube(h, margin=0.15)
        assert _relative_residual(v, h) <= 1e-3
        assert not np.any(v.data[:, 0, :])
        assert not np.any(v.data[:, :, -1])

    def test_zero_data(self, unit_cube) -> None:
        v = solve_div_cube(ScalarField.zeros(unit_cube), margin=0.1)
        assert v.sup() == 0.0

    def test_data_near_boundary(self, unit_cube) -> None:
        with pytest.raises(MarginError):
            solve_div_cube(ScalarField.constant(unit_cube, 1.0), margin=0.1)

    def test_nonzero_mean(self, unit_cube) -> None:
        weight = ScalarField(unit_cube, interior_bump(unit_cube, Ball((0.5, 0.5), 0.3)))
        with pytest.raises(MeanViolationError):
            solve_div_cube(weight, margin=0.15)

    def test_roundoff_piece_uses_the_datum_scale(self, unit_cube) -> None:
        values = 1e-20 * interior_bump(unit_cube, Ball((0.5, 0.5), 0.3))
        with pytest.raises(MeanViolationError):
            solve_cube_array(values, 1.0, 0.15)
        solution = solve_cube_array(values, 1.0, 0.15, scale=1.0)
        assert solution.shape == (2, *values.shape)
        assert np.max(np.abs(solution)) < 1e-15

    def test_torus_rejected(self, torus64) -> None:
        with pytest.raises(GeometryError, match="box domain"):
            solve_div_cube(ScalarField.zeros(torus64), margin=0.1)


class TestCubeChain:
    """Tests for build_chain and fit_chain functions."""

    def test_annulus_chain_is_valid(self, annulus_chain) -> None:
        assert annulus_chain.topology == "annulus"
        assert annulus_chain.N >= 3
        assert annulus_chain.validate() == []

    def test_quarter_side_chain_on_the_unit_box(self) -> None:
        domain = Domain.box([-1.0, -1.0], [2.0, 2.0], 512)
        chain = build_chain(Annulus((0.0, 0.0), 0.58, 0.62), OMEGA, 0.25, domain)
        assert 8 <= len(chain.cubes) <= 20
        assert chain.validate() == []

    def test_quarter_side_covers_a_wide_omega1(self, box128) -> None:
        chain = build_chain(OMEGA1, OMEGA, 0.25, box128)
        assert chain.validate() == []
        assert len(chain.cubes) <= 64

    def test_refined_keeps_the_geometry(self, annulus_chain) -> None:
        fine = annulus_chain.refined(2)
        assert fine.domain.resolution == (256, 256)
        for coarse, cube in zip(annulus_chain.cubes, fine.cubes):
            np.testing.assert_allclose(
                cube.lower(fine.domain), coarse.lower(annulus_chain.domain)
            )
            assert cube.side(fine.domain) == pytest.approx(coarse.side(annulus_chain.domain))
        assert fine.validate() == []

    def test_describe(self, annulus_chain) -> None:
        text = annulus_chain.describe(transfers=[0.5])
        assert text.startswith("chain topology=annulus")
        assert "lambda 1 = " in text

    def test_band_chain_on_torus(self, torus128) -> None:
        chain = fit_chain(Band(1, 0.5, 0.2), Band(1, 0.5, 0.6), 0.27, torus128)
        assert chain.topology == "band"
        assert chain.validate() == []

    def test_spherical_shell_refused(self) -> None:
        domain = Domain.box([-1.0, -1.0, -1.0], [2.0, 2.0, 2.0], 64)
        shell = Annulus((0.0, 0.0, 0.0), 0.4, 0.8)
        with pytest.raises(GeometryError, match="spherical shells are not supported"):
            build_chain(Annulus((0.0, 0.0, 0.0), 0.5, 0.7), shell, 0.25, domain)

    def test_nested_regions_required(self, box128) -> None:
        with pytest.raises(GeometryError):
            fit_chain(OMEGA, OMEGA1, 0.16, box128)

    def test_cube_too_large(self, box128) -> None:
        with pytest.raises(GeometryError):
            build_chain(OMEGA1, OMEGA, 0.9, box128)

    def test_unsupported_shape(self, box128) -> None:
        with pytest.raises(GeometryError):
            fit_chain(Ball((0.0, 0.0), 0.3), Ball((0.0, 0.0), 0.6), 0.2, box128)


class TestDecompose:
    """Tests for decompose_chain, class_balanced and admissible_datum."""

    def test_pieces_sum_to_data_with_zero_means(self, annulus_chain, box128, rng) -> None:
        h, _ = class_balanced(random_admissible(box128, OMEGA1, rng), OMEGA1)
        decomposition = decompose_chain(h, annulus_chain)
        np.testing.assert_allclose(decomposition.total().values, h.values, atol=1e-12)
        for piece in decomposition.pieces:
            assert abs(integrate(piece).value) < 1e-9 * h.sup()
        assert len(decomposition.transfers) == annulus_chain.N
        assert decomposition.scale == h.sup()

    def test_pieces_balance_every_parity_class(self, annulus_chain, box128, rng) -> None:
        h, _ = class_balanced(random_admissible(box128, OMEGA1, rng), OMEGA1)
        labels = node_classes(box128)
        for piece in decompose_chain(h, annulus_chain).pieces:
            np.testing.assert_allclose(class_totals(piece.values, labels), 0.0, atol=1e-10 * h.sup())

    def test_pieces_live_in_their_cubes(self, annulus_chain, box128, rng) -> None:
        h, _ = class_balanced(random_admissible(box128, OMEGA1, rng), OMEGA1)
        for cube, piece in zip(annulus_chain.cubes, decompose_chain(h, annulus_chain).pieces):
            inside = np.zeros(box128.shape, dtype=bool)
            inside[np.ix_(*cube.index_arrays(box128))] = True
            assert not np.any(piece.values[~inside])

    def test_imbalance_is_small_and_in_omega1(self, box128, rng) -> None:
        h = random_admissible(box128, OMEGA1, rng)
        balanced, imbalance = class_balanced(h, OMEGA1)
        np.testing.assert_allclose((balanced + imbalance).values, h.values, atol=1e-15)
        assert imbalance.sup() <= 1e-3 * h.sup()
        assert not np.any(imbalance.values[~OMEGA1.closure_mask(box128)])

    def test_leak_outside_omega1(self, box128) -> None:
        h = ScalarField(box128, interior_bump(box128, Ball((0.0, 0.0), 0.3)))
        with pytest.raises(InvalidFieldError, match="outside closure"):
            admissible_datum(h, OMEGA1)

    def test_mean_required(self, box128) -> None:
        h = ScalarField(box128, interior_bump(box128, OMEGA1))
        with pytest.raises(MeanViolationError):
            admissible_datum(h, OMEGA1)


class TestDivergenceInverse:
    """Tests for DivergenceInverse and div_inverse."""

    def test_residual_on_random_data(self, annulus_chain, box128, rng) -> None:
        operator = DivergenceInverse(annulus_chain)
        outside = ~OMEGA.mask(box128)
        for _ in range(10):
            h = random_admissible(box128, OMEGA1, rng)
            v = operator(h)
            assert _relative_residual(v, h) <= 1e-3
            assert np.all(v.data[:, outside] == 0.0)

    def test_residual_order_under_refinement(self, box64, box128) -> None:
        residuals = []
        for domain in (box64, box128):
            chain = fit_chain(OMEGA1, OMEGA, 0.32, domain)
            h = random_admissible(domain, OMEGA1, np.random.default_rng(7))
            residuals.append(_relative_residual(DivergenceInverse(chain)(h), h))
        coarse, fine = residuals
        assert fine <= max(coarse / 2**1.8, 1e-12)

    def test_residual_is_the_class_imbalance(self, annulus_chain, box128, rng) -> None:
        operator = DivergenceInverse(annulus_chain)
        h = random_admissible(box128, OMEGA1, rng)
        _, imbalance = operator.balance(h)
        np.testing.assert_allclose(
            (divergence(operator(h)) - h).values, -imbalance.values, atol=1e-10 * h.sup()
        )

    def test_linear(self, annulus_chain, box128, rng) -> None:
        operator = DivergenceInverse(annulus_chain)
        a = random_admissible(box128, OMEGA1, rng)
        b = random_admissible(box128, OMEGA1, rng)
        combined = operator(a * 2.0 - b)
        separate = operator(a) * 2.0 - operator(b)
        np.testing.assert_allclose(combined.data, separate.data, atol=1e-10)

    def test_threads_agree(self, annulus_chain, box128, rng) -> None:
        h = random_admissible(box128, OMEGA1, rng)
        serial = DivergenceInverse(annulus_chain, threads=1)(h)
        pooled = DivergenceInverse(annulus_chain, threads=4)(h)
        np.testing.assert_allclose(serial.data, pooled.data, atol=1e-14)

    def test_chain_for_other_regions(self, annulus_chain, box128) -> None:
        with pytest.raises(GeometryError, match="different regions"):
            div_inverse(ScalarField.zeros(box128), OMEGA, OMEGA, annulus_chain)


class TestMeasureStability:
    """Tests for measure_stability function."""

    def test_report(self, annulus_chain) -> None:
        report = measure_stability(annulus_chain, samples=3, order=1, seed=3)
        assert len(report.ratios) == 3
        assert report.cubes == len(annulus_chain.cubes)
        assert report.constant > 0
        assert report.spread >= 0

    def test_constant_is_stable_under_refinement(self, annulus_chain) -> None:
        coarse = measure_stability(annulus_chain, samples=10, order=1, seed=5)
        fine = measure_stability(annulus_chain.refined(2), samples=10, order=1, seed=5)
        assert all(ratio <= coarse.constant for ratio in coarse.ratios)
        assert fine.constant == pytest.approx(coarse.constant, rel=0.1)


class TestSamples:
    """Tests for random sample generators."""

    def test_random_admissible_is_mean_zero(self, box128, rng) -> None:
        h = random_admissible(box128, OMEGA1, rng)
        assert abs(integrate(h).value) < 1e-12 * max(1.0, h.sup())
        assert not np.any(h.values[~OMEGA1.closure_mask(box128)])

    def test_random_solenoidal(self, torus64, rng) -> None:
        v = random_solenoidal(torus64, Ball((0.5, 0.5), 0.3), rng)
        assert divergence(v).sup() < 1e-9 * max(1.0, v.sup())

    def test_empty_region(self, box64) -> None:
        with pytest.raises(GeometryError):
            interior_bump(box64, Ball((0.01, 0.01), 1e-3))
