"""Tests for finite-difference C^r norms and Hölder seminorms."""

import numpy as np
import pytest

from divsurgeon.errors import GeometryError, UnsupportedOrderError
from divsurgeon.grid.domain import ScalarField, VectorField
from divsurgeon.grid.regions import Ball
from divsurgeon.norms import c1_distance, cr_norm, holder_seminorm, operator_norm
from divsurgeon.verify.estimates import check_norm_sandwich


def _wave(domain, k=1):
    return ScalarField.from_function(domain, lambda x, y: np.sin(2 * np.pi * k * x))


class TestCrNorm:
    """Tests for cr_norm function."""

    def test_orders_of_a_sine(self, torus128) -> None:
        report = cr_norm(_wave(torus128), 2)
        order0, order1, order2 = report.per_order
        assert order0 == pytest.approx(1.0, rel=1e-3)
        assert order1 == pytest.approx(2 * np.pi, rel=1e-2)
        assert order2 == pytest.approx(4 * np.pi**2, rel=2e-2)
        assert report.value == max(report.per_order)

    def test_constant_field(self, torus64) -> None:
        report = cr_norm(VectorField.constant(torus64, [3.0, -4.0]), 1)
        assert report.per_order == (4.0, 0.0)
        assert report.whitney == pytest.approx(5.0)

    def test_region_restricts(self, box64) -> None:
        field = ScalarField.from_function(box64, lambda x, y: x)
        assert cr_norm(field, 0, Ball((0.0, 0.0), 0.5)).value == pytest.approx(0.5)
        assert cr_norm(field, 0).value == pytest.approx(1.0)

    def test_empty_region(self, box64) -> None:
        with pytest.raises(GeometryError, match="no grid nodes"):
            cr_norm(ScalarField.zeros(box64), 0, Ball((0.01, 0.01), 1e-3))

    @pytest.mark.parametrize("r", [-1, 4])
    def test_unsupported_order(self, torus64, r) -> None:
        with pytest.raises(UnsupportedOrderError):
            cr_norm(ScalarField.zeros(torus64), r)

    def test_mapping_keys(self, torus64) -> None:
        entries = cr_norm(_wave(torus64), 1, alpha=0.5).as_mapping(prefix="norm.X")
        assert {"norm.X.r", "norm.X.value", "norm.X.order0", "norm.X.order1"} <= set(entries)
        assert "norm.X.holder" in entries

    def test_c1_distance(self, torus64) -> None:
        a = _wave(torus64)
        assert c1_distance(a, a) == 0.0

    def test_sandwich(self, torus64, rng) -> None:
        data = rng.normal(size=(2, *torus64.shape))
        report = cr_norm(VectorField(torus64, data), 2)
        assert check_norm_sandwich(report, 2)


class TestHolder:
    """Tests for holder_seminorm function."""

    def test_lipschitz_bound(self, torus64) -> None:
        estimate = holder_seminorm(_wave(torus64), 0, 1.0)
        assert estimate.value <= 2 * np.pi * (1 + 1e-9)
        assert estimate.value == pytest.approx(2 * np.pi, rel=0.01)

    def test_exhaustive_when_small(self, torus64) -> None:
        estimate = holder_seminorm(_wave(torus64), 0, 0.5, region=Ball((0.5, 0.5), 0.1))
        assert estimate.exhaustive

    def test_sampled_when_large(self, torus64) -> None:
        estimate = holder_seminorm(_wave(torus64), 0, 0.5, pair_budget=5000)
        assert not estimate.exhaustive
        assert estimate.pairs == 5000

    def test_bad_exponent(self, torus64) -> None:
        with pytest.raises(GeometryError):
            holder_seminorm(_wave(torus64), 0, 1.5)


class TestOperatorNorm:
    """Tests for operator_norm function."""

    def test_diagonal(self) -> None:
        assert operator_norm(np.diag([2.0, -3.0])) == pytest.approx(3.0)

    def test_rotation(self) -> None:
        c, s = np.cos(0.3), np.sin(0.3)
        assert operator_norm(np.array([[c, -s], [s, c]])) == pytest.approx(1.0)

    def test_non_finite(self) -> None:
        with pytest.raises(GeometryError):
            operator_norm(np.array([[np.inf]]))
