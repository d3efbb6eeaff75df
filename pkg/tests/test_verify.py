"""Tests for the numerical spot-checks of the linear estimates."""

import numpy as np
import pytest

from divsurgeon.divsolve.chain import fit_chain
from divsurgeon.divsolve.samples import interior_bump
from divsurgeon.errors import UnsupportedOrderError
from divsurgeon.grid.domain import ScalarField
from divsurgeon.grid.regions import Annulus, Ball
from divsurgeon.norms import MAX_ORDER, cr_norm, operator_norm
from divsurgeon.validators import ValidationError
from divsurgeon.verify.estimates import (
    check_inverse_closeness,
    check_inverse_composition_bound,
    constant_chain,
    random_near_identity,
    random_pair,
    run_inverse_closeness_checks,
    run_inverse_composition_checks,
)
from divsurgeon.volmaps.diffeo import DiffeoGrid


class TestInverseComposition:
    """Tests for the composition bound ‖A⁻¹D − Id‖ < (c + 1)^(n−1)·δ."""

    def test_identity_pair(self) -> None:
        assert check_inverse_composition_bound(np.eye(2), np.eye(2), 0.1, 1.0)

    def test_shear_pair(self) -> None:
        A = np.array([[1.0, 0.05], [0.0, 1.0]])
        assert check_inverse_composition_bound(A, np.eye(2), 0.1, 1.0)

    def test_rejects_non_unimodular(self) -> None:
        with pytest.raises(ValidationError, match="determinant 1"):
            check_inverse_composition_bound(2 * np.eye(2), np.eye(2), 0.5, 2.0)

    def test_rejects_far_pair(self) -> None:
        with pytest.raises(ValidationError, match="not below"):
            check_inverse_composition_bound(
                np.array([[1.0, 0.5], [0.0, 1.0]]), np.eye(2), 0.1, 1.0
            )

    def test_rejects_large_delta(self) -> None:
        with pytest.raises(ValidationError, match="δ must lie"):
            check_inverse_composition_bound(np.eye(2), np.eye(2), 1.5, 1.0)

    @pytest.mark.parametrize("n, c", [(2, 2.0), (3, 4.0)])
    def test_random_pair_hypotheses(self, rng, n, c) -> None:
        A, D, delta = random_pair(n, c, rng)
        assert np.linalg.det(A) == pytest.approx(1.0)
        assert operator_norm(D) <= c
        assert operator_norm(A - D) < delta

    @pytest.mark.parametrize("n", [2, 3])
    def test_sweep(self, n) -> None:
        stats = run_inverse_composition_checks(count=25, seed=7, n=n)
        assert stats.checked == 75
        assert stats.violations == 0
        assert 0 < stats.worst_ratio < 1


class TestInverseCloseness:
    """Tests for check_inverse_closeness and its sweep."""

    def test_random_map(self, box64, rng) -> None:
        phi = random_near_identity(box64, rng, 0.05)
        assert cr_norm(phi.displacement(), 1).value == pytest.approx(0.05)
        result = check_inverse_closeness(phi, 0.06)
        assert result.holds
        assert result.forward < result.delta

    def test_map_not_close_enough(self, box64, rng) -> None:
        phi = random_near_identity(box64, rng, 0.05)
        with pytest.raises(ValidationError, match="not below"):
            check_inverse_closeness(phi, 0.01)

    def test_delta_too_large(self, box64) -> None:
        with pytest.raises(ValidationError, match="δ must lie"):
            check_inverse_closeness(DiffeoGrid.identity(box64), 0.75)

    def test_sweep(self, box64) -> None:
        stats = run_inverse_closeness_checks(box64, count=3, seed=2)
        assert stats.checked == 3
        assert stats.violations == 0


class TestConstantChain:
    """Tests for constant_chain function."""

    @pytest.fixture
    def chain(self, box128):
        inner = Annulus((0.0, 0.0), 0.5, 0.7)
        outer = Annulus((0.0, 0.0), 0.4, 0.8)
        return fit_chain(inner, outer, 0.32, box128)

    def test_keys_and_positivity(self, chain, box128) -> None:
        xi = ScalarField(box128, interior_bump(box128, Ball((0.0, 0.0), 0.9)))
        constants = constant_chain(chain, xi, 1, samples=1, seed=1)
        assert constants["constants.N"] == float(chain.N)
        for key in ("C1", "C2", "C3", "bound", "measured"):
            assert constants[f"constants.{key}"] > 0

    def test_order_too_high(self, chain, box128) -> None:
        with pytest.raises(UnsupportedOrderError):
            constant_chain(chain, ScalarField.zeros(box128), MAX_ORDER)
