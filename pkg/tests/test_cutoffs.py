"""Tests for smooth profiles, windows and band cutoffs."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from divsurgeon.cutoffs import (
    SmoothCutoff,
    band_cutoff,
    bump,
    chain_partition,
    cutoff_at,
    smoothstep,
    unit_mass_window,
)
from divsurgeon.divsolve.chain import fit_chain
from divsurgeon.errors import GeometryError, UnderResolvedError
from divsurgeon.grid.calculus import integrate
from divsurgeon.grid.regions import Annulus, Ball, Band


class TestProfiles:
    """Tests for smoothstep, bump and SmoothCutoff."""

    def test_smoothstep_ends(self) -> None:
        np.testing.assert_array_equal(smoothstep([-1.0, 0.0, 1.0, 2.0]), [0.0, 0.0, 1.0, 1.0])
        assert smoothstep(0.5) == pytest.approx(0.5)

    @given(st.floats(min_value=-2, max_value=2), st.floats(min_value=-2, max_value=2))
    def test_smoothstep_monotone(self, s, t) -> None:
        low, high = sorted((s, t))
        assert smoothstep(low) <= smoothstep(high)

    @given(st.floats(min_value=0.0, max_value=1.0))
    def test_smoothstep_symmetry(self, t) -> None:
        assert smoothstep(t) + smoothstep(1 - t) == pytest.approx(1.0)

    def test_bump_support(self) -> None:
        assert bump(0.0) == pytest.approx(np.exp(-1.0))
        np.testing.assert_array_equal(bump([-1.0, 1.0, 1.5]), [0.0, 0.0, 0.0])

    def test_plateau_profile(self) -> None:
        profile = SmoothCutoff(0.0, 1.0, 2.0, 3.0)
        np.testing.assert_array_equal(profile([-0.5, 1.0, 1.5, 2.0, 3.0]), [0, 1, 1, 1, 0])

    @pytest.mark.parametrize("breaks", [(1.0, 0.0), (0.0, 0.0), (0.0, 1.0, 2.0, 2.0)])
    def test_invalid_breakpoints(self, breaks) -> None:
        with pytest.raises(GeometryError):
            SmoothCutoff(*breaks)


class TestUnitMassWindow:
    """Tests for unit_mass_window function."""

    @pytest.mark.parametrize("rho", [0.05, 0.3, 1.0])
    def test_unit_trapezoid_mass(self, rho) -> None:
        window = unit_mass_window(rho)
        assert np.trapezoid(window.samples(), dx=window.spacing) == pytest.approx(1.0)

    def test_support(self) -> None:
        window = unit_mass_window(1.0)
        np.testing.assert_array_equal(window([0.0, 0.1, 0.9, 1.0]), [0.0, 0.0, 0.0, 0.0])
        assert window(0.5) > 0

    def test_class_samples_sum_to_one_per_parity(self) -> None:
        values = unit_mass_window(0.3, 40).class_samples()
        assert values[0::2].sum() == pytest.approx(1.0)
        assert values[1::2].sum() == pytest.approx(1.0)

    def test_rejects_non_positive(self) -> None:
        with pytest.raises(GeometryError):
            unit_mass_window(0.0)


class TestBandCutoff:
    """Tests for band_cutoff and cutoff_at."""

    def test_plateau_and_exterior_exact(self, box128) -> None:
        inner, outer = Ball((0.0, 0.0), 0.3), Ball((0.0, 0.0), 0.6)
        xi = band_cutoff(box128, inner, outer)
        assert np.all(xi.values[inner.closure_mask(box128)] == 1.0)
        assert np.all(xi.values[~outer.mask(box128)] == 0.0)
        assert 0.0 <= xi.values.min() and xi.values.max() <= 1.0

    def test_torus_band(self, torus128) -> None:
        xi = band_cutoff(torus128, Band(1, 0.5, 0.2), Band(1, 0.5, 0.4))
        assert xi.values[0, 64] == 1.0
        assert xi.values[0, 0] == 0.0

    def test_not_nested(self, box128) -> None:
        with pytest.raises(GeometryError, match="not inside"):
            band_cutoff(box128, Ball((0.0, 0.0), 0.6), Ball((0.0, 0.0), 0.3))

    def test_under_resolved(self, box128) -> None:
        with pytest.raises(UnderResolvedError):
            band_cutoff(box128, Ball((0.0, 0.0), 0.3), Ball((0.0, 0.0), 0.32))

    def test_cutoff_at_matches_nodes(self, box128) -> None:
        inner, outer = Ball((0.0, 0.0), 0.3), Ball((0.0, 0.0), 0.6)
        xi = band_cutoff(box128, inner, outer)
        points = box128.points()[::8, ::8]
        np.testing.assert_allclose(
            cutoff_at(box128, inner, outer, points), xi.values[::8, ::8], atol=1e-15
        )


class TestChainPartition:
    """Tests for chain_partition function."""

    @pytest.fixture
    def chain(self, box128):
        return fit_chain(Annulus((0.0, 0.0), 0.5, 0.7), Annulus((0.0, 0.0), 0.4, 0.8), 0.32, box128)

    def test_bumps_sum_to_one_on_omega1(self, chain, box128) -> None:
        psi, _ = chain_partition(chain)
        total = sum(piece.values for piece in psi)
        np.testing.assert_allclose(total[chain.omega1.closure_mask(box128)], 1.0, atol=1e-12)

    def test_windows_live_in_core_overlaps(self, chain, box128) -> None:
        _, eta = chain_partition(chain)
        for k, window in enumerate(eta, start=1):
            lows, highs = chain.cubes[k - 1].overlap_core(
                chain.cubes[k], box128, chain.margin_fraction
            )
            inside = np.ones(box128.shape, dtype=bool)
            for axis, (lo, hi) in enumerate(zip(lows, highs)):
                index = np.arange(box128.shape[axis])
                view = [1] * box128.n
                view[axis] = -1
                inside &= ((index > lo) & (index < hi)).reshape(view)
            assert not np.any(window.values[~inside])
            assert integrate(window).value == pytest.approx(1.0, rel=1e-12)
