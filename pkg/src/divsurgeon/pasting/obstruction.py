"""Flux obstruction to conservative pasting."""

from typing import NamedTuple

import numpy as np

from divsurgeon.config import get_settings
from divsurgeon.cutoffs import band_cutoff
from divsurgeon.grid.calculus import divergence, integrate_values
from divsurgeon.grid.domain import ScalarField, VectorField
from divsurgeon.logger import logger
from divsurgeon.pasting.flux import flux
from divsurgeon.pasting.regions import PasteRegions


class BoundaryFlux(NamedTuple):
    surface: str
    sign: int
    flux: float


class ComponentFlux(NamedTuple):
    """Mismatch on one component of Ω: quadrature of div w and boundary fluxes."""

    region: str
    mismatch: float  # ∫ div w over the component
    boundary_mismatch: float  # Σ sign·flux(w, γ)
    boundaries: tuple[BoundaryFlux, ...]


class ObstructionRecord(NamedTuple):
    mismatch: float  # max |m| over components
    tolerance: float
    components: tuple[ComponentFlux, ...]

    @property
    def obstructed(self) -> bool:
        return self.mismatch > self.tolerance

    def as_mapping(self) -> dict[str, float]:
        entries = {
            "obstruction.mismatch": self.mismatch,
            "obstruction.tolerance": self.tolerance,
            "obstruction.obstructed": float(self.obstructed),
        }
        for c, component in enumerate(self.components):
            entries[f"obstruction.component{c}.m"] = component.mismatch
            entries[f"obstruction.component{c}.boundary_m"] = component.boundary_mismatch
            for b, boundary in enumerate(component.boundaries):
                entries[f"obstruction.component{c}.flux{b}"] = boundary.flux
        return entries


def cutoff(regions: PasteRegions) -> ScalarField:
    """The blending cutoff ξ: 1 on xi_inner, 0 outside xi_outer."""
    return band_cutoff(regions.domain, regions.xi_inner, regions.xi_outer)


def blend(xi: ScalarField, X: VectorField, Y: VectorField) -> VectorField:
    """w = ξY + (1 − ξ)X, taking Y and X verbatim where ξ is 1 or 0."""
    s = xi.values
    data = np.where(
        s == 1.0, Y.data, np.where(s == 0.0, X.data, X.data + s * (Y.data - X.data))
    )
    return VectorField(X.domain, data)


def blend_difference(xi: ScalarField, X: VectorField, Y: VectorField) -> VectorField:
    """ξ·(Y − X), exactly 0 where ξ is 0 (Y is ignored outside U there)."""
    s = xi.values
    return VectorField(
        X.domain, np.where(s == 0.0, 0.0, s * (Y.data - X.data))
    )


def check_obstruction(
    X: VectorField, Y: VectorField, regions: PasteRegions
) -> ObstructionRecord:
    """
    Measure the flux mismatch that blocks a divergence-free extension.

    m = ∫ div(ξ(Y − X)) on each component of Ω, which equals ∫ div w when X is
    divergence-free. By the divergence theorem it is the flux of w out of the
    component: Y's flux through the W₀ side against X's through the W₁ side.

    Returns:
        ObstructionRecord; obstructed when some |m| exceeds the tolerance
    """
    settings = get_settings()
    xi = cutoff(regions)
    source = divergence(blend_difference(xi, X, Y))
    w = blend(xi, X, Y)

    components = []
    for component in regions.components:
        mask = component.region.mask(regions.domain)
        m = integrate_values(source.values, regions.domain, mask).value
        boundaries = tuple(
            BoundaryFlux(surface.describe(), sign, flux(w, surface))
            for surface, sign in component.boundaries
        )
        components.append(
            ComponentFlux(
                component.region.describe(),
                m,
                sum(b.sign * b.flux for b in boundaries),
                boundaries,
            )
        )

    mismatch = max(abs(c.mismatch) for c in components)
    record = ObstructionRecord(
        mismatch, settings.obstruction_tolerance, tuple(components)
    )
    if record.obstructed:
        logger.warning(
            f"🚧 Flux obstruction: |m| = {mismatch:.6e} on "
            f"{len(components)} component(s)"
        )
    else:
        logger.info(f"🟢 No flux obstruction (|m| = {mismatch:.3e})")
    return record
