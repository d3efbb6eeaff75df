"""Nested shells between a compact set K and its neighbourhood U.

For a supported (K, U) pair the shells are laid out across the gap g between
K and the complement of U:

    K ⊂ W₀ = K + g/8 ⊂ {ξ = 1} ⊂ {ξ > 0} ⊂ W₁ = U − g/8 ⊂ U

with the ξ transition a shell of width f·g centred in the gap (f is
settings.transition_fraction). Ω = int W₁ ∖ W₀ and Ω₁ is the transition
shell padded by two grid spacings.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from divsurgeon.config import get_settings
from divsurgeon.errors import GeometryError, UnderResolvedError
from divsurgeon.grid.calculus import label_components
from divsurgeon.grid.domain import Domain
from divsurgeon.grid.regions import (
    Annulus,
    Ball,
    Band,
    Complement,
    Region,
    UnionOf,
    is_whole,
    regions_equal_center,
    shell,
    whole,
)
from divsurgeon.logger import logger
from divsurgeon.pasting.flux import Circle, Hypersurface, Slice, Sphere

ANNULUS_CONNECTED = "annulus-connected"
BAND_CONNECTED = "band-connected"
DISCONNECTED = "disconnected"


class Connectivity(NamedTuple):
    """Flood-fill certificate for U ∖ K on grid nodes."""

    kind: str
    components: int
    node_counts: tuple[int, ...]


class ShellComponent(NamedTuple):
    """
    One connected piece of Ω with its two boundary hypersurfaces.

    Each boundary carries the sign that turns its flux into outward flux
    from the component, so ∫ div w = Σ sign·flux(w, γ).
    """

    region: Region
    boundaries: tuple[tuple[Hypersurface, int], ...]


@dataclass(frozen=True, eq=False)
class PasteRegions:
    """K, U and every shell derived from them on one grid."""

    domain: Domain
    K: Region
    U: Region
    w0: Region
    w1: Region
    xi_inner: Region
    xi_outer: Region
    omega: Region
    omega1: Region
    components: tuple[ShellComponent, ...]
    certificate: Connectivity
    layout: str
    gap: float

    @property
    def connected(self) -> bool:
        return self.certificate.kind != DISCONNECTED

    def chain_side(self) -> float:
        """Default cube side for the chain across Ω."""
        if isinstance(self.omega, Annulus):
            return 0.8 * (self.omega.outer - max(self.omega.inner, 0.0))
        if isinstance(self.omega, Band):
            return 0.45 * self.omega.width
        raise GeometryError(f"No cube chain for Ω = {self.omega.describe()}")

    def describe(self) -> str:
        return "\n".join([
            f"layout={self.layout} gap={self.gap:.6g} "
            f"certificate={self.certificate.kind}",
            f"K={self.K.describe()}",
            f"U={self.U.describe()}",
            f"W0={self.w0.describe()}",
            f"W1={self.w1.describe()}",
            f"omega={self.omega.describe()}",
            f"omega1={self.omega1.describe()}",
        ])


def _sphere(center: tuple[float, ...], radius: float, n: int) -> Hypersurface:
    if n == 2:
        return Circle(center, radius)
    if n == 3:
        return Sphere(center, radius)
    raise GeometryError(f"Round shells need dimension 2 or 3, got {n}")


def certify(K: Region, U: Region, domain: Domain) -> Connectivity:
    """Label U ∖ K on grid nodes (periodic wrap on tori) and classify it."""
    mask = U.mask(domain) & ~K.closure_mask(domain)
    labels, count = label_components(mask, domain)
    counts = tuple(int(np.count_nonzero(labels == c)) for c in range(1, count + 1))
    if count == 1:
        kind = BAND_CONNECTED if domain.periodic and is_whole(U) else ANNULUS_CONNECTED
    else:
        kind = DISCONNECTED
    return Connectivity(kind, count, counts)


def _check_gap(gap: float, domain: Domain) -> None:
    cells = get_settings().min_gap_cells
    h = domain.max_spacing
    if gap <= 0:
        raise GeometryError(f"K is not inside U (gap {gap:.4g})")
    if gap / 8 < cells * h * (1 - 1e-9):
        required = int(np.ceil(8 * cells * max(domain.lengths) / gap))
        raise UnderResolvedError(
            f"Shell gaps of {gap / 8:.4g} are below {cells} grid spacings",
            required_resolution=required,
        )


def derive_regions(K: Region, U: Region, domain: Domain) -> PasteRegions:
    """
    Derive the shells W₀ ⊂ W₁, the cutoff regions, Ω and Ω₁ for (K, U).

    Supported pairs:
        - concentric balls K ⊂ U (round shell)
        - any K with U the complement of a ball (shell around the hole)
        - a torus band K with U the whole torus (complementary band)
        - a torus band K inside a wider band U on the same axis (U ∖ K is
          disconnected: regions support the obstruction check only)

    Raises:
        GeometryError: unsupported or non-nested pair
        UnderResolvedError: shells thinner than the configured grid spacings
    """
    f = get_settings().transition_fraction
    h = domain.max_spacing
    n = domain.n

    if isinstance(K, Ball) and isinstance(U, Ball):
        if not regions_equal_center(K.center, U.center):
            raise GeometryError("Ball shells need concentric K and U")
        gap = U.radius - K.radius
        _check_gap(gap, domain)
        c, r = K.center, K.radius
        regions = dict(
            w0=K.grown(gap / 8),
            w1=U.grown(-gap / 8),
            xi_inner=K.grown(gap * (1 - f) / 2),
            xi_outer=K.grown(gap * (1 + f) / 2),
            omega=Annulus(c, r + gap / 8, r + 7 * gap / 8),
            omega1=Annulus(c, r + gap * (1 - f) / 2 - 2 * h, r + gap * (1 + f) / 2 + 2 * h),
            components=(
                ShellComponent(
                    Annulus(c, r + gap / 8, r + 7 * gap / 8),
                    (
                        (_sphere(c, r + gap / 8, n), -1),
                        (_sphere(c, r + 7 * gap / 8, n), 1),
                    ),
                ),
            ),
            layout="ball-shell",
        )

    elif isinstance(U, Complement) and isinstance(U.region, Ball):
        hole = U.region
        distance = -float(K.depth(domain, np.asarray(hole.center)))
        gap = distance - hole.radius
        _check_gap(gap, domain)
        c, r = hole.center, hole.radius

        def ring(radius: float) -> Region:
            return Complement(Ball(c, radius))

        regions = dict(
            w0=ring(r + 7 * gap / 8),
            w1=ring(r + gap / 8),
            xi_inner=ring(r + gap * (1 + f) / 2),
            xi_outer=ring(r + gap * (1 - f) / 2),
            omega=Annulus(c, r + gap / 8, r + 7 * gap / 8),
            omega1=Annulus(c, r + gap * (1 - f) / 2 - 2 * h, r + gap * (1 + f) / 2 + 2 * h),
            components=(
                ShellComponent(
                    Annulus(c, r + gap / 8, r + 7 * gap / 8),
                    (
                        (_sphere(c, r + gap / 8, n), -1),
                        (_sphere(c, r + 7 * gap / 8, n), 1),
                    ),
                ),
            ),
            layout="hole-shell",
        )

    elif isinstance(K, Band) and domain.periodic and (
        is_whole(U) or (isinstance(U, Band) and U.axis == K.axis)
    ):
        length = domain.lengths[K.axis]
        if is_whole(U):
            gap = (length - K.width) / 2
        else:
            if abs(((U.center - K.center) + length / 2) % length - length / 2) > 1e-12:
                raise GeometryError("Band shells need K and U centred together")
            gap = (U.width - K.width) / 2
        _check_gap(gap, domain)
        w0 = K.grown(gap / 8)
        half = K.width / 2
        strips = UnionOf((
            Band(K.axis, K.center + half + gap / 2, gap * f + 4 * h),
            Band(K.axis, K.center - half - gap / 2, gap * f + 4 * h),
        ))
        low_edge = K.center - half - gap / 8
        high_edge = K.center + half + gap / 8
        if is_whole(U):
            omega = w0.complement_band(domain)
            components = (
                ShellComponent(
                    omega,
                    ((Slice(K.axis, high_edge), -1), (Slice(K.axis, low_edge), 1)),
                ),
            )
            layout = "band-shell"
            w1 = whole()
        else:
            w1 = U.grown(-gap / 8)
            omega = shell(w0, w1)
            width = gap * 3 / 4
            far = K.center + half + 7 * gap / 8
            components = (
                ShellComponent(
                    Band(K.axis, high_edge + width / 2, width),
                    ((Slice(K.axis, high_edge), -1), (Slice(K.axis, far), 1)),
                ),
                ShellComponent(
                    Band(K.axis, low_edge - width / 2, width),
                    (
                        (Slice(K.axis, K.center - half - 7 * gap / 8), -1),
                        (Slice(K.axis, low_edge), 1),
                    ),
                ),
            )
            layout = "band-split"
        regions = dict(
            w0=w0,
            w1=w1,
            xi_inner=K.grown(gap * (1 - f) / 2),
            xi_outer=K.grown(gap * (1 + f) / 2),
            omega=omega,
            omega1=strips,
            components=components,
            layout=layout,
        )

    else:
        raise GeometryError(
            f"Unsupported paste geometry K={K.describe()}, U={U.describe()}"
        )

    certificate = certify(K, U, domain)
    if regions["layout"] == "band-split" and certificate.kind != DISCONNECTED:
        raise GeometryError("Split band shells must leave U ∖ K disconnected")
    logger.debug(
        f"🧭 Paste regions: {regions['layout']}, gap {gap:.4g}, "
        f"U∖K has {certificate.components} component(s)"
    )
    return PasteRegions(
        domain=domain,
        K=K,
        U=U,
        certificate=certificate,
        gap=gap,
        **regions,
    )
