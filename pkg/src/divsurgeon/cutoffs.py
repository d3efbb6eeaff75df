"""Smooth cutoffs, unit-mass windows and the cube-chain partition of unity.

All profiles are built from s(t) = exp(−1/t): the smoothstep
S(t) = s(t) / (s(t) + s(1 − t)) is 0 for t ≤ 0, 1 for t ≥ 1 and C^∞.
"""

from dataclasses import dataclass
from functools import lru_cache
from typing import TYPE_CHECKING, Optional

import numpy as np

from divsurgeon.config import get_settings
from divsurgeon.errors import GeometryError, OverlapError, UnderResolvedError
from divsurgeon.grid.calculus import integrate_values
from divsurgeon.grid.domain import Domain, ScalarField
from divsurgeon.grid.regions import Region
from divsurgeon.logger import logger

if TYPE_CHECKING:
    from divsurgeon.divsolve.chain import Cube, CubeChain

# Plateau of a cube's partition bump: transitions take this share of the core
PLATEAU_TRANSITION = 0.25

DEFAULT_WINDOW_CELLS = 1024


def _s(t: np.ndarray) -> np.ndarray:
    positive = t > 0
    safe = np.where(positive, t, 1.0)
    return np.where(positive, np.exp(-1.0 / safe), 0.0)


def smoothstep(t: np.ndarray | float) -> np.ndarray:
    """C^∞ step: 0 on (−∞, 0], 1 on [1, ∞), monotone in between."""
    t = np.asarray(t, dtype=float)
    a = _s(t)
    b = _s(1.0 - t)
    return a / (a + b)


def bump(u: np.ndarray | float) -> np.ndarray:
    """Classic bump exp(−1/(1 − u²)) on (−1, 1), zero elsewhere."""
    u = np.asarray(u, dtype=float)
    inside = np.abs(u) < 1
    safe = np.where(inside, u, 0.0)
    return np.where(inside, np.exp(-1.0 / (1.0 - safe**2)), 0.0)


@dataclass(frozen=True)
class SmoothCutoff:
    """
    Plateau profile: 0 on (−∞, a], rises to 1 on [b, c], falls to 0 on [d, ∞).

    a = b = −∞ drops the rising edge; c = d = +∞ drops the falling edge.
    """

    a: float
    b: float
    c: float = np.inf
    d: float = np.inf

    def __post_init__(self) -> None:
        if not (self.a <= self.b <= self.c <= self.d):
            raise GeometryError(
                f"Cutoff breakpoints must be ordered, got {self.a}, {self.b}, "
                f"{self.c}, {self.d}"
            )
        if np.isfinite(self.a) and self.a == self.b:
            raise GeometryError("Rising edge of a cutoff must have positive width")
        if np.isfinite(self.d) and self.c == self.d:
            raise GeometryError("Falling edge of a cutoff must have positive width")

    def __call__(self, x: np.ndarray | float) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if np.isfinite(self.a):
            rise = np.where(
                x <= self.a,
                0.0,
                np.where(
                    x >= self.b, 1.0, smoothstep((x - self.a) / (self.b - self.a))
                ),
            )
        else:
            rise = np.ones_like(x)
        if np.isfinite(self.d):
            fall = np.where(
                x >= self.d,
                0.0,
                np.where(
                    x <= self.c, 1.0, smoothstep((self.d - x) / (self.d - self.c))
                ),
            )
        else:
            fall = np.ones_like(x)
        return rise * fall


STEP = SmoothCutoff(0.0, 1.0)


@dataclass(frozen=True)
class UnitMassWindow:
    """
    A C^∞ bump supported in (ρ/8, 7ρ/8) with unit integral over (0, ρ).

    The normalization is the trapezoid sum at the working resolution, so the
    discrete integral on that grid is 1 up to roundoff.
    """

    rho: float
    cells: int
    scale: float

    @property
    def spacing(self) -> float:
        return self.rho / self.cells

    def __call__(self, x: np.ndarray | float) -> np.ndarray:
        u = (np.asarray(x, dtype=float) - self.rho / 2) / (3 * self.rho / 8)
        return bump(u) / self.scale

    def samples(self) -> np.ndarray:
        """Window values at the cells + 1 working-grid nodes of [0, ρ]."""
        return self(np.arange(self.cells + 1) * self.spacing)

    def class_samples(self) -> np.ndarray:
        """
        Node values rescaled so the even nodes and the odd nodes each sum to 1.

        This is the discrete window the centered stencil needs. For a resolved
        bump the two sums agree to roundoff, so the rescaling keeps it smooth.
        """
        values = self.samples()
        sums = np.array([values[0::2].sum(), values[1::2].sum()])
        if np.any(sums <= 0):
            raise UnderResolvedError(
                f"Window on (0, {self.rho:g}) misses a node parity at {self.cells} cells"
            )
        return values / sums[np.arange(self.cells + 1) % 2]


def unit_mass_window(rho: float, cells: Optional[int] = None) -> UnitMassWindow:
    """
    Build the unit-mass window on (0, ρ).

    Args:
        rho: Interval length
        cells: Working resolution of [0, ρ] (default 1024 cells)

    Returns:
        UnitMassWindow whose trapezoid integral at that resolution is 1
    """
    if rho <= 0:
        raise GeometryError(f"Window length must be positive, got {rho}")
    cells = cells or DEFAULT_WINDOW_CELLS
    return _unit_mass_window(float(rho), int(cells))


@lru_cache(maxsize=256)
def _unit_mass_window(rho: float, cells: int) -> UnitMassWindow:
    dx = rho / cells
    raw = bump((np.arange(cells + 1) * dx - rho / 2) / (3 * rho / 8))
    mass = float(np.trapezoid(raw, dx=dx))
    if mass <= 0:
        raise UnderResolvedError(
            f"Window on (0, {rho:g}) has no interior nodes at {cells} cells"
        )
    return UnitMassWindow(rho, cells, mass)


def band_cutoff(
    domain: Domain,
    inner: Region,
    outer: Region,
    profile: SmoothCutoff = STEP,
) -> ScalarField:
    """
    Cutoff equal to 1 on inner and 0 outside outer.

    Uses the coordinate t = b / (b − a) built from the depths a (inner) and
    b (outer), which is 1 on ∂inner and 0 on ∂outer. Cached per argument set
    so every field pasted across the same regions reuses one cutoff.

    Args:
        domain: Grid to sample on
        inner: Plateau region
        outer: Support region (must contain inner)
        profile: Profile applied to t

    Returns:
        ScalarField with values in [0, 1]

    Raises:
        GeometryError: inner is not inside outer
        UnderResolvedError: the transition shell is under 4 grid spacings
    """
    return _band_cutoff(domain, inner, outer, profile)


@lru_cache(maxsize=64)
def _band_cutoff(
    domain: Domain, inner: Region, outer: Region, profile: SmoothCutoff
) -> ScalarField:
    a = inner.node_depth(domain)
    b = outer.node_depth(domain)
    finite = np.isfinite(a) & np.isfinite(b)
    if np.any(a[finite] > b[finite] + 1e-12):
        raise GeometryError("Cutoff plateau region is not inside its support region")

    min_gap = get_settings().min_gap_cells * domain.max_spacing
    gaps = (b - a)[finite]
    gap = float(np.min(gaps)) if gaps.size else np.inf
    if gap < min_gap:
        required = int(
            np.ceil(get_settings().min_gap_cells * max(domain.lengths) / max(gap, 1e-300))
        )
        raise UnderResolvedError(
            f"Cutoff transition shell of width {gap:.4g} is below "
            f"{get_settings().min_gap_cells} grid spacings",
            required_resolution=required,
        )

    return ScalarField(domain, _from_depths(a, b, profile))


def _from_depths(a: np.ndarray, b: np.ndarray, profile: SmoothCutoff) -> np.ndarray:
    finite = np.isfinite(a) & np.isfinite(b)
    transition = finite & (a < 0) & (b > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(transition, b / np.where(transition, b - a, 1.0), 0.0)
    values = np.where(
        a >= 0,
        1.0,
        np.where(b <= 0, 0.0, np.where(transition, profile(t), 0.0)),
    )
    return np.clip(values, 0.0, 1.0)


def cutoff_at(
    domain: Domain,
    inner: Region,
    outer: Region,
    points: np.ndarray,
    profile: SmoothCutoff = STEP,
) -> np.ndarray:
    """The band cutoff of (inner, outer) evaluated at arbitrary points."""
    points = np.asarray(points, dtype=float)
    return _from_depths(
        inner.depth(domain, points), outer.depth(domain, points), profile
    )


def cube_plateau(cube: "Cube", domain: Domain, margin_fraction: float) -> np.ndarray:
    """
    Partition bump φ of one cube on its local node patch.

    φ is a product of plateau profiles over the open core (the cube minus
    its margin), so it vanishes at every node within the margin.
    """
    low, high = cube.core_offsets(margin_fraction)
    core = high - low
    edge = PLATEAU_TRANSITION * core
    profile = SmoothCutoff(low, low + edge, high - edge, high)
    line = profile(np.arange(cube.cells + 1, dtype=float))
    patch = line
    for _ in range(domain.n - 1):
        patch = np.multiply.outer(patch, line)
    return patch


def link_window(
    previous: "Cube", current: "Cube", domain: Domain, margin_fraction: float
) -> ScalarField:
    """
    Unit-integral product bump inside the overlap of two consecutive cores.

    Raises:
        OverlapError: the core overlap is thinner than the configured cells
    """
    min_cells = get_settings().min_overlap_cells
    lows, highs = previous.overlap_core(current, domain, margin_fraction)
    extents = [hi - lo for lo, hi in zip(lows, highs)]
    if min(extents) < min_cells:
        raise OverlapError(
            f"Core overlap of cubes {previous.lower_index} and {current.lower_index} "
            f"is {min(extents)} cells, need ≥ {min_cells}"
        )

    values = np.zeros(domain.shape)
    lines = []
    indices = []
    for axis, (lo, hi) in enumerate(zip(lows, highs)):
        offsets = np.arange(int(np.ceil(lo)), int(np.floor(hi)) + 1)
        mid = (lo + hi) / 2
        lines.append(bump((offsets - mid) / ((hi - lo) / 2)))
        indices.append(_wrap_indices(offsets, domain, axis))
    patch = lines[0]
    for line in lines[1:]:
        patch = np.multiply.outer(patch, line)
    values[np.ix_(*indices)] = patch
    mass = integrate_values(values, domain).value
    return ScalarField(domain, values / mass)


def _wrap_indices(offsets: np.ndarray, domain: Domain, axis: int) -> np.ndarray:
    if domain.periodic:
        return np.mod(offsets, domain.shape[axis])
    return offsets


def partition_sum(chain: "CubeChain") -> np.ndarray:
    """Σ φ_j over all cubes of a chain, on the full grid."""
    domain = chain.domain
    total = np.zeros(domain.shape)
    for cube in chain.cubes:
        total[np.ix_(*cube.index_arrays(domain))] += cube_plateau(
            cube, domain, chain.margin_fraction
        )
    return total


def chain_partition(
    chain: "CubeChain",
) -> tuple[list[ScalarField], list[ScalarField]]:
    """
    Partition of unity ψ_j over the cubes and transfer windows η_k.

    ψ_j = φ_j / Σφ is supported in the core of cube j and sums to 1 wherever
    any core bump is positive (in particular on every node of closure(Ω₁)).
    η_k lives in the core overlap of cubes k − 1 and k with unit integral.

    Args:
        chain: A validated cube chain

    Returns:
        (psi, eta) with len(psi) = N + 1 and len(eta) = N
    """
    domain = chain.domain
    total = partition_sum(chain)
    psi = []
    for cube in chain.cubes:
        values = np.zeros(domain.shape)
        index = np.ix_(*cube.index_arrays(domain))
        local = cube_plateau(cube, domain, chain.margin_fraction)
        denominator = total[index]
        values[index] = np.where(
            denominator > 0, local / np.where(denominator > 0, denominator, 1.0), 0.0
        )
        psi.append(ScalarField(domain, values))

    eta = [
        link_window(chain.cubes[k - 1], chain.cubes[k], domain, chain.margin_fraction)
        for k in range(1, len(chain.cubes))
    ]
    logger.debug(f"🧩 Partition built: {len(psi)} bumps, {len(eta)} transfer windows")
    return psi, eta
