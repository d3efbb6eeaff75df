"""Cube chains: ordered overlapping cubes covering an annulus or a torus band."""

from dataclasses import dataclass, replace
from math import ceil
from typing import Iterator, Optional, Sequence

import numpy as np

from divsurgeon.config import get_settings
from divsurgeon.cutoffs import cube_plateau, partition_sum
from divsurgeon.errors import GeometryError
from divsurgeon.grid.domain import Domain
from divsurgeon.grid.regions import Annulus, Band, Region
from divsurgeon.logger import logger, logger_timer

MIN_CUBE_CELLS = 8


@dataclass(frozen=True)
class Cube:
    """
    An axis-aligned grid cube.

    lower_index is the node index of the lower corner and is not wrapped, so
    on a torus it may be negative or exceed the resolution.
    """

    lower_index: tuple[int, ...]
    cells: int

    def index_arrays(self, domain: Domain) -> list[np.ndarray]:
        """Node indices of the cube along each axis (wrapped on a torus)."""
        arrays = []
        for axis, low in enumerate(self.lower_index):
            offsets = np.arange(low, low + self.cells + 1)
            if domain.periodic:
                offsets = np.mod(offsets, domain.shape[axis])
            arrays.append(offsets)
        return arrays

    def margin_cells(self, fraction: float) -> int:
        return max(1, ceil(self.cells * fraction - 1e-9))

    def core_offsets(self, fraction: float) -> tuple[float, float]:
        """Open core (m, cells − m) in node offsets from the lower corner."""
        m = self.margin_cells(fraction)
        return float(m), float(self.cells - m)

    def side(self, domain: Domain) -> float:
        return self.cells * domain.spacing[0]

    def lower(self, domain: Domain) -> np.ndarray:
        return np.asarray(domain.lower) + np.asarray(self.lower_index) * np.asarray(
            domain.spacing
        )

    def local_domain(self, domain: Domain) -> Domain:
        """Box domain of the cube in its own (unwrapped) coordinates."""
        return Domain.box(
            self.lower(domain).tolist(), [self.side(domain)] * domain.n, self.cells
        )

    def node_points(self, domain: Domain) -> np.ndarray:
        return self.local_domain(domain).points()

    def aligned(self, other: "Cube", domain: Domain) -> tuple[int, ...]:
        """other's lower index shifted by whole periods to sit nearest this cube."""
        if not domain.periodic:
            return other.lower_index
        shifted = []
        for axis, (mine, theirs) in enumerate(zip(self.lower_index, other.lower_index)):
            period = domain.shape[axis]
            shifted.append(theirs - period * round((theirs - mine) / period))
        return tuple(shifted)

    def overlap_core(
        self, other: "Cube", domain: Domain, fraction: float
    ) -> tuple[list[float], list[float]]:
        """Open interval of node indices shared by both cores, per axis."""
        theirs = self.aligned(other, domain)
        m_self = self.margin_cells(fraction)
        m_other = other.margin_cells(fraction)
        lows = [
            float(max(a + m_self, b + m_other))
            for a, b in zip(self.lower_index, theirs)
        ]
        highs = [
            float(min(a + self.cells - m_self, b + other.cells - m_other))
            for a, b in zip(self.lower_index, theirs)
        ]
        return lows, highs

    def core_overlap_cells(self, other: "Cube", domain: Domain, fraction: float) -> float:
        lows, highs = self.overlap_core(other, domain, fraction)
        return min(hi - lo for lo, hi in zip(lows, highs))


@dataclass(frozen=True, eq=False)
class CubeChain:
    """
    Ordered cubes U_0..U_N; consecutive cubes overlap in their cores.

    Transfer constants are not stored here: decompose_chain returns them
    alongside the pieces, so one chain serves every datum.
    """

    domain: Domain
    omega1: Region
    omega: Region
    cubes: tuple[Cube, ...]
    closed: bool
    margin_fraction: float
    topology: str

    @property
    def N(self) -> int:
        return len(self.cubes) - 1

    def refined(self, factor: int) -> "CubeChain":
        """The same cubes on a grid factor times finer (for refinement studies)."""
        domain = self.domain.with_resolution([r * factor for r in self.domain.resolution])
        cubes = tuple(
            Cube(tuple(low * factor for low in cube.lower_index), cube.cells * factor)
            for cube in self.cubes
        )
        return replace(self, domain=domain, cubes=cubes)

    def validate(self) -> list[str]:
        """
        Check the chain invariants on grid nodes.

        Returns:
            List of error messages (empty if valid)
        """
        errors = []
        settings = get_settings()
        domain = self.domain

        if self.N < 3:
            errors.append(f"Chain needs at least 4 cubes, got {len(self.cubes)}")

        omega_depth = self.omega.node_depth(domain)
        omega1_mask = self.omega1.closure_mask(domain)
        for j, cube in enumerate(self.cubes):
            if cube.side(domain) > 1 + 1e-12:
                errors.append(f"Cube {j} has side {cube.side(domain):.4g} > 1")
            if not domain.periodic and (
                min(cube.lower_index) < 0
                or any(
                    low + cube.cells >= count
                    for low, count in zip(cube.lower_index, domain.shape)
                )
            ):
                errors.append(f"Cube {j} leaves the domain")
                continue
            index = np.ix_(*cube.index_arrays(domain))
            if not np.all(omega_depth[index] > 0):
                errors.append(f"Cube {j} is not inside Ω")
            if not np.any(omega1_mask[index]):
                errors.append(f"Cube {j} does not meet Ω₁")

        for k in range(1, len(self.cubes)):
            overlap = self.cubes[k - 1].core_overlap_cells(
                self.cubes[k], domain, self.margin_fraction
            )
            if overlap < settings.min_overlap_cells:
                errors.append(
                    f"Cores of cubes {k - 1} and {k} overlap by {overlap:g} cells, "
                    f"need ≥ {settings.min_overlap_cells}"
                )

        if errors:
            return errors

        coverage = partition_sum(self)[omega1_mask]
        if coverage.size == 0:
            errors.append("Ω₁ contains no grid nodes")
        elif float(np.min(coverage)) < settings.coverage_threshold:
            errors.append(
                f"Cube cores cover closure(Ω₁) too thinly (min Σφ = "
                f"{float(np.min(coverage)):.3g})"
            )
        return errors

    def describe(self, transfers: Optional[Sequence[float]] = None) -> str:
        """Human-readable chain descriptor (cube corners, order, transfers)."""
        h = self.domain.spacing[0]
        lines = [
            f"chain topology={self.topology} cubes={len(self.cubes)} "
            f"closed={str(self.closed).lower()}",
            f"domain {self.domain.describe()}",
            f"omega {self.omega.describe()}",
            f"omega1 {self.omega1.describe()}",
        ]
        for j, cube in enumerate(self.cubes):
            corner = ", ".join(f"{v:.6f}" for v in cube.lower(self.domain))
            lines.append(
                f"cube {j} lower=({corner}) side={cube.cells * h:.6f} "
                f"index={cube.lower_index} cells={cube.cells}"
            )
        if transfers is not None:
            for k, value in enumerate(transfers, start=1):
                lines.append(f"lambda {k} = {value:.12e}")
        return "\n".join(lines)


def _isotropic_spacing(domain: Domain) -> float:
    h = domain.spacing[0]
    if any(abs(other - h) > 1e-9 * h for other in domain.spacing):
        raise GeometryError("Cube chains need equal grid spacing on every axis")
    return h


def _check_nested(omega1: Region, omega: Region, domain: Domain) -> None:
    """closure(Ω₁) ⊂ Ω, tested as depth_Ω > depth_Ω₁ at every node."""
    inner = omega1.node_depth(domain)
    outer = omega.node_depth(domain)
    if not np.any(inner >= 0):
        raise GeometryError("Ω₁ contains no grid nodes")
    finite = np.isfinite(inner) & np.isfinite(outer)
    slack = float(np.min((outer - inner)[finite])) if np.any(finite) else 0.0
    if slack <= 1e-12:
        raise GeometryError(
            f"closure(Ω₁) is not inside Ω (depth slack {slack:.3g})"
        )


def _cube_at(center: np.ndarray, cells: int, domain: Domain, h: float) -> Cube:
    lower = np.round((center - np.asarray(domain.lower)) / h - cells / 2)
    return Cube(tuple(int(v) for v in lower), cells)


def _fits(cube: Cube, omega: Region, domain: Domain) -> bool:
    if not domain.periodic and (
        min(cube.lower_index) < 0
        or any(
            low + cube.cells >= count
            for low, count in zip(cube.lower_index, domain.shape)
        )
    ):
        return False
    return bool(np.all(omega.depth(domain, cube.node_points(domain)) > 0))


def _square_in_annulus(cube: Cube, omega: Annulus, domain: Domain) -> bool:
    """Whether the closed square of a cube lies in the open annulus (box grids)."""
    if min(cube.lower_index) < 0 or any(
        low + cube.cells >= count for low, count in zip(cube.lower_index, domain.shape)
    ):
        return False
    low = cube.lower(domain)
    high = low + cube.side(domain)
    center = np.asarray(omega.center)
    nearest = float(np.linalg.norm(np.clip(center, low, high) - center))
    farthest = float(np.linalg.norm(np.maximum(np.abs(low - center), np.abs(high - center))))
    return nearest > omega.inner and farthest < omega.outer


class _AnnulusWalk:
    """
    Greedy cover of closure(Ω₁) by cubes walking once around a planar annulus.

    Every step looks at the node of Ω₁ still below the coverage target with
    the smallest polar angle (the frontier). Among cubes that fit in Ω and
    share core with the previous cube, it takes the one that pushes the
    frontier furthest, then the one lifting the most nodes over the target.
    Candidates sweep polar angle × radius, each shrunk until it fits.
    """

    RADII = 9

    def __init__(
        self, omega: Annulus, omega1: Region, cells: int, domain: Domain, h: float
    ):
        if domain.n != 2:
            raise GeometryError(
                "Annulus chains are implemented for planar domains; "
                "spherical shells are not supported"
            )
        settings = get_settings()
        self.omega = omega
        self.cells = cells
        self.domain = domain
        self.h = h
        self.fraction = settings.cube_margin_fraction
        self.goal = max(settings.coverage_target, settings.coverage_threshold)
        self.min_overlap = settings.min_overlap_cells
        self.center = np.asarray(omega.center)
        self.inner = max(omega.inner, 0.0)
        self.radius = (self.inner + omega.outer) / 2

        offsets = domain.displacement(domain.points(), omega.center)
        self.angle = np.mod(np.arctan2(offsets[..., 1], offsets[..., 0]), 2 * np.pi)
        self.target = omega1.closure_mask(domain)
        self.coverage = np.zeros(domain.shape)
        self._fits: dict[tuple[tuple[int, ...], int], bool] = {}
        self._plateaus: dict[int, np.ndarray] = {}

    def fits(self, cube: Cube) -> bool:
        key = (cube.lower_index, cube.cells)
        if key not in self._fits:
            if self.domain.periodic:
                self._fits[key] = _fits(cube, self.omega, self.domain)
            else:
                self._fits[key] = _square_in_annulus(cube, self.omega, self.domain)
        return self._fits[key]

    def fitted(self, point: np.ndarray) -> Optional[Cube]:
        """Largest cube of at most the requested side centred at point that fits."""
        for size in range(self.cells, MIN_CUBE_CELLS - 1, -1):
            cube = _cube_at(point, size, self.domain, self.h)
            if self.fits(cube):
                return cube
        return None

    def plateau(self, cube: Cube) -> np.ndarray:
        if cube.cells not in self._plateaus:
            self._plateaus[cube.cells] = cube_plateau(cube, self.domain, self.fraction)
        return self._plateaus[cube.cells]

    def add(self, cube: Cube) -> None:
        self.coverage[np.ix_(*cube.index_arrays(self.domain))] += self.plateau(cube)

    def polar_angle(self, cube: Cube) -> float:
        middle = cube.lower(self.domain) + cube.side(self.domain) / 2
        offset = middle - self.center
        return float(np.arctan2(offset[1], offset[0]))

    def candidates(self, previous: Cube) -> Iterator[Cube]:
        start = self.polar_angle(previous)
        reach = 2 * self.cells * self.h / self.radius
        angles = np.arange(start - reach / 4, start + reach, self.h / self.radius)
        pad = (self.omega.outer - self.inner) / 20
        radii = np.linspace(self.inner + pad, self.omega.outer - pad, self.RADII)
        seen = set()
        for angle in angles:
            direction = np.array([np.cos(angle), np.sin(angle)])
            for radius in radii:
                cube = self.fitted(self.center + radius * direction)
                if cube is None or (cube.lower_index, cube.cells) in seen:
                    continue
                seen.add((cube.lower_index, cube.cells))
                overlap = previous.core_overlap_cells(cube, self.domain, self.fraction)
                if overlap >= self.min_overlap:
                    yield cube

    def score(
        self, cube: Cube, nodes: tuple[np.ndarray, ...], angles: np.ndarray
    ) -> tuple[bool, float, int]:
        """(frontier covered, frontier angle afterwards, nodes lifted) for a candidate."""
        offsets = [index - low for index, low in zip(nodes, cube.lower_index)]
        if self.domain.periodic:
            offsets = [
                np.mod(offset, count) for offset, count in zip(offsets, self.domain.shape)
            ]
        inside = np.all([(o >= 0) & (o <= cube.cells) for o in offsets], axis=0)
        lifted = self.coverage[nodes].copy()
        lifted[inside] += self.plateau(cube)[tuple(o[inside] for o in offsets)]
        covered = lifted >= self.goal
        missed = np.flatnonzero(~covered)
        frontier = float(angles[missed[0]]) if missed.size else 4 * np.pi
        return bool(covered[0]), round(frontier, 12), int(np.count_nonzero(covered))

    def walk(self, budget: int) -> tuple[Cube, ...]:
        first = self.fitted(self.center + np.array([self.radius, 0.0]))
        if first is None:
            raise GeometryError(
                f"Cube side {self.cells * self.h:.4g} is too large to fit in "
                f"{self.omega.describe()}"
            )
        cubes = [first]
        self.add(first)
        while True:
            deficit = np.flatnonzero(self.target & (self.coverage < self.goal))
            if deficit.size == 0:
                return tuple(cubes)
            if len(cubes) >= budget:
                raise GeometryError(
                    f"No annulus chain within the budget of {budget} cubes "
                    f"(cube side {self.cells * self.h:.4g}, {deficit.size} nodes "
                    f"of Ω₁ still uncovered)"
                )
            order = deficit[np.argsort(self.angle.ravel()[deficit], kind="stable")]
            nodes = np.unravel_index(order, self.domain.shape)
            angles = self.angle[nodes]

            best, best_key = None, None
            for cube in self.candidates(cubes[-1]):
                key = (*self.score(cube, nodes, angles), self.polar_angle(cube))
                if best_key is None or key > best_key:
                    best, best_key = cube, key
            if best is None or (not best_key[0] and best_key[2] == 0):
                raise GeometryError(
                    f"Annulus walk stalls after {len(cubes)} cubes at polar angle "
                    f"{float(angles[0]):.3f}"
                )
            cubes.append(best)
            self.add(best)


def _snake(counts: Sequence[int]) -> list[tuple[int, ...]]:
    """Boustrophedon order of a multi-index grid; neighbours differ by one step."""
    if not counts:
        return [()]
    inner = _snake(counts[1:])
    order = []
    for i in range(counts[0]):
        sequence = inner if i % 2 == 0 else inner[::-1]
        order.extend((i, *rest) for rest in sequence)
    return order


def _band_layouts(
    omega: Band, cells: int, domain: Domain, h: float, budget: int
) -> Iterator[tuple[Cube, ...]]:
    if not domain.periodic:
        raise GeometryError("Band chains are implemented on tori")
    axis = omega.axis
    origin = domain.lower[axis]
    first = ceil((omega.low - origin) / h + 1e-9)
    last = int(np.floor((omega.high - origin) / h - 1e-9))
    span = last - first
    if cells > span:
        raise GeometryError(
            f"Cube side {cells * h:.4g} is too large to fit in {omega.describe()}"
        )
    periodic_axes = [a for a in range(domain.n) if a != axis]
    for count_axis in periodic_axes:
        if cells + 1 > domain.shape[count_axis]:
            raise GeometryError("Cube wraps onto itself around the torus")

    candidates = []
    for rows in range(1, span - cells + 2):
        for columns in range(1, budget + 1):
            total = rows * columns ** len(periodic_axes)
            if total > budget:
                break
            candidates.append((total, rows, columns))
    candidates.sort()

    for _, rows, columns in candidates:
        if rows == 1:
            row_positions = [first + (span - cells) // 2]
        else:
            row_positions = [
                int(round(v)) for v in np.linspace(first, last - cells, rows)
            ]
        counts = [columns] * len(periodic_axes) + [rows]
        cubes = []
        for multi in _snake(counts):
            lower = [0] * domain.n
            for slot, a in enumerate(periodic_axes):
                lower[a] = int(round(multi[slot] * domain.shape[a] / columns))
            lower[axis] = row_positions[multi[-1]]
            cubes.append(Cube(tuple(lower), cells))
        yield tuple(cubes)


@logger_timer("Building cube chain")
def build_chain(
    omega1: Region, omega: Region, cube_side: float, domain: Domain
) -> CubeChain:
    """
    Cover closure(Ω₁) by an ordered chain of cubes inside Ω.

    Supported shapes are planar annuli (a greedy walk around the ring, see
    _AnnulusWalk) and torus bands (rows × periodic columns in boustrophedon
    order). The first layout passing every invariant wins.

    Args:
        omega1: Region that must be covered
        omega: Open region containing closure(Ω₁); an Annulus or a Band
        cube_side: Requested cube side (at most 1)
        domain: Grid of the fields the chain will serve

    Returns:
        A validated CubeChain

    Raises:
        GeometryError: precondition violated, cube too large to fit, or no
            layout within the cube budget
    """
    settings = get_settings()
    h = _isotropic_spacing(domain)
    _check_nested(omega1, omega, domain)

    cells = int(round(cube_side / h))
    if cells * h > 1 + 1e-12:
        raise GeometryError(f"Cube side {cells * h:.4g} exceeds 1")
    if cells < MIN_CUBE_CELLS:
        raise GeometryError(
            f"Cube side {cube_side:.4g} spans {cells} cells, need ≥ {MIN_CUBE_CELLS}"
        )

    if isinstance(omega, Annulus):
        walk = _AnnulusWalk(omega, omega1, cells, domain, h)
        layouts = iter([walk.walk(settings.cube_budget)])
        topology = "annulus"
    elif isinstance(omega, Band):
        layouts = _band_layouts(omega, cells, domain, h, settings.cube_budget)
        topology = "band"
    else:
        raise GeometryError(f"Unsupported Ω shape for a cube chain: {omega.kind}")

    last_errors: list[str] = []
    for cubes in layouts:
        if len(cubes) > settings.cube_budget:
            break
        closed = len(cubes) > 2 and (
            cubes[-1].core_overlap_cells(cubes[0], domain, settings.cube_margin_fraction)
            >= settings.min_overlap_cells
        )
        chain = CubeChain(
            domain=domain,
            omega1=omega1,
            omega=omega,
            cubes=cubes,
            closed=closed,
            margin_fraction=settings.cube_margin_fraction,
            topology=topology,
        )
        last_errors = chain.validate()
        if not last_errors:
            logger.info(
                f"📐 Cube chain: {len(cubes)} cubes of ≤ {cells} cells "
                f"({topology}, closed={closed})"
            )
            return chain

    raise GeometryError(
        f"No {topology} chain within the budget of {settings.cube_budget} cubes "
        f"(cube side {cube_side:.4g}): " + "; ".join(last_errors[:3])
    )


def fit_chain(
    omega1: Region,
    omega: Region,
    cube_side: float,
    domain: Domain,
    factors: Sequence[float] = (1.0, 0.8, 0.6),
) -> CubeChain:
    """build_chain with the cube side shrunk by each factor until one fits."""
    last_error: Optional[GeometryError] = None
    for factor in factors:
        try:
            return build_chain(omega1, omega, min(cube_side * factor, 1.0), domain)
        except GeometryError as e:
            logger.debug(f"🔁 Chain with side {cube_side * factor:.4g} failed: {e}")
            last_error = e
    assert last_error is not None
    raise last_error
