"""Maps sampled on box grids: Jacobians, composition, inversion, injectivity."""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, NamedTuple, Optional

import numpy as np

from divsurgeon.config import Settings, get_settings
from divsurgeon.errors import GeometryError, InvalidFieldError, InversionError, RangeError
from divsurgeon.grid.calculus import Interpolant, jacobian
from divsurgeon.grid.domain import Domain, ScalarField, VectorField
from divsurgeon.grid.regions import Region
from divsurgeon.logger import logger, logger_timer

MAX_HALVINGS = 12
SEPARATION_FLOOR = 1 / 6


@dataclass(frozen=True, eq=False)
class DiffeoGrid:
    """
    A map sampled at the nodes of a box, read in between by multilinear
    interpolation. images[:, i] is the image of node i.
    """

    domain: Domain
    images: np.ndarray

    def __post_init__(self) -> None:
        if self.domain.periodic:
            raise GeometryError("Maps live on box domains, not tori")
        images = np.array(self.images, dtype=float, copy=True)
        expected = (self.domain.n, *self.domain.shape)
        if images.shape != expected:
            raise InvalidFieldError(
                f"Map images have shape {images.shape}, expected {expected}"
            )
        if not np.all(np.isfinite(images)):
            raise InvalidFieldError("Map images must be finite")
        images.setflags(write=False)
        object.__setattr__(self, "images", images)

    @classmethod
    def identity(cls, domain: Domain) -> "DiffeoGrid":
        return cls(domain, np.moveaxis(domain.points(), -1, 0))

    @classmethod
    def linear(cls, domain: Domain, matrix: np.ndarray) -> "DiffeoGrid":
        matrix = np.asarray(matrix, dtype=float)
        return cls(domain, np.einsum("ij,...j->i...", matrix, domain.points()))

    @classmethod
    def from_function(
        cls, domain: Domain, fn: Callable[[np.ndarray], np.ndarray]
    ) -> "DiffeoGrid":
        """fn maps points of shape (..., n) to images of shape (..., n)."""
        return cls(domain, np.moveaxis(np.asarray(fn(domain.points())), -1, 0))

    @property
    def n(self) -> int:
        return self.domain.n

    @property
    def field(self) -> VectorField:
        return VectorField(self.domain, self.images)

    def displacement(self) -> VectorField:
        """φ − Id as a vector field."""
        return VectorField(self.domain, self.images - np.moveaxis(self.domain.points(), -1, 0))

    def is_identity(self) -> bool:
        return bool(
            np.array_equal(self.images, np.moveaxis(self.domain.points(), -1, 0))
        )

    @cached_property
    def _interpolant(self) -> Interpolant:
        return Interpolant(self.domain, np.moveaxis(self.images, 0, -1), extrapolate=True)

    def __call__(self, points: np.ndarray) -> np.ndarray:
        """Images of points of shape (..., n), extended linearly past the faces."""
        return self._interpolant(np.asarray(points, dtype=float))


def jacobian_det(phi: DiffeoGrid) -> ScalarField:
    """det Dφ at every node from the finite-difference Jacobian."""
    J = np.moveaxis(jacobian(phi.field), (0, 1), (-2, -1))
    return ScalarField(phi.domain, np.linalg.det(J))


def escape_distance(domain: Domain, points: np.ndarray) -> float:
    """Largest distance from a point to the box (0 when all lie inside)."""
    points = np.reshape(np.asarray(points, dtype=float), (-1, domain.n))
    if points.size == 0:
        return 0.0
    clipped = np.clip(points, domain.lower, domain.upper)
    return float(np.max(np.linalg.norm(points - clipped, axis=-1)))


def compose(phi: DiffeoGrid, psi: DiffeoGrid) -> DiffeoGrid:
    """
    φ∘ψ on ψ's grid.

    Args:
        phi: Outer map, read by interpolation
        psi: Inner map whose images must stay on φ's grid

    Returns:
        DiffeoGrid on psi.domain

    Raises:
        RangeError: an image of ψ leaves φ's grid by more than
            settings.range_padding_cells cells
    """
    if phi.n != psi.n:
        raise GeometryError(f"Cannot compose maps of dimension {phi.n} and {psi.n}")
    if phi.domain == psi.domain and phi.is_identity():
        return psi
    points = np.moveaxis(psi.images, 0, -1)
    padding = get_settings().range_padding_cells * phi.domain.max_spacing
    escape = escape_distance(phi.domain, points)
    if escape > padding + 1e-9 * max(phi.domain.lengths):
        raise RangeError(f"ψ leaves {phi.domain.describe()}", escape=escape)
    return DiffeoGrid(psi.domain, np.moveaxis(phi(points), -1, 0))


def _newton(
    phi: DiffeoGrid,
    derivative: Interpolant,
    targets: np.ndarray,
    seeds: np.ndarray,
    settings: Settings,
) -> tuple[np.ndarray, np.ndarray]:
    """Damped Newton for φ(y) = target, one row per point."""
    n = phi.n
    y = np.array(seeds, dtype=float, copy=True)
    for _ in range(settings.newton_max_iterations):
        residual = phi(y) - targets
        error = np.linalg.norm(residual, axis=-1)
        active = error > settings.newton_tolerance
        if not np.any(active):
            break
        current, current_error = y[active], error[active]
        J = derivative(current).reshape(-1, n, n)
        try:
            step = np.linalg.solve(J, residual[active][..., np.newaxis])[..., 0]
        except np.linalg.LinAlgError:
            step = np.einsum("kij,kj->ki", np.linalg.pinv(J), residual[active])

        # Halve the step wherever it does not reduce the residual
        alpha = np.ones(current.shape[0])
        trial = current - step
        for _ in range(MAX_HALVINGS):
            trial_error = np.linalg.norm(phi(trial) - targets[active], axis=-1)
            worse = trial_error >= current_error
            if not np.any(worse):
                break
            alpha = np.where(worse, alpha / 2, alpha)
            trial = current - alpha[:, np.newaxis] * step
        y[active] = trial
    return y, np.linalg.norm(phi(y) - targets, axis=-1)


def solve_preimages(
    phi: DiffeoGrid,
    targets: np.ndarray,
    seeds: Optional[np.ndarray] = None,
    threads: Optional[int] = None,
) -> tuple[np.ndarray, np.ndarray]:
    """
    Solve φ(y) = p for every target p by damped Newton.

    Args:
        phi: Map to invert
        targets: Points of shape (..., n)
        seeds: Starting points (the targets themselves if None)
        threads: Worker threads (settings.threads if None)

    Returns:
        (preimages of shape (m, n), final residual norms of shape (m,))
    """
    settings = get_settings()
    n = phi.n
    targets = np.reshape(np.asarray(targets, dtype=float), (-1, n))
    seeds = targets if seeds is None else np.reshape(np.asarray(seeds, dtype=float), (-1, n))
    J = jacobian(phi.field)
    derivative = Interpolant(
        phi.domain,
        np.moveaxis(J.reshape(n * n, *phi.domain.shape), 0, -1),
        extrapolate=True,
    )

    workers = threads or settings.worker_count()
    chunks = np.array_split(np.arange(targets.shape[0]), max(1, workers))

    def solve(chunk: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return _newton(phi, derivative, targets[chunk], seeds[chunk], settings)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(solve, chunks))
    else:
        results = [solve(chunk) for chunk in chunks]

    preimages = np.concatenate([r[0] for r in results]) if results else targets.copy()
    residuals = np.concatenate([r[1] for r in results]) if results else np.zeros(0)
    return preimages, residuals


@logger_timer("Inverting map")
def invert(phi: DiffeoGrid) -> DiffeoGrid:
    """
    φ⁻¹ sampled on φ's grid, each node seeded at itself.

    Nodes fixed by φ come back bit for bit.

    Raises:
        InversionError: Newton left a residual above settings.inversion_residual
    """
    settings = get_settings()
    targets = phi.domain.points()
    preimages, residuals = solve_preimages(phi, targets)
    failed = np.flatnonzero(residuals > settings.inversion_residual)
    if failed.size:
        nodes = [
            tuple(int(i) for i in index)
            for index in zip(*np.unravel_index(failed, phi.domain.shape))
        ]
        raise InversionError(
            f"Newton residual above {settings.inversion_residual:g}", nodes=nodes
        )
    logger.debug(f"🔁 Inverted map, max residual {float(np.max(residuals)):.2e}")
    images = np.moveaxis(preimages.reshape(*phi.domain.shape, phi.n), -1, 0)
    return DiffeoGrid(phi.domain, images)


class InjectivityMargin(NamedTuple):
    """
    margin = ¼ − sup ‖Dg − Id‖ over the region. A positive margin makes
    Id + (g − Id) a contraction perturbation, hence injective with
    |g(y) − g(x)| ≥ ¾|y − x|; worst_ratio is the sampled minimum of that
    quotient.
    """

    margin: float
    sup_deviation: float
    worst_ratio: float
    pairs: int

    @property
    def certified(self) -> bool:
        return self.margin > 0

    @property
    def separated(self) -> bool:
        """Sampled pairs keep |g(y) − g(x)| ≥ ⅙|y − x|."""
        return self.worst_ratio >= SEPARATION_FLOOR


def injectivity_margin(
    g: DiffeoGrid,
    region: Optional[Region] = None,
    pairs: Optional[int] = None,
    seed: Optional[int] = None,
) -> InjectivityMargin:
    """
    Certify injectivity of a near-identity map on a region.

    Args:
        g: Map to certify
        region: Node set (whole grid if None)
        pairs: Random node pairs for the separation ratio (settings.separation_pairs)
        seed: RNG seed (settings.norm_seed)

    Returns:
        InjectivityMargin
    """
    settings = get_settings()
    domain = g.domain
    mask = np.ones(domain.shape, dtype=bool) if region is None else region.closure_mask(domain)
    if not np.any(mask):
        raise GeometryError("Injectivity region contains no grid nodes")

    J = np.moveaxis(jacobian(g.field), (0, 1), (-2, -1))[mask]
    deviation = float(np.max(np.linalg.norm(J - np.eye(domain.n), ord=2, axis=(-2, -1))))

    points = domain.points()[mask]
    images = np.moveaxis(g.images, 0, -1)[mask]
    rng = np.random.default_rng(settings.norm_seed if seed is None else seed)
    count = pairs or settings.separation_pairs
    first = rng.integers(0, points.shape[0], size=count)
    second = rng.integers(0, points.shape[0], size=count)
    distance = np.linalg.norm(points[second] - points[first], axis=-1)
    keep = distance > 0
    stretch = np.linalg.norm(images[second] - images[first], axis=-1)
    worst = float(np.min(stretch[keep] / distance[keep], initial=np.inf))
    if not np.isfinite(worst):
        worst = 1.0
    return InjectivityMargin(0.25 - deviation, deviation, worst, int(np.count_nonzero(keep)))
