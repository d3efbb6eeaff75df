"""Regions described by signed distance-like depth functions.

Every region reports a depth at arbitrary points: positive inside, negative
outside, and equal to the Euclidean distance to the boundary for balls,
annuli and bands. Distances are measured through the nearest periodic image
on a torus.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import ClassVar, Sequence

import numpy as np

from divsurgeon.grid.domain import Domain
from divsurgeon.validators import ValidationError


class Region(ABC):
    """Abstract base class for regions."""

    kind: ClassVar[str]

    @abstractmethod
    def depth(self, domain: Domain, points: np.ndarray) -> np.ndarray:
        """Signed distance-like depth of points (shape (..., n) -> (...))."""

    @abstractmethod
    def grown(self, amount: float) -> "Region":
        """The region pushed outward by amount (inward when negative)."""

    @abstractmethod
    def describe(self) -> str:
        pass

    def contains(self, domain: Domain, points: np.ndarray) -> np.ndarray:
        return self.depth(domain, points) > 0

    def node_depth(self, domain: Domain) -> np.ndarray:
        return self.depth(domain, domain.points())

    def mask(self, domain: Domain) -> np.ndarray:
        """Boolean mask of the grid nodes inside the open region."""
        return self.node_depth(domain) > 0

    def closure_mask(self, domain: Domain) -> np.ndarray:
        return self.node_depth(domain) >= 0


@dataclass(frozen=True)
class Ball(Region):
    center: tuple[float, ...]
    radius: float
    kind: ClassVar[str] = "ball"

    def __post_init__(self) -> None:
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    def depth(self, domain: Domain, points: np.ndarray) -> np.ndarray:
        delta = domain.displacement(points, self.center)
        return self.radius - np.linalg.norm(delta, axis=-1)

    def grown(self, amount: float) -> "Ball":
        return Ball(self.center, self.radius + amount)

    def describe(self) -> str:
        return f"ball(center={self.center}, radius={self.radius:g})"


@dataclass(frozen=True)
class Annulus(Region):
    center: tuple[float, ...]
    inner: float
    outer: float
    kind: ClassVar[str] = "annulus"

    def __post_init__(self) -> None:
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if not self.inner < self.outer:
            raise ValidationError(
                f"Annulus needs inner < outer, got {self.inner} ≥ {self.outer}"
            )

    def depth(self, domain: Domain, points: np.ndarray) -> np.ndarray:
        radius = np.linalg.norm(domain.displacement(points, self.center), axis=-1)
        return np.minimum(radius - self.inner, self.outer - radius)

    def grown(self, amount: float) -> "Annulus":
        return Annulus(self.center, self.inner - amount, self.outer + amount)

    def describe(self) -> str:
        return (
            f"annulus(center={self.center}, inner={self.inner:g}, "
            f"outer={self.outer:g})"
        )


@dataclass(frozen=True)
class Band(Region):
    """Slab {|x_axis − center| < width/2}; on a torus it wraps around."""

    axis: int
    center: float
    width: float
    kind: ClassVar[str] = "band"

    def __post_init__(self) -> None:
        if self.width <= 0:
            raise ValidationError(f"Band width must be positive, got {self.width}")

    @property
    def low(self) -> float:
        return self.center - self.width / 2

    @property
    def high(self) -> float:
        return self.center + self.width / 2

    def depth(self, domain: Domain, points: np.ndarray) -> np.ndarray:
        offset = domain.axis_displacement(points, self.axis, self.center)
        return self.width / 2 - np.abs(offset)

    def grown(self, amount: float) -> "Band":
        return Band(self.axis, self.center, self.width + 2 * amount)

    def complement_band(self, domain: Domain) -> "Band":
        """On a torus, the band filling the rest of the circle along axis."""
        length = domain.lengths[self.axis]
        return Band(self.axis, self.center + length / 2, length - self.width)

    def describe(self) -> str:
        return f"band(axis={self.axis}, center={self.center:g}, width={self.width:g})"


@dataclass(frozen=True)
class Box(Region):
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    kind: ClassVar[str] = "box"

    def __post_init__(self) -> None:
        object.__setattr__(self, "lower", tuple(float(c) for c in self.lower))
        object.__setattr__(self, "upper", tuple(float(c) for c in self.upper))
        if any(lo >= hi for lo, hi in zip(self.lower, self.upper)):
            raise ValidationError(f"Box needs lower < upper, got {self}")

    def depth(self, domain: Domain, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        center = (np.asarray(self.lower) + np.asarray(self.upper)) / 2
        half = (np.asarray(self.upper) - np.asarray(self.lower)) / 2
        offset = np.abs(domain.displacement(points, center))
        return np.min(half - offset, axis=-1)

    def grown(self, amount: float) -> "Box":
        return Box(
            tuple(lo - amount for lo in self.lower),
            tuple(hi + amount for hi in self.upper),
        )

    def describe(self) -> str:
        return f"box(lower={self.lower}, upper={self.upper})"


@dataclass(frozen=True)
class Complement(Region):
    region: Region
    kind: ClassVar[str] = "complement"

    def depth(self, domain: Domain, points: np.ndarray) -> np.ndarray:
        return -self.region.depth(domain, points)

    def grown(self, amount: float) -> "Complement":
        return Complement(self.region.grown(-amount))

    def describe(self) -> str:
        return f"complement({self.region.describe()})"


@dataclass(frozen=True)
class UnionOf(Region):
    regions: tuple[Region, ...]
    kind: ClassVar[str] = "union"

    def __post_init__(self) -> None:
        object.__setattr__(self, "regions", tuple(self.regions))

    def depth(self, domain: Domain, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        if not self.regions:
            return np.full(points.shape[:-1], -np.inf)
        return np.max([r.depth(domain, points) for r in self.regions], axis=0)

    def grown(self, amount: float) -> "UnionOf":
        return UnionOf(tuple(r.grown(amount) for r in self.regions))

    def describe(self) -> str:
        return "union(" + ", ".join(r.describe() for r in self.regions) + ")"


def whole() -> Region:
    """The entire domain."""
    return Complement(UnionOf(()))


def is_whole(region: Region) -> bool:
    return (
        isinstance(region, Complement)
        and isinstance(region.region, UnionOf)
        and not region.region.regions
    )


def intersection(*regions: Region) -> Region:
    """Intersection expressed through complements and a union."""
    return Complement(UnionOf(tuple(Complement(r) for r in regions)))


def shell(inner: Region, outer: Region) -> Region:
    """Points of outer that are not in the closure of inner."""
    return intersection(outer, Complement(inner))


def regions_equal_center(a: Sequence[float], b: Sequence[float]) -> bool:
    return bool(np.allclose(np.asarray(a), np.asarray(b), atol=1e-12))
