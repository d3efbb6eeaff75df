"""Closed hypersurfaces and flux quadrature across them."""

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Optional

import numpy as np

from divsurgeon.config import get_settings
from divsurgeon.errors import GeometryError, OutOfDomainError
from divsurgeon.grid.calculus import interpolate
from divsurgeon.grid.domain import Domain, VectorField


class Hypersurface(ABC):
    """A closed hypersurface with a unit normal field."""

    @abstractmethod
    def samples(
        self, domain: Domain, count: int
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Quadrature points, unit normals and weights (count per dimension)."""

    @abstractmethod
    def describe(self) -> str:
        pass


@dataclass(frozen=True)
class Circle(Hypersurface):
    """Planar circle with outward radial normal."""

    center: tuple[float, ...]
    radius: float

    def samples(
        self, domain: Domain, count: int
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        if domain.n != 2:
            raise GeometryError("Circles live in planar domains")
        angles = 2 * np.pi * np.arange(count) / count
        normals = np.stack([np.cos(angles), np.sin(angles)], axis=-1)
        points = np.asarray(self.center) + self.radius * normals
        weights = np.full(count, 2 * np.pi * self.radius / count)
        return points, normals, weights

    def describe(self) -> str:
        return f"circle(center={self.center}, radius={self.radius:g})"


@dataclass(frozen=True)
class Sphere(Hypersurface):
    """Round 2-sphere in three dimensions with outward normal."""

    center: tuple[float, ...]
    radius: float

    def samples(
        self, domain: Domain, count: int
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        if domain.n != 3:
            raise GeometryError("Spheres live in three-dimensional domains")
        # Gauss–Legendre in cos(polar angle), uniform in azimuth
        nodes, node_weights = np.polynomial.legendre.leggauss(count)
        azimuth = 2 * np.pi * np.arange(count) / count
        cos_polar, phi = np.meshgrid(nodes, azimuth, indexing="ij")
        sin_polar = np.sqrt(1 - cos_polar**2)
        normals = np.stack(
            [sin_polar * np.cos(phi), sin_polar * np.sin(phi), cos_polar], axis=-1
        ).reshape(-1, 3)
        points = np.asarray(self.center) + self.radius * normals
        weights = (
            np.repeat(node_weights, count) * (2 * np.pi / count) * self.radius**2
        )
        return points, normals, weights

    def describe(self) -> str:
        return f"sphere(center={self.center}, radius={self.radius:g})"


@dataclass(frozen=True)
class Slice(Hypersurface):
    """Coordinate slice {x_axis = position} of a torus with normal +e_axis."""

    axis: int
    position: float

    def samples(
        self, domain: Domain, count: int
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        if not domain.periodic:
            raise GeometryError("Slices are closed hypersurfaces only on a torus")
        others = [a for a in range(domain.n) if a != self.axis]
        grids = [
            domain.lower[a] + domain.lengths[a] * np.arange(count) / count
            for a in others
        ]
        mesh = np.meshgrid(*grids, indexing="ij")
        points = np.zeros((count ** len(others), domain.n))
        for slot, a in enumerate(others):
            points[:, a] = mesh[slot].reshape(-1)
        points[:, self.axis] = self.position
        normals = np.zeros_like(points)
        normals[:, self.axis] = 1.0
        area = float(np.prod([domain.lengths[a] for a in others]))
        weights = np.full(points.shape[0], area / points.shape[0])
        return points, normals, weights

    def describe(self) -> str:
        return f"slice(axis={self.axis}, position={self.position:g})"


def flux(
    field: VectorField, surface: Hypersurface, samples: Optional[int] = None
) -> float:
    """
    Flux ∫_γ F·n of a field across a closed hypersurface.

    Args:
        field: Vector field, interpolated multilinearly along γ
        surface: Circle, Sphere or torus Slice
        samples: Quadrature points per dimension of γ (settings.flux_samples)

    Returns:
        The flux with respect to the surface's normal

    Raises:
        GeometryError: γ leaves a box domain
    """
    count = samples or get_settings().flux_samples
    domain = field.domain
    points, normals, weights = surface.samples(domain, count)
    if not domain.periodic and not np.all(domain.contains(points)):
        raise GeometryError(f"{surface.describe()} leaves {domain.describe()}")
    try:
        values = interpolate(field, points)
    except OutOfDomainError as e:
        raise GeometryError(str(e)) from e
    return float(np.sum(weights * np.sum(values * normals, axis=-1)))
