"""Domains and grid-sampled scalar and vector fields."""

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Literal, Sequence, Union

import numpy as np

from divsurgeon.errors import InvalidFieldError
from divsurgeon.validators import raise_if_errors, validate_domain

DomainKind = Literal["box", "torus"]


@dataclass(frozen=True)
class Domain:
    """
    An axis-aligned box in R^n or a flat torus with a regular grid.

    Torus nodes sit at lower + i·h for i < N (node N is node 0); box nodes
    include both faces, so a box carries N + 1 nodes per axis.
    """

    kind: DomainKind
    lower: tuple[float, ...]
    lengths: tuple[float, ...]
    resolution: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "lower", tuple(float(v) for v in self.lower))
        object.__setattr__(self, "lengths", tuple(float(v) for v in self.lengths))
        object.__setattr__(
            self, "resolution", tuple(int(v) for v in self.resolution)
        )
        raise_if_errors(
            validate_domain(self.kind, self.lower, self.lengths, self.resolution),
            "domain",
        )

    @classmethod
    def box(
        cls,
        lower: Sequence[float],
        lengths: Sequence[float],
        resolution: Union[int, Sequence[int]],
    ) -> "Domain":
        if isinstance(resolution, int):
            resolution = [resolution] * len(lengths)
        return cls("box", tuple(lower), tuple(lengths), tuple(resolution))

    @classmethod
    def torus(
        cls,
        lengths: Sequence[float],
        resolution: Union[int, Sequence[int]],
        lower: Sequence[float] | None = None,
    ) -> "Domain":
        if isinstance(resolution, int):
            resolution = [resolution] * len(lengths)
        if lower is None:
            lower = [0.0] * len(lengths)
        return cls("torus", tuple(lower), tuple(lengths), tuple(resolution))

    def with_resolution(self, resolution: Union[int, Sequence[int]]) -> "Domain":
        if isinstance(resolution, int):
            resolution = [resolution] * self.n
        return Domain(self.kind, self.lower, self.lengths, tuple(resolution))

    @property
    def n(self) -> int:
        return len(self.lengths)

    @property
    def periodic(self) -> bool:
        return self.kind == "torus"

    @property
    def upper(self) -> tuple[float, ...]:
        return tuple(lo + length for lo, length in zip(self.lower, self.lengths))

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(
            length / count for length, count in zip(self.lengths, self.resolution)
        )

    @property
    def min_spacing(self) -> float:
        return min(self.spacing)

    @property
    def max_spacing(self) -> float:
        return max(self.spacing)

    @property
    def shape(self) -> tuple[int, ...]:
        if self.periodic:
            return self.resolution
        return tuple(count + 1 for count in self.resolution)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def volume(self) -> float:
        return float(np.prod(self.lengths))

    def axes(self) -> list[np.ndarray]:
        """Node coordinates along each axis."""
        return [
            lo + np.arange(count) * h
            for lo, count, h in zip(self.lower, self.shape, self.spacing)
        ]

    def mesh(self) -> list[np.ndarray]:
        """Coordinate arrays of every node, one per axis (ij indexing)."""
        return np.meshgrid(*self.axes(), indexing="ij")

    def points(self) -> np.ndarray:
        """All node coordinates as an array of shape (*shape, n)."""
        return np.stack(self.mesh(), axis=-1)

    def weights(self) -> np.ndarray:
        """Quadrature weights: trapezoid on boxes, uniform on tori."""
        if self.periodic:
            return np.full(self.shape, self.cell_volume)
        weights = np.ones(self.shape)
        for axis, h in enumerate(self.spacing):
            line = np.full(self.shape[axis], h)
            line[0] = line[-1] = h / 2
            view = [1] * self.n
            view[axis] = -1
            weights = weights * line.reshape(view)
        return weights

    def displacement(self, points: np.ndarray, center: Sequence[float]) -> np.ndarray:
        """
        Vector from center to points, wrapped to the nearest image on a torus.

        Args:
            points: Array of shape (..., n)
            center: Reference point

        Returns:
            Array of shape (..., n)
        """
        delta = np.asarray(points, dtype=float) - np.asarray(center, dtype=float)
        if self.periodic:
            lengths = np.asarray(self.lengths)
            delta = delta - lengths * np.round(delta / lengths)
        return delta

    def axis_displacement(
        self, points: np.ndarray, axis: int, center: float
    ) -> np.ndarray:
        """Signed offset of points from center along one axis (wrapped on a torus)."""
        delta = np.asarray(points, dtype=float)[..., axis] - center
        if self.periodic:
            length = self.lengths[axis]
            delta = delta - length * np.round(delta / length)
        return delta

    def wrap(self, points: np.ndarray) -> np.ndarray:
        """Map points into [lower, lower + L) on a torus; boxes are unchanged."""
        points = np.asarray(points, dtype=float)
        if not self.periodic:
            return points
        lower = np.asarray(self.lower)
        return lower + np.mod(points - lower, np.asarray(self.lengths))

    def contains(self, points: np.ndarray, slack: float = 0.0) -> np.ndarray:
        """Whether points lie in the closed domain (always true on a torus)."""
        points = np.asarray(points, dtype=float)
        if self.periodic:
            return np.ones(points.shape[:-1], dtype=bool)
        lower = np.asarray(self.lower) - slack
        upper = np.asarray(self.upper) + slack
        return np.all((points >= lower) & (points <= upper), axis=-1)

    def nearest_node(self, point: Sequence[float]) -> tuple[int, ...]:
        """Index of the grid node closest to point."""
        point = np.asarray(point, dtype=float)
        if self.periodic:
            point = self.wrap(point)
        index = []
        for axis, (lo, h, count) in enumerate(
            zip(self.lower, self.spacing, self.shape)
        ):
            i = int(np.round((point[axis] - lo) / h))
            index.append(i % count if self.periodic else min(max(i, 0), count - 1))
        return tuple(index)

    def node(self, index: Sequence[int]) -> np.ndarray:
        return np.array(
            [lo + i * h for lo, i, h in zip(self.lower, index, self.spacing)]
        )

    def describe(self) -> str:
        dims = "×".join(str(count) for count in self.resolution)
        return f"{self.kind}[n={self.n}, lower={self.lower}, lengths={self.lengths}, {dims}]"


def _frozen_copy(values: np.ndarray) -> np.ndarray:
    array = np.array(values, dtype=np.float64, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class ScalarField:
    """A real function sampled at every node of a domain."""

    domain: Domain
    values: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        values = _frozen_copy(self.values)
        if values.shape != self.domain.shape:
            raise InvalidFieldError(
                f"Scalar field shape {values.shape} does not match domain shape "
                f"{self.domain.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise InvalidFieldError("Scalar field has non-finite samples")
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, domain: Domain) -> "ScalarField":
        return cls(domain, np.zeros(domain.shape))

    @classmethod
    def constant(cls, domain: Domain, value: float) -> "ScalarField":
        return cls(domain, np.full(domain.shape, float(value)))

    @classmethod
    def from_function(
        cls, domain: Domain, fn: Callable[..., np.ndarray]
    ) -> "ScalarField":
        """Sample fn(x0, x1, ...) on the node mesh."""
        values = np.broadcast_to(fn(*domain.mesh()), domain.shape)
        return cls(domain, values)

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))

    def _coerce(self, other: object) -> Union[np.ndarray, float]:
        if isinstance(other, ScalarField):
            if other.domain != self.domain:
                raise InvalidFieldError("Fields live on different domains")
            return other.values
        return float(other)  # type: ignore[arg-type]

    def __add__(self, other: object) -> "ScalarField":
        return ScalarField(self.domain, self.values + self._coerce(other))

    def __sub__(self, other: object) -> "ScalarField":
        return ScalarField(self.domain, self.values - self._coerce(other))

    def __mul__(self, other: object) -> "ScalarField":
        return ScalarField(self.domain, self.values * self._coerce(other))

    __rmul__ = __mul__

    def __neg__(self) -> "ScalarField":
        return ScalarField(self.domain, -self.values)


@dataclass(frozen=True, eq=False)
class VectorField:
    """An n-component field; data has shape (n, *domain.shape)."""

    domain: Domain
    data: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        data = _frozen_copy(self.data)
        expected = (self.domain.n, *self.domain.shape)
        if data.shape != expected:
            raise InvalidFieldError(
                f"Vector field shape {data.shape} does not match {expected}"
            )
        if not np.all(np.isfinite(data)):
            raise InvalidFieldError("Vector field has non-finite samples")
        object.__setattr__(self, "data", data)

    @classmethod
    def zeros(cls, domain: Domain) -> "VectorField":
        return cls(domain, np.zeros((domain.n, *domain.shape)))

    @classmethod
    def constant(cls, domain: Domain, vector: Sequence[float]) -> "VectorField":
        vector = np.asarray(vector, dtype=float)
        data = np.broadcast_to(
            vector.reshape((domain.n,) + (1,) * domain.n),
            (domain.n, *domain.shape),
        )
        return cls(domain, data)

    @classmethod
    def from_components(cls, components: Sequence[ScalarField]) -> "VectorField":
        domain = components[0].domain
        if any(c.domain != domain for c in components):
            raise InvalidFieldError("Components must share one domain")
        return cls(domain, np.stack([c.values for c in components]))

    @classmethod
    def from_function(
        cls, domain: Domain, fn: Callable[..., Sequence[np.ndarray]]
    ) -> "VectorField":
        """Sample fn(x0, x1, ...) -> (F0, F1, ...) on the node mesh."""
        parts = fn(*domain.mesh())
        data = np.stack([np.broadcast_to(p, domain.shape) for p in parts])
        return cls(domain, data)

    @classmethod
    def linear(cls, domain: Domain, matrix: np.ndarray) -> "VectorField":
        """The field x ↦ A·x."""
        matrix = np.asarray(matrix, dtype=float)
        return cls(domain, np.einsum("ij,...j->i...", matrix, domain.points()))

    @property
    def n(self) -> int:
        return self.domain.n

    @property
    def components(self) -> tuple[ScalarField, ...]:
        return tuple(ScalarField(self.domain, part) for part in self.data)

    def magnitude(self) -> np.ndarray:
        return np.sqrt(np.sum(self.data**2, axis=0))

    def sup(self) -> float:
        """Max over nodes and components of |F^i|."""
        return float(np.max(np.abs(self.data)))

    def _coerce(self, other: object) -> Union[np.ndarray, float]:
        if isinstance(other, VectorField):
            if other.domain != self.domain:
                raise InvalidFieldError("Fields live on different domains")
            return other.data
        if isinstance(other, ScalarField):
            if other.domain != self.domain:
                raise InvalidFieldError("Fields live on different domains")
            return other.values[np.newaxis]
        return float(other)  # type: ignore[arg-type]

    def __add__(self, other: object) -> "VectorField":
        return VectorField(self.domain, self.data + self._coerce(other))

    def __sub__(self, other: object) -> "VectorField":
        return VectorField(self.domain, self.data - self._coerce(other))

    def __mul__(self, other: object) -> "VectorField":
        return VectorField(self.domain, self.data * self._coerce(other))

    __rmul__ = __mul__

    def __neg__(self) -> "VectorField":
        return VectorField(self.domain, -self.data)
