"""Discrete calculus on grid fields.

Derivatives are 2nd-order centered differences: periodic wrap on tori,
one-sided 2nd-order stencils at box faces.
"""

from functools import lru_cache
from itertools import combinations_with_replacement
from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy import ndimage
from scipy.interpolate import RegularGridInterpolator

from divsurgeon.errors import InvalidFieldError, OutOfDomainError, UnderResolvedError
from divsurgeon.grid.domain import Domain, ScalarField, VectorField
from divsurgeon.grid.regions import Region
from divsurgeon.logger import logger


class Integral(NamedTuple):
    """Result of a node-weighted quadrature."""

    value: float
    nodes: int  # nodes that contributed
    empty: bool


def partial(values: np.ndarray, domain: Domain, axis: int) -> np.ndarray:
    """
    First derivative of node samples along one axis.

    Args:
        values: Array with the domain's node shape
        domain: Domain the samples live on
        axis: Differentiation axis

    Returns:
        Array of the same shape
    """
    h = domain.spacing[axis]
    if domain.periodic:
        return (np.roll(values, -1, axis=axis) - np.roll(values, 1, axis=axis)) / (
            2 * h
        )
    return np.gradient(values, h, axis=axis, edge_order=2)


def mixed_partials(
    values: np.ndarray, domain: Domain, order: int
) -> dict[tuple[int, ...], np.ndarray]:
    """All mixed partials of exactly the given total order, keyed by axes."""
    if order == 0:
        return {(): np.asarray(values)}
    result: dict[tuple[int, ...], np.ndarray] = {}
    lower = mixed_partials(values, domain, order - 1)
    for axes in combinations_with_replacement(range(domain.n), order):
        result[axes] = partial(lower[axes[:-1]], domain, axes[-1])
    return result


def divergence(field: VectorField) -> ScalarField:
    """Centered 2nd-order divergence of a vector field."""
    if not np.all(np.isfinite(field.data)):
        raise InvalidFieldError("Cannot differentiate a field with non-finite samples")
    total = np.zeros(field.domain.shape)
    for axis in range(field.n):
        total = total + partial(field.data[axis], field.domain, axis)
    return ScalarField(field.domain, total)


def gradient(f: ScalarField) -> VectorField:
    return VectorField(
        f.domain,
        np.stack([partial(f.values, f.domain, axis) for axis in range(f.domain.n)]),
    )


def jacobian(field: VectorField) -> np.ndarray:
    """Finite-difference Jacobian, shape (n, n, *shape) with [i, j] = ∂_j F^i."""
    return np.stack([
        np.stack([
            partial(field.data[i], field.domain, j) for j in range(field.n)
        ])
        for i in range(field.n)
    ])


def parity_classes(shape: tuple[int, ...], periodic: bool = False) -> np.ndarray:
    """
    Label each node by the parities of its indices.

    A centered difference maps every class onto one other class, so the
    divergence of a field that vanishes near the faces (or of any periodic
    field) sums to zero over each class. A periodic axis with an odd node
    count joins both parities into one class.

    Returns:
        Integer labels 0..2^k − 1 with k the number of axes that split
    """
    labels = np.zeros(shape, dtype=np.intp)
    for axis, count in enumerate(shape):
        if periodic and count % 2:
            continue
        view = [1] * len(shape)
        view[axis] = count
        labels = labels * 2 + (np.arange(count) % 2).reshape(view)
    return labels


def class_totals(values: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Plain node sums of values over each parity class."""
    return np.bincount(
        labels.ravel(), weights=np.ravel(values), minlength=int(labels.max()) + 1
    )


def class_imbalance(
    values: np.ndarray, labels: np.ndarray, weight: np.ndarray
) -> np.ndarray:
    """
    The multiple of weight, rescaled per class, carrying every class sum of values.

    values minus the result sums to zero over each parity class, which is
    what a centered divergence can reach.

    Raises:
        UnderResolvedError: weight vanishes on a class where values does not
    """
    totals = class_totals(values, labels)
    masses = class_totals(weight, labels)
    empty = masses <= 0
    if np.any(empty & (totals != 0)):
        raise UnderResolvedError("Balancing weight misses a node parity class")
    scale = np.where(empty, 0.0, totals / np.where(empty, 1.0, masses))
    return weight * scale[labels]


def rotated_gradient(stream: ScalarField) -> VectorField:
    """
    Planar field (∂_y ψ, −∂_x ψ) of a stream function ψ.

    Its discrete divergence vanishes up to roundoff because the difference
    operators along different axes commute.
    """
    if stream.domain.n != 2:
        raise InvalidFieldError("rotated_gradient needs a planar domain")
    d = stream.domain
    return VectorField(
        d,
        np.stack([partial(stream.values, d, 1), -partial(stream.values, d, 0)]),
    )


def curl(potential: VectorField) -> VectorField:
    """Discrete curl of a vector potential in three dimensions."""
    if potential.n != 3:
        raise InvalidFieldError("curl needs a three-dimensional domain")
    d = potential.domain
    a = potential.data
    return VectorField(
        d,
        np.stack([
            partial(a[2], d, 1) - partial(a[1], d, 2),
            partial(a[0], d, 2) - partial(a[2], d, 0),
            partial(a[1], d, 0) - partial(a[0], d, 1),
        ]),
    )


def integrate_values(
    values: np.ndarray, domain: Domain, mask: Optional[np.ndarray] = None
) -> Integral:
    """Quadrature of raw node samples, optionally restricted to a node mask."""
    weights = domain.weights()
    if mask is None:
        return Integral(float(np.sum(weights * values)), int(values.size), False)
    nodes = int(np.count_nonzero(mask))
    if nodes == 0:
        return Integral(0.0, 0, True)
    return Integral(float(np.sum(weights[mask] * values[mask])), nodes, False)


def integrate(f: ScalarField, region: Optional[Region] = None) -> Integral:
    """
    Node-weighted quadrature of f over a region.

    Trapezoid weights on boxes, uniform cell weights on tori.

    Args:
        f: Field to integrate
        region: Restrict to nodes inside this region (whole domain if None)

    Returns:
        Integral with the value, contributing node count and an empty flag
    """
    mask = None if region is None else region.mask(f.domain)
    result = integrate_values(f.values, f.domain, mask)
    if result.empty:
        logger.warning("⚠️ Integration region contains no grid nodes")
    return result


class Interpolant:
    """Multilinear interpolation of node samples, exact at nodes."""

    def __init__(self, domain: Domain, values: np.ndarray, extrapolate: bool = False):
        """
        Args:
            domain: Domain of the samples
            values: Array of shape domain.shape or (*domain.shape, m)
            extrapolate: Extend a box linearly past its faces instead of
                rejecting outside points
        """
        self.domain = domain
        self.extrapolate = extrapolate and not domain.periodic
        axes = domain.axes()
        values = np.asarray(values, dtype=float)
        if domain.periodic:
            # Close every axis with a copy of node 0 at lower + L
            axes = [
                np.append(axis, lo + length)
                for axis, lo, length in zip(axes, domain.lower, domain.lengths)
            ]
            pad = [(0, 1)] * domain.n + [(0, 0)] * (values.ndim - domain.n)
            values = np.pad(values, pad, mode="wrap")
        self._low = np.array([axis[0] for axis in axes])
        self._high = np.array([axis[-1] for axis in axes])
        self._value_shape = values.shape[domain.n:]
        self._interpolator = RegularGridInterpolator(
            tuple(axes), values, method="linear", bounds_error=False, fill_value=None
        )

    def __call__(self, points: np.ndarray) -> np.ndarray:
        """Values at points of shape (..., n); the result has shape (..., *value shape)."""
        points = np.asarray(points, dtype=float)
        lead = points.shape[:-1]
        points = np.reshape(points, (-1, self.domain.n))
        if self.domain.periodic:
            points = self.domain.wrap(points)
        elif not self.extrapolate:
            slack = 1e-9 * max(self.domain.lengths)
            inside = self.domain.contains(points, slack=slack)
            if not np.all(inside):
                worst = points[~inside][0]
                raise OutOfDomainError(
                    f"Point {worst.tolist()} lies outside {self.domain.describe()}"
                )
        if not self.extrapolate:
            points = np.clip(points, self._low, self._high)
        return np.reshape(self._interpolator(points), lead + self._value_shape)


def interpolate(field: VectorField, points: Sequence[float] | np.ndarray) -> np.ndarray:
    """
    Interpolate a vector field at one point or an array of points.

    Args:
        field: Field to sample
        points: Shape (n,) or (..., n)

    Returns:
        Vector(s) of shape (n,) or (..., n)
    """
    values = np.moveaxis(field.data, 0, -1)
    return Interpolant(field.domain, values)(np.asarray(points, dtype=float))


def interpolate_scalar(
    f: ScalarField, points: Sequence[float] | np.ndarray
) -> np.ndarray:
    return Interpolant(f.domain, f.values)(np.asarray(points, dtype=float))


@lru_cache(maxsize=32)
def _bump_kernel(spacing: tuple[float, ...], width: float) -> np.ndarray:
    offsets = [
        np.arange(-int(np.floor(width / h)), int(np.floor(width / h)) + 1) * h / width
        for h in spacing
    ]
    radius2 = sum(o**2 for o in np.meshgrid(*offsets, indexing="ij"))
    kernel = np.zeros_like(radius2)
    inside = radius2 < 1
    kernel[inside] = np.exp(-1.0 / (1.0 - radius2[inside]))
    kernel /= kernel.sum()
    kernel.setflags(write=False)
    return kernel


def mollifier_kernel(domain: Domain, width: float) -> np.ndarray:
    """Normalized C^∞ bump kernel of support radius width on the grid."""
    h = domain.max_spacing
    if width < 2 * h * (1 - 1e-12):
        required = int(np.ceil(2 * max(domain.lengths) / width))
        raise UnderResolvedError(
            f"Mollifier width {width:.4g} is below two grid spacings ({2 * h:.4g})",
            required_resolution=required,
        )
    return _bump_kernel(domain.spacing, float(width))


def _convolve(values: np.ndarray, domain: Domain, kernel: np.ndarray) -> np.ndarray:
    if domain.periodic:
        return ndimage.convolve(values, kernel, mode="wrap")
    numerator = ndimage.convolve(values, kernel, mode="constant", cval=0.0)
    mass = ndimage.convolve(np.ones(domain.shape), kernel, mode="constant", cval=0.0)
    return numerator / mass


def mollify(f: ScalarField, width: float) -> ScalarField:
    """
    Convolve with a compactly supported C^∞ kernel of radius width.

    Circular on tori; on boxes the kernel mass is renormalized near faces.
    """
    kernel = mollifier_kernel(f.domain, width)
    return ScalarField(f.domain, _convolve(f.values, f.domain, kernel))


def mollify_field(field: VectorField, width: float) -> VectorField:
    kernel = mollifier_kernel(field.domain, width)
    return VectorField(
        field.domain,
        np.stack([_convolve(part, field.domain, kernel) for part in field.data]),
    )


def label_components(mask: np.ndarray, domain: Domain) -> tuple[np.ndarray, int]:
    """
    Label face-connected components of a node mask.

    Components touching opposite faces of a torus are merged.

    Returns:
        (labels, count) with labels 1..count and 0 off the mask
    """
    labels, count = ndimage.label(mask)
    if not domain.periodic or count <= 1:
        return labels, int(count)

    parent = list(range(count + 1))

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for axis in range(domain.n):
        first = np.take(labels, 0, axis=axis)
        last = np.take(labels, -1, axis=axis)
        both = (first > 0) & (last > 0)
        for a, b in set(zip(first[both].tolist(), last[both].tolist())):
            root_a, root_b = find(a), find(b)
            if root_a != root_b:
                parent[max(root_a, root_b)] = min(root_a, root_b)

    roots = sorted({find(a) for a in range(1, count + 1)})
    relabel = np.zeros(count + 1, dtype=labels.dtype)
    for a in range(1, count + 1):
        relabel[a] = roots.index(find(a)) + 1
    return relabel[labels], len(roots)
