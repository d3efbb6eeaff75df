"""Compactly supported solutions of div v = h on a single cube."""

from typing import Optional

import numpy as np

from divsurgeon.config import get_settings
from divsurgeon.cutoffs import unit_mass_window
from divsurgeon.errors import GeometryError, MarginError, MeanViolationError
from divsurgeon.grid.calculus import class_imbalance, parity_classes
from divsurgeon.grid.domain import Domain, ScalarField, VectorField


def _boundary_distance(shape: tuple[int, ...], dx: float) -> np.ndarray:
    """Distance of every node of a cube patch to the cube's boundary."""
    distance = np.full(shape, np.inf)
    for axis, count in enumerate(shape):
        offsets = np.arange(count)
        line = np.minimum(offsets, count - 1 - offsets) * dx
        expand = [1] * len(shape)
        expand[axis] = count
        distance = np.minimum(distance, line.reshape(expand))
    return distance


def centered_antiderivative(values: np.ndarray, dx: float) -> np.ndarray:
    """
    Cumulative integral along the last axis that the centered difference undoes.

    v[k + 1] = v[k − 1] + 2·dx·g[k] starting from zeros before the first node:
    odd nodes accumulate the even samples and even nodes the odd ones, each a
    midpoint rule with step 2·dx. v ends at zero iff g sums to zero over the
    even and over the odd nodes.
    """
    values = np.asarray(values, dtype=float)
    count = values.shape[-1]
    result = np.zeros_like(values)
    result[..., 1::2] = 2 * dx * np.cumsum(values[..., 0::2], axis=-1)[
        ..., : len(range(1, count, 2))
    ]
    result[..., 2::2] = 2 * dx * np.cumsum(values[..., 1::2], axis=-1)[
        ..., : len(range(2, count, 2))
    ]
    return result


def _solve(values: np.ndarray, rho: float, dx: float) -> np.ndarray:
    """Recursive construction on [0, ρ]^n; returns shape (n, *values.shape)."""
    if values.ndim == 1:
        return centered_antiderivative(values, dx)[np.newaxis]

    cells = values.shape[-1] - 1
    window = unit_mass_window(rho, cells).class_samples()
    parity = np.arange(cells + 1) % 2
    # Column sums per parity of the last index; each is balanced one dimension down
    columns = np.stack([values[..., p::2].sum(axis=-1) for p in (0, 1)])
    lower = np.stack([_solve(column, rho, dx) for column in columns])

    result = np.empty((values.ndim, *values.shape))
    result[:-1] = np.moveaxis(lower[parity], 0, -1) * window
    result[-1] = centered_antiderivative(
        values - np.moveaxis(columns[parity], 0, -1) * window, dx
    )
    return result


def _core_weight(shape: tuple[int, ...], rho: float) -> np.ndarray:
    """Product of unit-mass windows, the carrier of per-cube class balancing."""
    line = unit_mass_window(rho, shape[0] - 1).samples()
    weight = line
    for _ in range(len(shape) - 1):
        weight = np.multiply.outer(weight, line)
    return weight


def solve_cube_array(
    values: np.ndarray, rho: float, margin: float, scale: Optional[float] = None
) -> np.ndarray:
    """
    Array form of solve_div_cube, used by the chain operator.

    Args:
        values: Node samples of h on the (cells + 1)^n patch of a cube of side ρ
        rho: Cube side
        margin: Distance from ∂Q inside which h vanishes
        scale: Size of the datum the mean tolerance is relative to (defaults
            to the patch's own sup; the chain passes the sup of the whole datum)

    Returns:
        Array of shape (n, *values.shape) holding v
    """
    settings = get_settings()
    values = np.asarray(values, dtype=float)
    cells = values.shape[0] - 1
    dx = rho / cells

    local = float(np.max(np.abs(values))) if values.size else 0.0
    if local == 0.0:
        return np.zeros((values.ndim, *values.shape))
    scale = local if scale is None else max(scale, local)

    distance = _boundary_distance(values.shape, dx)
    near = distance < margin * (1 - 1e-9)
    if np.any(values[near] != 0.0):
        raise MarginError(
            f"Data is nonzero within {margin:.4g} of the cube boundary "
            f"(max |h| there {float(np.max(np.abs(values[near]))):.3g})"
        )

    mean = _total(values, dx)
    if abs(mean) > settings.mean_tolerance * scale * rho**values.ndim:
        raise MeanViolationError(
            f"Cube data has mean {mean:.3e}, above tolerance", measured=mean
        )

    balanced = values - class_imbalance(
        values, parity_classes(values.shape), _core_weight(values.shape, rho)
    )
    result = _solve(balanced, rho, dx)
    band = min(margin, rho / 4) / 2
    result[:, distance <= band * (1 + 1e-9)] = 0.0
    return result


def _total(values: np.ndarray, dx: float) -> float:
    total = values
    for _ in range(values.ndim):
        total = np.trapezoid(total, dx=dx, axis=-1)
    return float(total)


def solve_div_cube(h: ScalarField, margin: float) -> VectorField:
    """
    Solve div v = h on a cube with v vanishing near the boundary.

    The construction sums out the last coordinate per node parity, solves one
    dimension lower for the column sums, and spreads them back with a
    unit-mass window; the last component is a centered antiderivative. The
    centered divergence of v reproduces h exactly once h sums to zero over
    every node parity class. The part of h that does not is moved onto a
    smooth core window first, so the residual is that class imbalance alone
    (of the order of the sampling error of ∫h, tiny for smooth data).

    Args:
        h: Samples on a box domain whose axes all have the same length and
            resolution
        margin: Distance from ∂Q inside which h must vanish

    Returns:
        VectorField v on the same domain, exactly 0 at nodes within
        min(margin, side/4)/2 of ∂Q

    Raises:
        GeometryError: h does not live on a cube
        MarginError: h is nonzero within margin of ∂Q
        MeanViolationError: ∫h is not 0 within tolerance
    """
    domain: Domain = h.domain
    if domain.periodic:
        raise GeometryError("solve_div_cube needs a box domain")
    side = domain.lengths[0]
    if any(abs(length - side) > 1e-12 * side for length in domain.lengths) or len(
        set(domain.resolution)
    ) != 1:
        raise GeometryError(f"Domain {domain.describe()} is not a uniformly gridded cube")
    return VectorField(domain, solve_cube_array(h.values, side, margin))
